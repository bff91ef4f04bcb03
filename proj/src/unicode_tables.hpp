// Table layout shared between the generated data and the NFC normalizer.
#pragma once

#include <cstddef>
#include <cstdint>

namespace memaudit::unicode_tables {

struct CccEntry {
    char32_t cp;
    std::uint8_t ccc;
};

struct DecompEntry {
    char32_t cp;
    std::uint32_t pool_offset;
    std::uint16_t length;
};

struct ComposeEntry {
    std::uint64_t key;  // (starter << 32) | combining
    char32_t composed;
};

extern const CccEntry kCcc[];
extern const std::size_t kCccCount;
extern const char32_t kDecompPool[];
extern const DecompEntry kDecomp[];
extern const std::size_t kDecompCount;
extern const ComposeEntry kCompose[];
extern const std::size_t kComposeCount;

}  // namespace memaudit::unicode_tables
