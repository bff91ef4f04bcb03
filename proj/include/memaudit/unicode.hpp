#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace memaudit::unicode {

/// Decodes UTF-8 into code points. Invalid byte sequences decode to U+FFFD,
/// one replacement per rejected byte.
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(const std::vector<char32_t>& cps);

/// Appends one code point to `out`.
void encode_utf8(char32_t cp, std::string& out);

/// Canonical composition (NFC). Hangul is handled algorithmically, everything
/// else through the generated tables in src/unicode_tables.cpp.
std::string nfc(std::string_view text);

std::uint8_t combining_class(char32_t cp);

bool is_space(char32_t cp);

/// Maps code-point positions of a UTF-8 string onto byte offsets so spans
/// counted in characters can be sliced without re-scanning. Assumes
/// well-formed UTF-8 (corpus text is NFC-normalized on ingestion).
class CodepointIndex {
public:
    explicit CodepointIndex(std::string_view text);

    std::size_t size() const { return byte_offsets_.size() - 1; }

    /// Byte offset of code point `i`; `i == size()` yields the end offset.
    std::size_t byte_at(std::size_t i) const { return byte_offsets_[i]; }

    /// Substring covering code points [first, last).
    std::string_view slice(std::size_t first, std::size_t last) const;

private:
    std::string_view text_;
    std::vector<std::size_t> byte_offsets_;
};

}  // namespace memaudit::unicode
