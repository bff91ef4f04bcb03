#include "memaudit/unicode.hpp"

#include <algorithm>

#include "unicode_tables.hpp"

namespace memaudit::unicode {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Hangul syllable composition constants (UAX #15 section 3.12).
constexpr char32_t kSBase = 0xAC00;
constexpr char32_t kLBase = 0x1100;
constexpr char32_t kVBase = 0x1161;
constexpr char32_t kTBase = 0x11A7;
constexpr int kLCount = 19;
constexpr int kVCount = 21;
constexpr int kTCount = 28;
constexpr int kNCount = kVCount * kTCount;
constexpr int kSCount = kLCount * kNCount;

const unicode_tables::DecompEntry* find_decomp(char32_t cp) {
    using unicode_tables::kDecomp;
    using unicode_tables::kDecompCount;
    const auto* end = kDecomp + kDecompCount;
    const auto* it = std::lower_bound(kDecomp, end, cp,
                                      [](const unicode_tables::DecompEntry& e, char32_t c) { return e.cp < c; });
    if (it != end && it->cp == cp) return it;
    return nullptr;
}

char32_t find_composite(char32_t starter, char32_t combining) {
    // Hangul first: L+V and LV+T compose algorithmically.
    if (starter >= kLBase && starter < kLBase + kLCount && combining >= kVBase &&
        combining < kVBase + kVCount) {
        int l = static_cast<int>(starter - kLBase);
        int v = static_cast<int>(combining - kVBase);
        return kSBase + static_cast<char32_t>((l * kVCount + v) * kTCount);
    }
    if (starter >= kSBase && starter < kSBase + kSCount &&
        (starter - kSBase) % kTCount == 0 && combining > kTBase &&
        combining < kTBase + kTCount) {
        return starter + (combining - kTBase);
    }
    using unicode_tables::kCompose;
    using unicode_tables::kComposeCount;
    const std::uint64_t key = (static_cast<std::uint64_t>(starter) << 32) | combining;
    const auto* end = kCompose + kComposeCount;
    const auto* it = std::lower_bound(kCompose, end, key,
                                      [](const unicode_tables::ComposeEntry& e, std::uint64_t k) { return e.key < k; });
    if (it != end && it->key == key) return it->composed;
    return 0;
}

void decompose_into(char32_t cp, std::vector<char32_t>& out) {
    if (cp >= kSBase && cp < kSBase + kSCount) {
        int s = static_cast<int>(cp - kSBase);
        out.push_back(kLBase + static_cast<char32_t>(s / kNCount));
        out.push_back(kVBase + static_cast<char32_t>((s % kNCount) / kTCount));
        int t = s % kTCount;
        if (t != 0) out.push_back(kTBase + static_cast<char32_t>(t));
        return;
    }
    if (const auto* e = find_decomp(cp)) {
        for (std::uint16_t i = 0; i < e->length; ++i) {
            out.push_back(unicode_tables::kDecompPool[e->pool_offset + i]);
        }
        return;
    }
    out.push_back(cp);
}

}  // namespace

std::uint8_t combining_class(char32_t cp) {
    using unicode_tables::kCcc;
    using unicode_tables::kCccCount;
    const auto* end = kCcc + kCccCount;
    const auto* it = std::lower_bound(kCcc, end, cp,
                                      [](const unicode_tables::CccEntry& e, char32_t c) { return e.cp < c; });
    if (it != end && it->cp == cp) return it->ccc;
    return 0;
}

std::vector<char32_t> decode_utf8(std::string_view text) {
    std::vector<char32_t> out;
    out.reserve(text.size());
    std::size_t i = 0;
    const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
    while (i < text.size()) {
        unsigned char b = bytes[i];
        if (b < 0x80) {
            out.push_back(b);
            ++i;
            continue;
        }
        int len = 0;
        char32_t cp = 0;
        if ((b & 0xE0) == 0xC0) {
            len = 2;
            cp = b & 0x1F;
        } else if ((b & 0xF0) == 0xE0) {
            len = 3;
            cp = b & 0x0F;
        } else if ((b & 0xF8) == 0xF0) {
            len = 4;
            cp = b & 0x07;
        } else {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        if (i + static_cast<std::size_t>(len) > text.size()) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        bool ok = true;
        char32_t acc = cp;
        for (int k = 1; k < len; ++k) {
            unsigned char c = bytes[i + static_cast<std::size_t>(k)];
            if ((c & 0xC0) != 0x80) {
                ok = false;
                break;
            }
            acc = (acc << 6) | (c & 0x3F);
        }
        // Reject overlong forms, surrogates, and out-of-range values.
        if (ok) {
            if ((len == 2 && acc < 0x80) || (len == 3 && acc < 0x800) ||
                (len == 4 && acc < 0x10000) || acc > 0x10FFFF ||
                (acc >= 0xD800 && acc <= 0xDFFF)) {
                ok = false;
            }
        }
        if (!ok) {
            out.push_back(kReplacement);
            ++i;
            continue;
        }
        out.push_back(acc);
        i += static_cast<std::size_t>(len);
    }
    return out;
}

void encode_utf8(char32_t cp, std::string& out) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string encode_utf8(const std::vector<char32_t>& cps) {
    std::string out;
    out.reserve(cps.size());
    for (char32_t cp : cps) encode_utf8(cp, out);
    return out;
}

std::string nfc(std::string_view text) {
    std::vector<char32_t> cps = decode_utf8(text);

    std::vector<char32_t> decomposed;
    decomposed.reserve(cps.size());
    for (char32_t cp : cps) decompose_into(cp, decomposed);

    // Canonical ordering: stable exchange of adjacent marks out of ccc order.
    for (std::size_t i = 1; i < decomposed.size(); ++i) {
        std::uint8_t ccc = combining_class(decomposed[i]);
        if (ccc == 0) continue;
        std::size_t j = i;
        while (j > 0) {
            std::uint8_t prev = combining_class(decomposed[j - 1]);
            if (prev == 0 || prev <= ccc) break;
            std::swap(decomposed[j - 1], decomposed[j]);
            --j;
        }
    }

    // Canonical composition (UAX #15): combine each mark with the last
    // starter unless a previous mark with ccc >= its own blocks it.
    std::vector<char32_t> out;
    out.reserve(decomposed.size());
    std::ptrdiff_t last_starter = -1;
    std::uint8_t last_ccc = 0;
    for (char32_t cp : decomposed) {
        std::uint8_t ccc = combining_class(cp);
        if (last_starter >= 0) {
            bool blocked = (out.size() > static_cast<std::size_t>(last_starter) + 1) &&
                           (last_ccc >= ccc);
            if (!blocked) {
                if (char32_t comp = find_composite(out[static_cast<std::size_t>(last_starter)], cp)) {
                    out[static_cast<std::size_t>(last_starter)] = comp;
                    continue;
                }
            }
        }
        if (ccc == 0) {
            last_starter = static_cast<std::ptrdiff_t>(out.size());
        }
        last_ccc = ccc;
        out.push_back(cp);
    }
    return encode_utf8(out);
}

bool is_space(char32_t cp) {
    switch (cp) {
        case 0x09:
        case 0x0A:
        case 0x0B:
        case 0x0C:
        case 0x0D:
        case 0x20:
        case 0x85:
        case 0xA0:
        case 0x1680:
        case 0x2028:
        case 0x2029:
        case 0x202F:
        case 0x205F:
        case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

CodepointIndex::CodepointIndex(std::string_view text) : text_(text) {
    byte_offsets_.reserve(text.size() + 1);
    std::size_t i = 0;
    const auto* bytes = reinterpret_cast<const unsigned char*>(text.data());
    while (i < text.size()) {
        byte_offsets_.push_back(i);
        unsigned char b = bytes[i];
        std::size_t len = 1;
        if ((b & 0xE0) == 0xC0) {
            len = 2;
        } else if ((b & 0xF0) == 0xE0) {
            len = 3;
        } else if ((b & 0xF8) == 0xF0) {
            len = 4;
        }
        // Clamp malformed tails so every byte is covered exactly once.
        if (i + len > text.size()) len = 1;
        i += len;
    }
    byte_offsets_.push_back(text.size());
}

std::string_view CodepointIndex::slice(std::size_t first, std::size_t last) const {
    first = std::min(first, size());
    last = std::min(std::max(last, first), size());
    return text_.substr(byte_offsets_[first], byte_offsets_[last] - byte_offsets_[first]);
}

}  // namespace memaudit::unicode
