#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/unicode.hpp"

using namespace memaudit;

namespace {

std::string utf8(const std::vector<char32_t>& cps) {
    std::string out;
    for (char32_t cp : cps) unicode::encode_utf8(cp, out);
    return out;
}

}  // namespace

TEST_CASE("utf8 decode round-trips encode") {
    const std::vector<char32_t> cps = {U'a', 0xE9, 0x2014, 0x1F600, 0xAC01};
    CHECK(unicode::decode_utf8(utf8(cps)) == cps);
}

TEST_CASE("utf8 decode replaces malformed bytes") {
    CHECK(unicode::decode_utf8("\x80") == std::vector<char32_t>{0xFFFD});
    CHECK(unicode::decode_utf8("\xC0\xAF") == std::vector<char32_t>{0xFFFD, 0xFFFD});
    CHECK(unicode::decode_utf8("\xED\xA0\x80") ==
          std::vector<char32_t>{0xFFFD, 0xFFFD, 0xFFFD});
    const auto truncated = unicode::decode_utf8("a\xE2\x82");
    CHECK(truncated.front() == U'a');
    CHECK(truncated.back() == 0xFFFD);
}

// Expected outputs frozen from Python 3.10 unicodedata.normalize("NFC", ...).
TEST_CASE("nfc matches reference normalizer") {
    auto check = [](const std::vector<char32_t>& in, const std::vector<char32_t>& want) {
        CAPTURE(in);
        CHECK(unicode::nfc(utf8(in)) == utf8(want));
    };
    check({U'M', U'y', U' ', U'n', U'a', U'm', U'e'}, {U'M', U'y', U' ', U'n', U'a', U'm', U'e'});
    check({0x0065, 0x0301}, {0x00E9});
    check({0x00E9}, {0x00E9});
    check({0x212B}, {0x00C5});
    check({0x1100, 0x1161, 0x11A8}, {0xAC01});
    check({0xAC00, 0x11A8}, {0xAC01});
    check({0x0071, 0x0323, 0x0307}, {0x0071, 0x0323, 0x0307});
    check({0x0071, 0x0307, 0x0323}, {0x0071, 0x0323, 0x0307});
    check({0x0065, 0x0304, 0x0301}, {0x1E17});
    check({0x0915, 0x093C}, {0x0915, 0x093C});
    check({0x0958}, {0x0915, 0x093C});
    check({0x1E14}, {0x1E14});
    check({0xFB01}, {0xFB01});
    check({0x03B1, 0x0301}, {0x03AC});
    check({0x0043, 0x0061, 0x0066, 0x0065, 0x0301, 0x0020, 0x006E, 0x0061, 0x0069, 0x0308,
           0x0076, 0x0065},
          {0x0043, 0x0061, 0x0066, 0x00E9, 0x0020, 0x006E, 0x0061, 0x00EF, 0x0076, 0x0065});
}

TEST_CASE("nfc is idempotent") {
    const std::vector<std::string> samples = {
        utf8({0x0065, 0x0301, 0x0073, 0x0073, 0x0061, 0x0069}),
        utf8({0x1100, 0x1161, 0x11A8, U' ', 0x212B}),
        utf8({0x0071, 0x0307, 0x0323, 0x0915, 0x093C}),
    };
    for (const auto& sample : samples) {
        const auto once = unicode::nfc(sample);
        CHECK(unicode::nfc(once) == once);
    }
}

TEST_CASE("is_space covers unicode whitespace") {
    CHECK(unicode::is_space(U' '));
    CHECK(unicode::is_space(U'\t'));
    CHECK(unicode::is_space(U'\n'));
    CHECK(unicode::is_space(0x00A0));
    CHECK(unicode::is_space(0x2003));
    CHECK(unicode::is_space(0x3000));
    CHECK_FALSE(unicode::is_space(U'a'));
    CHECK_FALSE(unicode::is_space(0x2014));
}

TEST_CASE("codepoint index slices by code point") {
    const std::string text = utf8({U'a', 0x00E9, 0x1F600, U'b', 0xAC01});
    unicode::CodepointIndex index(text);
    CHECK(index.size() == 5);
    CHECK(index.slice(0, 5) == text);
    CHECK(index.slice(1, 2) == utf8({0x00E9}));
    CHECK(index.slice(2, 4) == utf8({0x1F600, U'b'}));
    CHECK(index.slice(3, 3).empty());
}
