#include "memaudit/textnorm.hpp"

#include "memaudit/unicode.hpp"

namespace memaudit::textnorm {

std::vector<std::string> normalize_terms(const std::string& text) {
    std::vector<std::string> terms;
    std::string current;
    for (char32_t cp : unicode::decode_utf8(text)) {
        bool separator;
        if (cp < 0x80) {
            if (cp >= U'A' && cp <= U'Z') {
                current.push_back(static_cast<char>(cp - U'A' + 'a'));
                separator = false;
            } else if ((cp >= U'a' && cp <= U'z') || (cp >= U'0' && cp <= U'9')) {
                current.push_back(static_cast<char>(cp));
                separator = false;
            } else {
                separator = true;
            }
        } else if (unicode::is_space(cp)) {
            separator = true;
        } else {
            unicode::encode_utf8(cp, current);
            separator = false;
        }
        if (separator && !current.empty()) {
            terms.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) terms.push_back(std::move(current));
    return terms;
}

std::set<std::string> term_set(const std::string& text) {
    auto terms = normalize_terms(text);
    return {terms.begin(), terms.end()};
}

}  // namespace memaudit::textnorm
