#include "memaudit/classifier.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstring>
#include <set>

#include "memaudit/errors.hpp"
#include "memaudit/textnorm.hpp"
#include "memaudit/unicode.hpp"

namespace memaudit {

std::string to_string(MemorizationType type) {
    switch (type) {
        case MemorizationType::Verbatim: return "verbatim";
        case MemorizationType::ParaphraseHigh: return "paraphrase_high";
        case MemorizationType::ParaphraseLow: return "paraphrase_low";
        case MemorizationType::Idea: return "idea";
    }
    throw ValidationError("unknown memorization type value");
}

MemorizationType memorization_type_from_string(const std::string& name) {
    if (name == "verbatim") return MemorizationType::Verbatim;
    if (name == "paraphrase_high") return MemorizationType::ParaphraseHigh;
    if (name == "paraphrase_low") return MemorizationType::ParaphraseLow;
    if (name == "idea") return MemorizationType::Idea;
    throw ValidationError("unknown memorization type: " + name);
}

namespace {

std::string collapse_whitespace(const std::string& text) {
    std::string out;
    bool in_space = false;
    for (char32_t cp : unicode::decode_utf8(text)) {
        if (unicode::is_space(cp)) {
            in_space = true;
            continue;
        }
        if (in_space && !out.empty()) out.push_back(' ');
        in_space = false;
        unicode::encode_utf8(cp, out);
    }
    return out;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> current(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) {
                current[j] = prev[j - 1] + 1;
            } else {
                current[j] = std::max(prev[j], current[j - 1]);
            }
        }
        std::swap(prev, current);
    }
    return prev[b.size()];
}

}  // namespace

bool is_verbatim(const std::string& frag_query_text, const std::string& frag_cand_text) {
    return collapse_whitespace(unicode::nfc(frag_query_text)) ==
           collapse_whitespace(unicode::nfc(frag_cand_text));
}

double default_paraphrase_score(const std::string& text_a, const std::string& text_b) {
    const auto terms_a = textnorm::normalize_terms(text_a);
    const auto terms_b = textnorm::normalize_terms(text_b);
    if (terms_a.empty() && terms_b.empty()) return 1.0;
    if (terms_a.empty() || terms_b.empty()) return 0.0;

    const std::set<std::string> set_a(terms_a.begin(), terms_a.end());
    const std::set<std::string> set_b(terms_b.begin(), terms_b.end());
    std::size_t shared = 0;
    for (const auto& term : set_a) shared += set_b.count(term);
    const std::size_t united = set_a.size() + set_b.size() - shared;
    const double jaccard = static_cast<double>(shared) / static_cast<double>(united);

    const double lcs_ratio = static_cast<double>(lcs_length(terms_a, terms_b)) /
                             static_cast<double>(std::max(terms_a.size(), terms_b.size()));
    return 0.5 * jaccard + 0.5 * lcs_ratio;
}

ClassificationDetail classify_case_detail(const std::vector<FragmentMatch>& fragments,
                                          const std::string& query_text,
                                          const std::string& cand_text,
                                          const ParaphraseScorer& scorer,
                                          const ClassifierConfig& config) {
    if (fragments.empty()) throw ValidationError("cannot classify a case with no fragments");

    const unicode::CodepointIndex query_index(query_text);
    const unicode::CodepointIndex cand_index(cand_text);

    struct FragmentTexts {
        std::string query;
        std::string candidate;
    };
    std::vector<FragmentTexts> texts;
    texts.reserve(fragments.size());
    for (const auto& fragment : fragments) {
        texts.push_back(
            {std::string(query_index.slice(fragment.query_start, fragment.query_end)),
             std::string(cand_index.slice(fragment.candidate_start, fragment.candidate_end))});
    }

    for (const auto& pair : texts) {
        if (is_verbatim(pair.query, pair.candidate)) {
            return {MemorizationType::Verbatim, std::nullopt};
        }
    }

    for (const auto& pair : texts) {
        const auto query_sentences = segment_sentences(pair.query);
        const auto cand_sentences = segment_sentences(pair.candidate);
        const double sent_a = static_cast<double>(query_sentences.size());
        const double sent_b = static_cast<double>(cand_sentences.size());
        if (sent_a < 1.0 || sent_b < 1.0) continue;
        if (std::max(sent_a, sent_b) / std::min(sent_a, sent_b) >= config.idea_ratio) {
            return {MemorizationType::Idea, std::nullopt};
        }
        if (query_sentences.size() == 1 && cand_sentences.size() == 1) {
            const double chars_a = static_cast<double>(unicode::decode_utf8(pair.query).size());
            const double chars_b = static_cast<double>(unicode::decode_utf8(pair.candidate).size());
            if (chars_a > 0.0 && chars_b > 0.0 &&
                std::max(chars_a, chars_b) / std::min(chars_a, chars_b) >= config.idea_ratio) {
                return {MemorizationType::Idea, std::nullopt};
            }
        }
    }

    double best_in_band = -1.0;
    double best_overall = 0.0;
    for (const auto& pair : texts) {
        const double p = scorer.score(pair.query, pair.candidate);
        best_overall = std::max(best_overall, p);
        if (p >= config.paraphrase_high_min && p <= config.paraphrase_high_max) {
            best_in_band = std::max(best_in_band, p);
        }
    }
    if (best_in_band >= 0.0) return {MemorizationType::ParaphraseHigh, best_in_band};
    return {MemorizationType::ParaphraseLow, best_overall};
}

MemorizationType classify_case(const std::vector<FragmentMatch>& fragments,
                               const std::string& query_text, const std::string& cand_text,
                               const ParaphraseScorer& scorer, const ClassifierConfig& config) {
    return classify_case_detail(fragments, query_text, cand_text, scorer, config).mem_type;
}

MemorizationCase build_case(const std::string& query_id, const std::string& matched_doc_id,
                            const std::vector<FragmentMatch>& fragments,
                            const std::string& query_text, const std::string& cand_text,
                            const ParaphraseScorer& scorer, const ClassifierConfig& config) {
    auto detail = classify_case_detail(fragments, query_text, cand_text, scorer, config);
    MemorizationCase result;
    result.query_id = query_id;
    result.matched_doc_id = matched_doc_id;
    result.fragments = fragments;
    result.mem_type = detail.mem_type;
    result.paraphrase_p = detail.paraphrase_p;
    result.self_match = query_id == matched_doc_id;
    return result;
}

namespace {

void write_all(int fd, const char* data, std::size_t size) {
    std::size_t written = 0;
    while (written < size) {
        const ssize_t n = ::write(fd, data + written, size - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("scorer pipe write failed: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
}

}  // namespace

double CommandScorer::score(const std::string& text_a, const std::string& text_b) const {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0 || pipe(from_child) != 0) {
        throw IoError(std::string("scorer pipe creation failed: ") + std::strerror(errno));
    }

    const pid_t pid = fork();
    if (pid < 0) throw IoError(std::string("scorer fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(to_child[0], STDIN_FILENO);
        dup2(from_child[1], STDOUT_FILENO);
        close(to_child[0]);
        close(to_child[1]);
        close(from_child[0]);
        close(from_child[1]);
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }

    close(to_child[0]);
    close(from_child[1]);

    std::string payload;
    for (const std::string* text : {&text_a, &text_b}) {
        payload += std::to_string(text->size());
        payload += '\n';
        payload += *text;
    }
    write_all(to_child[1], payload.data(), payload.size());
    close(to_child[1]);

    std::string output;
    char buffer[4096];
    while (true) {
        const ssize_t n = ::read(from_child[0], buffer, sizeof(buffer));
        if (n < 0) {
            if (errno == EINTR) continue;
            close(from_child[0]);
            throw IoError(std::string("scorer pipe read failed: ") + std::strerror(errno));
        }
        if (n == 0) break;
        output.append(buffer, static_cast<std::size_t>(n));
    }
    close(from_child[0]);

    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw IoError(std::string("scorer wait failed: ") + std::strerror(errno));
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        throw IoError("scorer command failed: " + command_);
    }

    std::size_t parsed = 0;
    double value = 0.0;
    try {
        value = std::stod(output, &parsed);
    } catch (const std::exception&) {
        throw FormatError("scorer output is not a number: " + output);
    }
    for (std::size_t i = parsed; i < output.size(); ++i) {
        if (!std::isspace(static_cast<unsigned char>(output[i]))) {
            throw FormatError("scorer output has trailing data: " + output);
        }
    }
    if (value < 0.0 || value > 1.0) {
        throw FormatError("scorer probability out of [0,1]: " + output);
    }
    return value;
}

}  // namespace memaudit
