#pragma once

#include <optional>
#include <string>
#include <vector>

#include "memaudit/alignment.hpp"

namespace memaudit {

enum class MemorizationType { Verbatim, ParaphraseHigh, ParaphraseLow, Idea };

std::string to_string(MemorizationType type);
MemorizationType memorization_type_from_string(const std::string& name);

struct MemorizationCase {
    std::string query_id;
    std::string matched_doc_id;
    std::vector<FragmentMatch> fragments;
    MemorizationType mem_type = MemorizationType::Verbatim;
    std::optional<double> paraphrase_p;  // present iff mem_type is a paraphrase variant
    bool self_match = false;
};

/// Implementations must be safe to call concurrently.
class ParaphraseScorer {
public:
    virtual ~ParaphraseScorer() = default;
    virtual double score(const std::string& text_a, const std::string& text_b) const = 0;
};

/// 0.5·(token-set Jaccard) + 0.5·(token LCS length / longer token count).
/// Symmetric; 1 on identical inputs; 0 when exactly one side has no tokens.
double default_paraphrase_score(const std::string& text_a, const std::string& text_b);

class LexicalScorer final : public ParaphraseScorer {
public:
    double score(const std::string& text_a, const std::string& text_b) const override {
        return default_paraphrase_score(text_a, text_b);
    }
};

/// Runs `command` through /bin/sh once per call, feeding both texts as
/// length-prefixed UTF-8 blocks ("<byte count>\n<bytes>" each) on stdin and
/// reading one decimal probability from stdout. See docs/FORMATS.md.
class CommandScorer final : public ParaphraseScorer {
public:
    explicit CommandScorer(std::string command) : command_(std::move(command)) {}
    double score(const std::string& text_a, const std::string& text_b) const override;

private:
    std::string command_;
};

/// True iff the two texts are identical after NFC normalization and
/// collapsing every whitespace run to a single space (ends trimmed).
bool is_verbatim(const std::string& frag_query_text, const std::string& frag_cand_text);

struct ClassifierConfig {
    double idea_ratio = 2.0;
    double paraphrase_high_min = 0.5;
    double paraphrase_high_max = 0.99;
};

struct ClassificationDetail {
    MemorizationType mem_type = MemorizationType::Verbatim;
    std::optional<double> paraphrase_p;
};

/// Precedence: Verbatim if any fragment pair matches exactly; else Idea if
/// any fragment pair has sentence-count ratio ≥ idea_ratio (character ratio
/// for single-sentence spans); else Paraphrase, High when some fragment
/// scores within [high_min, high_max], Low otherwise. The recorded p is the
/// highest in-band score for High, the highest score overall for Low.
ClassificationDetail classify_case_detail(const std::vector<FragmentMatch>& fragments,
                                          const std::string& query_text,
                                          const std::string& cand_text,
                                          const ParaphraseScorer& scorer,
                                          const ClassifierConfig& config = {});

MemorizationType classify_case(const std::vector<FragmentMatch>& fragments,
                               const std::string& query_text, const std::string& cand_text,
                               const ParaphraseScorer& scorer, const ClassifierConfig& config = {});

MemorizationCase build_case(const std::string& query_id, const std::string& matched_doc_id,
                            const std::vector<FragmentMatch>& fragments,
                            const std::string& query_text, const std::string& cand_text,
                            const ParaphraseScorer& scorer, const ClassifierConfig& config = {});

}  // namespace memaudit
