#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "memaudit/corpus.hpp"

namespace memaudit {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredCandidate {
    std::string query_id;
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;
};

/// Inverted index over target suffixes with Okapi-BM25 ranking. Build once,
/// then read-only; concurrent retrieval is safe.
class SuffixIndex {
public:
    static SuffixIndex build(const std::vector<PrefixSuffixPair>& pairs, Bm25Params params = {});

    /// Okapi-BM25 score of one document against a query term multiset:
    /// sum over query terms of idf(t)·tf·(k1+1)/(tf + k1·(1−b+b·len/avglen)).
    /// Terms absent from the document contribute 0.
    double bm25_score(const std::vector<std::string>& query_terms, const std::string& doc_id) const;

    /// Top-k documents with positive score, ordered by (score desc, doc_id asc).
    /// The query text is normalized exactly as documents were at build time.
    std::vector<ScoredCandidate> retrieve_top_k(const std::string& query_text, std::size_t k,
                                                const std::string& query_id = "") const;

    /// idf(t) = ln(1 + (N − df + 0.5)/(df + 0.5)); df = 0 for unknown terms.
    double idf(const std::string& term) const;

    std::size_t doc_count() const { return doc_ids_.size(); }
    double avg_doc_length() const { return avg_doc_length_; }
    std::size_t doc_length(const std::string& doc_id) const;
    std::size_t doc_frequency(const std::string& term) const;
    const std::vector<std::string>& doc_ids() const { return doc_ids_; }
    const Bm25Params& params() const { return params_; }

    /// Binary persistence ("MTIX1" format, see docs/FORMATS.md).
    void save(const std::string& path) const;
    static SuffixIndex load(const std::string& path);

private:
    struct Posting {
        std::uint32_t doc = 0;
        std::uint32_t tf = 0;
    };

    std::uint32_t require_ordinal(const std::string& doc_id) const;
    double score_one(const std::string& term, std::uint32_t ordinal) const;

    std::vector<std::string> doc_ids_;  // sorted ascending; position = ordinal
    std::unordered_map<std::string, std::uint32_t> ordinals_;
    std::vector<std::uint64_t> doc_lengths_;
    std::unordered_map<std::string, std::vector<Posting>> postings_;
    double avg_doc_length_ = 0.0;
    Bm25Params params_;
};

inline SuffixIndex build_index(const std::vector<PrefixSuffixPair>& pairs, Bm25Params params = {}) {
    return SuffixIndex::build(pairs, params);
}

inline double bm25_score(const SuffixIndex& index, const std::vector<std::string>& query_terms,
                         const std::string& doc_id) {
    return index.bm25_score(query_terms, doc_id);
}

inline std::vector<ScoredCandidate> retrieve_top_k(const SuffixIndex& index,
                                                   const std::string& query_text, std::size_t k,
                                                   const std::string& query_id = "") {
    return index.retrieve_top_k(query_text, k, query_id);
}

}  // namespace memaudit
