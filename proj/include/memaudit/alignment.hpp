#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "memaudit/searchindex.hpp"

namespace memaudit {

/// Character offsets throughout this module count Unicode code points.
struct SentenceSpan {
    std::string text;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    std::size_t index = 0;
};

struct SeedPair {
    std::size_t query_sentence_index = 0;
    std::size_t candidate_sentence_index = 0;
    double cosine = 0.0;
    double dice = 0.0;
};

struct FragmentMatch {
    std::size_t query_start = 0;
    std::size_t query_end = 0;
    std::size_t candidate_start = 0;
    std::size_t candidate_end = 0;
    std::size_t seed_count = 0;
    double mean_cosine = 0.0;
};

struct AlignConfig {
    double seed_cosine_threshold = 0.30;
    double seed_dice_threshold = 0.33;
    std::size_t maxgap_sentences = 4;
    std::size_t min_match_chars = 50;
    /// Appended to the built-in abbreviation list; entries include the
    /// trailing period and are matched case-insensitively ("corp.").
    std::vector<std::string> extra_abbreviations;
};

using SparseVector = std::map<std::string, double>;

/// Splits at '.', '!' or '?' followed by whitespace or end of text, except
/// when the preceding word is a known abbreviation. Spans cover all
/// non-whitespace text; text without a final terminator forms a last span.
std::vector<SentenceSpan> segment_sentences(const std::string& text,
                                            const AlignConfig& config = {});

/// Per-sentence tf-idf vectors over normalized terms, idf borrowed from the
/// suffix index (unknown terms use the df = 0 formula).
std::vector<SparseVector> tfidf_sentence_vectors(const std::vector<SentenceSpan>& sentences,
                                                 const SuffixIndex& idf_source);

double cosine_similarity(const SparseVector& a, const SparseVector& b);

/// All sentence pairs passing BOTH thresholds: cosine over tf-idf vectors,
/// dice = 2|A∩B|/(|A|+|B|) over normalized term sets.
std::vector<SeedPair> seed_matches(const std::vector<SentenceSpan>& query_sentences,
                                   const std::vector<SentenceSpan>& candidate_sentences,
                                   const AlignConfig& config, const SuffixIndex& idf_source);

/// Agglomerative clustering over seeds sorted by query ordinal: a seed joins
/// the most recently extended cluster whose last seed lies within
/// maxgap_sentences on both ordinals, otherwise starts a new cluster.
std::vector<std::vector<SeedPair>> extend_seeds(const std::vector<SeedPair>& seeds,
                                                const AlignConfig& config);

/// Each cluster becomes the minimal character span covering its seed
/// sentences on each side; fragments shorter than min_match_chars on either
/// side are dropped; overlapping fragments are merged (seed counts summed,
/// mean cosine weighted by seed count).
std::vector<FragmentMatch> filter_matches(const std::vector<std::vector<SeedPair>>& clusters,
                                          const std::string& query_text,
                                          const std::string& candidate_text,
                                          const AlignConfig& config);

/// Full alignment pipeline: segment, vectorize, seed, extend, filter.
/// Non-empty result means the candidate suffix is detected in the generation.
std::vector<FragmentMatch> detect(const std::string& generation,
                                  const std::string& candidate_suffix, const AlignConfig& config,
                                  const SuffixIndex& idf_source);

}  // namespace memaudit
