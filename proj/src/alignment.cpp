#include "memaudit/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "memaudit/textnorm.hpp"
#include "memaudit/unicode.hpp"

namespace memaudit {

namespace {

const std::vector<std::string> kAbbreviations = {
    "dr.",  "mr.",  "mrs.", "ms.",  "prof.", "sr.",  "jr.",   "st.",  "vs.", "etc.",
    "e.g.", "i.e.", "cf.",  "al.",  "fig.",  "no.",  "vol.",  "inc.", "ltd.", "dept.",
};

std::string ascii_lower(const std::string& text) {
    std::string out = text;
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool is_terminator(char32_t cp) { return cp == U'.' || cp == U'!' || cp == U'?'; }

/// Word ending at position `pos` (inclusive): maximal non-space run, with any
/// leading non-letter characters stripped, lowercased.
std::string trailing_word(const std::vector<char32_t>& cps, std::size_t pos) {
    std::size_t start = pos + 1;
    while (start > 0 && !unicode::is_space(cps[start - 1])) --start;
    while (start <= pos) {
        const char32_t cp = cps[start];
        const bool letter = (cp >= U'A' && cp <= U'Z') || (cp >= U'a' && cp <= U'z') || cp >= 0x80;
        if (letter) break;
        ++start;
    }
    std::string word;
    for (std::size_t i = start; i <= pos; ++i) unicode::encode_utf8(cps[i], word);
    return ascii_lower(word);
}

}  // namespace

std::vector<SentenceSpan> segment_sentences(const std::string& text, const AlignConfig& config) {
    const auto cps = unicode::decode_utf8(text);

    std::set<std::string> abbreviations(kAbbreviations.begin(), kAbbreviations.end());
    for (const auto& abbr : config.extra_abbreviations) abbreviations.insert(ascii_lower(abbr));

    std::vector<SentenceSpan> spans;
    std::size_t start = 0;
    auto flush = [&](std::size_t end) {
        while (start < end && unicode::is_space(cps[start])) ++start;
        std::size_t trimmed = end;
        while (trimmed > start && unicode::is_space(cps[trimmed - 1])) --trimmed;
        if (trimmed <= start) return;
        std::string sentence;
        for (std::size_t i = start; i < trimmed; ++i) unicode::encode_utf8(cps[i], sentence);
        spans.push_back({std::move(sentence), start, trimmed, spans.size()});
        start = end;
    };

    for (std::size_t i = 0; i < cps.size(); ++i) {
        if (!is_terminator(cps[i])) continue;
        const bool at_end = i + 1 == cps.size();
        if (!at_end && !unicode::is_space(cps[i + 1])) continue;
        if (cps[i] == U'.' && abbreviations.count(trailing_word(cps, i))) continue;
        flush(i + 1);
    }
    flush(cps.size());
    return spans;
}

std::vector<SparseVector> tfidf_sentence_vectors(const std::vector<SentenceSpan>& sentences,
                                                 const SuffixIndex& idf_source) {
    std::vector<SparseVector> vectors;
    vectors.reserve(sentences.size());
    for (const auto& sentence : sentences) {
        SparseVector vector;
        for (auto& term : textnorm::normalize_terms(sentence.text)) {
            vector[std::move(term)] += 1.0;
        }
        for (auto& [term, weight] : vector) weight *= idf_source.idf(term);
        vectors.push_back(std::move(vector));
    }
    return vectors;
}

double cosine_similarity(const SparseVector& a, const SparseVector& b) {
    double dot = 0.0;
    double norm_a = 0.0;
    double norm_b = 0.0;
    for (const auto& [term, weight] : a) {
        norm_a += weight * weight;
        auto it = b.find(term);
        if (it != b.end()) dot += weight * it->second;
    }
    for (const auto& [term, weight] : b) norm_b += weight * weight;
    if (norm_a == 0.0 || norm_b == 0.0) return 0.0;
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

namespace {

double dice_coefficient(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t shared = 0;
    for (const auto& term : a) shared += b.count(term);
    return 2.0 * static_cast<double>(shared) / static_cast<double>(a.size() + b.size());
}

}  // namespace

std::vector<SeedPair> seed_matches(const std::vector<SentenceSpan>& query_sentences,
                                   const std::vector<SentenceSpan>& candidate_sentences,
                                   const AlignConfig& config, const SuffixIndex& idf_source) {
    const auto query_vectors = tfidf_sentence_vectors(query_sentences, idf_source);
    const auto candidate_vectors = tfidf_sentence_vectors(candidate_sentences, idf_source);

    std::vector<std::set<std::string>> query_sets;
    query_sets.reserve(query_sentences.size());
    for (const auto& sentence : query_sentences) {
        query_sets.push_back(textnorm::term_set(sentence.text));
    }
    std::vector<std::set<std::string>> candidate_sets;
    candidate_sets.reserve(candidate_sentences.size());
    for (const auto& sentence : candidate_sentences) {
        candidate_sets.push_back(textnorm::term_set(sentence.text));
    }

    std::vector<SeedPair> seeds;
    for (std::size_t q = 0; q < query_sentences.size(); ++q) {
        for (std::size_t c = 0; c < candidate_sentences.size(); ++c) {
            const double cosine = cosine_similarity(query_vectors[q], candidate_vectors[c]);
            if (cosine < config.seed_cosine_threshold) continue;
            const double dice = dice_coefficient(query_sets[q], candidate_sets[c]);
            if (dice < config.seed_dice_threshold) continue;
            seeds.push_back({q, c, cosine, dice});
        }
    }
    return seeds;
}

namespace {

std::size_t ordinal_gap(std::size_t a, std::size_t b) { return a > b ? a - b : b - a; }

}  // namespace

std::vector<std::vector<SeedPair>> extend_seeds(const std::vector<SeedPair>& seeds,
                                                const AlignConfig& config) {
    std::vector<SeedPair> sorted = seeds;
    std::sort(sorted.begin(), sorted.end(), [](const SeedPair& a, const SeedPair& b) {
        if (a.query_sentence_index != b.query_sentence_index) {
            return a.query_sentence_index < b.query_sentence_index;
        }
        return a.candidate_sentence_index < b.candidate_sentence_index;
    });

    std::vector<std::vector<SeedPair>> clusters;
    std::vector<std::size_t> recency;  // cluster indices, most recently extended first
    for (const auto& seed : sorted) {
        bool placed = false;
        for (std::size_t r = 0; r < recency.size(); ++r) {
            auto& cluster = clusters[recency[r]];
            const SeedPair& last = cluster.back();
            if (ordinal_gap(seed.query_sentence_index, last.query_sentence_index) <=
                    config.maxgap_sentences &&
                ordinal_gap(seed.candidate_sentence_index, last.candidate_sentence_index) <=
                    config.maxgap_sentences) {
                cluster.push_back(seed);
                const std::size_t index = recency[r];
                recency.erase(recency.begin() + static_cast<std::ptrdiff_t>(r));
                recency.insert(recency.begin(), index);
                placed = true;
                break;
            }
        }
        if (!placed) {
            clusters.push_back({seed});
            recency.insert(recency.begin(), clusters.size() - 1);
        }
    }
    return clusters;
}

std::vector<FragmentMatch> filter_matches(const std::vector<std::vector<SeedPair>>& clusters,
                                          const std::string& query_text,
                                          const std::string& candidate_text,
                                          const AlignConfig& config) {
    const auto query_sentences = segment_sentences(query_text, config);
    const auto candidate_sentences = segment_sentences(candidate_text, config);

    std::vector<FragmentMatch> fragments;
    for (const auto& cluster : clusters) {
        if (cluster.empty()) continue;
        std::size_t q_min = query_sentences.size();
        std::size_t q_max = 0;
        std::size_t c_min = candidate_sentences.size();
        std::size_t c_max = 0;
        double cosine_sum = 0.0;
        for (const auto& seed : cluster) {
            q_min = std::min(q_min, seed.query_sentence_index);
            q_max = std::max(q_max, seed.query_sentence_index);
            c_min = std::min(c_min, seed.candidate_sentence_index);
            c_max = std::max(c_max, seed.candidate_sentence_index);
            cosine_sum += seed.cosine;
        }
        if (q_max >= query_sentences.size() || c_max >= candidate_sentences.size()) continue;

        FragmentMatch fragment;
        fragment.query_start = query_sentences[q_min].char_start;
        fragment.query_end = query_sentences[q_max].char_end;
        fragment.candidate_start = candidate_sentences[c_min].char_start;
        fragment.candidate_end = candidate_sentences[c_max].char_end;
        fragment.seed_count = cluster.size();
        fragment.mean_cosine = cosine_sum / static_cast<double>(cluster.size());

        if (fragment.query_end - fragment.query_start < config.min_match_chars) continue;
        if (fragment.candidate_end - fragment.candidate_start < config.min_match_chars) continue;
        fragments.push_back(fragment);
    }

    // Merge until no fragment overlaps another on either side.
    bool merged = true;
    while (merged) {
        merged = false;
        for (std::size_t i = 0; i < fragments.size() && !merged; ++i) {
            for (std::size_t j = i + 1; j < fragments.size() && !merged; ++j) {
                const auto& a = fragments[i];
                const auto& b = fragments[j];
                const bool query_overlap =
                    a.query_start < b.query_end && b.query_start < a.query_end;
                const bool candidate_overlap =
                    a.candidate_start < b.candidate_end && b.candidate_start < a.candidate_end;
                if (!query_overlap && !candidate_overlap) continue;

                FragmentMatch combined;
                combined.query_start = std::min(a.query_start, b.query_start);
                combined.query_end = std::max(a.query_end, b.query_end);
                combined.candidate_start = std::min(a.candidate_start, b.candidate_start);
                combined.candidate_end = std::max(a.candidate_end, b.candidate_end);
                combined.seed_count = a.seed_count + b.seed_count;
                combined.mean_cosine =
                    (a.mean_cosine * static_cast<double>(a.seed_count) +
                     b.mean_cosine * static_cast<double>(b.seed_count)) /
                    static_cast<double>(combined.seed_count);
                fragments[i] = combined;
                fragments.erase(fragments.begin() + static_cast<std::ptrdiff_t>(j));
                merged = true;
            }
        }
    }

    std::sort(fragments.begin(), fragments.end(), [](const FragmentMatch& a, const FragmentMatch& b) {
        if (a.query_start != b.query_start) return a.query_start < b.query_start;
        return a.candidate_start < b.candidate_start;
    });
    return fragments;
}

std::vector<FragmentMatch> detect(const std::string& generation,
                                  const std::string& candidate_suffix, const AlignConfig& config,
                                  const SuffixIndex& idf_source) {
    const auto query_sentences = segment_sentences(generation, config);
    const auto candidate_sentences = segment_sentences(candidate_suffix, config);
    const auto seeds = seed_matches(query_sentences, candidate_sentences, config, idf_source);
    const auto clusters = extend_seeds(seeds, config);
    return filter_matches(clusters, generation, candidate_suffix, config);
}

}  // namespace memaudit
