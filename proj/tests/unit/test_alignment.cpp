#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/alignment.hpp"
#include "memaudit/searchindex.hpp"

using namespace memaudit;

namespace {

PrefixSuffixPair pair_of(const std::string& id, const std::string& suffix) {
    PrefixSuffixPair pair;
    pair.example_id = id;
    pair.suffix = suffix;
    return pair;
}

SuffixIndex tiny_index() {
    return build_index({
        pair_of("a", "the quick brown fox jumps over the lazy dog"),
        pair_of("b", "pack my box with five dozen liquor jugs"),
        pair_of("c", "how vexingly quick daft zebras jump"),
    });
}

SeedPair seed_at(std::size_t q, std::size_t c, double cosine = 0.9) {
    return {q, c, cosine, 0.8};
}

}  // namespace

TEST_CASE("segmentation splits on terminators") {
    const auto spans = segment_sentences("A. B? C!");
    REQUIRE(spans.size() == 3);
    CHECK(spans[0].text == "A.");
    CHECK(spans[0].char_start == 0);
    CHECK(spans[0].char_end == 2);
    CHECK(spans[1].text == "B?");
    CHECK(spans[1].char_start == 3);
    CHECK(spans[2].text == "C!");
    CHECK(spans[2].index == 2);
}

TEST_CASE("segmentation respects abbreviations") {
    CHECK(segment_sentences("Dr. Smith left.").size() == 1);
    CHECK(segment_sentences("Fruit, e.g. apples, is healthy.").size() == 1);
    CHECK(segment_sentences("She met Mr. Jones. He waved.").size() == 2);

    AlignConfig config;
    config.extra_abbreviations = {"Corp."};
    CHECK(segment_sentences("Acme Corp. shipped it.", config).size() == 1);
}

TEST_CASE("segmentation handles edges") {
    CHECK(segment_sentences("").empty());
    CHECK(segment_sentences("   ").empty());

    const auto unterminated = segment_sentences("no closing mark here");
    REQUIRE(unterminated.size() == 1);
    CHECK(unterminated[0].text == "no closing mark here");

    const auto trailing = segment_sentences("First one.   ");
    REQUIRE(trailing.size() == 1);
    CHECK(trailing[0].char_end == 10);
}

TEST_CASE("sentence vectors follow tf and idf") {
    const auto index = tiny_index();
    const auto spans_a = segment_sentences("quick brown fox.");
    const auto spans_b = segment_sentences("quick brown fox.");
    const auto va = tfidf_sentence_vectors(spans_a, index);
    const auto vb = tfidf_sentence_vectors(spans_b, index);
    REQUIRE(va.size() == 1);
    CHECK(cosine_similarity(va[0], vb[0]) == doctest::Approx(1.0).epsilon(1e-12));

    const auto disjoint =
        tfidf_sentence_vectors(segment_sentences("liquor jugs galore."), index);
    CHECK(cosine_similarity(va[0], disjoint[0]) == doctest::Approx(0.0).epsilon(1e-12));

    const auto once = tfidf_sentence_vectors(segment_sentences("fox runs."), index)[0];
    const auto twice = tfidf_sentence_vectors(segment_sentences("fox fox runs."), index)[0];
    CHECK(twice.at("fox") == doctest::Approx(2.0 * once.at("fox")).epsilon(1e-12));
}

TEST_CASE("unknown terms get the df-zero idf") {
    const auto index = tiny_index();
    const double expected = std::log(1.0 + (3.0 + 0.5) / 0.5);
    CHECK(index.idf("xylophone") == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("seeds require both thresholds") {
    const auto index = tiny_index();
    AlignConfig config;
    config.seed_cosine_threshold = 0.1;
    config.seed_dice_threshold = 0.1;

    const auto query = segment_sentences("the quick brown fox jumps here.");
    const auto cand = segment_sentences("the quick brown fox jumps over the lazy dog.");
    const auto seeds = seed_matches(query, cand, config, index);
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].query_sentence_index == 0);
    CHECK(seeds[0].candidate_sentence_index == 0);
    CHECK(seeds[0].cosine > 0.3);
    CHECK(seeds[0].dice > 0.33);

    const auto identical = seed_matches(query, query, config, index);
    REQUIRE(identical.size() == 1);
    CHECK(identical[0].cosine == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(identical[0].dice == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("dice follows set arithmetic") {
    const auto index = tiny_index();
    AlignConfig config;
    config.seed_cosine_threshold = 0.01;
    config.seed_dice_threshold = 0.01;
    const auto seeds = seed_matches(segment_sentences("apple banana cherry."),
                                    segment_sentences("banana cherry damson."), config, index);
    REQUIRE(seeds.size() == 1);
    CHECK(seeds[0].dice == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("no qualifying pair yields no seeds") {
    const auto index = tiny_index();
    const auto seeds = seed_matches(segment_sentences("alpha beta gamma."),
                                    segment_sentences("delta epsilon zeta."), AlignConfig{}, index);
    CHECK(seeds.empty());
}

TEST_CASE("raising the cosine threshold never adds seeds") {
    const auto index = tiny_index();
    const auto query = segment_sentences(
        "the quick brown fox jumps. pack my box now. vexingly quick zebras jump.");
    const auto cand = segment_sentences(
        "the quick brown fox jumps over the lazy dog. pack my box with five dozen liquor jugs.");
    std::size_t previous = SIZE_MAX;
    for (double threshold : {0.05, 0.2, 0.4, 0.6, 0.8, 0.95}) {
        AlignConfig config;
        config.seed_cosine_threshold = threshold;
        config.seed_dice_threshold = 0.05;
        const auto count = seed_matches(query, cand, config, index).size();
        CHECK(count <= previous);
        previous = count;
    }
}

TEST_CASE("contiguous seeds form one cluster") {
    AlignConfig config;
    const auto clusters =
        extend_seeds({seed_at(1, 4), seed_at(2, 5), seed_at(3, 6)}, config);
    REQUIRE(clusters.size() == 1);
    CHECK(clusters[0].size() == 3);
}

TEST_CASE("maxgap splits distant seeds") {
    AlignConfig config;
    const auto clusters = extend_seeds({seed_at(1, 1), seed_at(9, 9)}, config);
    CHECK(clusters.size() == 2);

    CHECK(extend_seeds({}, config).empty());

    // Gap within query ordinals alone is not enough; both must stay in range.
    const auto split = extend_seeds({seed_at(1, 1), seed_at(2, 9)}, config);
    CHECK(split.size() == 2);
}

TEST_CASE("filter drops short fragments and merges overlaps") {
    // Query sentences: [0,31), [32,63), [64,97), [98,103).
    const std::string query =
        "abcdefghijklmnopqrstuvwxyz one. abcdefghijklmnopqrstuvwxyz two. "
        "abcdefghijklmnopqrstuvwxyz three. tiny.";
    // Candidate sentences: [0,58), [59,117), [118,124).
    const std::string cand =
        "zyxwvutsrqponmlkjihgfedcba abcdefghijklmnopqrstuvwxyz one. "
        "zyxwvutsrqponmlkjihgfedcba abcdefghijklmnopqrstuvwxyz two. small.";
    AlignConfig config;

    // Cluster over sentences 0..1 on both sides: above the floor, kept.
    const auto kept = filter_matches({{seed_at(0, 0), seed_at(1, 1)}}, query, cand, config);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].seed_count == 2);
    CHECK(kept[0].query_start == 0);
    CHECK(kept[0].query_end == 63);
    CHECK(kept[0].candidate_end == 117);

    // Query span is long enough but the candidate side only covers the
    // 6-char sentence: dropped.
    const auto dropped =
        filter_matches({{seed_at(0, 2), seed_at(1, 2)}}, query, cand, config);
    CHECK(dropped.empty());

    // Two clusters overlapping on the query side merge into one fragment.
    const auto merged = filter_matches(
        {{seed_at(0, 0), seed_at(1, 0)}, {seed_at(1, 1), seed_at(2, 1)}}, query, cand, config);
    REQUIRE(merged.size() == 1);
    CHECK(merged[0].seed_count == 4);
    CHECK(merged[0].query_start == 0);
    CHECK(merged[0].query_end == 97);
    CHECK(merged[0].candidate_start == 0);
    CHECK(merged[0].candidate_end == 117);
}

TEST_CASE("detect finds itself") {
    const auto index = tiny_index();
    const std::string text =
        "The quick brown fox jumps over the lazy dog while the band plays on.";
    const auto fragments = detect(text, text, AlignConfig{}, index);
    REQUIRE(fragments.size() == 1);
    CHECK(fragments[0].query_start == 0);
    CHECK(fragments[0].query_end == text.size());
    CHECK(fragments[0].candidate_start == 0);
    CHECK(fragments[0].candidate_end == text.size());
    CHECK(fragments[0].mean_cosine == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("detect returns nothing without shared vocabulary") {
    const auto index = tiny_index();
    const auto fragments = detect("Purple umbrellas dance in twilight mist tonight, gleaming.",
                                  "Quantum ledgers evaporate beneath crimson static halos.",
                                  AlignConfig{}, index);
    CHECK(fragments.empty());
}

TEST_CASE("detect recovers a planted sentence") {
    const auto index = tiny_index();
    const std::string plant =
        "The migrating cranes assembled above the frozen estuary at dawn yesterday.";
    const std::string generation =
        "Umbrella colors vary wildly across autumn markets. " + plant +
        " Pianos resonate beneath vaulted concrete ceilings.";
    const auto fragments = detect(generation, plant, AlignConfig{}, index);
    REQUIRE(fragments.size() == 1);
    CHECK(fragments[0].query_start == 51);
    CHECK(fragments[0].query_end == 51 + plant.size());
    CHECK(fragments[0].candidate_start == 0);
    CHECK(fragments[0].candidate_end == plant.size());
}

TEST_CASE("detect is deterministic and respects the size floor") {
    const auto index = tiny_index();
    const std::string text = "Seven jaded zebras quietly vexed the big quick fox pack today.";
    const auto first = detect(text, text, AlignConfig{}, index);
    const auto second = detect(text, text, AlignConfig{}, index);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].query_start == second[i].query_start);
        CHECK(first[i].query_end == second[i].query_end);
        CHECK(first[i].seed_count == second[i].seed_count);
    }
    for (const auto& fragment : first) {
        CHECK(fragment.query_end - fragment.query_start >= 50);
        CHECK(fragment.candidate_end - fragment.candidate_start >= 50);
    }

    CHECK(detect("short match.", "short match.", AlignConfig{}, index).empty());
}
