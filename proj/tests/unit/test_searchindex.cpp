#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/errors.hpp"
#include "memaudit/rng.hpp"
#include "memaudit/searchindex.hpp"
#include "memaudit/textnorm.hpp"

using namespace memaudit;

namespace {

PrefixSuffixPair pair_of(const std::string& id, const std::string& suffix) {
    PrefixSuffixPair pair;
    pair.example_id = id;
    pair.suffix = suffix;
    return pair;
}

/// Scores every document with bm25_score and sorts, independent of the
/// retrieval path's accumulator.
std::vector<ScoredCandidate> brute_force(const SuffixIndex& index, const std::string& query,
                                         std::size_t k) {
    const auto terms = textnorm::normalize_terms(query);
    std::vector<ScoredCandidate> all;
    for (const auto& doc_id : index.doc_ids()) {
        const double score = index.bm25_score(terms, doc_id);
        if (score > 0.0) all.push_back({"", doc_id, score, 0});
    }
    std::sort(all.begin(), all.end(), [](const ScoredCandidate& a, const ScoredCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    });
    if (all.size() > k) all.resize(k);
    for (std::size_t i = 0; i < all.size(); ++i) all[i].rank = i + 1;
    return all;
}

}  // namespace

TEST_CASE("build computes document statistics") {
    const auto index = build_index({
        pair_of("a", "one two three"),
        pair_of("b", "four five"),
        pair_of("c", "six"),
    });
    CHECK(index.doc_count() == 3);
    CHECK(index.avg_doc_length() == doctest::Approx(2.0));
    CHECK(index.doc_length("a") == 3);
    CHECK(index.doc_frequency("one") == 1);
}

TEST_CASE("build rejects duplicate ids") {
    CHECK_THROWS_AS(build_index({pair_of("a", "x"), pair_of("a", "y")}), ValidationError);
}

TEST_CASE("empty suffix is indexed but never retrieved") {
    const auto index = build_index({pair_of("a", "real content here"), pair_of("b", "")});
    CHECK(index.doc_count() == 2);
    CHECK(index.doc_length("b") == 0);
    const auto results = index.retrieve_top_k("content", 10);
    REQUIRE(results.size() == 1);
    CHECK(results[0].doc_id == "a");
}

TEST_CASE("identical suffixes tie-break by doc id") {
    const auto index = build_index({pair_of("b", "same words here"), pair_of("a", "same words here")});
    const auto results = index.retrieve_top_k("same words", 10);
    REQUIRE(results.size() == 2);
    CHECK(results[0].score == doctest::Approx(results[1].score).epsilon(1e-12));
    CHECK(results[0].doc_id == "a");
    CHECK(results[1].doc_id == "b");
    CHECK(results[0].rank == 1);
    CHECK(results[1].rank == 2);
}

TEST_CASE("score is zero without term overlap") {
    const auto index = build_index({pair_of("a", "alpha beta"), pair_of("b", "gamma delta")});
    CHECK(index.bm25_score({"zeta"}, "a") == 0.0);
    CHECK(index.bm25_score({}, "a") == 0.0);
    CHECK_THROWS_AS(index.bm25_score({"alpha"}, "missing"), NotFoundError);
}

TEST_CASE("single unique term matches the closed-form score") {
    // Four docs of three terms each; "zebra" occurs once in one doc, so with
    // len == avglen the tf factor is 1 and the score reduces to
    // ln(1 + (4 - 1 + 0.5)/(1 + 0.5)) = ln(10/3).
    const auto index = build_index({
        pair_of("a", "zebra lion tiger"),
        pair_of("b", "mouse house spouse"),
        pair_of("c", "green red blue"),
        pair_of("d", "north south east"),
    });
    CHECK(index.bm25_score({"zebra"}, "a") == doctest::Approx(std::log(10.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("higher tf scores higher with equal lengths") {
    const auto index = build_index({
        pair_of("once", "cat filler filler filler"),
        pair_of("twice", "cat cat filler filler"),
    });
    CHECK(index.bm25_score({"cat"}, "twice") > index.bm25_score({"cat"}, "once"));
}

TEST_CASE("query term multiplicity scales contribution") {
    const auto index = build_index({pair_of("a", "cat dog"), pair_of("b", "bird fish")});
    const double single = index.bm25_score({"cat"}, "a");
    const double twice = index.bm25_score({"cat", "cat"}, "a");
    CHECK(twice == doctest::Approx(2.0 * single).epsilon(1e-12));
}

TEST_CASE("unique discriminating term ranks its doc first") {
    const auto index = build_index({
        pair_of("a", "shared words plus quixotic marker"),
        pair_of("b", "shared words plus ordinary filler"),
        pair_of("c", "shared words plus everyday padding"),
    });
    const auto results = index.retrieve_top_k("quixotic marker text", 10);
    REQUIRE_FALSE(results.empty());
    CHECK(results[0].doc_id == "a");
}

TEST_CASE("k larger than corpus returns whole corpus at most") {
    const auto index = build_index({
        pair_of("a", "red green"),
        pair_of("b", "red blue"),
        pair_of("c", "red yellow"),
    });
    CHECK(index.retrieve_top_k("red", 10).size() == 3);
    CHECK_THROWS_AS(index.retrieve_top_k("red", 0), ValidationError);
}

TEST_CASE("retrieval agrees with brute force on random corpora") {
    const std::vector<std::string> vocab = {
        "alpha", "bravo", "charlie", "delta", "echo",  "foxtrot", "golf",   "hotel",
        "india", "juliet", "kilo",   "lima",  "mike",  "november", "oscar", "papa",
        "quebec", "romeo", "sierra", "tango", "uniform", "victor", "whiskey", "xray",
        "yankee", "zulu",  "amber",  "birch", "cedar", "dune",
    };
    rng::Engine engine(20240615);
    for (int trial = 0; trial < 8; ++trial) {
        std::vector<PrefixSuffixPair> pairs;
        for (int d = 0; d < 100; ++d) {
            const std::size_t length = 5 + engine.next_below(11);
            std::string suffix;
            for (std::size_t t = 0; t < length; ++t) {
                if (t) suffix += ' ';
                suffix += vocab[engine.next_below(vocab.size())];
            }
            pairs.push_back(pair_of("doc" + std::to_string(d), suffix));
        }
        const auto index = build_index(pairs);
        for (int q = 0; q < 20; ++q) {
            const std::size_t length = 3 + engine.next_below(6);
            std::string query;
            for (std::size_t t = 0; t < length; ++t) {
                if (t) query += ' ';
                query += vocab[engine.next_below(vocab.size())];
            }
            const auto expected = brute_force(index, query, 10);
            const auto actual = index.retrieve_top_k(query, 10);
            REQUIRE(actual.size() == expected.size());
            for (std::size_t i = 0; i < actual.size(); ++i) {
                CHECK(actual[i].doc_id == expected[i].doc_id);
                CHECK(std::abs(actual[i].score - expected[i].score) <= 1e-9);
                CHECK(actual[i].rank == i + 1);
            }
        }
    }
}

TEST_CASE("repeated retrieval is identical") {
    const auto index = build_index({
        pair_of("a", "one two three four"),
        pair_of("b", "two three four five"),
    });
    const auto first = index.retrieve_top_k("two three", 5);
    const auto second = index.retrieve_top_k("two three", 5);
    REQUIRE(first.size() == second.size());
    for (std::size_t i = 0; i < first.size(); ++i) {
        CHECK(first[i].doc_id == second[i].doc_id);
        CHECK(first[i].score == second[i].score);
    }
}

TEST_CASE("index persistence round-trips") {
    const auto index = build_index({
        pair_of("a", "one two three"),
        pair_of("b", "three four five"),
        pair_of("c", "five six one"),
    });
    const auto path = (std::filesystem::temp_directory_path() / "memaudit_test.mtix").string();
    index.save(path);
    const auto loaded = SuffixIndex::load(path);
    CHECK(loaded.doc_count() == index.doc_count());
    CHECK(loaded.avg_doc_length() == index.avg_doc_length());

    const auto before = index.retrieve_top_k("one three five", 10);
    const auto after = loaded.retrieve_top_k("one three five", 10);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].doc_id == after[i].doc_id);
        CHECK(before[i].score == after[i].score);
    }

    CHECK_THROWS_AS(SuffixIndex::load("/nonexistent/file.mtix"), IoError);
    const auto garbage = (std::filesystem::temp_directory_path() / "memaudit_bad.mtix").string();
    {
        std::ofstream out(garbage, std::ios::binary);
        out << "not an index";
    }
    CHECK_THROWS_AS(SuffixIndex::load(garbage), FormatError);
}
