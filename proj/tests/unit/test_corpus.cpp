#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "memaudit/corpus.hpp"
#include "memaudit/errors.hpp"

using namespace memaudit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

TrainingExample example(const std::string& id, const std::string& input) {
    TrainingExample ex;
    ex.id = id;
    ex.input_text = input;
    return ex;
}

std::string words(std::size_t count, const std::string& stem = "w") {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i) out += ' ';
        out += stem + std::to_string(i);
    }
    return out;
}

}  // namespace

TEST_CASE("tokenize basic offsets") {
    auto tokens = tokenize("a b");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].text == "a");
    CHECK(tokens[0].char_start == 0);
    CHECK(tokens[0].char_end == 1);
    CHECK(tokens[1].text == "b");
    CHECK(tokens[1].char_start == 2);
    CHECK(tokens[1].char_end == 3);

    CHECK(tokenize("").empty());

    tokens = tokenize("  x  ");
    REQUIRE(tokens.size() == 1);
    CHECK(tokens[0].text == "x");
    CHECK(tokens[0].char_start == 2);
    CHECK(tokens[0].char_end == 3);
}

TEST_CASE("tokenize offsets count code points") {
    auto tokens = tokenize("\xC3\xA9t\xC3\xA9 caf\xC3\xA9");
    REQUIRE(tokens.size() == 2);
    CHECK(tokens[0].text == "\xC3\xA9t\xC3\xA9");
    CHECK(tokens[0].char_start == 0);
    CHECK(tokens[0].char_end == 3);
    CHECK(tokens[1].char_start == 4);
    CHECK(tokens[1].char_end == 8);
}

TEST_CASE("split keeps 50-token prefix of long input") {
    const auto ex = example("e1", words(100));
    const auto pair = split_prefix_suffix(ex, 50);
    CHECK(pair.k_tokens == 50);
    CHECK_FALSE(pair.fallback_applied);
    CHECK(tokenize(pair.prefix).size() == 50);
    CHECK(pair.prefix + pair.suffix == ex.input_text);
}

TEST_CASE("split half fallback on short input") {
    const auto pair = split_prefix_suffix(example("e1", "one two"), 50);
    CHECK(pair.fallback_applied);
    CHECK(pair.k_tokens == 1);
    CHECK(pair.prefix == "one");
    CHECK(pair.suffix == " two");
}

TEST_CASE("split half fallback at exact boundary") {
    const auto ex = example("e1", words(50));
    const auto pair = split_prefix_suffix(ex, 50);
    CHECK(pair.fallback_applied);
    CHECK(pair.k_tokens == 25);
    CHECK(tokenize(pair.prefix).size() == 25);
    CHECK(pair.prefix + pair.suffix == ex.input_text);
}

TEST_CASE("split fixed fallback") {
    const auto ex = example("e1", words(20));
    const auto pair = split_prefix_suffix(ex, 50, ShortInputFallback::fixed(15));
    CHECK(pair.fallback_applied);
    CHECK(pair.k_tokens == 15);
    CHECK(tokenize(pair.prefix).size() == 15);
}

TEST_CASE("split round-trips for every k") {
    const std::string inputs[] = {
        "one",
        "  padded   text with  gaps ",
        words(37),
        "caf\xC3\xA9 au lait \xE2\x80\x94 tr\xC3\xA8s bon",
    };
    for (const auto& input : inputs) {
        for (std::size_t k = 1; k <= 40; ++k) {
            const auto pair = split_prefix_suffix(example("x", input), k);
            CHECK(pair.prefix + pair.suffix == input);
        }
    }
}

TEST_CASE("split prefix length monotone in k before fallback") {
    const auto ex = example("e1", words(30));
    std::size_t previous = 0;
    for (std::size_t k = 1; k < 30; ++k) {
        const auto pair = split_prefix_suffix(ex, k);
        REQUIRE_FALSE(pair.fallback_applied);
        CHECK(pair.prefix.size() >= previous);
        previous = pair.prefix.size();
    }
}

TEST_CASE("split rejects bad inputs") {
    CHECK_THROWS_AS(split_prefix_suffix(example("e1", ""), 50), ValidationError);
    CHECK_THROWS_AS(split_prefix_suffix(example("e1", "text"), 0), ValidationError);
}

TEST_CASE("load_corpus reads records in order") {
    const auto path = write_temp("memaudit_corpus_ok.jsonl",
                                 R"({"id":"a","input":"first text","target":"t1"})"
                                 "\n"
                                 R"({"id":"b","input":"second text","target":"t2"})"
                                 "\n"
                                 R"({"id":"c","input":"third text","target":""})"
                                 "\n");
    const auto examples = load_corpus(path);
    REQUIRE(examples.size() == 3);
    CHECK(examples[0].id == "a");
    CHECK(examples[1].input_text == "second text");
    CHECK(examples[2].id == "c");
}

TEST_CASE("load_corpus honors limit") {
    std::string content;
    for (int i = 0; i < 10; ++i) {
        content += R"({"id":"id)" + std::to_string(i) + R"(","input":"text )" +
                   std::to_string(i) + R"("})" + "\n";
    }
    const auto path = write_temp("memaudit_corpus_limit.jsonl", content);
    const auto examples = load_corpus(path, 5);
    REQUIRE(examples.size() == 5);
    CHECK(examples[4].id == "id4");
}

TEST_CASE("load_corpus names the offending line") {
    const auto path = write_temp("memaudit_corpus_bad.jsonl",
                                 R"({"id":"a","input":"fine"})"
                                 "\n"
                                 R"({"id":"b","target":"missing input"})"
                                 "\n");
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains("line 2"), FormatError);
}

TEST_CASE("load_corpus rejects duplicates and empty input") {
    const auto dup = write_temp("memaudit_corpus_dup.jsonl",
                                R"({"id":"a","input":"x y"})"
                                "\n"
                                R"({"id":"a","input":"z w"})"
                                "\n");
    CHECK_THROWS_AS(load_corpus(dup), ValidationError);

    const auto empty = write_temp("memaudit_corpus_empty.jsonl", R"({"id":"a","input":""})"
                                                                 "\n");
    CHECK_THROWS_AS(load_corpus(empty), ValidationError);

    CHECK_THROWS_AS(load_corpus("/nonexistent/memaudit.jsonl"), IoError);
}

TEST_CASE("load_corpus normalizes to NFC") {
    const auto path = write_temp("memaudit_corpus_nfc.jsonl",
                                 "{\"id\":\"a\",\"input\":\"cafe\xCC\x81 time\"}\n");
    const auto examples = load_corpus(path);
    REQUIRE(examples.size() == 1);
    CHECK(examples[0].input_text == "caf\xC3\xA9 time");
}

TEST_CASE("load_generations reads id and generation") {
    const auto path = write_temp("memaudit_gens.jsonl",
                                 R"({"id":"a","generation":"some output"})"
                                 "\n"
                                 R"({"id":"b","generation":"more output"})"
                                 "\n");
    const auto generations = load_generations(path);
    REQUIRE(generations.size() == 2);
    CHECK(generations[0].example_id == "a");
    CHECK(generations[1].generation == "more output");

    const auto bad = write_temp("memaudit_gens_bad.jsonl", R"({"id":"a"})"
                                                           "\n");
    CHECK_THROWS_WITH_AS(load_generations(bad), doctest::Contains("line 1"), FormatError);
}
