#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/classifier.hpp"
#include "memaudit/errors.hpp"
#include "memaudit/unicode.hpp"

using namespace memaudit;

namespace {

/// One fragment spanning both texts end to end (offsets in code points).
std::vector<FragmentMatch> full_span(const std::string& query, const std::string& cand) {
    FragmentMatch fragment;
    fragment.query_end = unicode::CodepointIndex(query).size();
    fragment.candidate_end = unicode::CodepointIndex(cand).size();
    fragment.seed_count = 1;
    fragment.mean_cosine = 1.0;
    return {fragment};
}

class FixedScorer final : public ParaphraseScorer {
public:
    explicit FixedScorer(double p) : p_(p) {}
    double score(const std::string&, const std::string&) const override { return p_; }

private:
    double p_;
};

}  // namespace

TEST_CASE("verbatim equality ignores whitespace runs and normalization form") {
    CHECK(is_verbatim("My name is Jack", "My name is Jack"));
    CHECK_FALSE(is_verbatim("My name is Jack", "Jack is my name"));
    CHECK(is_verbatim("a  b", "a b"));
    CHECK(is_verbatim("a\tb\n c", "a b c"));
    CHECK(is_verbatim("caf\xC3\xA9", "cafe\xCC\x81"));
    CHECK_FALSE(is_verbatim("same words", "same words!"));
}

// Reference values frozen from an independent Jaccard+LCS script.
TEST_CASE("lexical paraphrase score matches reference values") {
    CHECK(default_paraphrase_score("My name is Jack", "My name is Jack") == doctest::Approx(1.0));
    CHECK(default_paraphrase_score("My name is Jack", "Jack is my name") ==
          doctest::Approx(0.75).epsilon(1e-12));
    CHECK(default_paraphrase_score("alpha beta gamma", "delta epsilon zeta") ==
          doctest::Approx(0.0));
    CHECK(default_paraphrase_score("the cat sat on the mat", "a cat sat near that mat") ==
          doctest::Approx(0.4375).epsilon(1e-12));
    CHECK(default_paraphrase_score("", "") == doctest::Approx(1.0));
    CHECK(default_paraphrase_score("words here", "") == doctest::Approx(0.0));
}

TEST_CASE("lexical paraphrase score is symmetric") {
    const std::vector<std::pair<std::string, std::string>> pairs = {
        {"one two three four", "four three two one"},
        {"the quick brown fox", "the quick red fox jumps"},
        {"a b c d e f", "b c d"},
    };
    for (const auto& [a, b] : pairs) {
        CHECK(std::abs(default_paraphrase_score(a, b) - default_paraphrase_score(b, a)) < 1e-9);
        CHECK(default_paraphrase_score(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("classification precedence on the canonical examples") {
    const LexicalScorer scorer;

    const std::string verbatim_query = "My name is Jack";
    CHECK(classify_case(full_span(verbatim_query, verbatim_query), verbatim_query, verbatim_query,
                        scorer) == MemorizationType::Verbatim);

    const std::string para_query = "My name is Jack";
    const std::string para_cand = "Jack is my name";
    const auto para =
        classify_case_detail(full_span(para_query, para_cand), para_query, para_cand, scorer);
    CHECK(para.mem_type == MemorizationType::ParaphraseHigh);
    REQUIRE(para.paraphrase_p.has_value());
    CHECK(*para.paraphrase_p == doctest::Approx(0.75).epsilon(1e-12));

    const std::string idea_query = "A boy tell me in the class that his name is Jack";
    const std::string idea_cand = "A boy is Jack";
    CHECK(classify_case(full_span(idea_query, idea_cand), idea_query, idea_cand, scorer) ==
          MemorizationType::Idea);
}

TEST_CASE("idea rule uses sentence-count ratio") {
    const LexicalScorer scorer;
    const std::string many =
        "A rare bird appeared. It sang all night. Neighbors recorded it. Reporters arrived.";
    const std::string one = "A rare bird appeared, sang all night, and drew reporters.";
    CHECK(classify_case(full_span(many, one), many, one, scorer) == MemorizationType::Idea);
    CHECK(classify_case(full_span(one, many), one, many, scorer) == MemorizationType::Idea);
}

TEST_CASE("paraphrase band boundaries") {
    const std::string a = "The festival opened with fireworks over the bay";
    const std::string b = "Fireworks over the bay opened the festival";
    const auto fragments = full_span(a, b);

    auto type_at = [&](double p) {
        return classify_case(fragments, a, b, FixedScorer(p));
    };
    CHECK(type_at(0.7) == MemorizationType::ParaphraseHigh);
    CHECK(type_at(0.5) == MemorizationType::ParaphraseHigh);
    CHECK(type_at(0.99) == MemorizationType::ParaphraseHigh);
    CHECK(type_at(0.3) == MemorizationType::ParaphraseLow);
    CHECK(type_at(0.995) == MemorizationType::ParaphraseLow);

    const auto low = classify_case_detail(fragments, a, b, FixedScorer(0.3));
    REQUIRE(low.paraphrase_p.has_value());
    CHECK(*low.paraphrase_p == doctest::Approx(0.3));
}

TEST_CASE("classification rejects empty fragment lists") {
    const LexicalScorer scorer;
    CHECK_THROWS_AS(classify_case({}, "a", "b", scorer), ValidationError);
}

TEST_CASE("build_case records provenance and self matches") {
    const LexicalScorer scorer;
    const std::string query = "My name is Jack";
    const std::string cand = "Jack is my name";
    const auto mem_case = build_case("p1", "p1", full_span(query, cand), query, cand, scorer);
    CHECK(mem_case.self_match);
    CHECK(mem_case.mem_type == MemorizationType::ParaphraseHigh);
    REQUIRE(mem_case.paraphrase_p.has_value());

    const auto other = build_case("p1", "p2", full_span(query, query), query, query, scorer);
    CHECK_FALSE(other.self_match);
    CHECK(other.mem_type == MemorizationType::Verbatim);
    CHECK_FALSE(other.paraphrase_p.has_value());
}

TEST_CASE("memorization type strings round-trip") {
    for (MemorizationType type :
         {MemorizationType::Verbatim, MemorizationType::ParaphraseHigh,
          MemorizationType::ParaphraseLow, MemorizationType::Idea}) {
        CHECK(memorization_type_from_string(to_string(type)) == type);
    }
    CHECK_THROWS_AS(memorization_type_from_string("bogus"), ValidationError);
}

TEST_CASE("command scorer speaks the length-prefixed protocol") {
    const std::string script = std::string(TEST_SUPPORT_DIR) + "/scorer_stub.py";

    const CommandScorer fixed("python3 " + script + " 0.42");
    CHECK(fixed.score("left text", "right text") == doctest::Approx(0.42));

    const CommandScorer echo("python3 " + script);
    CHECK(echo.score("same", "same") == doctest::Approx(1.0));
    CHECK(echo.score("one", "two") == doctest::Approx(0.6));
    CHECK(echo.score("with\nnewlines\nand spaces", "with\nnewlines\nand spaces") ==
          doctest::Approx(1.0));

    const CommandScorer failing("false");
    CHECK_THROWS_AS(failing.score("a", "b"), IoError);

    const CommandScorer garbage("echo not-a-number");
    CHECK_THROWS_AS(garbage.score("a", "b"), FormatError);

    const CommandScorer out_of_range("echo 1.5");
    CHECK_THROWS_AS(out_of_range.score("a", "b"), FormatError);
}

TEST_CASE("classification in a paraphrase band is scorer independent") {
    const std::string a = "Gulls circled the harbor before the storm arrived";
    const std::string b = "Before the storm arrived gulls circled the harbor";
    const auto fragments = full_span(a, b);
    const auto with_fixed = classify_case(fragments, a, b, FixedScorer(0.8));
    const std::string script = std::string(TEST_SUPPORT_DIR) + "/scorer_stub.py";
    const auto with_command = classify_case(fragments, a, b, CommandScorer("python3 " + script + " 0.8"));
    CHECK(with_fixed == with_command);
}
