#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "memaudit/audit.hpp"
#include "memaudit/errors.hpp"

using namespace memaudit;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

std::string doc_line(const std::string& id, const std::string& prefix, const std::string& suffix) {
    return R"({"id": ")" + id + R"(", "input": ")" + prefix + " " + suffix + R"("})" + "\n";
}

std::string gen_line(const std::string& id, const std::string& generation) {
    return R"({"id": ")" + id + R"(", "generation": ")" + generation + R"("})" + "\n";
}

const std::string kSuffixA =
    "magnets hold the painted wooden door against winter storms tonight.";
const std::string kSuffixB =
    "sailors counted bright lanterns across the harbor wall at dusk.";
const std::string kSuffixC =
    "gardeners planted rows of tulips behind the old stone chapel.";

std::string write_toy_corpus(const std::string& name) {
    return write_temp(name, doc_line("doc-a", "alpha beta gamma delta epsilon", kSuffixA) +
                                doc_line("doc-b", "zeta eta theta iota kappa", kSuffixB) +
                                doc_line("doc-c", "lambda mu nu xi omicron", kSuffixC));
}

AuditConfig toy_config(const std::string& corpus_path, const std::string& generations_path) {
    AuditConfig config;
    config.corpus_path = corpus_path;
    config.generations_path = generations_path;
    config.k_prefix_tokens = 5;
    config.align.min_match_chars = 40;
    config.bootstrap_resamples = 50;
    return config;
}

}  // namespace

TEST_CASE("audit config defaults mirror the documented values") {
    const AuditConfig config = parse_audit_config("{}");
    CHECK(config.k_prefix_tokens == 50);
    CHECK(config.top_k_candidates == 10);
    CHECK(config.align.min_match_chars == 50);
    CHECK(config.align.seed_cosine_threshold == doctest::Approx(0.30));
    CHECK(config.align.seed_dice_threshold == doctest::Approx(0.33));
    CHECK(config.align.maxgap_sentences == 4);
    CHECK(config.classifier.idea_ratio == doctest::Approx(2.0));
    CHECK(config.classifier.paraphrase_high_min == doctest::Approx(0.5));
    CHECK(config.classifier.paraphrase_high_max == doctest::Approx(0.99));
    CHECK(config.bootstrap_resamples == 1000);
    CHECK(config.level_low == 5);
    CHECK(config.level_high == 95);
    CHECK(config.n_limit == 10000);
    CHECK(config.threads == 1);
    CHECK(config.seed == 0);
    CHECK(config.report_format == ReportFormat::Json);
    CHECK(config.fallback.mode == ShortInputFallback::Mode::HalfTokens);
    CHECK(config.scorer_command.empty());
}

TEST_CASE("audit config parses every documented field") {
    const AuditConfig config = parse_audit_config(R"({
        "corpus_path": "c.jsonl",
        "generations_path": "g.jsonl",
        "report_path": "r.json",
        "report_format": "csv",
        "k_prefix_tokens": 7,
        "fallback": {"mode": "fixed", "count": 9},
        "top_k_candidates": 3,
        "align": {"seed_cosine_threshold": 0.4, "seed_dice_threshold": 0.5,
                  "maxgap_sentences": 2, "min_match_chars": 25,
                  "extra_abbreviations": ["corp."]},
        "classifier": {"idea_ratio": 3.0, "paraphrase_high_min": 0.6,
                       "paraphrase_high_max": 0.95},
        "scorer_command": "python3 score.py",
        "bootstrap_resamples": 200,
        "level_low": 10,
        "level_high": 90,
        "seed": 42,
        "n_limit": 500,
        "threads": 4
    })");
    CHECK(config.corpus_path == "c.jsonl");
    CHECK(config.generations_path == "g.jsonl");
    CHECK(config.report_path == "r.json");
    CHECK(config.report_format == ReportFormat::Csv);
    CHECK(config.k_prefix_tokens == 7);
    CHECK(config.fallback.mode == ShortInputFallback::Mode::FixedCount);
    CHECK(config.fallback.fixed_count == 9);
    CHECK(config.top_k_candidates == 3);
    CHECK(config.align.seed_cosine_threshold == doctest::Approx(0.4));
    CHECK(config.align.seed_dice_threshold == doctest::Approx(0.5));
    CHECK(config.align.maxgap_sentences == 2);
    CHECK(config.align.min_match_chars == 25);
    REQUIRE(config.align.extra_abbreviations.size() == 1);
    CHECK(config.align.extra_abbreviations[0] == "corp.");
    CHECK(config.classifier.idea_ratio == doctest::Approx(3.0));
    CHECK(config.classifier.paraphrase_high_min == doctest::Approx(0.6));
    CHECK(config.classifier.paraphrase_high_max == doctest::Approx(0.95));
    CHECK(config.scorer_command == "python3 score.py");
    CHECK(config.bootstrap_resamples == 200);
    CHECK(config.level_low == 10);
    CHECK(config.level_high == 90);
    CHECK(config.seed == 42);
    CHECK(config.n_limit == 500);
    CHECK(config.threads == 4);
}

TEST_CASE("audit config rejects unknown keys, bad types and bad values") {
    CHECK_THROWS_WITH_AS(parse_audit_config(R"({"oops": 1})"),
                         doctest::Contains("unknown config key: oops"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_audit_config(R"({"align": {"oops": 1}})"),
                         doctest::Contains("align.oops"), ValidationError);
    CHECK_THROWS_WITH_AS(parse_audit_config(R"({"k_prefix_tokens": "fifty"})"),
                         doctest::Contains("k_prefix_tokens"), ValidationError);
    CHECK_THROWS_AS(parse_audit_config(R"({"fallback": {"mode": "sideways"}})"),
                    ValidationError);
    CHECK_THROWS_AS(parse_audit_config(R"({"report_format": "xml"})"), ValidationError);
    CHECK_THROWS_AS(parse_audit_config("not json"), FormatError);
    CHECK_THROWS_AS(parse_audit_config("[1, 2]"), FormatError);
}

TEST_CASE("audit config echo round-trips through the parser") {
    AuditConfig config;
    config.corpus_path = "corpus.jsonl";
    config.generations_path = "gens.jsonl";
    config.seed = 77;
    config.fallback = ShortInputFallback::fixed(11);
    config.align.extra_abbreviations = {"fig."};
    config.report_format = ReportFormat::Text;

    const AuditConfig parsed = parse_audit_config(audit_config_echo(config));
    CHECK(parsed.corpus_path == config.corpus_path);
    CHECK(parsed.generations_path == config.generations_path);
    CHECK(parsed.seed == 77);
    CHECK(parsed.fallback.mode == ShortInputFallback::Mode::FixedCount);
    CHECK(parsed.fallback.fixed_count == 11);
    REQUIRE(parsed.align.extra_abbreviations.size() == 1);
    CHECK(parsed.align.extra_abbreviations[0] == "fig.");
    CHECK(parsed.report_format == ReportFormat::Text);
}

TEST_CASE("run_audit detects plants, dedupes per prompt and keeps provenance") {
    const auto corpus_path = write_toy_corpus("audit_corpus.jsonl");
    const auto gens_path = write_temp(
        "audit_gens.jsonl",
        gen_line("doc-a", kSuffixA) + gen_line("doc-b", kSuffixB + " " + kSuffixC) +
            gen_line("doc-c",
                     "quantum flux capacitors reverse polarity spontaneously underwater."));
    AuditConfig config = toy_config(corpus_path, gens_path);

    const AuditOutcome outcome = run_audit(config);
    CHECK(outcome.corpus_size == 3);
    CHECK(outcome.result.n == 3);
    CHECK(outcome.result.total_count == 2);
    CHECK(outcome.result.counts.at(MemorizationType::Verbatim) == 2);
    CHECK(outcome.result.rate_total() == doctest::Approx(2.0 / 3.0));

    REQUIRE(outcome.cases.size() == 3);
    CHECK(outcome.cases[0].query_id == "doc-a");
    CHECK(outcome.cases[0].matched_doc_id == "doc-a");
    CHECK(outcome.cases[0].self_match);
    CHECK(outcome.cases[0].mem_type == MemorizationType::Verbatim);
    CHECK(outcome.cases[1].query_id == "doc-b");
    CHECK(outcome.cases[2].query_id == "doc-b");

    REQUIRE(outcome.intervals.count("total") == 1);
    REQUIRE(outcome.intervals.count("verbatim") == 1);
    REQUIRE(outcome.intervals.count("idea") == 1);
    REQUIRE(outcome.intervals.count("paraphrase_high") == 1);
    REQUIRE(outcome.intervals.count("paraphrase_low") == 1);
    for (const auto& [key, interval] : outcome.intervals) {
        CHECK(interval.low <= interval.high);
        CHECK(interval.low >= 0.0);
        CHECK(interval.high <= 1.0);
    }
    CHECK(outcome.intervals.at("idea").low == 0.0);
    CHECK(outcome.intervals.at("idea").high == 0.0);
}

TEST_CASE("run_audit writes a report whose cases are the provenance list") {
    const auto corpus_path = write_toy_corpus("audit_corpus_report.jsonl");
    const auto gens_path = write_temp("audit_gens_report.jsonl",
                                      gen_line("doc-a", kSuffixA) +
                                          gen_line("doc-b", kSuffixB + " " + kSuffixC));
    AuditConfig config = toy_config(corpus_path, gens_path);
    config.report_path =
        (std::filesystem::temp_directory_path() / "audit_report.json").string();

    run_audit(config);
    const ParsedReport parsed = parse_report(config.report_path);
    CHECK(parsed.n == 2);
    CHECK(parsed.total_count == 2);
    CHECK(parsed.counts.at(MemorizationType::Verbatim) == 2);
    CHECK(parsed.case_count == 3);
}

TEST_CASE("run_audit honors the prompt limit") {
    const auto corpus_path = write_toy_corpus("audit_corpus_limit.jsonl");
    const auto gens_path =
        write_temp("audit_gens_limit.jsonl", gen_line("doc-a", kSuffixA) +
                                                 gen_line("doc-b", kSuffixB) +
                                                 gen_line("doc-c", kSuffixC));
    AuditConfig config = toy_config(corpus_path, gens_path);
    config.n_limit = 1;

    const AuditOutcome outcome = run_audit(config);
    CHECK(outcome.result.n == 1);
    CHECK(outcome.result.total_count == 1);
    REQUIRE(outcome.cases.size() == 1);
    CHECK(outcome.cases[0].query_id == "doc-a");
}

TEST_CASE("run_audit with no shared vocabulary reports a zero rate") {
    const auto corpus_path = write_toy_corpus("audit_corpus_zero.jsonl");
    const auto gens_path = write_temp(
        "audit_gens_zero.jsonl",
        gen_line("doc-a", "entirely disjoint vocabulary appears in this generation text.") +
            gen_line("doc-b", "nothing here resembles any indexed suffix whatsoever."));
    AuditConfig config = toy_config(corpus_path, gens_path);

    const AuditOutcome outcome = run_audit(config);
    CHECK(outcome.result.n == 2);
    CHECK(outcome.result.total_count == 0);
    CHECK(outcome.result.rate_total() == 0.0);
    CHECK(outcome.cases.empty());
    CHECK(outcome.intervals.at("total").low == 0.0);
    CHECK(outcome.intervals.at("total").high == 0.0);
}

TEST_CASE("run_audit lists generation ids missing from the corpus") {
    const auto corpus_path = write_toy_corpus("audit_corpus_missing.jsonl");
    const auto gens_path = write_temp("audit_gens_missing.jsonl",
                                      gen_line("doc-a", kSuffixA) + gen_line("ghost", kSuffixB));
    AuditConfig config = toy_config(corpus_path, gens_path);
    CHECK_THROWS_WITH_AS(run_audit(config), doctest::Contains("ghost"), ValidationError);
}

TEST_CASE("run_audit results do not depend on the worker count") {
    const auto corpus_path = write_toy_corpus("audit_corpus_threads.jsonl");
    const auto gens_path = write_temp(
        "audit_gens_threads.jsonl",
        gen_line("doc-a", kSuffixA) + gen_line("doc-b", kSuffixB + " " + kSuffixC) +
            gen_line("doc-c", kSuffixC));
    AuditConfig config = toy_config(corpus_path, gens_path);

    const AuditOutcome single = run_audit(config);
    config.threads = 4;
    const AuditOutcome pooled = run_audit(config);

    CHECK(pooled.result.total_count == single.result.total_count);
    REQUIRE(pooled.cases.size() == single.cases.size());
    for (std::size_t i = 0; i < single.cases.size(); ++i) {
        CHECK(pooled.cases[i].query_id == single.cases[i].query_id);
        CHECK(pooled.cases[i].matched_doc_id == single.cases[i].matched_doc_id);
        CHECK(pooled.cases[i].mem_type == single.cases[i].mem_type);
    }
    const std::string left = render_report(single.result, single.intervals, ReportFormat::Json,
                                           audit_config_echo(config), config.seed, "T");
    const std::string right = render_report(pooled.result, pooled.intervals, ReportFormat::Json,
                                            audit_config_echo(config), config.seed, "T");
    CHECK(left == right);
}

TEST_CASE("run_audit validates its inputs up front") {
    AuditConfig config;
    CHECK_THROWS_AS(run_audit(config), ValidationError);
    config.corpus_path = "somewhere.jsonl";
    CHECK_THROWS_AS(run_audit(config), ValidationError);
    config.generations_path = "elsewhere.jsonl";
    config.k_prefix_tokens = 0;
    CHECK_THROWS_AS(run_audit(config), ValidationError);
    config.k_prefix_tokens = 50;
    CHECK_THROWS_AS(run_audit(config), IoError);
}

TEST_CASE("run_audit propagates an empty generations file as a validation error") {
    const auto corpus_path = write_toy_corpus("audit_corpus_empty.jsonl");
    const auto gens_path = write_temp("audit_gens_empty.jsonl", "");
    AuditConfig config = toy_config(corpus_path, gens_path);
    CHECK_THROWS_WITH_AS(run_audit(config), doctest::Contains("aggregate"), ValidationError);
}

TEST_CASE("load_audit_config reads a file and reports missing ones") {
    const auto path = write_temp("audit_config.json", R"({"seed": 9, "threads": 2})");
    const AuditConfig config = load_audit_config(path);
    CHECK(config.seed == 9);
    CHECK(config.threads == 2);
    CHECK_THROWS_AS(load_audit_config("/nonexistent/audit_config.json"), IoError);
}
