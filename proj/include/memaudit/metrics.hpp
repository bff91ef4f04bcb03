#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memaudit/classifier.hpp"

namespace memaudit {

struct AuditResult {
    std::size_t n = 0;
    std::map<std::string, MemorizationCase> per_prompt;  // detected prompts only
    std::map<MemorizationType, std::size_t> counts;      // every type keyed, zeros included
    std::size_t total_count = 0;

    double rate_total() const;
    double rate(MemorizationType type) const;
};

struct ConfidenceInterval {
    double low = 0.0;
    double high = 0.0;
    int level_low = 5;
    int level_high = 95;
    std::size_t resamples = 1000;
};

/// Keeps at most one case per prompt: highest-precedence type first
/// (verbatim, idea, paraphrase high, paraphrase low), then highest
/// seed-weighted mean cosine, then lowest doc id.
AuditResult aggregate(const std::vector<MemorizationCase>& cases, std::size_t n);

/// Seed-weighted mean cosine across a case's fragments.
double case_mean_cosine(const MemorizationCase& mem_case);

/// n-length 0/1 indicator vector for bootstrap input: `count` ones followed
/// by n − count zeros.
std::vector<double> indicator_vector(std::size_t count, std::size_t n);

/// Percentile bootstrap of the mean: B resamples with replacement, resample
/// r drawn from an engine seeded with substream r of `seed`, each index
/// drawn as next_u64 % n. Interval bounds use nearest-rank percentiles
/// (sorted_means[ceil(q·B/100) − 1]).
ConfidenceInterval bootstrap_ci(const std::vector<double>& indicators, std::size_t resamples,
                                std::uint64_t seed, int level_low = 5, int level_high = 95);

enum class ReportFormat { Json, Text, Csv };

ReportFormat report_format_from_string(const std::string& name);

std::string current_utc_timestamp();

/// Structured report: counts, rates, intervals, config echo and per-case
/// provenance. Field names are documented in docs/FORMATS.md. The timestamp
/// appears only in the JSON format's generated_at field; all other content
/// is deterministic for a fixed result and seed. By default the case list is
/// the per-prompt winners; passing `provenance` lists those cases instead,
/// so multi-candidate hits stay visible even though counts keep one per
/// prompt.
void emit_report(const AuditResult& result,
                 const std::map<std::string, ConfidenceInterval>& intervals,
                 const std::string& path, ReportFormat format, const std::string& config_echo,
                 std::uint64_t seed, const std::string& timestamp = current_utc_timestamp(),
                 const std::vector<MemorizationCase>* provenance = nullptr);

std::string render_report(const AuditResult& result,
                          const std::map<std::string, ConfidenceInterval>& intervals,
                          ReportFormat format, const std::string& config_echo, std::uint64_t seed,
                          const std::string& timestamp = current_utc_timestamp(),
                          const std::vector<MemorizationCase>* provenance = nullptr);

struct ParsedReport {
    std::size_t n = 0;
    std::size_t total_count = 0;
    std::map<MemorizationType, std::size_t> counts;
    std::size_t case_count = 0;
};

/// Reads back a JSON report; counts round-trip exactly.
ParsedReport parse_report(const std::string& path);

}  // namespace memaudit
