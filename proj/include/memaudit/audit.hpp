#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "memaudit/alignment.hpp"
#include "memaudit/classifier.hpp"
#include "memaudit/corpus.hpp"
#include "memaudit/metrics.hpp"

namespace memaudit {

/// Fully-resolved settings for one end-to-end audit. Defaults: 50-token
/// prompts, top-10 retrieval, 50-char fragments, paraphrase band 0.5 to 0.99,
/// 1000 bootstrap resamples at the 5/95 percentiles, 10000 prompts audited.
struct AuditConfig {
    std::string corpus_path;
    std::string generations_path;
    std::string report_path;  // empty: nothing written, outcome returned only
    ReportFormat report_format = ReportFormat::Json;

    std::size_t k_prefix_tokens = 50;
    ShortInputFallback fallback;  // applied to inputs with <= k tokens
    std::size_t top_k_candidates = 10;
    AlignConfig align;
    ClassifierConfig classifier;
    std::string scorer_command;  // empty: built-in lexical scorer

    std::size_t bootstrap_resamples = 1000;
    int level_low = 5;
    int level_high = 95;
    std::uint64_t seed = 0;
    std::size_t n_limit = 10000;  // max generations audited; 0 means all
    std::size_t threads = 1;
};

/// JSON config document mirroring the AuditConfig field names (see
/// docs/FORMATS.md). Every key is optional; unknown keys are rejected.
AuditConfig parse_audit_config(const std::string& json_text);
AuditConfig load_audit_config(const std::string& path);

/// The resolved config as a JSON document, embedded in reports so a stored
/// report pins down the run that produced it.
std::string audit_config_echo(const AuditConfig& config);

struct AuditOutcome {
    AuditResult result;  // one case per prompt, counts and rates
    std::map<std::string, ConfidenceInterval> intervals;
    /// Every detected generation/candidate pair in generation order, then
    /// retrieval rank: multi-candidate hits stay visible here even though
    /// rates count each prompt once.
    std::vector<MemorizationCase> cases;
    std::size_t corpus_size = 0;
};

/// Full pipeline: load corpus and generations, split prefixes from suffixes,
/// index the suffixes, retrieve top-K candidates per generation, align each
/// pair, classify hits, aggregate, bootstrap the rate intervals, and write
/// the report when report_path is set. Generations are audited across
/// `threads` workers; outputs merge in generation order, so the outcome does
/// not depend on scheduling. Every generation id must exist in the corpus.
AuditOutcome run_audit(const AuditConfig& config);

}  // namespace memaudit
