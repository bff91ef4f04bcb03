#include "memaudit/audit.hpp"

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <utility>

#include "json.hpp"

#include "memaudit/errors.hpp"
#include "memaudit/rng.hpp"
#include "memaudit/searchindex.hpp"

namespace memaudit {

namespace {

const char* report_format_name(ReportFormat format) {
    switch (format) {
        case ReportFormat::Json: return "json";
        case ReportFormat::Text: return "text";
        case ReportFormat::Csv: return "csv";
    }
    throw ValidationError("unknown report format value");
}

void reject_unknown_keys(const nlohmann::json& doc, const std::unordered_set<std::string>& known,
                         const std::string& scope) {
    for (const auto& item : doc.items()) {
        if (!known.count(item.key())) {
            throw ValidationError("unknown config key: " + scope + item.key());
        }
    }
}

template <typename T>
void assign_field(const nlohmann::json& doc, const std::string& key, T& out) {
    if (!doc.contains(key)) return;
    try {
        out = doc.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError("config field has the wrong type: " + key);
    }
}

void parse_fallback(const nlohmann::json& doc, ShortInputFallback& out) {
    if (!doc.is_object()) throw ValidationError("config field fallback must be an object");
    reject_unknown_keys(doc, {"mode", "count"}, "fallback.");
    std::string mode = "half";
    assign_field(doc, "mode", mode);
    if (mode == "half") {
        out = ShortInputFallback::half();
    } else if (mode == "fixed") {
        std::size_t count = ShortInputFallback{}.fixed_count;
        assign_field(doc, "count", count);
        out = ShortInputFallback::fixed(count);
    } else {
        throw ValidationError("config field fallback.mode must be \"half\" or \"fixed\"");
    }
}

void parse_align(const nlohmann::json& doc, AlignConfig& out) {
    if (!doc.is_object()) throw ValidationError("config field align must be an object");
    reject_unknown_keys(doc,
                        {"seed_cosine_threshold", "seed_dice_threshold", "maxgap_sentences",
                         "min_match_chars", "extra_abbreviations"},
                        "align.");
    assign_field(doc, "seed_cosine_threshold", out.seed_cosine_threshold);
    assign_field(doc, "seed_dice_threshold", out.seed_dice_threshold);
    assign_field(doc, "maxgap_sentences", out.maxgap_sentences);
    assign_field(doc, "min_match_chars", out.min_match_chars);
    assign_field(doc, "extra_abbreviations", out.extra_abbreviations);
}

void parse_classifier(const nlohmann::json& doc, ClassifierConfig& out) {
    if (!doc.is_object()) throw ValidationError("config field classifier must be an object");
    reject_unknown_keys(doc, {"idea_ratio", "paraphrase_high_min", "paraphrase_high_max"},
                        "classifier.");
    assign_field(doc, "idea_ratio", out.idea_ratio);
    assign_field(doc, "paraphrase_high_min", out.paraphrase_high_min);
    assign_field(doc, "paraphrase_high_max", out.paraphrase_high_max);
}

template <typename Fn>
auto run_stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const ValidationError& e) {
        throw ValidationError(std::string(name) + ": " + e.what());
    } catch (const IoError& e) {
        throw IoError(std::string(name) + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(std::string(name) + ": " + e.what());
    } catch (const NotFoundError& e) {
        throw NotFoundError(std::string(name) + ": " + e.what());
    }
}

}  // namespace

AuditConfig parse_audit_config(const std::string& json_text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw FormatError("config root must be a JSON object");

    reject_unknown_keys(doc,
                        {"corpus_path", "generations_path", "report_path", "report_format",
                         "k_prefix_tokens", "fallback", "top_k_candidates", "align", "classifier",
                         "scorer_command", "bootstrap_resamples", "level_low", "level_high",
                         "seed", "n_limit", "threads"},
                        "");

    AuditConfig config;
    assign_field(doc, "corpus_path", config.corpus_path);
    assign_field(doc, "generations_path", config.generations_path);
    assign_field(doc, "report_path", config.report_path);
    if (doc.contains("report_format")) {
        std::string name;
        assign_field(doc, "report_format", name);
        config.report_format = report_format_from_string(name);
    }
    assign_field(doc, "k_prefix_tokens", config.k_prefix_tokens);
    if (doc.contains("fallback")) parse_fallback(doc.at("fallback"), config.fallback);
    assign_field(doc, "top_k_candidates", config.top_k_candidates);
    if (doc.contains("align")) parse_align(doc.at("align"), config.align);
    if (doc.contains("classifier")) parse_classifier(doc.at("classifier"), config.classifier);
    assign_field(doc, "scorer_command", config.scorer_command);
    assign_field(doc, "bootstrap_resamples", config.bootstrap_resamples);
    assign_field(doc, "level_low", config.level_low);
    assign_field(doc, "level_high", config.level_high);
    assign_field(doc, "seed", config.seed);
    assign_field(doc, "n_limit", config.n_limit);
    assign_field(doc, "threads", config.threads);
    return config;
}

AuditConfig load_audit_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_audit_config(buffer.str());
}

std::string audit_config_echo(const AuditConfig& config) {
    nlohmann::json fallback = {{"mode", config.fallback.mode == ShortInputFallback::Mode::HalfTokens
                                            ? "half"
                                            : "fixed"}};
    if (config.fallback.mode == ShortInputFallback::Mode::FixedCount) {
        fallback["count"] = config.fallback.fixed_count;
    }
    const nlohmann::json doc = {
        {"corpus_path", config.corpus_path},
        {"generations_path", config.generations_path},
        {"report_path", config.report_path},
        {"report_format", report_format_name(config.report_format)},
        {"k_prefix_tokens", config.k_prefix_tokens},
        {"fallback", std::move(fallback)},
        {"top_k_candidates", config.top_k_candidates},
        {"align",
         {{"seed_cosine_threshold", config.align.seed_cosine_threshold},
          {"seed_dice_threshold", config.align.seed_dice_threshold},
          {"maxgap_sentences", config.align.maxgap_sentences},
          {"min_match_chars", config.align.min_match_chars},
          {"extra_abbreviations", config.align.extra_abbreviations}}},
        {"classifier",
         {{"idea_ratio", config.classifier.idea_ratio},
          {"paraphrase_high_min", config.classifier.paraphrase_high_min},
          {"paraphrase_high_max", config.classifier.paraphrase_high_max}}},
        {"scorer_command", config.scorer_command},
        {"bootstrap_resamples", config.bootstrap_resamples},
        {"level_low", config.level_low},
        {"level_high", config.level_high},
        {"seed", config.seed},
        {"n_limit", config.n_limit},
        {"threads", config.threads},
    };
    return doc.dump();
}

AuditOutcome run_audit(const AuditConfig& config) {
    if (config.corpus_path.empty()) throw ValidationError("audit: corpus_path is required");
    if (config.generations_path.empty()) {
        throw ValidationError("audit: generations_path is required");
    }
    if (config.k_prefix_tokens == 0) {
        throw ValidationError("audit: k_prefix_tokens must be positive");
    }
    if (config.top_k_candidates == 0) {
        throw ValidationError("audit: top_k_candidates must be positive");
    }
    if (config.bootstrap_resamples == 0) {
        throw ValidationError("audit: bootstrap_resamples must be positive");
    }

    const auto corpus = run_stage("load", [&] { return load_corpus(config.corpus_path); });
    const auto generations = run_stage("load", [&] {
        return load_generations(config.generations_path,
                                config.n_limit == 0 ? std::nullopt
                                                    : std::optional<std::size_t>(config.n_limit));
    });

    std::unordered_set<std::string> corpus_ids;
    corpus_ids.reserve(corpus.size());
    for (const auto& example : corpus) corpus_ids.insert(example.id);
    std::vector<std::string> missing;
    for (const auto& generation : generations) {
        if (!corpus_ids.count(generation.example_id)) missing.push_back(generation.example_id);
    }
    if (!missing.empty()) {
        std::ostringstream message;
        message << "audit: generation ids missing from the corpus:";
        const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
        for (std::size_t i = 0; i < shown; ++i) message << ' ' << missing[i];
        if (missing.size() > shown) message << " (+" << missing.size() - shown << " more)";
        throw ValidationError(message.str());
    }

    std::vector<PrefixSuffixPair> pairs;
    pairs.reserve(corpus.size());
    run_stage("split", [&] {
        for (const auto& example : corpus) {
            pairs.push_back(split_prefix_suffix(example, config.k_prefix_tokens, config.fallback));
        }
        return 0;
    });
    std::unordered_map<std::string, const std::string*> suffix_by_id;
    suffix_by_id.reserve(pairs.size());
    for (const auto& pair : pairs) suffix_by_id.emplace(pair.example_id, &pair.suffix);

    const SuffixIndex index = run_stage("index", [&] { return SuffixIndex::build(pairs); });

    std::unique_ptr<ParaphraseScorer> scorer;
    if (config.scorer_command.empty()) {
        scorer = std::make_unique<LexicalScorer>();
    } else {
        scorer = std::make_unique<CommandScorer>(config.scorer_command);
    }

    // One slot per generation keeps the merged output in file order no matter
    // how the workers interleave.
    std::vector<std::vector<MemorizationCase>> slots(generations.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;
    std::atomic<bool> stop{false};

    auto audit_one = [&](std::size_t i) {
        const auto& generation = generations[i];
        const auto candidates =
            index.retrieve_top_k(generation.generation, config.top_k_candidates,
                                 generation.example_id);
        for (const auto& candidate : candidates) {
            const std::string& suffix = *suffix_by_id.at(candidate.doc_id);
            auto fragments = detect(generation.generation, suffix, config.align, index);
            if (fragments.empty()) continue;
            slots[i].push_back(build_case(generation.example_id, candidate.doc_id, fragments,
                                          generation.generation, suffix, *scorer,
                                          config.classifier));
        }
    };
    auto worker = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= generations.size() || stop.load()) break;
            try {
                audit_one(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
                break;
            }
        }
    };

    std::size_t workers = config.threads == 0
                              ? std::max<unsigned>(1, std::thread::hardware_concurrency())
                              : config.threads;
    workers = std::min(std::max<std::size_t>(workers, 1), std::max<std::size_t>(generations.size(), 1));
    if (workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& thread : pool) thread.join();
    }
    if (first_error) {
        run_stage("detect", [&]() -> int { std::rethrow_exception(first_error); });
    }

    AuditOutcome outcome;
    outcome.corpus_size = corpus.size();
    for (auto& slot : slots) {
        for (auto& mem_case : slot) outcome.cases.push_back(std::move(mem_case));
    }

    run_stage("aggregate", [&] {
        outcome.result = aggregate(outcome.cases, generations.size());
        return 0;
    });

    run_stage("bootstrap", [&] {
        const std::vector<std::pair<std::string, std::optional<MemorizationType>>> keys = {
            {"total", std::nullopt},
            {"verbatim", MemorizationType::Verbatim},
            {"idea", MemorizationType::Idea},
            {"paraphrase_high", MemorizationType::ParaphraseHigh},
            {"paraphrase_low", MemorizationType::ParaphraseLow},
        };
        std::size_t stream = 0;
        for (const auto& [key, type] : keys) {
            const std::size_t count =
                type ? outcome.result.counts.at(*type) : outcome.result.total_count;
            outcome.intervals[key] = bootstrap_ci(
                indicator_vector(count, outcome.result.n), config.bootstrap_resamples,
                rng::substream_seed(config.seed, stream), config.level_low, config.level_high);
            ++stream;
        }
        return 0;
    });

    if (!config.report_path.empty()) {
        run_stage("report", [&] {
            emit_report(outcome.result, outcome.intervals, config.report_path,
                        config.report_format, audit_config_echo(config), config.seed,
                        current_utc_timestamp(), &outcome.cases);
            return 0;
        });
    }
    return outcome;
}

}  // namespace memaudit
