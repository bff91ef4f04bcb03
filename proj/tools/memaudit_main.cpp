#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "memaudit/attention.hpp"
#include "memaudit/audit.hpp"
#include "memaudit/errors.hpp"
#include "memaudit/metrics.hpp"
#include "memaudit/sparsecode.hpp"

namespace {

using namespace memaudit;

std::ostream& progress() { return std::cerr; }

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open output file for writing: " + path);
    out << content;
    if (!out) throw IoError("failed writing output file: " + path);
}

struct AuditCli {
    std::string config_path;
    AuditConfig config;
    std::string fallback_mode;
    std::size_t fallback_count = 0;
    std::string format_name;

    CLI::App* attach(CLI::App& app) {
        auto* cmd = app.add_subcommand(
            "audit", "Run the end-to-end memorization audit and emit a report");
        cmd->add_option("--config", config_path, "JSON config file; flags override its fields");
        cmd->add_option("--corpus_path", config.corpus_path, "Fine-tuning corpus (JSONL)");
        cmd->add_option("--generations_path", config.generations_path,
                        "Model generations (JSONL)");
        cmd->add_option("--report_path", config.report_path,
                        "Report destination (default: standard output)");
        cmd->add_option("--report_format", format_name, "json, text or csv");
        cmd->add_option("--k_prefix_tokens", config.k_prefix_tokens,
                        "Prompt length in tokens used for the prefix/suffix split");
        cmd->add_option("--fallback.mode", fallback_mode,
                        "Split policy for inputs of at most k tokens: half or fixed");
        cmd->add_option("--fallback.count", fallback_count,
                        "Prefix token count when fallback.mode=fixed");
        cmd->add_option("--top_k_candidates", config.top_k_candidates,
                        "Candidates retrieved per generation");
        cmd->add_option("--align.seed_cosine_threshold", config.align.seed_cosine_threshold,
                        "Minimum tf-idf cosine for a sentence seed pair");
        cmd->add_option("--align.seed_dice_threshold", config.align.seed_dice_threshold,
                        "Minimum dice coefficient for a sentence seed pair");
        cmd->add_option("--align.maxgap_sentences", config.align.maxgap_sentences,
                        "Largest sentence gap bridged when clustering seeds");
        cmd->add_option("--align.min_match_chars", config.align.min_match_chars,
                        "Fragments shorter than this on either side are dropped");
        cmd->add_option("--classifier.idea_ratio", config.classifier.idea_ratio,
                        "Sentence (or char) ratio at which a match counts as idea memorization");
        cmd->add_option("--classifier.paraphrase_high_min", config.classifier.paraphrase_high_min,
                        "Lower edge of the high-confidence paraphrase band");
        cmd->add_option("--classifier.paraphrase_high_max", config.classifier.paraphrase_high_max,
                        "Upper edge of the high-confidence paraphrase band");
        cmd->add_option("--scorer_command", config.scorer_command,
                        "External paraphrase scorer command (see docs/FORMATS.md)");
        cmd->add_option("--bootstrap_resamples", config.bootstrap_resamples,
                        "Bootstrap resample count");
        cmd->add_option("--level_low", config.level_low, "Lower CI percentile");
        cmd->add_option("--level_high", config.level_high, "Upper CI percentile");
        cmd->add_option("--seed", config.seed, "RNG seed recorded in the report");
        cmd->add_option("--n_limit", config.n_limit, "Max generations audited (0 = all)");
        cmd->add_option("--threads", config.threads, "Worker count (0 = hardware threads)");
        return cmd;
    }

    AuditConfig resolve(const CLI::App& cmd) const {
        AuditConfig resolved = config_path.empty() ? AuditConfig{} : load_audit_config(config_path);
        auto passed = [&](const std::string& name) { return cmd.count(name) > 0; };
        if (passed("--corpus_path")) resolved.corpus_path = config.corpus_path;
        if (passed("--generations_path")) resolved.generations_path = config.generations_path;
        if (passed("--report_path")) resolved.report_path = config.report_path;
        if (passed("--report_format")) {
            resolved.report_format = report_format_from_string(format_name);
        }
        if (passed("--k_prefix_tokens")) resolved.k_prefix_tokens = config.k_prefix_tokens;
        if (passed("--fallback.mode")) {
            if (fallback_mode == "half") {
                resolved.fallback = ShortInputFallback::half();
            } else if (fallback_mode == "fixed") {
                resolved.fallback = ShortInputFallback::fixed(resolved.fallback.fixed_count);
            } else {
                throw ValidationError("fallback.mode must be \"half\" or \"fixed\"");
            }
        }
        if (passed("--fallback.count")) {
            resolved.fallback = ShortInputFallback::fixed(fallback_count);
        }
        if (passed("--top_k_candidates")) resolved.top_k_candidates = config.top_k_candidates;
        if (passed("--align.seed_cosine_threshold")) {
            resolved.align.seed_cosine_threshold = config.align.seed_cosine_threshold;
        }
        if (passed("--align.seed_dice_threshold")) {
            resolved.align.seed_dice_threshold = config.align.seed_dice_threshold;
        }
        if (passed("--align.maxgap_sentences")) {
            resolved.align.maxgap_sentences = config.align.maxgap_sentences;
        }
        if (passed("--align.min_match_chars")) {
            resolved.align.min_match_chars = config.align.min_match_chars;
        }
        if (passed("--classifier.idea_ratio")) {
            resolved.classifier.idea_ratio = config.classifier.idea_ratio;
        }
        if (passed("--classifier.paraphrase_high_min")) {
            resolved.classifier.paraphrase_high_min = config.classifier.paraphrase_high_min;
        }
        if (passed("--classifier.paraphrase_high_max")) {
            resolved.classifier.paraphrase_high_max = config.classifier.paraphrase_high_max;
        }
        if (passed("--scorer_command")) resolved.scorer_command = config.scorer_command;
        if (passed("--bootstrap_resamples")) {
            resolved.bootstrap_resamples = config.bootstrap_resamples;
        }
        if (passed("--level_low")) resolved.level_low = config.level_low;
        if (passed("--level_high")) resolved.level_high = config.level_high;
        if (passed("--seed")) resolved.seed = config.seed;
        if (passed("--n_limit")) resolved.n_limit = config.n_limit;
        if (passed("--threads")) resolved.threads = config.threads;
        return resolved;
    }

    int run(const CLI::App& cmd) const {
        const AuditConfig resolved = resolve(cmd);
        progress() << "auditing " << resolved.generations_path << " against "
                   << resolved.corpus_path << "\n";
        AuditConfig effective = resolved;
        effective.report_path.clear();  // render once below so stdout works too
        const AuditOutcome outcome = run_audit(effective);
        progress() << "audited " << outcome.result.n << " generations against "
                   << outcome.corpus_size << " documents: " << outcome.result.total_count
                   << " memorized prompts, " << outcome.cases.size() << " detected cases\n";
        const std::string report =
            render_report(outcome.result, outcome.intervals, resolved.report_format,
                          audit_config_echo(resolved), resolved.seed, current_utc_timestamp(),
                          &outcome.cases);
        write_output(resolved.report_path, report);
        if (!resolved.report_path.empty()) {
            progress() << "report written to " << resolved.report_path << "\n";
        }
        return 0;
    }
};

struct AttentionCli {
    std::vector<std::string> inputs;
    std::size_t max_len = 512;
    int layer = -1;
    bool all_layers = false;
    std::string metrics_out;
    std::string heatmap_dir;

    CLI::App* attach(CLI::App& app) {
        auto* cmd = app.add_subcommand(
            "attention", "Density metrics and averaged heatmaps for exported attention tensors");
        cmd->add_option("files", inputs, "Attention tensor files (see docs/FORMATS.md)")
            ->required()
            ->expected(-1);
        cmd->add_option("--max_len", max_len, "Truncate maps to this many tokens per axis");
        cmd->add_option("--layer", layer,
                        "Layer to analyze (default: the final layer present in the files)");
        cmd->add_flag("--all_layers", all_layers, "Analyze every layer instead of one");
        cmd->add_option("--metrics_out", metrics_out,
                        "Metrics JSON destination (default: standard output)");
        cmd->add_option("--heatmap_dir", heatmap_dir,
                        "Directory for per-map and averaged CSV heatmaps");
        return cmd;
    }

    static nlohmann::json profile_json(const AttentionMap& map) {
        const DensityProfile profile = density_score(map);
        return {
            {"sample_id", map.sample_id},
            {"layer", map.layer},
            {"out_len", map.out_len()},
            {"in_len", map.in_len()},
            {"normalized_entropy_mean", profile.normalized_entropy_mean},
            {"top5_mass_mean", profile.top5_mass_mean},
        };
    }

    int run() const {
        std::vector<AttentionMap> maps;
        for (const auto& path : inputs) {
            auto loaded = load_attention(path);
            progress() << "loaded " << loaded.size() << " attention map(s) from " << path << "\n";
            for (auto& map : loaded) maps.push_back(std::move(map));
        }
        if (maps.empty()) throw ValidationError("attention: no maps found in the input files");

        int chosen = layer;
        if (!all_layers && chosen < 0) {
            for (const auto& map : maps) chosen = std::max(chosen, map.layer);
            progress() << "defaulting to final layer " << chosen << "\n";
        }
        std::vector<AttentionMap> selected;
        for (auto& map : maps) {
            if (all_layers || map.layer == chosen) selected.push_back(std::move(map));
        }
        if (selected.empty()) {
            throw ValidationError("attention: no maps on layer " + std::to_string(chosen));
        }

        std::size_t batch_max = 0;
        nlohmann::json per_map = nlohmann::json::array();
        for (const auto& map : selected) {
            per_map.push_back(profile_json(map));
            batch_max = std::max({batch_max, map.out_len(), map.in_len()});
        }
        const AttentionMap average = average_heatmap(selected, max_len);
        nlohmann::json average_json = profile_json(average);
        average_json["truncated"] = batch_max > max_len;

        nlohmann::json doc = {
            {"max_len", max_len},
            {"maps", std::move(per_map)},
            {"average", std::move(average_json)},
        };
        if (!all_layers) doc["layer"] = chosen;
        write_output(metrics_out, doc.dump(2) + "\n");

        if (!heatmap_dir.empty()) {
            std::filesystem::create_directories(heatmap_dir);
            const std::filesystem::path dir(heatmap_dir);
            for (const auto& map : selected) {
                const std::string name =
                    map.sample_id + "_layer" + std::to_string(map.layer) + ".csv";
                save_heatmap_csv(map, (dir / name).string());
            }
            save_heatmap_csv(average, (dir / "average.csv").string());
            progress() << "wrote " << selected.size() + 1 << " heatmap CSV file(s) to "
                       << heatmap_dir << "\n";
        }
        return 0;
    }
};

struct SimulateCli {
    std::size_t seeds = 5;
    std::uint64_t master_seed = 0;
    std::size_t d = 8;
    std::size_t D_seq = 12;
    std::size_t k_feat = 4;
    std::size_t K_feat = 6;
    double x_sparsity = 0.3;
    std::size_t b_sparsity = 2;
    std::size_t steps = 2000;
    double learning_rate = 1e-2;
    bool train_v = false;
    bool directional = false;
    std::string out_path;

    CLI::App* attach(CLI::App& app) {
        auto* cmd = app.add_subcommand(
            "simulate", "Sparse-coding simulator: closed-form checks and the attention toy");
        cmd->add_option("--seeds", seeds, "Number of seeds to sweep");
        cmd->add_option("--master_seed", master_seed, "First seed of the sweep");
        cmd->add_option("--d", d, "Embedding length");
        cmd->add_option("--D_seq", D_seq, "Sequence length");
        cmd->add_option("--k_feat", k_feat, "Hidden rows of X");
        cmd->add_option("--K_feat", K_feat, "Hidden columns of X");
        cmd->add_option("--x_sparsity", x_sparsity, "Fraction of nonzero entries in X");
        cmd->add_option("--b_sparsity", b_sparsity, "Support size of the task vector b");
        cmd->add_option("--steps", steps, "Training steps for the attention toy");
        cmd->add_option("--lr", learning_rate, "Learning rate");
        cmd->add_flag("--train_v", train_v, "Also train v1 and v2");
        cmd->add_flag("--directional", directional,
                      "Run the two-arm sparse-vs-dense experiment instead of the plain sweep");
        cmd->add_option("--out", out_path,
                        "Results file, one JSON record per line, appended "
                        "(default: standard output)");
        return cmd;
    }

    void append_records(const std::vector<nlohmann::json>& records) const {
        if (out_path.empty() || out_path == "-") {
            for (const auto& record : records) std::cout << record.dump() << "\n";
            return;
        }
        std::ofstream out(out_path, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot open results file for appending: " + out_path);
        for (const auto& record : records) out << record.dump() << "\n";
        if (!out) throw IoError("failed writing results file: " + out_path);
    }

    int run_directional() const {
        DirectionalConfig config;
        config.seeds = seeds;
        config.master_seed = master_seed;
        config.d = d;
        config.D_seq = D_seq;
        config.k_feat = k_feat;
        config.K_feat = K_feat;
        config.x_sparsity = x_sparsity;
        config.sparse_support = b_sparsity;
        const DirectionalOutcome outcome = run_directional_experiment(config);

        std::vector<nlohmann::json> records;
        for (const auto& run : outcome.runs) {
            records.push_back({
                {"kind", "directional_run"},
                {"seed", run.seed},
                {"arm", run.sparse_arm ? "sparse" : "dense"},
                {"b_sparsity", run.b_sparsity},
                {"d", run.d},
                {"D_seq", run.D_seq},
                {"k_feat", run.k_feat},
                {"K_feat", run.K_feat},
                {"support_overlap", run.support_overlap},
                {"chance_baseline", run.chance_baseline},
                {"held_out_loss", run.held_out_loss},
                {"final_loss", run.losses.empty() ? 0.0 : run.losses.back()},
            });
        }
        records.push_back({
            {"kind", "directional_summary"},
            {"seeds", seeds},
            {"master_seed", master_seed},
            {"sparse_mean_overlap", outcome.sparse_mean_overlap},
            {"dense_mean_overlap", outcome.dense_mean_overlap},
        });
        append_records(records);
        progress() << "sparse mean support-overlap "  //
                   << outcome.sparse_mean_overlap << ", dense mean "
                   << outcome.dense_mean_overlap << "\n";
        return 0;
    }

    int run() const {
        if (directional) return run_directional();
        if (seeds == 0) throw ValidationError("simulate: --seeds must be positive");

        bool tolerance_failure = false;
        std::vector<nlohmann::json> records;
        for (std::size_t i = 0; i < seeds; ++i) {
            const std::uint64_t seed = master_seed + i;
            const SparseInstance instance =
                generate_instance(d, D_seq, k_feat, K_feat, x_sparsity, seed);

            const SimpleTaskSpec spec = make_task(instance, b_sparsity, seed * 1000 + 1);
            const ClosedFormSolution simple = closed_form_simple(instance, spec);
            const ClosedFormSolution complex = closed_form_complex(instance);
            const double simple_err =
                std::abs(simple_task_prediction(instance, simple) -
                         simple_task_target(instance, spec));
            const double recovery_err = (recover_x(instance, complex) - instance.X).norm();
            const double inversion_err =
                (invert_model(complex, recover_x(instance, complex)) - instance.Z).norm();
            const bool closed_form_pass =
                simple_err <= 1e-10 && recovery_err <= 1e-10 && inversion_err <= 1e-8;
            tolerance_failure = tolerance_failure || !closed_form_pass;

            nlohmann::json record = {
                {"kind", "run"},
                {"seed", seed},
                {"d", d},
                {"D_seq", D_seq},
                {"k_feat", k_feat},
                {"K_feat", K_feat},
                {"x_sparsity", x_sparsity},
                {"b_sparsity", b_sparsity},
                {"steps", steps},
                {"learning_rate", learning_rate},
                {"train_v", train_v},
                {"closed_form",
                 {{"simple_task_error", simple_err},
                  {"recovery_error", recovery_err},
                  {"inversion_error", inversion_err},
                  {"pass", closed_form_pass}}},
                {"simple_param_count", simple.param_count},
                {"complex_param_count", complex.param_count},
            };

            TrainOptions options;
            options.steps = steps;
            options.learning_rate = learning_rate;
            options.train_v = train_v;
            try {
                const AttentionToyParams params = init_params(instance, seed * 1000 + 2);
                const TrainResult trained =
                    train_attention_toy(instance, spec, params, options, seed * 1000 + 3);
                record["losses"] = trained.losses;
                record["support_overlap"] = trained.support_overlap;
                record["chance_baseline"] = trained.chance_baseline;
                record["held_out_loss"] = trained.held_out_loss;
            } catch (const TrainingError& e) {
                record["training_error"] = {{"message", e.what()}, {"step", e.step()}};
                progress() << "seed " << seed << " diverged at step " << e.step() << "\n";
            }
            records.push_back(std::move(record));
        }
        append_records(records);
        progress() << "simulated " << seeds << " seed(s)\n";
        if (tolerance_failure) {
            progress() << "closed-form identity failed tolerance; see the results file\n";
            return 3;
        }
        return 0;
    }
};

struct IndexCli {
    std::string corpus_path;
    std::string out_path;
    std::size_t k_prefix_tokens = 50;
    std::string fallback_mode = "half";
    std::size_t fallback_count = 15;
    std::size_t n_limit = 0;

    CLI::App* attach(CLI::App& app) {
        auto* cmd =
            app.add_subcommand("index", "Build and persist the BM25 suffix index for a corpus");
        cmd->add_option("--corpus_path", corpus_path, "Fine-tuning corpus (JSONL)")->required();
        cmd->add_option("--out", out_path, "Index destination file")->required();
        cmd->add_option("--k_prefix_tokens", k_prefix_tokens, "Prefix length in tokens");
        cmd->add_option("--fallback.mode", fallback_mode,
                        "Split policy for inputs of at most k tokens: half or fixed");
        cmd->add_option("--fallback.count", fallback_count,
                        "Prefix token count when fallback.mode=fixed");
        cmd->add_option("--n_limit", n_limit, "Max documents loaded (0 = all)");
        return cmd;
    }

    int run() const {
        ShortInputFallback fallback;
        if (fallback_mode == "half") {
            fallback = ShortInputFallback::half();
        } else if (fallback_mode == "fixed") {
            fallback = ShortInputFallback::fixed(fallback_count);
        } else {
            throw ValidationError("fallback.mode must be \"half\" or \"fixed\"");
        }
        const auto corpus =
            load_corpus(corpus_path, n_limit == 0 ? std::nullopt
                                                  : std::optional<std::size_t>(n_limit));
        std::vector<PrefixSuffixPair> pairs;
        pairs.reserve(corpus.size());
        for (const auto& example : corpus) {
            pairs.push_back(split_prefix_suffix(example, k_prefix_tokens, fallback));
        }
        const SuffixIndex index = SuffixIndex::build(pairs);
        index.save(out_path);
        progress() << "indexed " << index.doc_count() << " suffixes (mean length "
                   << index.avg_doc_length() << " terms) into " << out_path << "\n";
        return 0;
    }
};

struct ReportCli {
    std::string in_path;
    std::string out_path;
    std::string format_name = "text";

    CLI::App* attach(CLI::App& app) {
        auto* cmd = app.add_subcommand("report", "Re-render a stored JSON report");
        cmd->add_option("--in", in_path, "Stored report (JSON)")->required();
        cmd->add_option("--format", format_name, "json, text or csv");
        cmd->add_option("--out", out_path, "Destination (default: standard output)");
        return cmd;
    }

    int run() const {
        std::ifstream in(in_path, std::ios::binary);
        if (!in) throw IoError("cannot open report file: " + in_path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("report is not valid JSON: ") + e.what());
        }
        const ReportFormat format = report_format_from_string(format_name);
        if (format == ReportFormat::Json) {
            write_output(out_path, doc.dump(2) + "\n");
            return 0;
        }

        AuditResult result;
        std::map<std::string, ConfidenceInterval> intervals;
        std::uint64_t seed = 0;
        try {
            result.n = doc.at("n").get<std::size_t>();
            seed = doc.at("seed").get<std::uint64_t>();
            const auto& counts = doc.at("counts");
            result.total_count = counts.at("total").get<std::size_t>();
            for (const auto& name :
                 {"verbatim", "idea", "paraphrase_high", "paraphrase_low"}) {
                result.counts[memorization_type_from_string(name)] =
                    counts.at(name).get<std::size_t>();
            }
            for (const auto& item : doc.at("intervals").items()) {
                ConfidenceInterval interval;
                interval.low = item.value().at("low").get<double>();
                interval.high = item.value().at("high").get<double>();
                interval.level_low = item.value().at("level_low").get<int>();
                interval.level_high = item.value().at("level_high").get<int>();
                interval.resamples = item.value().at("resamples").get<std::size_t>();
                intervals[item.key()] = interval;
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(std::string("report is missing a required field: ") + e.what());
        }
        write_output(out_path, render_report(result, intervals, format, "", seed));
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Memorization audit toolkit: BM25 retrieval, text alignment, taxonomy\n"
                 "classification, attention density analysis and a sparse-coding simulator."};
    app.require_subcommand(1);

    AuditCli audit_cli;
    AttentionCli attention_cli;
    SimulateCli simulate_cli;
    IndexCli index_cli;
    ReportCli report_cli;

    CLI::App* audit_cmd = audit_cli.attach(app);
    CLI::App* attention_cmd = attention_cli.attach(app);
    CLI::App* simulate_cmd = simulate_cli.attach(app);
    CLI::App* index_cmd = index_cli.attach(app);
    CLI::App* report_cmd = report_cli.attach(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (audit_cmd->parsed()) return audit_cli.run(*audit_cmd);
        if (attention_cmd->parsed()) return attention_cli.run();
        if (simulate_cmd->parsed()) return simulate_cli.run();
        if (index_cmd->parsed()) return index_cli.run();
        if (report_cmd->parsed()) return report_cli.run();
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
