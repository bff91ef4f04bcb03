#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "memaudit/attention.hpp"
#include "memaudit/audit.hpp"
#include "memaudit/errors.hpp"
#include "memaudit/metrics.hpp"
#include "memaudit/sparsecode.hpp"

namespace py = pybind11;
using namespace memaudit;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Memorization audit toolkit core";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<IoError>(m, "IoError", PyExc_IOError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<NotFoundError>(m, "NotFoundError", PyExc_KeyError);
    py::register_exception<TrainingError>(m, "TrainingError", PyExc_RuntimeError);

    // corpus
    py::class_<TrainingExample>(m, "TrainingExample")
        .def(py::init<>())
        .def_readwrite("id", &TrainingExample::id)
        .def_readwrite("input_text", &TrainingExample::input_text)
        .def_readwrite("target_text", &TrainingExample::target_text);
    py::class_<GeneratedOutput>(m, "GeneratedOutput")
        .def(py::init<>())
        .def_readwrite("example_id", &GeneratedOutput::example_id)
        .def_readwrite("generation", &GeneratedOutput::generation);
    py::class_<PrefixSuffixPair>(m, "PrefixSuffixPair")
        .def_readonly("example_id", &PrefixSuffixPair::example_id)
        .def_readonly("prefix", &PrefixSuffixPair::prefix)
        .def_readonly("suffix", &PrefixSuffixPair::suffix)
        .def_readonly("k_tokens", &PrefixSuffixPair::k_tokens)
        .def_readonly("fallback_applied", &PrefixSuffixPair::fallback_applied);
    py::class_<ShortInputFallback>(m, "ShortInputFallback")
        .def_static("half", &ShortInputFallback::half)
        .def_static("fixed", &ShortInputFallback::fixed, py::arg("count"));
    m.def("load_corpus", &load_corpus, py::arg("path"), py::arg("limit") = py::none());
    m.def("load_generations", &load_generations, py::arg("path"), py::arg("limit") = py::none());
    m.def(
        "split_prefix_suffix",
        [](const TrainingExample& example, std::size_t k, const ShortInputFallback& fallback) {
            return split_prefix_suffix(example, k, fallback);
        },
        py::arg("example"), py::arg("k"), py::arg("fallback") = ShortInputFallback::half());

    // retrieval
    py::class_<Bm25Params>(m, "Bm25Params")
        .def(py::init<>())
        .def_readwrite("k1", &Bm25Params::k1)
        .def_readwrite("b", &Bm25Params::b);
    py::class_<ScoredCandidate>(m, "ScoredCandidate")
        .def_readonly("query_id", &ScoredCandidate::query_id)
        .def_readonly("doc_id", &ScoredCandidate::doc_id)
        .def_readonly("score", &ScoredCandidate::score)
        .def_readonly("rank", &ScoredCandidate::rank);
    py::class_<SuffixIndex>(m, "SuffixIndex")
        .def_static("build", &SuffixIndex::build, py::arg("pairs"),
                    py::arg("params") = Bm25Params{})
        .def("bm25_score", &SuffixIndex::bm25_score, py::arg("query_terms"), py::arg("doc_id"))
        .def("retrieve_top_k", &SuffixIndex::retrieve_top_k, py::arg("query_text"), py::arg("k"),
             py::arg("query_id") = "")
        .def("idf", &SuffixIndex::idf, py::arg("term"))
        .def("doc_count", &SuffixIndex::doc_count)
        .def("avg_doc_length", &SuffixIndex::avg_doc_length)
        .def("doc_length", &SuffixIndex::doc_length, py::arg("doc_id"))
        .def("doc_frequency", &SuffixIndex::doc_frequency, py::arg("term"))
        .def("doc_ids", &SuffixIndex::doc_ids)
        .def("save", &SuffixIndex::save, py::arg("path"))
        .def_static("load", &SuffixIndex::load, py::arg("path"));

    // alignment
    py::class_<AlignConfig>(m, "AlignConfig")
        .def(py::init<>())
        .def_readwrite("seed_cosine_threshold", &AlignConfig::seed_cosine_threshold)
        .def_readwrite("seed_dice_threshold", &AlignConfig::seed_dice_threshold)
        .def_readwrite("maxgap_sentences", &AlignConfig::maxgap_sentences)
        .def_readwrite("min_match_chars", &AlignConfig::min_match_chars)
        .def_readwrite("extra_abbreviations", &AlignConfig::extra_abbreviations);
    py::class_<SentenceSpan>(m, "SentenceSpan")
        .def_readonly("text", &SentenceSpan::text)
        .def_readonly("char_start", &SentenceSpan::char_start)
        .def_readonly("char_end", &SentenceSpan::char_end)
        .def_readonly("index", &SentenceSpan::index);
    py::class_<FragmentMatch>(m, "FragmentMatch")
        .def_readonly("query_start", &FragmentMatch::query_start)
        .def_readonly("query_end", &FragmentMatch::query_end)
        .def_readonly("candidate_start", &FragmentMatch::candidate_start)
        .def_readonly("candidate_end", &FragmentMatch::candidate_end)
        .def_readonly("seed_count", &FragmentMatch::seed_count)
        .def_readonly("mean_cosine", &FragmentMatch::mean_cosine);
    m.def(
        "segment_sentences",
        [](const std::string& text, const AlignConfig& config) {
            return segment_sentences(text, config);
        },
        py::arg("text"), py::arg("config") = AlignConfig{});
    m.def("detect", &detect, py::arg("generation"), py::arg("candidate_suffix"),
          py::arg("config"), py::arg("idf_source"),
          "Seed/extend/filter alignment; non-empty result means a detection");

    // classification
    py::enum_<MemorizationType>(m, "MemorizationType")
        .value("Verbatim", MemorizationType::Verbatim)
        .value("ParaphraseHigh", MemorizationType::ParaphraseHigh)
        .value("ParaphraseLow", MemorizationType::ParaphraseLow)
        .value("Idea", MemorizationType::Idea);
    py::class_<MemorizationCase>(m, "MemorizationCase")
        .def_readonly("query_id", &MemorizationCase::query_id)
        .def_readonly("matched_doc_id", &MemorizationCase::matched_doc_id)
        .def_readonly("fragments", &MemorizationCase::fragments)
        .def_readonly("mem_type", &MemorizationCase::mem_type)
        .def_readonly("paraphrase_p", &MemorizationCase::paraphrase_p)
        .def_readonly("self_match", &MemorizationCase::self_match);
    py::class_<ClassifierConfig>(m, "ClassifierConfig")
        .def(py::init<>())
        .def_readwrite("idea_ratio", &ClassifierConfig::idea_ratio)
        .def_readwrite("paraphrase_high_min", &ClassifierConfig::paraphrase_high_min)
        .def_readwrite("paraphrase_high_max", &ClassifierConfig::paraphrase_high_max);
    py::class_<ParaphraseScorer>(m, "ParaphraseScorer");
    py::class_<LexicalScorer, ParaphraseScorer>(m, "LexicalScorer").def(py::init<>());
    py::class_<CommandScorer, ParaphraseScorer>(m, "CommandScorer")
        .def(py::init<std::string>(), py::arg("command"));
    m.def("is_verbatim", &is_verbatim, py::arg("frag_query_text"), py::arg("frag_cand_text"));
    m.def("default_paraphrase_score", &default_paraphrase_score, py::arg("text_a"),
          py::arg("text_b"));
    m.def(
        "classify_case",
        [](const std::vector<FragmentMatch>& fragments, const std::string& query_text,
           const std::string& cand_text, const ParaphraseScorer& scorer,
           const ClassifierConfig& config) {
            return classify_case(fragments, query_text, cand_text, scorer, config);
        },
        py::arg("fragments"), py::arg("query_text"), py::arg("cand_text"), py::arg("scorer"),
        py::arg("config") = ClassifierConfig{});
    m.def(
        "build_case",
        [](const std::string& query_id, const std::string& matched_doc_id,
           const std::vector<FragmentMatch>& fragments, const std::string& query_text,
           const std::string& cand_text, const ParaphraseScorer& scorer,
           const ClassifierConfig& config) {
            return build_case(query_id, matched_doc_id, fragments, query_text, cand_text, scorer,
                              config);
        },
        py::arg("query_id"), py::arg("matched_doc_id"), py::arg("fragments"),
        py::arg("query_text"), py::arg("cand_text"), py::arg("scorer"),
        py::arg("config") = ClassifierConfig{});

    // metrics
    py::class_<AuditResult>(m, "AuditResult")
        .def_readonly("n", &AuditResult::n)
        .def_readonly("per_prompt", &AuditResult::per_prompt)
        .def_readonly("counts", &AuditResult::counts)
        .def_readonly("total_count", &AuditResult::total_count)
        .def("rate_total", &AuditResult::rate_total)
        .def("rate", &AuditResult::rate, py::arg("type"));
    py::class_<ConfidenceInterval>(m, "ConfidenceInterval")
        .def_readonly("low", &ConfidenceInterval::low)
        .def_readonly("high", &ConfidenceInterval::high)
        .def_readonly("level_low", &ConfidenceInterval::level_low)
        .def_readonly("level_high", &ConfidenceInterval::level_high)
        .def_readonly("resamples", &ConfidenceInterval::resamples);
    m.def("aggregate", &aggregate, py::arg("cases"), py::arg("n"));
    m.def("bootstrap_ci", &bootstrap_ci, py::arg("indicators"), py::arg("resamples"),
          py::arg("seed"), py::arg("level_low") = 5, py::arg("level_high") = 95);
    m.def("indicator_vector", &indicator_vector, py::arg("count"), py::arg("n"));

    // audit pipeline
    py::enum_<ReportFormat>(m, "ReportFormat")
        .value("Json", ReportFormat::Json)
        .value("Text", ReportFormat::Text)
        .value("Csv", ReportFormat::Csv);
    py::class_<AuditConfig>(m, "AuditConfig")
        .def(py::init<>())
        .def_readwrite("corpus_path", &AuditConfig::corpus_path)
        .def_readwrite("generations_path", &AuditConfig::generations_path)
        .def_readwrite("report_path", &AuditConfig::report_path)
        .def_readwrite("report_format", &AuditConfig::report_format)
        .def_readwrite("k_prefix_tokens", &AuditConfig::k_prefix_tokens)
        .def_readwrite("fallback", &AuditConfig::fallback)
        .def_readwrite("top_k_candidates", &AuditConfig::top_k_candidates)
        .def_readwrite("align", &AuditConfig::align)
        .def_readwrite("classifier", &AuditConfig::classifier)
        .def_readwrite("scorer_command", &AuditConfig::scorer_command)
        .def_readwrite("bootstrap_resamples", &AuditConfig::bootstrap_resamples)
        .def_readwrite("level_low", &AuditConfig::level_low)
        .def_readwrite("level_high", &AuditConfig::level_high)
        .def_readwrite("seed", &AuditConfig::seed)
        .def_readwrite("n_limit", &AuditConfig::n_limit)
        .def_readwrite("threads", &AuditConfig::threads);
    py::class_<AuditOutcome>(m, "AuditOutcome")
        .def_readonly("result", &AuditOutcome::result)
        .def_readonly("intervals", &AuditOutcome::intervals)
        .def_readonly("cases", &AuditOutcome::cases)
        .def_readonly("corpus_size", &AuditOutcome::corpus_size);
    m.def("parse_audit_config", &parse_audit_config, py::arg("json_text"));
    m.def("load_audit_config", &load_audit_config, py::arg("path"));
    m.def("audit_config_echo", &audit_config_echo, py::arg("config"));
    m.def("run_audit", &run_audit, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    // attention analysis
    py::class_<AttentionMap>(m, "AttentionMap")
        .def_readonly("scores", &AttentionMap::scores)
        .def_readonly("sample_id", &AttentionMap::sample_id)
        .def_readonly("layer", &AttentionMap::layer)
        .def_readonly("head_averaged", &AttentionMap::head_averaged)
        .def_readonly("batch_averaged", &AttentionMap::batch_averaged)
        .def("out_len", &AttentionMap::out_len)
        .def("in_len", &AttentionMap::in_len);
    py::class_<DensityProfile>(m, "DensityProfile")
        .def_readonly("per_row_entropy", &DensityProfile::per_row_entropy)
        .def_readonly("normalized_entropy_mean", &DensityProfile::normalized_entropy_mean)
        .def_readonly("top5_mass_mean", &DensityProfile::top5_mass_mean);
    m.def("load_attention", &load_attention, py::arg("path"));
    m.def("average_heatmap", &average_heatmap, py::arg("maps"), py::arg("max_len") = 512);
    m.def("row_entropy", &row_entropy, py::arg("map"));
    m.def("density_score", &density_score, py::arg("map"));
    m.def("save_heatmap_csv", &save_heatmap_csv, py::arg("map"), py::arg("path"));

    // sparse-coding simulator
    py::class_<SparseInstance>(m, "SparseInstance")
        .def_readonly("d", &SparseInstance::d)
        .def_readonly("D_seq", &SparseInstance::D_seq)
        .def_readonly("k_feat", &SparseInstance::k_feat)
        .def_readonly("K_feat", &SparseInstance::K_feat)
        .def_readonly("U", &SparseInstance::U)
        .def_readonly("X", &SparseInstance::X)
        .def_readonly("V", &SparseInstance::V)
        .def_readonly("Z", &SparseInstance::Z)
        .def_readonly("sparsity", &SparseInstance::sparsity)
        .def_readonly("seed", &SparseInstance::seed);
    py::class_<SimpleTaskSpec>(m, "SimpleTaskSpec")
        .def(py::init<>())
        .def_readwrite("a", &SimpleTaskSpec::a)
        .def_readwrite("b", &SimpleTaskSpec::b)
        .def_readwrite("b_sparsity", &SimpleTaskSpec::b_sparsity);
    py::class_<ClosedFormSolution>(m, "ClosedFormSolution")
        .def_readonly("a_prime", &ClosedFormSolution::a_prime)
        .def_readonly("b_prime", &ClosedFormSolution::b_prime)
        .def_readonly("U_prime", &ClosedFormSolution::U_prime)
        .def_readonly("V_prime", &ClosedFormSolution::V_prime)
        .def_readonly("param_count", &ClosedFormSolution::param_count);
    py::class_<AttentionToyParams>(m, "AttentionToyParams")
        .def(py::init<>())
        .def_readwrite("W_V", &AttentionToyParams::W_V)
        .def_readwrite("W_K", &AttentionToyParams::W_K)
        .def_readwrite("W_Q", &AttentionToyParams::W_Q)
        .def_readwrite("v1", &AttentionToyParams::v1)
        .def_readwrite("v2", &AttentionToyParams::v2);
    py::class_<AttentionForward>(m, "AttentionForward")
        .def_readonly("attention", &AttentionForward::attention)
        .def_readonly("output", &AttentionForward::output)
        .def_readonly("aggregated", &AttentionForward::aggregated)
        .def_readonly("y_hat", &AttentionForward::y_hat);
    py::class_<TrainOptions>(m, "TrainOptions")
        .def(py::init<>())
        .def_readwrite("steps", &TrainOptions::steps)
        .def_readwrite("learning_rate", &TrainOptions::learning_rate)
        .def_readwrite("train_v", &TrainOptions::train_v)
        .def_readwrite("train_w_v", &TrainOptions::train_w_v)
        .def_readwrite("resample_each_step", &TrainOptions::resample_each_step)
        .def_readwrite("batch_size", &TrainOptions::batch_size)
        .def_readwrite("eval_draws", &TrainOptions::eval_draws)
        .def_readwrite("decay_steps", &TrainOptions::decay_steps);
    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("params", &TrainResult::params)
        .def_readonly("losses", &TrainResult::losses)
        .def_readonly("support_overlap", &TrainResult::support_overlap)
        .def_readonly("chance_baseline", &TrainResult::chance_baseline)
        .def_readonly("held_out_loss", &TrainResult::held_out_loss)
        .def_readonly("aggregated", &TrainResult::aggregated)
        .def_readonly("b_prime", &TrainResult::b_prime);
    py::class_<DirectionalConfig>(m, "DirectionalConfig")
        .def(py::init<>())
        .def_readwrite("seeds", &DirectionalConfig::seeds)
        .def_readwrite("master_seed", &DirectionalConfig::master_seed)
        .def_readwrite("d", &DirectionalConfig::d)
        .def_readwrite("D_seq", &DirectionalConfig::D_seq)
        .def_readwrite("k_feat", &DirectionalConfig::k_feat)
        .def_readwrite("K_feat", &DirectionalConfig::K_feat)
        .def_readwrite("x_sparsity", &DirectionalConfig::x_sparsity)
        .def_readwrite("sparse_support", &DirectionalConfig::sparse_support)
        .def_readwrite("steps", &DirectionalConfig::steps)
        .def_readwrite("learning_rate", &DirectionalConfig::learning_rate)
        .def_readwrite("batch_size", &DirectionalConfig::batch_size)
        .def_readwrite("eval_draws", &DirectionalConfig::eval_draws)
        .def_readwrite("decay_steps", &DirectionalConfig::decay_steps)
        .def_readwrite("init_scale", &DirectionalConfig::init_scale);
    py::class_<DirectionalRunRecord>(m, "DirectionalRunRecord")
        .def_readonly("seed", &DirectionalRunRecord::seed)
        .def_readonly("b_sparsity", &DirectionalRunRecord::b_sparsity)
        .def_readonly("sparse_arm", &DirectionalRunRecord::sparse_arm)
        .def_readonly("d", &DirectionalRunRecord::d)
        .def_readonly("D_seq", &DirectionalRunRecord::D_seq)
        .def_readonly("k_feat", &DirectionalRunRecord::k_feat)
        .def_readonly("K_feat", &DirectionalRunRecord::K_feat)
        .def_readonly("support_overlap", &DirectionalRunRecord::support_overlap)
        .def_readonly("chance_baseline", &DirectionalRunRecord::chance_baseline)
        .def_readonly("held_out_loss", &DirectionalRunRecord::held_out_loss)
        .def_readonly("losses", &DirectionalRunRecord::losses);
    py::class_<DirectionalOutcome>(m, "DirectionalOutcome")
        .def_readonly("runs", &DirectionalOutcome::runs)
        .def_readonly("sparse_mean_overlap", &DirectionalOutcome::sparse_mean_overlap)
        .def_readonly("dense_mean_overlap", &DirectionalOutcome::dense_mean_overlap);
    m.def("generate_instance", &generate_instance, py::arg("d"), py::arg("D_seq"),
          py::arg("k_feat"), py::arg("K_feat"), py::arg("sparsity"), py::arg("seed"));
    m.def("make_selection_instance", &make_selection_instance, py::arg("d"), py::arg("D_seq"),
          py::arg("k_feat"), py::arg("K_feat"), py::arg("sparsity"), py::arg("seed"));
    m.def("resample_x", &resample_x, py::arg("instance"), py::arg("seed"));
    m.def("make_task", &make_task, py::arg("instance"), py::arg("b_sparsity"), py::arg("seed"));
    m.def("closed_form_simple", &closed_form_simple, py::arg("instance"), py::arg("spec"));
    m.def("closed_form_complex", &closed_form_complex, py::arg("instance"));
    m.def("simple_task_target", &simple_task_target, py::arg("instance"), py::arg("spec"));
    m.def("simple_task_prediction", &simple_task_prediction, py::arg("instance"),
          py::arg("solution"));
    m.def("recover_x", &recover_x, py::arg("instance"), py::arg("solution"));
    m.def("invert_model", &invert_model, py::arg("solution"), py::arg("x_hat"));
    m.def("attention_forward", &attention_forward, py::arg("params"), py::arg("Z"));
    m.def("expected_support_overlap", &expected_support_overlap, py::arg("values"),
          py::arg("reference"), py::arg("s"));
    m.def("init_params", &init_params, py::arg("instance"), py::arg("seed"),
          py::arg("scale") = 0.1);
    m.def("train_attention_toy", &train_attention_toy, py::arg("instance"), py::arg("spec"),
          py::arg("params_init"), py::arg("options"), py::arg("seed"),
          py::call_guard<py::gil_scoped_release>());
    m.def("run_directional_experiment", &run_directional_experiment, py::arg("config"),
          py::call_guard<py::gil_scoped_release>());

    // reporting
    m.def(
        "render_report",
        [](const AuditResult& result, const std::map<std::string, ConfidenceInterval>& intervals,
           ReportFormat format, const std::string& config_echo, std::uint64_t seed) {
            return render_report(result, intervals, format, config_echo, seed);
        },
        py::arg("result"), py::arg("intervals"), py::arg("format"), py::arg("config_echo") = "",
        py::arg("seed") = 0);
}
