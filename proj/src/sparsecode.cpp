#include "memaudit/sparsecode.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "memaudit/errors.hpp"
#include "memaudit/rng.hpp"

namespace memaudit {

namespace {

Eigen::MatrixXd gaussian_matrix(std::size_t rows, std::size_t cols, rng::Engine& engine) {
    Eigen::MatrixXd out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = engine.next_normal();
        }
    }
    return out;
}

Eigen::MatrixXd sparse_gaussian(std::size_t rows, std::size_t cols, double sparsity,
                                rng::Engine& engine) {
    Eigen::MatrixXd out(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            const double value = engine.next_normal();
            const bool keep = engine.next_double() < sparsity;
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = keep ? value : 0.0;
        }
    }
    return out;
}

void check_orthonormal_columns(const Eigen::MatrixXd& M, const char* label) {
    const Eigen::MatrixXd gram = M.transpose() * M;
    const Eigen::MatrixXd identity =
        Eigen::MatrixXd::Identity(gram.rows(), gram.cols());
    if ((gram - identity).norm() > 1e-10) {
        throw ValidationError(std::string(label) + " is not orthonormal");
    }
}

}  // namespace

Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& input) {
    Eigen::MatrixXd Q = input;
    for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index j = 0; j < Q.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i) {
                Q.col(j) -= Q.col(i).dot(Q.col(j)) * Q.col(i);
            }
            const double norm = Q.col(j).norm();
            if (norm < 1e-12) {
                throw ValidationError("orthonormalization hit a rank-deficient column");
            }
            Q.col(j) /= norm;
        }
    }
    return Q;
}

SparseInstance make_instance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& V, std::uint64_t seed) {
    if (U.cols() != X.rows() || X.cols() != V.rows()) {
        throw ValidationError("instance factor shapes do not chain: U·X·V");
    }
    if (U.cols() > U.rows()) throw ValidationError("k_feat must not exceed d");
    if (V.rows() > V.cols()) throw ValidationError("K_feat must not exceed D_seq");
    check_orthonormal_columns(U, "U");
    check_orthonormal_columns(V.transpose(), "V");

    SparseInstance instance;
    instance.d = static_cast<std::size_t>(U.rows());
    instance.D_seq = static_cast<std::size_t>(V.cols());
    instance.k_feat = static_cast<std::size_t>(X.rows());
    instance.K_feat = static_cast<std::size_t>(X.cols());
    instance.U = U;
    instance.X = X;
    instance.V = V;
    instance.Z = U * X * V;
    instance.seed = seed;
    const auto total = static_cast<double>(X.size());
    instance.sparsity =
        total == 0.0 ? 0.0 : static_cast<double>((X.array() != 0.0).count()) / total;
    return instance;
}

SparseInstance generate_instance(std::size_t d, std::size_t D_seq, std::size_t k_feat,
                                 std::size_t K_feat, double sparsity, std::uint64_t seed) {
    if (k_feat > d) throw ValidationError("k_feat must not exceed d");
    if (K_feat > D_seq) throw ValidationError("K_feat must not exceed D_seq");
    if (k_feat == 0 || K_feat == 0) throw ValidationError("feature dimensions must be positive");
    if (sparsity <= 0.0 || sparsity > 1.0) {
        throw ValidationError("sparsity must lie in (0, 1]");
    }

    rng::Engine engine(seed);
    const Eigen::MatrixXd U = orthonormalize_columns(gaussian_matrix(d, k_feat, engine));
    const Eigen::MatrixXd V =
        orthonormalize_columns(gaussian_matrix(D_seq, K_feat, engine)).transpose();
    const Eigen::MatrixXd X = sparse_gaussian(k_feat, K_feat, sparsity, engine);

    SparseInstance instance = make_instance(U, X, V, seed);
    instance.sparsity = sparsity;
    return instance;
}

SparseInstance make_selection_instance(std::size_t d, std::size_t D_seq, std::size_t k_feat,
                                       std::size_t K_feat, double sparsity, std::uint64_t seed) {
    if (k_feat > d) throw ValidationError("k_feat must not exceed d");
    if (K_feat > D_seq) throw ValidationError("K_feat must not exceed D_seq");
    if (k_feat == 0 || K_feat == 0) throw ValidationError("feature dimensions must be positive");
    if (sparsity <= 0.0 || sparsity > 1.0) {
        throw ValidationError("sparsity must lie in (0, 1]");
    }

    rng::Engine engine(seed);
    const Eigen::MatrixXd U = orthonormalize_columns(gaussian_matrix(d, k_feat, engine));

    std::vector<std::size_t> positions(D_seq);
    for (std::size_t i = 0; i < D_seq; ++i) positions[i] = i;
    Eigen::MatrixXd V = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(K_feat),
                                              static_cast<Eigen::Index>(D_seq));
    for (std::size_t i = 0; i < K_feat; ++i) {
        const std::size_t j = i + engine.next_below(D_seq - i);
        std::swap(positions[i], positions[j]);
        V(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(positions[i])) =
            engine.next_double() < 0.5 ? 1.0 : -1.0;
    }

    const Eigen::MatrixXd X = sparse_gaussian(k_feat, K_feat, sparsity, engine);
    SparseInstance instance = make_instance(U, X, V, seed);
    instance.sparsity = sparsity;
    return instance;
}

void resample_x(SparseInstance& instance, std::uint64_t seed) {
    rng::Engine engine(seed);
    instance.X = sparse_gaussian(instance.k_feat, instance.K_feat, instance.sparsity, engine);
    instance.Z = instance.U * instance.X * instance.V;
}

SimpleTaskSpec make_task(const SparseInstance& instance, std::size_t b_sparsity,
                         std::uint64_t seed) {
    if (b_sparsity == 0 || b_sparsity > instance.K_feat) {
        throw ValidationError("b_sparsity must lie in [1, K_feat]");
    }
    rng::Engine engine(seed);
    SimpleTaskSpec spec;
    spec.a = gaussian_matrix(instance.k_feat, 1, engine).col(0);
    spec.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(instance.K_feat));
    std::vector<std::size_t> positions(instance.K_feat);
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = i;
    for (std::size_t i = 0; i < b_sparsity; ++i) {
        const std::size_t j = i + engine.next_below(positions.size() - i);
        std::swap(positions[i], positions[j]);
        double value = engine.next_normal();
        while (value == 0.0) value = engine.next_normal();
        spec.b(static_cast<Eigen::Index>(positions[i])) = value;
    }
    spec.b_sparsity = b_sparsity;
    return spec;
}

ClosedFormSolution closed_form_simple(const SparseInstance& instance, const SimpleTaskSpec& spec) {
    if (spec.a.size() != static_cast<Eigen::Index>(instance.k_feat) ||
        spec.b.size() != static_cast<Eigen::Index>(instance.K_feat)) {
        throw ValidationError("task vector lengths do not match the instance");
    }
    ClosedFormSolution solution;
    solution.a_prime = instance.U * spec.a;
    solution.b_prime = instance.V.transpose() * spec.b;
    solution.param_count = instance.d + instance.D_seq;
    return solution;
}

ClosedFormSolution closed_form_complex(const SparseInstance& instance) {
    ClosedFormSolution solution;
    solution.U_prime = instance.U.transpose();
    solution.V_prime = instance.V.transpose();
    solution.param_count = instance.d * instance.k_feat + instance.D_seq * instance.K_feat;
    return solution;
}

double simple_task_target(const SparseInstance& instance, const SimpleTaskSpec& spec) {
    return spec.a.dot(instance.X * spec.b);
}

double simple_task_prediction(const SparseInstance& instance, const ClosedFormSolution& solution) {
    return solution.a_prime.dot(instance.Z * solution.b_prime);
}

Eigen::MatrixXd recover_x(const SparseInstance& instance, const ClosedFormSolution& solution) {
    return solution.U_prime * instance.Z * solution.V_prime;
}

Eigen::MatrixXd invert_model(const ClosedFormSolution& solution, const Eigen::MatrixXd& x_hat) {
    if (solution.U_prime.size() == 0 || solution.V_prime.size() == 0) {
        throw ValidationError("inversion requires a complex-task solution");
    }
    if (solution.U_prime.rows() != x_hat.rows() || solution.V_prime.cols() != x_hat.cols()) {
        throw ValidationError("X_hat shape does not match the solution");
    }
    return solution.U_prime.transpose() * x_hat * solution.V_prime.transpose();
}

AttentionForward attention_forward(const AttentionToyParams& params, const Eigen::MatrixXd& Z) {
    AttentionForward result;
    const Eigen::MatrixXd keys = params.W_K * Z;
    const Eigen::MatrixXd queries = params.W_Q * Z;
    Eigen::MatrixXd scores = keys.transpose() * queries;

    result.attention.resize(scores.rows(), scores.cols());
    for (Eigen::Index j = 0; j < scores.cols(); ++j) {
        const double max_score = scores.col(j).maxCoeff();
        const Eigen::ArrayXd shifted = (scores.col(j).array() - max_score).exp();
        result.attention.col(j) = shifted / shifted.sum();
    }

    result.output = params.W_V * Z * result.attention;
    result.aggregated = result.attention * params.v2;
    result.y_hat = params.v1.dot(result.output * params.v2);
    return result;
}

AttentionGradients attention_gradients(const AttentionToyParams& params, const Eigen::MatrixXd& Z,
                                       double target) {
    const AttentionForward forward = attention_forward(params, Z);
    const double residual = forward.y_hat - target;

    const Eigen::VectorXd u = (params.W_V * Z).transpose() * params.v1;  // D
    const Eigen::VectorXd w = Z * forward.aggregated;                    // d

    // dy/dS column j: v2_j · (A_j ⊙ u − (uᵀA_j)·A_j), the softmax Jacobian
    // applied to u.
    Eigen::MatrixXd G(forward.attention.rows(), forward.attention.cols());
    for (Eigen::Index j = 0; j < G.cols(); ++j) {
        const Eigen::VectorXd a = forward.attention.col(j);
        const double dot = u.dot(a);
        G.col(j) = params.v2(j) * (a.cwiseProduct(u) - dot * a);
    }

    AttentionGradients grads;
    const double factor = 2.0 * residual;
    grads.dW_V = factor * params.v1 * w.transpose();
    grads.dW_K = factor * params.W_Q * Z * G.transpose() * Z.transpose();
    grads.dW_Q = factor * params.W_K * Z * G * Z.transpose();
    grads.dv1 = factor * params.W_V * Z * forward.aggregated;
    grads.dv2 = factor * forward.attention.transpose() * u;
    grads.loss = residual * residual;
    return grads;
}

double expected_support_overlap(const Eigen::VectorXd& values, const Eigen::VectorXd& reference,
                                std::size_t s) {
    if (values.size() != reference.size()) {
        throw ValidationError("support overlap requires equal-length vectors");
    }
    const std::size_t n = static_cast<std::size_t>(values.size());
    if (s == 0 || s > n) throw ValidationError("support size must lie in [1, length]");

    // Reference support: top-s by |value|, ties broken by index.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t lhs, std::size_t rhs) {
        return std::abs(reference(static_cast<Eigen::Index>(lhs))) >
               std::abs(reference(static_cast<Eigen::Index>(rhs)));
    });
    std::vector<bool> in_support(n, false);
    for (std::size_t i = 0; i < s; ++i) in_support[order[i]] = true;

    // Membership probability of each position in top-s(|values|) when ties
    // share the remaining slots uniformly.
    std::vector<double> magnitude(n);
    for (std::size_t i = 0; i < n; ++i) magnitude[i] = std::abs(values(static_cast<Eigen::Index>(i)));
    std::vector<double> sorted = magnitude;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const double threshold = sorted[s - 1];
    std::size_t above = 0;
    std::size_t boundary = 0;
    for (double m : magnitude) {
        if (m > threshold) ++above;
        if (m == threshold) ++boundary;
    }
    const double boundary_share =
        boundary == 0 ? 0.0
                      : static_cast<double>(s - above) / static_cast<double>(boundary);

    double expected = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!in_support[i]) continue;
        if (magnitude[i] > threshold) {
            expected += 1.0;
        } else if (magnitude[i] == threshold) {
            expected += boundary_share;
        }
    }
    return expected / static_cast<double>(s);
}

AttentionToyParams init_params(const SparseInstance& instance, std::uint64_t seed, double scale) {
    rng::Engine engine(seed);
    const auto d = static_cast<Eigen::Index>(instance.d);
    AttentionToyParams params;
    params.W_V = scale * gaussian_matrix(instance.d, instance.d, engine);
    params.W_K = scale * gaussian_matrix(instance.d, instance.d, engine);
    params.W_Q = scale * gaussian_matrix(instance.d, instance.d, engine);
    params.v1 = gaussian_matrix(instance.d, 1, engine).col(0);
    params.v2 = gaussian_matrix(instance.D_seq, 1, engine).col(0);
    if (scale == 0.0) {
        params.W_V = Eigen::MatrixXd::Zero(d, d);
        params.W_K = Eigen::MatrixXd::Zero(d, d);
        params.W_Q = Eigen::MatrixXd::Zero(d, d);
    }
    return params;
}

TrainResult train_attention_toy(const SparseInstance& instance, const SimpleTaskSpec& spec,
                                const AttentionToyParams& params_init, const TrainOptions& options,
                                std::uint64_t seed) {
    TrainResult result;
    result.params = params_init;
    result.losses.reserve(options.steps);
    result.b_prime = instance.V.transpose() * spec.b;
    result.chance_baseline =
        static_cast<double>(spec.b_sparsity) / static_cast<double>(instance.D_seq);

    const std::size_t batch = options.resample_each_step ? std::max<std::size_t>(1, options.batch_size) : 1;
    SparseInstance sample = instance;
    // Incremental splitmix walk: the i-th draw seed equals substream_seed(seed, i)
    // without restarting the stream every call.
    std::uint64_t stream = seed;
    for (std::size_t step = 0; step < options.steps; ++step) {
        AttentionGradients total;
        for (std::size_t item = 0; item < batch; ++item) {
            if (options.resample_each_step) resample_x(sample, rng::splitmix64_next(stream));
            const double target = simple_task_target(sample, spec);
            const AttentionGradients grads = attention_gradients(result.params, sample.Z, target);
            if (!std::isfinite(grads.loss)) {
                throw TrainingError("attention toy diverged (loss not finite)", static_cast<long>(step));
            }
            if (item == 0) {
                total = grads;
            } else {
                total.dW_V += grads.dW_V;
                total.dW_K += grads.dW_K;
                total.dW_Q += grads.dW_Q;
                total.dv1 += grads.dv1;
                total.dv2 += grads.dv2;
                total.loss += grads.loss;
            }
        }
        double lr = options.learning_rate;
        if (options.decay_steps > 0) {
            lr /= 1.0 + static_cast<double>(step) / static_cast<double>(options.decay_steps);
        }
        const double scale = lr / static_cast<double>(batch);
        result.losses.push_back(total.loss / static_cast<double>(batch));
        if (options.train_w_v) result.params.W_V -= scale * total.dW_V;
        result.params.W_K -= scale * total.dW_K;
        result.params.W_Q -= scale * total.dW_Q;
        if (options.train_v) {
            result.params.v1 -= scale * total.dv1;
            result.params.v2 -= scale * total.dv2;
        }
    }

    // Rank positions by the magnitude of the mean aggregated attention over
    // several held-out draws. Averaging signed values first isolates the
    // systematic pattern; averaging magnitudes would instead reward
    // coordinates whose attention merely fluctuates draw to draw.
    const std::size_t eval_draws = std::max<std::size_t>(1, options.eval_draws);
    Eigen::VectorXd mean_aggregated = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(instance.D_seq));
    double eval_loss = 0.0;
    for (std::size_t e = 0; e < eval_draws; ++e) {
        resample_x(sample, rng::splitmix64_next(stream));
        const AttentionForward forward = attention_forward(result.params, sample.Z);
        mean_aggregated += forward.aggregated;
        const double residual = forward.y_hat - simple_task_target(sample, spec);
        eval_loss += residual * residual;
    }
    mean_aggregated = (mean_aggregated / static_cast<double>(eval_draws)).cwiseAbs();
    result.held_out_loss = eval_loss / static_cast<double>(eval_draws);
    result.aggregated = mean_aggregated;
    result.support_overlap =
        expected_support_overlap(mean_aggregated, result.b_prime, spec.b_sparsity);
    return result;
}

DirectionalOutcome run_directional_experiment(const DirectionalConfig& config) {
    if (config.seeds == 0) throw ValidationError("directional experiment needs at least one seed");
    if (config.sparse_support == 0 || config.sparse_support >= config.K_feat) {
        throw ValidationError("sparse_support must lie in [1, K_feat)");
    }

    TrainOptions options;
    options.steps = config.steps;
    options.learning_rate = config.learning_rate;
    options.batch_size = config.batch_size;
    options.eval_draws = config.eval_draws;
    options.decay_steps = config.decay_steps;
    options.train_v = true;
    options.train_w_v = false;

    const double task_energy = std::sqrt(static_cast<double>(config.sparse_support));

    DirectionalOutcome outcome;
    outcome.runs.reserve(config.seeds * 2);
    for (std::size_t i = 0; i < config.seeds; ++i) {
        const std::uint64_t instance_seed = config.master_seed + i;
        const SparseInstance instance =
            make_selection_instance(config.d, config.D_seq, config.k_feat, config.K_feat,
                                    config.x_sparsity, instance_seed);
        for (const bool sparse_arm : {true, false}) {
            const std::uint64_t arm_offset = sparse_arm ? 0 : 500;
            const std::size_t support = sparse_arm ? config.sparse_support : config.K_feat;

            SimpleTaskSpec spec = make_task(instance, support, instance_seed * 1000 + arm_offset + 1);
            spec.b *= task_energy / spec.b.norm();

            AttentionToyParams params =
                init_params(instance, instance_seed * 1000 + arm_offset + 2, config.init_scale);
            params.W_V = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(config.d),
                                                   static_cast<Eigen::Index>(config.d));
            params.W_Q = params.W_K;

            const TrainResult trained = train_attention_toy(instance, spec, params, options,
                                                            instance_seed * 1000 + arm_offset + 3);

            DirectionalRunRecord record;
            record.seed = instance_seed;
            record.b_sparsity = support;
            record.sparse_arm = sparse_arm;
            record.d = config.d;
            record.D_seq = config.D_seq;
            record.k_feat = config.k_feat;
            record.K_feat = config.K_feat;
            record.support_overlap = trained.support_overlap;
            record.chance_baseline = trained.chance_baseline;
            record.held_out_loss = trained.held_out_loss;
            record.losses = trained.losses;
            if (sparse_arm) {
                outcome.sparse_mean_overlap += trained.support_overlap;
            } else {
                outcome.dense_mean_overlap += trained.support_overlap;
            }
            outcome.runs.push_back(std::move(record));
        }
    }
    outcome.sparse_mean_overlap /= static_cast<double>(config.seeds);
    outcome.dense_mean_overlap /= static_cast<double>(config.seeds);
    return outcome;
}

}  // namespace memaudit
