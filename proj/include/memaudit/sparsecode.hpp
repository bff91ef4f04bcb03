#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace memaudit {

/// Ground-truth factorization Z = U·X·V with orthonormal U columns and
/// orthonormal V rows. Dimension names carry the _seq/_feat suffixes because
/// the surrounding audit code reuses the bare letters for other quantities.
struct SparseInstance {
    std::size_t d = 0;       // embedding length
    std::size_t D_seq = 0;   // sequence length
    std::size_t k_feat = 0;  // hidden rows of X
    std::size_t K_feat = 0;  // hidden columns of X
    Eigen::MatrixXd U;       // d × k_feat
    Eigen::MatrixXd X;       // k_feat × K_feat
    Eigen::MatrixXd V;       // K_feat × D_seq
    Eigen::MatrixXd Z;       // d × D_seq
    double sparsity = 1.0;   // fraction of nonzero entries in X
    std::uint64_t seed = 0;
};

struct SimpleTaskSpec {
    Eigen::VectorXd a;  // length k_feat
    Eigen::VectorXd b;  // length K_feat
    std::size_t b_sparsity = 0;
};

/// a′/b′ solve the two-parameter readout task; U′/V′ solve the full
/// recovery task. param_count reports d + D_seq or d·k + D·K respectively.
struct ClosedFormSolution {
    Eigen::VectorXd a_prime;  // d
    Eigen::VectorXd b_prime;  // D_seq
    Eigen::MatrixXd U_prime;  // k_feat × d
    Eigen::MatrixXd V_prime;  // D_seq × K_feat
    std::size_t param_count = 0;
};

struct AttentionToyParams {
    Eigen::MatrixXd W_V;  // d × d
    Eigen::MatrixXd W_K;  // d × d
    Eigen::MatrixXd W_Q;  // d × d
    Eigen::VectorXd v1;   // d
    Eigen::VectorXd v2;   // D_seq
};

struct AttentionForward {
    Eigen::MatrixXd attention;   // D_seq × D_seq, columns sum to 1
    Eigen::MatrixXd output;      // d × D_seq, W_V·Z·attention
    Eigen::VectorXd aggregated;  // attention · v2
    double y_hat = 0.0;          // v1ᵀ · output · v2
};

struct AttentionGradients {
    Eigen::MatrixXd dW_V;
    Eigen::MatrixXd dW_K;
    Eigen::MatrixXd dW_Q;
    Eigen::VectorXd dv1;
    Eigen::VectorXd dv2;
    double loss = 0.0;
};

struct TrainOptions {
    std::size_t steps = 2000;
    double learning_rate = 1e-2;
    bool train_v = false;  // v1/v2 stay fixed unless enabled
    bool train_w_v = true;  // freezing W_V removes a redundant pathway (v1ᵀW_V is one vector)
    bool resample_each_step = true;  // false = plain gradient descent on one fixed draw
    std::size_t batch_size = 1;      // fresh draws averaged into each step's gradient
    std::size_t eval_draws = 64;     // held-out draws averaged into the sparsity readout
    std::size_t decay_steps = 0;     // 0 keeps lr constant, else lr/(1 + step/decay_steps)
};

struct TrainResult {
    AttentionToyParams params;
    std::vector<double> losses;       // one entry per step (batch mean)
    double support_overlap = 0.0;     // on held-out data
    double chance_baseline = 0.0;     // s / D_seq
    double held_out_loss = 0.0;       // mean squared error over the held-out draws
    Eigen::VectorXd aggregated;       // |mean A·v2| over the held-out draws
    Eigen::VectorXd b_prime;          // Vᵀ·b of the task
};

/// Gram-Schmidt over columns with one reorthogonalization pass.
Eigen::MatrixXd orthonormalize_columns(const Eigen::MatrixXd& input);

/// Builds an instance from explicit factors, validating dimensions and
/// orthonormality, and composes Z.
SparseInstance make_instance(const Eigen::MatrixXd& U, const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& V, std::uint64_t seed = 0);

/// Seeded Gaussian factors: U and V orthonormalized, X Gaussian masked iid
/// Bernoulli(sparsity). Noiseless composition.
SparseInstance generate_instance(std::size_t d, std::size_t D_seq, std::size_t k_feat,
                                 std::size_t K_feat, double sparsity, std::uint64_t seed);

/// Like generate_instance, but V rows are distinct signed unit vectors, so
/// each hidden feature occupies exactly one sequence position and Vᵀ·b keeps
/// the support size of b. Gaussian V rows would smear any b over every
/// position and leave the sparsity contrast with nothing to measure.
SparseInstance make_selection_instance(std::size_t d, std::size_t D_seq, std::size_t k_feat,
                                       std::size_t K_feat, double sparsity, std::uint64_t seed);

/// Draws a fresh sparse X for fixed (U, V), recomposing Z; used as the
/// training distribution of the attention toy.
void resample_x(SparseInstance& instance, std::uint64_t seed);

/// Random s-sparse task vectors a (dense Gaussian) and b (Gaussian on a
/// random size-s support).
SimpleTaskSpec make_task(const SparseInstance& instance, std::size_t b_sparsity,
                         std::uint64_t seed);

ClosedFormSolution closed_form_simple(const SparseInstance& instance, const SimpleTaskSpec& spec);

ClosedFormSolution closed_form_complex(const SparseInstance& instance);

double simple_task_target(const SparseInstance& instance, const SimpleTaskSpec& spec);

double simple_task_prediction(const SparseInstance& instance, const ClosedFormSolution& solution);

/// X as recovered by the complex-task solution: U′·Z·V′.
Eigen::MatrixXd recover_x(const SparseInstance& instance, const ClosedFormSolution& solution);

/// Ẑ = U′ᵀ·X_hat·V′ᵀ. Shape mismatch raises a validation error.
Eigen::MatrixXd invert_model(const ClosedFormSolution& solution, const Eigen::MatrixXd& x_hat);

AttentionForward attention_forward(const AttentionToyParams& params, const Eigen::MatrixXd& Z);

/// Analytic gradients of the squared loss (v1ᵀf(Z)v2 − target)².
AttentionGradients attention_gradients(const AttentionToyParams& params, const Eigen::MatrixXd& Z,
                                       double target);

/// Expected size of top-s(|values|) ∩ top-s(|reference|), divided by s, with
/// ties in `values` broken uniformly at random (expectation computed in
/// closed form). Uniform values therefore score exactly s/len.
double expected_support_overlap(const Eigen::VectorXd& values, const Eigen::VectorXd& reference,
                                std::size_t s);

/// Small-Gaussian-initialized parameters; scale 0 gives exact zeros.
AttentionToyParams init_params(const SparseInstance& instance, std::uint64_t seed,
                               double scale = 0.1);

/// SGD on the squared loss with a freshly resampled X each step; the
/// support-overlap metric is read off the mean aggregated attention over
/// eval_draws further held-out draws.
TrainResult train_attention_toy(const SparseInstance& instance, const SimpleTaskSpec& spec,
                                const AttentionToyParams& params_init, const TrainOptions& options,
                                std::uint64_t seed);

/// Two-arm experiment contrasting a sparse-b task against a dense-b task on
/// the same instances. Design choices baked into the driver, each needed for
/// the attention pattern to be readable at all:
///  - selection-style V, so b′ keeps b's support;
///  - task vectors rescaled to equal energy, so only the support size varies
///    between arms;
///  - W_V frozen at identity, removing the pathway that lets the model fit
///    the target while the attention stays uniform;
///  - W_Q initialized equal to W_K, which starts the self-attention logits
///    positive semidefinite instead of leaving their sign to chance.
struct DirectionalConfig {
    std::size_t seeds = 20;
    std::uint64_t master_seed = 0;
    std::size_t d = 8;
    std::size_t D_seq = 12;
    std::size_t k_feat = 4;
    std::size_t K_feat = 6;
    double x_sparsity = 0.3;
    std::size_t sparse_support = 2;
    std::size_t steps = 8000;
    double learning_rate = 1e-2;
    std::size_t batch_size = 16;
    std::size_t eval_draws = 256;
    std::size_t decay_steps = 4000;
    double init_scale = 0.5;
};

struct DirectionalRunRecord {
    std::uint64_t seed = 0;          // instance seed
    std::size_t b_sparsity = 0;      // support size of this arm's task
    bool sparse_arm = false;
    std::size_t d = 0;
    std::size_t D_seq = 0;
    std::size_t k_feat = 0;
    std::size_t K_feat = 0;
    double support_overlap = 0.0;
    double chance_baseline = 0.0;
    double held_out_loss = 0.0;
    std::vector<double> losses;
};

struct DirectionalOutcome {
    std::vector<DirectionalRunRecord> runs;  // sparse arm then dense arm, per seed
    double sparse_mean_overlap = 0.0;
    double dense_mean_overlap = 0.0;
};

DirectionalOutcome run_directional_experiment(const DirectionalConfig& config);

}  // namespace memaudit
