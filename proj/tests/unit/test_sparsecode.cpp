#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <vector>

#include "doctest.h"
#include "memaudit/errors.hpp"
#include "memaudit/rng.hpp"
#include "memaudit/sparsecode.hpp"

using namespace memaudit;

namespace {

// Plain triple-loop product so orthonormality is checked without reusing the
// library's own linear algebra path.
Eigen::MatrixXd slow_gram(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(m.cols(), m.cols());
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            double sum = 0.0;
            for (Eigen::Index r = 0; r < m.rows(); ++r) sum += m(r, i) * m(r, j);
            gram(i, j) = sum;
        }
    }
    return gram;
}

double max_identity_deviation(const Eigen::MatrixXd& gram) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < gram.rows(); ++i) {
        for (Eigen::Index j = 0; j < gram.cols(); ++j) {
            const double want = i == j ? 1.0 : 0.0;
            worst = std::max(worst, std::abs(gram(i, j) - want));
        }
    }
    return worst;
}

double toy_loss(const AttentionToyParams& params, const Eigen::MatrixXd& Z, double target) {
    const double r = attention_forward(params, Z).y_hat - target;
    return r * r;
}

bool close_rel(double analytic, double numeric, double tol) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) <= tol * scale;
}

}  // namespace

TEST_CASE("gram-schmidt on the identity returns the identity") {
    Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
    Eigen::MatrixXd q = orthonormalize_columns(eye);
    CHECK((q - eye).norm() == 0.0);
}

TEST_CASE("gram-schmidt output has orthonormal columns") {
    rng::Engine engine(11);
    Eigen::MatrixXd m(7, 4);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = engine.next_normal();
    }
    Eigen::MatrixXd q = orthonormalize_columns(m);
    CHECK(max_identity_deviation(slow_gram(q)) <= 1e-12);
}

TEST_CASE("gram-schmidt rejects rank-deficient input") {
    Eigen::MatrixXd m(4, 2);
    m.col(0) << 1, 2, 3, 4;
    m.col(1) = 2.0 * m.col(0);
    CHECK_THROWS_AS(orthonormalize_columns(m), ValidationError);
}

TEST_CASE("identity factors make Z equal X") {
    Eigen::MatrixXd X(4, 6);
    rng::Engine engine(3);
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index c = 0; c < X.cols(); ++c) X(r, c) = engine.next_normal();
    }
    SparseInstance inst = make_instance(Eigen::MatrixXd::Identity(4, 4), X,
                                        Eigen::MatrixXd::Identity(6, 6));
    CHECK((inst.Z - X).norm() == 0.0);
    CHECK(inst.d == 4);
    CHECK(inst.D_seq == 6);
    CHECK(inst.k_feat == 4);
    CHECK(inst.K_feat == 6);
}

TEST_CASE("make_instance validates shapes and orthonormality") {
    Eigen::MatrixXd U = Eigen::MatrixXd::Identity(4, 3);
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(3, 2);
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(2, 5);
    CHECK_NOTHROW(make_instance(U, X, V));
    CHECK_THROWS_AS(make_instance(U, Eigen::MatrixXd::Zero(2, 2), V), ValidationError);
    CHECK_THROWS_AS(make_instance(2.0 * U, X, V), ValidationError);
    // K_feat > D_seq: V wider than tall the wrong way round.
    CHECK_THROWS_AS(make_instance(Eigen::MatrixXd::Identity(4, 4), Eigen::MatrixXd::Zero(4, 5),
                                  Eigen::MatrixXd::Identity(5, 3)),
                    ValidationError);
}

TEST_CASE("generated instances satisfy the factor invariants") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SparseInstance inst = generate_instance(8, 12, 4, 6, 0.25, seed);
        CHECK(max_identity_deviation(slow_gram(inst.U)) <= 1e-10);
        CHECK(max_identity_deviation(slow_gram(inst.V.transpose())) <= 1e-10);
        CHECK((inst.Z - inst.U * inst.X * inst.V).norm() <= 1e-12);
        CHECK(inst.sparsity == 0.25);
    }
}

TEST_CASE("sparsity one gives a fully dense X") {
    SparseInstance inst = generate_instance(6, 9, 3, 5, 1.0, 42);
    CHECK((inst.X.array() != 0.0).all());
}

TEST_CASE("generate_instance rejects bad dimensions") {
    CHECK_THROWS_AS(generate_instance(4, 12, 5, 6, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(generate_instance(8, 5, 4, 6, 0.5, 1), ValidationError);
    CHECK_THROWS_AS(generate_instance(8, 12, 4, 6, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(generate_instance(8, 12, 4, 6, 1.5, 1), ValidationError);
    CHECK_THROWS_AS(generate_instance(8, 12, 0, 6, 0.5, 1), ValidationError);
}

TEST_CASE("resample keeps factors and redraws X deterministically") {
    SparseInstance a = generate_instance(8, 12, 4, 6, 0.25, 7);
    SparseInstance b = a;
    resample_x(a, 99);
    resample_x(b, 99);
    CHECK((a.X - b.X).norm() == 0.0);
    CHECK((a.Z - a.U * a.X * a.V).norm() <= 1e-12);
    resample_x(b, 100);
    CHECK((a.X - b.X).norm() > 0.0);
}

TEST_CASE("simple-task closed form matches the hidden target") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, seed);
        SimpleTaskSpec spec = make_task(inst, 2, seed + 1000);
        ClosedFormSolution sol = closed_form_simple(inst, spec);
        CHECK(std::abs(simple_task_prediction(inst, sol) - simple_task_target(inst, spec)) <=
              1e-10);
    }
}

TEST_CASE("identity instance keeps task vectors unchanged") {
    Eigen::MatrixXd X(3, 3);
    X << 1, 2, 3, 4, 5, 6, 7, 8, 10;
    SparseInstance inst = make_instance(Eigen::MatrixXd::Identity(3, 3), X,
                                        Eigen::MatrixXd::Identity(3, 3));
    SimpleTaskSpec spec = make_task(inst, 1, 5);
    ClosedFormSolution sol = closed_form_simple(inst, spec);
    CHECK((sol.a_prime - spec.a).norm() == 0.0);
    CHECK((sol.b_prime - spec.b).norm() == 0.0);
    CHECK(simple_task_prediction(inst, sol) == simple_task_target(inst, spec));
}

TEST_CASE("parameter counts follow the two regimes") {
    SparseInstance inst = generate_instance(8, 16, 4, 6, 0.5, 1);
    SimpleTaskSpec spec = make_task(inst, 2, 2);
    CHECK(closed_form_simple(inst, spec).param_count == 24);
    CHECK(closed_form_complex(inst).param_count == 128);
}

TEST_CASE("complex-task solution recovers X") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, seed);
        ClosedFormSolution sol = closed_form_complex(inst);
        CHECK((recover_x(inst, sol) - inst.X).norm() <= 1e-10);
    }
}

TEST_CASE("inversion reconstructs the observation from recovered X") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, seed);
        ClosedFormSolution sol = closed_form_complex(inst);
        Eigen::MatrixXd z_hat = invert_model(sol, recover_x(inst, sol));
        CHECK((z_hat - inst.Z).norm() <= 1e-8);
    }
}

TEST_CASE("inversion edge cases") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 9);
    ClosedFormSolution sol = closed_form_complex(inst);
    CHECK(invert_model(sol, Eigen::MatrixXd::Zero(4, 6)).norm() == 0.0);
    CHECK_THROWS_AS(invert_model(sol, Eigen::MatrixXd::Zero(5, 6)), ValidationError);
    SimpleTaskSpec spec = make_task(inst, 2, 3);
    CHECK_THROWS_AS(invert_model(closed_form_simple(inst, spec), Eigen::MatrixXd::Zero(4, 6)),
                    ValidationError);

    Eigen::MatrixXd X(3, 3);
    X << 0, 1, 0, 2, 0, 0, 0, 0, 3;
    SparseInstance identity = make_instance(Eigen::MatrixXd::Identity(3, 3), X,
                                            Eigen::MatrixXd::Identity(3, 3));
    Eigen::MatrixXd x_hat(3, 3);
    x_hat << 9, 8, 7, 6, 5, 4, 3, 2, 1;
    CHECK((invert_model(closed_form_complex(identity), x_hat) - x_hat).norm() == 0.0);
}

TEST_CASE("zero score matrices give uniform attention") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 21);
    AttentionToyParams params = init_params(inst, 5, 0.0);
    CHECK(params.W_K.norm() == 0.0);
    CHECK(params.W_Q.norm() == 0.0);
    AttentionForward fwd = attention_forward(params, inst.Z);
    const double uniform = 1.0 / 12.0;
    CHECK((fwd.attention.array() - uniform).abs().maxCoeff() <= 1e-15);
    const double expected = params.v2.sum() / 12.0;
    for (Eigen::Index i = 0; i < fwd.aggregated.size(); ++i) {
        CHECK(fwd.aggregated(i) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("attention columns always sum to one") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 22);
    AttentionToyParams params = init_params(inst, 6, 0.5);
    AttentionForward fwd = attention_forward(params, inst.Z);
    for (Eigen::Index j = 0; j < fwd.attention.cols(); ++j) {
        CHECK(std::abs(fwd.attention.col(j).sum() - 1.0) <= 1e-9);
    }
}

TEST_CASE("single-column sequence reduces to a plain bilinear readout") {
    SparseInstance inst = generate_instance(5, 1, 3, 1, 1.0, 8);
    AttentionToyParams params = init_params(inst, 9, 0.3);
    AttentionForward fwd = attention_forward(params, inst.Z);
    CHECK(fwd.attention.rows() == 1);
    CHECK(fwd.attention(0, 0) == 1.0);
    const double direct = params.v1.dot((params.W_V * inst.Z).col(0)) * params.v2(0);
    CHECK(fwd.y_hat == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    const double h = 1e-5;
    const double tol = 1e-4;
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        SparseInstance inst = generate_instance(6, 9, 3, 5, 0.4, seed);
        AttentionToyParams params = init_params(inst, seed + 50, 0.4);
        rng::Engine target_rng(seed + 500);
        const double target = target_rng.next_normal();
        AttentionGradients grads = attention_gradients(params, inst.Z, target);

        auto check_matrix = [&](Eigen::MatrixXd& field, const Eigen::MatrixXd& analytic) {
            for (Eigen::Index r = 0; r < field.rows(); ++r) {
                for (Eigen::Index c = 0; c < field.cols(); ++c) {
                    const double keep = field(r, c);
                    field(r, c) = keep + h;
                    const double up = toy_loss(params, inst.Z, target);
                    field(r, c) = keep - h;
                    const double down = toy_loss(params, inst.Z, target);
                    field(r, c) = keep;
                    CHECK(close_rel(analytic(r, c), (up - down) / (2.0 * h), tol));
                }
            }
        };
        check_matrix(params.W_V, grads.dW_V);
        check_matrix(params.W_K, grads.dW_K);
        check_matrix(params.W_Q, grads.dW_Q);

        auto check_vector = [&](Eigen::VectorXd& field, const Eigen::VectorXd& analytic) {
            for (Eigen::Index i = 0; i < field.size(); ++i) {
                const double keep = field(i);
                field(i) = keep + h;
                const double up = toy_loss(params, inst.Z, target);
                field(i) = keep - h;
                const double down = toy_loss(params, inst.Z, target);
                field(i) = keep;
                CHECK(close_rel(analytic(i), (up - down) / (2.0 * h), tol));
            }
        };
        check_vector(params.v1, grads.dv1);
        check_vector(params.v2, grads.dv2);
    }
}

TEST_CASE("support overlap hand cases") {
    Eigen::VectorXd values(4), reference(4);
    values << 3, 2, 1, 0;
    reference << 5, 4, 0, 0;
    CHECK(expected_support_overlap(values, reference, 2) == 1.0);

    values << 0, 1, 0, 2;
    CHECK(expected_support_overlap(values, reference, 2) == 0.5);

    // Tie at the cutoff: positions 1 and 2 share the one remaining slot.
    values << 2, 1, 1, 0;
    reference << 5, 4, 0, 0;
    CHECK(expected_support_overlap(values, reference, 2) == doctest::Approx(0.75));

    // Reference ties break by index.
    Eigen::VectorXd flat_ref = Eigen::VectorXd::Ones(3);
    Eigen::VectorXd spiked(3);
    spiked << 0, 9, 0;
    CHECK(expected_support_overlap(spiked, flat_ref, 1) == 0.0);
    spiked << 9, 0, 0;
    CHECK(expected_support_overlap(spiked, flat_ref, 1) == 1.0);
}

TEST_CASE("uniform values score exactly the chance baseline") {
    Eigen::VectorXd uniform = Eigen::VectorXd::Constant(12, 0.37);
    rng::Engine engine(4);
    Eigen::VectorXd reference(12);
    for (Eigen::Index i = 0; i < reference.size(); ++i) reference(i) = engine.next_normal();
    for (std::size_t s = 1; s <= 12; ++s) {
        CHECK(expected_support_overlap(uniform, reference, s) ==
              doctest::Approx(static_cast<double>(s) / 12.0).epsilon(1e-12));
    }
}

TEST_CASE("support overlap argument validation") {
    Eigen::VectorXd a = Eigen::VectorXd::Ones(4);
    Eigen::VectorXd b = Eigen::VectorXd::Ones(5);
    CHECK_THROWS_AS(expected_support_overlap(a, b, 2), ValidationError);
    CHECK_THROWS_AS(expected_support_overlap(a, a, 0), ValidationError);
    CHECK_THROWS_AS(expected_support_overlap(a, a, 5), ValidationError);
}

TEST_CASE("untrained uniform attention sits at the chance baseline") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 31);
    SimpleTaskSpec spec = make_task(inst, 2, 32);
    AttentionToyParams params = init_params(inst, 33, 0.0);
    TrainOptions options;
    options.steps = 0;
    TrainResult result = train_attention_toy(inst, spec, params, options, 34);
    CHECK(result.chance_baseline == doctest::Approx(2.0 / 12.0).epsilon(1e-15));
    CHECK(result.support_overlap == doctest::Approx(result.chance_baseline).epsilon(1e-12));
}

TEST_CASE("gradient descent on a fixed draw starts out strictly decreasing") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 40);
    SimpleTaskSpec spec;
    rng::Engine engine(41);
    spec.a = Eigen::VectorXd::Zero(4);
    for (Eigen::Index i = 0; i < 4; ++i) spec.a(i) = engine.next_normal();
    spec.b = Eigen::VectorXd::Zero(6);
    spec.b(0) = 1.0;
    spec.b_sparsity = 1;

    AttentionToyParams params = init_params(inst, 42, 0.1);
    TrainOptions options;
    options.steps = 2000;
    options.learning_rate = 1e-2;
    options.resample_each_step = false;
    TrainResult result = train_attention_toy(inst, spec, params, options, 43);
    REQUIRE(result.losses.size() == 2000);
    for (std::size_t i = 1; i < 100; ++i) {
        CHECK(result.losses[i] < result.losses[i - 1]);
    }
    CHECK(result.losses[1999] < result.losses[0]);
}

TEST_CASE("training is deterministic given the seed") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 50);
    SimpleTaskSpec spec = make_task(inst, 2, 51);
    AttentionToyParams params = init_params(inst, 52, 0.1);
    TrainOptions options;
    options.steps = 50;
    TrainResult first = train_attention_toy(inst, spec, params, options, 53);
    TrainResult second = train_attention_toy(inst, spec, params, options, 53);
    CHECK(first.losses == second.losses);
    CHECK((first.params.W_K - second.params.W_K).norm() == 0.0);
    CHECK(first.support_overlap == second.support_overlap);
}

TEST_CASE("divergent learning rates raise a training error with the step") {
    SparseInstance inst = generate_instance(8, 12, 4, 6, 0.3, 60);
    SimpleTaskSpec spec = make_task(inst, 2, 61);
    AttentionToyParams params = init_params(inst, 62, 0.1);
    TrainOptions options;
    options.steps = 5000;
    options.learning_rate = 1e6;
    options.train_v = true;
    try {
        train_attention_toy(inst, spec, params, options, 63);
        FAIL("expected TrainingError");
    } catch (const TrainingError& err) {
        CHECK(err.step() >= 1);
        CHECK(std::string(err.what()).find("diverged") != std::string::npos);
    }
}

TEST_CASE("selection instances place each feature on its own position") {
    SparseInstance inst = make_selection_instance(8, 12, 4, 6, 0.3, 71);
    CHECK(max_identity_deviation(slow_gram(inst.U)) <= 1e-10);
    CHECK(max_identity_deviation(slow_gram(inst.V.transpose())) <= 1e-10);

    std::vector<bool> used(12, false);
    for (Eigen::Index r = 0; r < inst.V.rows(); ++r) {
        std::size_t nonzero = 0;
        for (Eigen::Index c = 0; c < inst.V.cols(); ++c) {
            const double value = inst.V(r, c);
            if (value == 0.0) continue;
            CHECK(std::abs(value) == 1.0);
            CHECK_FALSE(used[static_cast<std::size_t>(c)]);
            used[static_cast<std::size_t>(c)] = true;
            ++nonzero;
        }
        CHECK(nonzero == 1);
    }
}

TEST_CASE("selection instances keep the task support size in b prime") {
    SparseInstance inst = make_selection_instance(8, 12, 4, 6, 0.3, 72);
    SimpleTaskSpec spec = make_task(inst, 2, 73);
    const Eigen::VectorXd b_prime = inst.V.transpose() * spec.b;
    std::size_t nonzero = 0;
    for (Eigen::Index i = 0; i < b_prime.size(); ++i) {
        if (b_prime(i) != 0.0) ++nonzero;
    }
    CHECK(nonzero == 2);
}

TEST_CASE("selection instance validation mirrors generate_instance") {
    CHECK_THROWS_AS(make_selection_instance(4, 12, 6, 6, 0.3, 1), ValidationError);
    CHECK_THROWS_AS(make_selection_instance(8, 4, 4, 6, 0.3, 1), ValidationError);
    CHECK_THROWS_AS(make_selection_instance(8, 12, 4, 6, 1.5, 1), ValidationError);
}

TEST_CASE("directional experiment emits paired records and both means") {
    DirectionalConfig config;
    config.seeds = 2;
    config.steps = 20;
    config.batch_size = 2;
    config.eval_draws = 8;
    config.decay_steps = 0;
    DirectionalOutcome outcome = run_directional_experiment(config);
    REQUIRE(outcome.runs.size() == 4);

    double sparse_sum = 0.0;
    double dense_sum = 0.0;
    for (std::size_t i = 0; i < outcome.runs.size(); ++i) {
        const DirectionalRunRecord& record = outcome.runs[i];
        const bool expect_sparse = i % 2 == 0;
        CHECK(record.sparse_arm == expect_sparse);
        CHECK(record.seed == i / 2);
        CHECK(record.b_sparsity == (expect_sparse ? 2u : 6u));
        CHECK(record.losses.size() == 20);
        CHECK(record.chance_baseline ==
              doctest::Approx(record.b_sparsity / 12.0).epsilon(1e-12));
        (expect_sparse ? sparse_sum : dense_sum) += record.support_overlap;
    }
    CHECK(outcome.sparse_mean_overlap == doctest::Approx(sparse_sum / 2.0).epsilon(1e-12));
    CHECK(outcome.dense_mean_overlap == doctest::Approx(dense_sum / 2.0).epsilon(1e-12));

    DirectionalOutcome again = run_directional_experiment(config);
    CHECK(again.sparse_mean_overlap == outcome.sparse_mean_overlap);
    CHECK(again.dense_mean_overlap == outcome.dense_mean_overlap);
}

TEST_CASE("directional experiment validates its dimensions") {
    DirectionalConfig config;
    config.seeds = 0;
    CHECK_THROWS_AS(run_directional_experiment(config), ValidationError);
    config.seeds = 1;
    config.sparse_support = 6;
    CHECK_THROWS_AS(run_directional_experiment(config), ValidationError);
}
