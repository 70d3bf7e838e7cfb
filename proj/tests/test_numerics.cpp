#include <doctest.h>

#include <cmath>

#include "flsim/numerics.hpp"

using namespace flsim;

namespace {

LabeledDataset make_dataset(std::vector<std::vector<double>> rows, std::vector<int> labels) {
    LabeledDataset ds;
    ds.input_dim = static_cast<int>(rows.front().size());
    ds.bits_per_sample = ds.input_dim * 32;
    for (auto& r : rows) ds.features.insert(ds.features.end(), r.begin(), r.end());
    ds.labels = std::move(labels);
    return ds;
}

// independent central-difference gradient, h = 1e-5
ParamVector fd_grad(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& ds) {
    const double h = 1e-5;
    ParamVector g(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        ParamVector plus = params, minus = params;
        plus[i] += h;
        minus[i] -= h;
        g[i] = (loss(plus, spec, ds) - loss(minus, spec, ds)) / (2.0 * h);
    }
    return g;
}

double max_rel_error(const ParamVector& a, const ParamVector& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
        worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
    }
    return worst;
}

}  // namespace

TEST_CASE("forward: zero params give uniform probabilities") {
    ModelSpec spec{3, 0, 4};
    ParamVector p(static_cast<std::size_t>(spec.param_count()), 0.0);
    std::vector<double> x{0.7, -1.2, 0.4};
    auto probs = forward(p, spec, x);
    REQUIRE(probs.size() == 4);
    for (double v : probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("forward: hand softmax of logits (1, 0)") {
    // input_dim=1, x=1: class-0 weight 1, class-1 weight 0, zero biases
    ModelSpec spec{1, 0, 2};
    ParamVector p{1.0, 0.0, 0.0, 0.0};
    std::vector<double> x{1.0};
    auto probs = forward(p, spec, x);
    double e = std::exp(1.0);
    CHECK(probs[0] == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(probs[1] == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));
}

TEST_CASE("forward: probabilities sum to 1 and stay finite for large logits") {
    ModelSpec spec{2, 0, 3};
    Rng rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        ParamVector p(static_cast<std::size_t>(spec.param_count()));
        for (auto& v : p) v = rng.uniform(-25.0, 25.0);  // logits up to ~|50|
        std::vector<double> x{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        auto probs = forward(p, spec, x);
        double sum = 0.0;
        for (double v : probs) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("forward: dimension mismatch names expected and actual dims") {
    ModelSpec spec{3, 0, 2};
    ParamVector p(static_cast<std::size_t>(spec.param_count()), 0.0);
    std::vector<double> x{1.0, 2.0};
    CHECK_THROWS_WITH_AS(forward(p, spec, x), doctest::Contains("expected 3"),
                         std::invalid_argument);
}

TEST_CASE("loss: zero params equal ln(num_classes)") {
    ModelSpec spec{2, 0, 4};
    ParamVector p(static_cast<std::size_t>(spec.param_count()), 0.0);
    auto ds = make_dataset({{0.3, -0.4}, {1.0, 2.0}}, {0, 3});
    CHECK(loss(p, spec, ds) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("loss: two-sample batch with true-class probs 0.5 and 0.25") {
    // x=0 gives logits (0,0) -> p=0.5; x=1 gives logits (0, ln 3) -> p0=0.25
    ModelSpec spec{1, 0, 2};
    ParamVector p{0.0, std::log(3.0), 0.0, 0.0};
    auto ds = make_dataset({{0.0}, {1.0}}, {0, 0});
    double expected = (std::log(2.0) + std::log(4.0)) / 2.0;  // 1.0397...
    CHECK(loss(p, spec, ds) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss: near-perfect prediction approaches zero, never negative") {
    ModelSpec spec{1, 0, 2};
    ParamVector p{40.0, -40.0, 0.0, 0.0};  // x=1 -> p0 ~ 1
    auto ds = make_dataset({{1.0}}, {0});
    double l = loss(p, spec, ds);
    CHECK(l >= 0.0);
    CHECK(l < 1e-12);
}

TEST_CASE("loss: empty batch rejected") {
    ModelSpec spec{1, 0, 2};
    ParamVector p(static_cast<std::size_t>(spec.param_count()), 0.0);
    LabeledDataset empty;
    empty.input_dim = 1;
    empty.bits_per_sample = 32;
    CHECK_THROWS_AS(loss(p, spec, empty), std::invalid_argument);
}

TEST_CASE("grad: matches central finite differences on random small cases") {
    Rng rng(7);
    for (int trial = 0; trial < 8; ++trial) {
        ModelSpec spec{3, trial % 2 == 0 ? 0 : 4, 2};
        ParamVector p(static_cast<std::size_t>(spec.param_count()));
        for (auto& v : p) v = rng.uniform(-0.8, 0.8);
        std::vector<std::vector<double>> rows;
        std::vector<int> labels;
        for (int i = 0; i < 5; ++i) {
            rows.push_back({rng.normal(), rng.normal(), rng.normal()});
            labels.push_back(rng.uniform_int(2));
        }
        auto ds = make_dataset(rows, labels);
        CHECK(max_rel_error(grad(p, spec, ds), fd_grad(p, spec, ds)) <= 1e-4);
    }
}

TEST_CASE("grad: vanishes at a confident correct prediction") {
    ModelSpec spec{1, 0, 2};
    ParamVector p{60.0, -60.0, 0.0, 0.0};
    auto ds = make_dataset({{1.0}}, {0});
    auto g = grad(p, spec, ds);
    double norm = 0.0;
    for (double v : g) norm += v * v;
    CHECK(std::sqrt(norm) < 1e-8);
}

TEST_CASE("grad: duplicated batch gives the identical mean gradient") {
    ModelSpec spec{2, 3, 2};
    Rng rng(11);
    ParamVector p(static_cast<std::size_t>(spec.param_count()));
    for (auto& v : p) v = rng.uniform(-0.5, 0.5);
    auto ds = make_dataset({{0.2, 0.3}, {-1.0, 0.5}}, {0, 1});
    auto doubled = make_dataset({{0.2, 0.3}, {-1.0, 0.5}, {0.2, 0.3}, {-1.0, 0.5}}, {0, 1, 0, 1});
    auto g1 = grad(p, spec, ds);
    auto g2 = grad(p, spec, doubled);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == doctest::Approx(g2[i]).epsilon(1e-12));
}

TEST_CASE("sgd_step: momentum 0 is plain SGD, zero grad is a no-op") {
    ParamVector p{1.0, -2.0};
    OptimizerState opt{{0.0, 0.0}, 0.01, 0.0};
    auto [p2, o2] = sgd_step(p, {3.0, -1.0}, opt);
    CHECK(p2[0] == doctest::Approx(1.0 - 0.03).epsilon(1e-15));
    CHECK(p2[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-15));

    auto [p3, o3] = sgd_step(p, {0.0, 0.0}, opt);
    CHECK(p3[0] == 1.0);
    CHECK(p3[1] == -2.0);
    (void)o2;
    (void)o3;
}

TEST_CASE("sgd_step: unrolled momentum recurrence, second update is -0.019 g") {
    ParamVector p{1.0};
    ParamVector g{2.0};
    OptimizerState opt{{0.0}, 0.01, 0.9};
    auto [p1, o1] = sgd_step(p, g, opt);
    CHECK(p1[0] == doctest::Approx(1.0 - 0.01 * 2.0).epsilon(1e-15));
    auto [p2, o2] = sgd_step(p1, g, o1);
    CHECK(p2[0] - p1[0] == doctest::Approx(-0.01 * 1.9 * 2.0).epsilon(1e-12));
    (void)o2;
}

TEST_CASE("sgd_step: length mismatch rejected") {
    OptimizerState opt{{0.0}, 0.01, 0.0};
    CHECK_THROWS_AS(sgd_step({1.0, 2.0}, {1.0}, opt), std::invalid_argument);
}

TEST_CASE("local_train: E=1 with full batch equals one sgd_step") {
    ModelSpec spec{2, 0, 2};
    Rng init_rng(3);
    auto p = init_params(spec, init_rng);
    auto ds = make_dataset({{0.1, 0.9}, {0.8, -0.3}, {0.5, 0.5}}, {0, 1, 0});

    OptimizerState opt{ParamVector(p.size(), 0.0), 0.05, 0.9};
    Rng rng(99);
    auto trained = local_train(p, spec, ds, 1, 100, opt, rng);
    auto [expected, o2] = sgd_step(p, grad(p, spec, ds), opt);
    REQUIRE(!trained.empty_dataset);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(trained.params[i] == doctest::Approx(expected[i]).epsilon(1e-15));
    }
    (void)o2;
}

TEST_CASE("local_train: bit-identical across runs with the same seed") {
    ModelSpec spec{2, 4, 3};
    Rng init_rng(5);
    auto p = init_params(spec, init_rng);
    Rng data_rng(12);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 30; ++i) {
        rows.push_back({data_rng.normal(), data_rng.normal()});
        labels.push_back(data_rng.uniform_int(3));
    }
    auto ds = make_dataset(rows, labels);
    OptimizerState opt{ParamVector(p.size(), 0.0), 0.05, 0.9};

    Rng r1(777), r2(777);
    auto a = local_train(p, spec, ds, 3, 8, opt, r1);
    auto b = local_train(p, spec, ds, 3, 8, opt, r2);
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i) CHECK(a.params[i] == b.params[i]);
}

TEST_CASE("local_train: loss non-increasing over epochs on a separable case") {
    ModelSpec spec{1, 0, 2};
    auto ds = make_dataset({{-1.0}, {-0.8}, {-1.2}, {1.0}, {0.8}, {1.2}}, {0, 0, 0, 1, 1, 1});
    Rng init_rng(2);
    auto p = init_params(spec, init_rng);
    double prev = loss(p, spec, ds);
    for (int e = 0; e < 5; ++e) {
        OptimizerState opt{ParamVector(p.size(), 0.0), 0.1, 0.0};
        Rng rng(derive_seed(1, "epoch", 0, static_cast<std::uint64_t>(e)));
        p = local_train(p, spec, ds, 1, 3, opt, rng).params;
        double cur = loss(p, spec, ds);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("local_train: empty dataset returns params unchanged with warning flag") {
    ModelSpec spec{1, 0, 2};
    ParamVector p{0.5, -0.5, 0.1, 0.2};
    LabeledDataset empty;
    empty.input_dim = 1;
    empty.bits_per_sample = 32;
    OptimizerState opt{ParamVector(p.size(), 0.0), 0.1, 0.0};
    Rng rng(1);
    auto res = local_train(p, spec, empty, 2, 4, opt, rng);
    CHECK(res.empty_dataset);
    CHECK(res.params == p);
}

TEST_CASE("evaluate: all-correct predictor scores accuracy 1") {
    ModelSpec spec{1, 0, 2};
    ParamVector p{10.0, -10.0, 0.0, 0.0};  // sign(x) decides the class
    auto ds = make_dataset({{1.0}, {2.0}, {-1.0}, {-3.0}}, {0, 0, 1, 1});
    auto m = evaluate(p, spec, ds);
    CHECK(m.accuracy == doctest::Approx(1.0));
    CHECK(m.macro_f1 == doctest::Approx(1.0));
}

TEST_CASE("evaluate: confusion TP=FP=FN=TN=1 gives accuracy 0.5 and macro-F1 0.5") {
    // predictor: class 0 iff x > 0; data arranged to hit each confusion cell once
    ModelSpec spec{1, 0, 2};
    ParamVector p{10.0, -10.0, 0.0, 0.0};
    auto ds = make_dataset({{1.0}, {-1.0}, {1.0}, {-1.0}}, {0, 0, 1, 1});
    auto m = evaluate(p, spec, ds);
    CHECK(m.accuracy == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.macro_f1 == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate: constant predictor on balanced binary data scores 0.5 accuracy") {
    ModelSpec spec{1, 0, 2};
    ParamVector p{0.0, 0.0, 5.0, 0.0};  // bias forces class 0 always
    auto ds = make_dataset({{0.4}, {-0.2}, {1.0}, {-1.0}}, {0, 0, 1, 1});
    auto m = evaluate(p, spec, ds);
    CHECK(m.accuracy == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evaluate: empty dataset rejected") {
    ModelSpec spec{1, 0, 2};
    ParamVector p(static_cast<std::size_t>(spec.param_count()), 0.0);
    LabeledDataset empty;
    empty.input_dim = 1;
    empty.bits_per_sample = 32;
    CHECK_THROWS_AS(evaluate(p, spec, empty), std::invalid_argument);
}

TEST_CASE("init_params: seeded, bounded, reproducible") {
    ModelSpec spec{4, 5, 3};
    Rng r1(123), r2(123);
    auto a = init_params(spec, r1);
    auto b = init_params(spec, r2);
    CHECK(a == b);
    for (double v : a) {
        CHECK(v >= -0.05);
        CHECK(v <= 0.05);
    }
}
