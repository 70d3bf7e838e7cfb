#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "flsim/rl_agent.hpp"

using namespace flsim;

namespace {

// ---- dense symmetric eigendecomposition oracle (cyclic Jacobi) ----
struct EigenPair {
    double value;
    std::vector<double> vector;
};

std::vector<EigenPair> jacobi_eigen(std::vector<double> a, int n) {
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i) * n + i] = 1.0;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                off += a[static_cast<std::size_t>(p) * n + q] * a[static_cast<std::size_t>(p) * n + q];
            }
        }
        if (off < 1e-22) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double apq = a[static_cast<std::size_t>(p) * n + q];
                if (std::abs(apq) < 1e-300) continue;
                double app = a[static_cast<std::size_t>(p) * n + p];
                double aqq = a[static_cast<std::size_t>(q) * n + q];
                double theta = 0.5 * (aqq - app) / apq;
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (int k = 0; k < n; ++k) {
                    double akp = a[static_cast<std::size_t>(k) * n + p];
                    double akq = a[static_cast<std::size_t>(k) * n + q];
                    a[static_cast<std::size_t>(k) * n + p] = c * akp - s * akq;
                    a[static_cast<std::size_t>(k) * n + q] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    double apk = a[static_cast<std::size_t>(p) * n + k];
                    double aqk = a[static_cast<std::size_t>(q) * n + k];
                    a[static_cast<std::size_t>(p) * n + k] = c * apk - s * aqk;
                    a[static_cast<std::size_t>(q) * n + k] = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    double vkp = v[static_cast<std::size_t>(k) * n + p];
                    double vkq = v[static_cast<std::size_t>(k) * n + q];
                    v[static_cast<std::size_t>(k) * n + p] = c * vkp - s * vkq;
                    v[static_cast<std::size_t>(k) * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    std::vector<EigenPair> out;
    for (int i = 0; i < n; ++i) {
        EigenPair e;
        e.value = a[static_cast<std::size_t>(i) * n + i];
        e.vector.resize(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) e.vector[static_cast<std::size_t>(k)] = v[static_cast<std::size_t>(k) * n + i];
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const EigenPair& x, const EigenPair& y) {
        return x.value > y.value;
    });
    return out;
}

std::vector<double> sample_covariance(const std::vector<ParamVector>& rows) {
    int m = static_cast<int>(rows.size());
    int d = static_cast<int>(rows[0].size());
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
    for (const auto& r : rows) {
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)];
    }
    for (auto& v : mean) v /= m;
    std::vector<double> cov(static_cast<std::size_t>(d) * d, 0.0);
    for (const auto& r : rows) {
        for (int i = 0; i < d; ++i) {
            double ci = r[static_cast<std::size_t>(i)] - mean[static_cast<std::size_t>(i)];
            for (int j = 0; j < d; ++j) {
                cov[static_cast<std::size_t>(i) * d + j] +=
                    ci * (r[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)]);
            }
        }
    }
    for (auto& v : cov) v /= (m - 1);
    return cov;
}

// random factor model with descending scales: clean spectral gaps
std::vector<ParamVector> factor_rows(int m, int d, int factors, Rng& rng) {
    std::vector<ParamVector> dirs(static_cast<std::size_t>(factors), ParamVector(static_cast<std::size_t>(d)));
    for (auto& u : dirs) {
        double n2 = 0.0;
        for (auto& x : u) {
            x = rng.normal();
            n2 += x * x;
        }
        for (auto& x : u) x /= std::sqrt(n2);
    }
    std::vector<ParamVector> rows(static_cast<std::size_t>(m), ParamVector(static_cast<std::size_t>(d), 0.0));
    for (auto& r : rows) {
        for (int f = 0; f < factors; ++f) {
            double scale = 10.0 / (1.0 + f) * rng.normal();
            for (int j = 0; j < d; ++j) r[static_cast<std::size_t>(j)] += scale * dirs[static_cast<std::size_t>(f)][static_cast<std::size_t>(j)];
        }
        for (int j = 0; j < d; ++j) r[static_cast<std::size_t>(j)] += 0.05 * rng.normal();
    }
    return rows;
}

double cos_angle(std::span<const double> a, std::span<const double> b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return num / std::sqrt(na * nb);
}

Transition make_transition(Rng& rng, int state_len, int n, int u) {
    Transition tr;
    tr.state.resize(static_cast<std::size_t>(state_len));
    tr.next_state.resize(static_cast<std::size_t>(state_len));
    for (auto& v : tr.state) v = rng.uniform(-1.0, 1.0);
    for (auto& v : tr.next_state) v = rng.uniform(-1.0, 1.0);
    tr.actions = rng.sample_without_replacement(n, u);
    tr.rewards.resize(static_cast<std::size_t>(u));
    for (auto& r : tr.rewards) r = rng.uniform(-0.5, 0.5);
    tr.done = false;
    return tr;
}

}  // namespace

TEST_CASE("fit_pca: rank-1 data recovers the axis") {
    std::vector<ParamVector> rows;
    for (int i = 0; i < 6; ++i) rows.push_back({static_cast<double>(i), 0.0, 0.0});
    auto p = fit_pca(rows, 1);
    CHECK(std::abs(p.component(0)[0]) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(p.component(0)[1]) < 1e-9);
    CHECK(std::abs(p.component(0)[2]) < 1e-9);
}

TEST_CASE("fit_pca: components match the dense eigendecomposition oracle") {
    Rng rng(2024);
    auto rows = factor_rows(10, 6, 3, rng);
    auto p = fit_pca(rows, 3);
    auto oracle = jacobi_eigen(sample_covariance(rows), 6);
    for (int c = 0; c < 3; ++c) {
        CHECK(std::abs(cos_angle(p.component(c), oracle[static_cast<std::size_t>(c)].vector)) > 0.999);
        CHECK(p.explained_variance[static_cast<std::size_t>(c)] ==
              doctest::Approx(oracle[static_cast<std::size_t>(c)].value).epsilon(1e-6));
    }
}

TEST_CASE("fit_pca: orthonormal rows, non-increasing explained variance") {
    Rng rng(7);
    auto rows = factor_rows(20, 12, 4, rng);
    auto p = fit_pca(rows, 4);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            double expected = i == j ? 1.0 : 0.0;
            CHECK(cos_angle(p.component(i), p.component(i)) == doctest::Approx(1.0).epsilon(1e-6));
            double d = 0.0;
            for (int k = 0; k < 12; ++k) d += p.component(i)[static_cast<std::size_t>(k)] * p.component(j)[static_cast<std::size_t>(k)];
            CHECK(d == doctest::Approx(expected).epsilon(1e-6));
        }
    }
    for (int c = 1; c < 4; ++c) {
        CHECK(p.explained_variance[static_cast<std::size_t>(c)] <=
              p.explained_variance[static_cast<std::size_t>(c - 1)] + 1e-9);
    }
}

TEST_CASE("fit_pca: projecting then reconstructing rank-k data reproduces it") {
    Rng rng(15);
    auto rows = factor_rows(12, 8, 2, rng);
    // strip the noise term by projecting rows onto their own top-2 basis
    auto p = fit_pca(rows, 2);
    for (const auto& r : rows) {
        auto z = project(p, r);
        ParamVector back(p.mean);
        for (int c = 0; c < p.k_pca; ++c) {
            for (int j = 0; j < p.dim; ++j) {
                back[static_cast<std::size_t>(j)] +=
                    z[static_cast<std::size_t>(c)] * p.component(c)[static_cast<std::size_t>(j)];
            }
        }
        // residual only from the 0.05-noise floor
        double err = 0.0, mag = 0.0;
        for (int j = 0; j < p.dim; ++j) {
            err += (back[static_cast<std::size_t>(j)] - r[static_cast<std::size_t>(j)]) *
                   (back[static_cast<std::size_t>(j)] - r[static_cast<std::size_t>(j)]);
            mag += r[static_cast<std::size_t>(j)] * r[static_cast<std::size_t>(j)];
        }
        CHECK(std::sqrt(err) < 0.05 * std::sqrt(static_cast<double>(p.dim)) * 6.0);
        (void)mag;
    }
}

TEST_CASE("fit_pca: k_pca bounds enforced, deterministic per seed") {
    Rng rng(3);
    auto rows = factor_rows(5, 10, 2, rng);
    CHECK_THROWS_AS(fit_pca(rows, 5), std::invalid_argument);  // k > M-1
    auto a = fit_pca(rows, 2, 99);
    auto b = fit_pca(rows, 2, 99);
    CHECK(a.components == b.components);
}

TEST_CASE("project: mean maps to zero, mean+component to a unit basis vector") {
    Rng rng(10);
    auto rows = factor_rows(8, 5, 2, rng);
    auto p = fit_pca(rows, 2);
    auto z = project(p, p.mean);
    for (double v : z) CHECK(std::abs(v) < 1e-9);

    ParamVector shifted(p.mean);
    for (int j = 0; j < p.dim; ++j) shifted[static_cast<std::size_t>(j)] += p.component(0)[static_cast<std::size_t>(j)];
    auto e1 = project(p, shifted);
    CHECK(e1[0] == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(e1[1]) < 1e-9);

    CHECK_THROWS_AS(project(p, ParamVector{1.0}), std::invalid_argument);
}

TEST_CASE("project: linearity") {
    Rng rng(11);
    auto rows = factor_rows(8, 6, 2, rng);
    auto p = fit_pca(rows, 2);
    ParamVector a(6), b(6);
    for (auto& v : a) v = rng.uniform(-2.0, 2.0);
    for (auto& v : b) v = rng.uniform(-2.0, 2.0);
    ParamVector sum(6), zero(6, 0.0);
    for (int j = 0; j < 6; ++j) sum[static_cast<std::size_t>(j)] = a[static_cast<std::size_t>(j)] + b[static_cast<std::size_t>(j)];
    auto pa = project(p, a), pb = project(p, b), ps = project(p, sum), p0 = project(p, zero);
    for (int c = 0; c < 2; ++c) {
        CHECK(ps[static_cast<std::size_t>(c)] - pa[static_cast<std::size_t>(c)] -
                  pb[static_cast<std::size_t>(c)] + p0[static_cast<std::size_t>(c)] ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
}

TEST_CASE("encode_state: block structure, symmetry, and locality") {
    Rng rng(5);
    auto rows = factor_rows(6, 4, 2, rng);
    auto proj = fit_pca(rows, 2);
    StateNormStats stats{10, 100, 1, 8, 300, 4400, 6, 336};

    ParamVector w(4, 0.2);
    std::vector<ClientStateInput> clients(3);
    for (auto& c : clients) c = {&w, 50.0, 4.0, 1000.0, 33.0};
    auto s = encode_state(clients, proj, stats);
    REQUIRE(s.size() == 3 * (2 + 4));

    // identical clients produce identical blocks
    for (std::size_t b = 1; b < 3; ++b) {
        for (std::size_t i = 0; i < 6; ++i) CHECK(s[b * 6 + i] == s[i]);
    }
    // scalar features scaled into [0,1]
    for (std::size_t b = 0; b < 3; ++b) {
        for (std::size_t i = 2; i < 6; ++i) {
            CHECK(s[b * 6 + i] >= 0.0);
            CHECK(s[b * 6 + i] <= 1.0);
        }
    }
    // changing one client's bandwidth changes only that block
    clients[1].bandwidth_mbps = 300.0;
    auto s2 = encode_state(clients, proj, stats);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(s2[i] == s[i]);
        CHECK(s2[12 + i] == s[12 + i]);
    }
    CHECK(s2[6 + 5] != s[6 + 5]);
}

TEST_CASE("epsilon_at: endpoints and midpoint of the linear decay") {
    EpsilonSchedule s{0.9, 0.2, 100};
    CHECK(epsilon_at(s, 0) == doctest::Approx(0.9));
    CHECK(epsilon_at(s, 100) == doctest::Approx(0.2));
    CHECK(epsilon_at(s, 5000) == doctest::Approx(0.2));
    CHECK(epsilon_at(s, 50) == doctest::Approx(0.55).epsilon(1e-12));
    EpsilonSchedule mnist{0.9, 0.35, 80};
    CHECK(epsilon_at(mnist, 80) == doctest::Approx(0.35));
}

TEST_CASE("select_top_u: greedy picks the U largest with ties to the lowest index") {
    Rng rng(1);
    auto s = select_top_u({0.1, 0.9, 0.5, 0.7}, 2, 0.0, rng);
    CHECK(s == std::vector<int>{1, 3});

    Rng rng2(2);
    auto ties = select_top_u({0.3, 0.3, 0.3, 0.3, 0.3}, 3, 0.0, rng2);
    CHECK(ties == std::vector<int>{0, 1, 2});

    Rng rng3(3);
    CHECK_THROWS_AS(select_top_u({0.1, 0.2}, 3, 0.0, rng3), std::invalid_argument);
}

TEST_CASE("select_top_u: greedy matches a brute-force sort oracle on random vectors") {
    Rng rng(12345);
    for (int trial = 0; trial < 300; ++trial) {
        int n = 2 + rng.uniform_int(20);
        int u = 1 + rng.uniform_int(n);
        std::vector<double> q(static_cast<std::size_t>(n));
        for (auto& v : q) v = rng.uniform(-5.0, 5.0);

        std::vector<int> oracle(static_cast<std::size_t>(n));
        std::iota(oracle.begin(), oracle.end(), 0);
        std::sort(oracle.begin(), oracle.end(), [&q](int a, int b) {
            if (q[static_cast<std::size_t>(a)] != q[static_cast<std::size_t>(b)]) {
                return q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(b)];
            }
            return a < b;
        });
        oracle.resize(static_cast<std::size_t>(u));
        std::sort(oracle.begin(), oracle.end());

        Rng sel(derive_seed(9, "sel", static_cast<std::uint64_t>(trial)));
        CHECK(select_top_u(q, u, 0.0, sel) == oracle);
    }
}

TEST_CASE("select_top_u: invariant under strictly increasing transforms") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> q(12);
        for (auto& v : q) v = rng.uniform(-3.0, 3.0);
        std::vector<double> warped(q);
        for (auto& v : warped) v = std::exp(0.5 * v) + 2.0;
        Rng a(1000 + static_cast<std::uint64_t>(trial)), b(1000 + static_cast<std::uint64_t>(trial));
        CHECK(select_top_u(q, 4, 0.0, a) == select_top_u(warped, 4, 0.0, b));
    }
}

TEST_CASE("select_top_u: eps=1 selection frequencies approach U/N") {
    const int n = 10, u = 3, trials = 3000;
    std::vector<double> q(static_cast<std::size_t>(n), 0.0);
    std::vector<int> counts(static_cast<std::size_t>(n), 0);
    for (int t = 0; t < trials; ++t) {
        Rng rng(derive_seed(78, "explore", static_cast<std::uint64_t>(t)));
        for (int k : select_top_u(q, u, 1.0, rng)) ++counts[static_cast<std::size_t>(k)];
    }
    double p = static_cast<double>(u) / n;
    double sigma = std::sqrt(p * (1.0 - p) * trials);
    for (int k = 0; k < n; ++k) {
        CHECK(std::abs(counts[static_cast<std::size_t>(k)] - p * trials) <= 3.0 * sigma);
    }
}

TEST_CASE("q_forward: zero-initialized net is symmetric across outputs, deterministic") {
    QNetwork net;
    net.input_dim = 4;
    net.hidden_dim = 3;
    net.output_dim = 5;
    net.params.assign(static_cast<std::size_t>(3 * 4 + 3 + 5 * 3 + 5), 0.0);
    AgentState s{0.1, 0.2, 0.3, 0.4};
    auto q = q_forward(net, s);
    for (double v : q) CHECK(v == q[0]);
    CHECK(q_forward(net, s) == q);
    CHECK_THROWS_AS(q_forward(net, AgentState{1.0}), std::invalid_argument);
}

TEST_CASE("q_forward: bounded response to a bounded input perturbation") {
    Rng rng(19);
    auto net = QNetwork::init(6, 8, 4, rng);
    AgentState s(6, 0.3);
    auto base = q_forward(net, s);
    // Lipschitz bound: |dQ/ds_i| <= sum_j |W2| * |W1| with tanh' <= 1
    double w1_max = 0.0, w2_max = 0.0;
    for (int j = 0; j < 8 * 6; ++j) w1_max = std::max(w1_max, std::abs(net.params[static_cast<std::size_t>(j)]));
    for (int j = 0; j < 4 * 8; ++j) {
        w2_max = std::max(w2_max, std::abs(net.params[static_cast<std::size_t>(8 * 6 + 8 + j)]));
    }
    double bound = 8.0 * w1_max * w2_max * 1e-3 * 1.0001 + 1e-12;
    AgentState perturbed(s);
    perturbed[2] += 1e-3;
    auto out = q_forward(net, perturbed);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - base[i]) <= bound);
}

TEST_CASE("ddql_target: terminal transitions return the rewards unchanged") {
    Rng rng(21);
    auto main = QNetwork::init(4, 3, 3, rng);
    auto target = QNetwork::init(4, 3, 3, rng);
    auto tr = make_transition(rng, 4, 3, 2);
    tr.done = true;
    auto y = ddql_target(tr, main, target, 0.9);
    CHECK(y == tr.rewards);
}

TEST_CASE("ddql_target: hand value r + gamma * Q_target(next, argmax main)") {
    // single client so the argmax is forced; craft nets with known outputs
    Rng rng(22);
    auto main = QNetwork::init(2, 2, 1, rng);
    QNetwork target = main;
    // zero all weights, set output bias: Q_target == 1.0 everywhere
    std::fill(target.params.begin(), target.params.end(), 0.0);
    target.params.back() = 1.0;
    Transition tr;
    tr.state = {0.1, 0.2};
    tr.next_state = {0.3, 0.4};
    tr.actions = {0};
    tr.rewards = {0.3};
    tr.done = false;
    auto y = ddql_target(tr, main, target, 0.9);
    CHECK(y[0] == doctest::Approx(1.2).epsilon(1e-12));

    auto y0 = ddql_target(tr, main, target, 0.0);
    CHECK(y0[0] == doctest::Approx(0.3));
}

TEST_CASE("ddql_target: current-state mode evaluates both networks at s_t") {
    Rng rng(23);
    auto main = QNetwork::init(3, 4, 4, rng);
    auto target = QNetwork::init(3, 4, 4, rng);
    auto tr = make_transition(rng, 3, 4, 2);

    auto q_main_cur = q_forward(main, tr.state);
    int best = static_cast<int>(std::max_element(q_main_cur.begin(), q_main_cur.end()) -
                                q_main_cur.begin());
    auto q_tgt_cur = q_forward(target, tr.state);
    auto y = ddql_target(tr, main, target, 0.5, TargetState::Current);
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
        CHECK(y[i] == doctest::Approx(tr.rewards[i] + 0.5 * q_tgt_cur[static_cast<std::size_t>(best)]));
    }
}

TEST_CASE("ddql_update: fixed point when targets equal current Q") {
    // gamma=0 and rewards equal to the current Q values -> zero loss, no change
    Rng rng(31);
    auto main = QNetwork::init(4, 3, 3, rng);
    auto target = main;
    auto tr = make_transition(rng, 4, 3, 2);
    tr.done = true;
    auto q = q_forward(main, tr.state);
    for (std::size_t i = 0; i < tr.actions.size(); ++i) {
        tr.rewards[i] = q[static_cast<std::size_t>(tr.actions[i])];
    }
    auto before = main.params;
    double loss = ddql_update(main, target, {tr}, 0.0, 0.1);
    CHECK(loss == doctest::Approx(0.0).epsilon(1e-20));
    CHECK(main.params == before);
}

TEST_CASE("ddql_update: single-transition scalar case reduces to (Y - Q)^2") {
    Rng rng(33);
    auto main = QNetwork::init(2, 2, 1, rng);
    auto target = QNetwork::init(2, 2, 1, rng);
    Transition tr;
    tr.state = {0.5, -0.5};
    tr.next_state = {0.0, 0.0};
    tr.actions = {0};
    tr.rewards = {0.7};
    tr.done = true;
    double q = q_forward(main, tr.state)[0];
    double loss = ddql_update(main, target, {tr}, 0.9, 1e-6);
    CHECK(loss == doctest::Approx((0.7 - q) * (0.7 - q)).epsilon(1e-12));
}

TEST_CASE("ddql_update: gradient matches central finite differences on tiny nets") {
    for (int inst = 0; inst < 10; ++inst) {
        Rng rng(derive_seed(500, "fd", static_cast<std::uint64_t>(inst)));
        const int n = 3, u = 2, state_len = n * 3, hidden = 4;
        auto main = QNetwork::init(state_len, hidden, n, rng);
        auto target = QNetwork::init(state_len, hidden, n, rng);
        std::vector<Transition> batch;
        for (int b = 0; b < 3; ++b) batch.push_back(make_transition(rng, state_len, n, u));
        batch[1].done = true;
        double gamma = 0.9;

        // freeze the targets at theta0: the update treats them as constants
        std::vector<std::vector<double>> frozen;
        std::size_t count = 0;
        for (const auto& tr : batch) {
            frozen.push_back(ddql_target(tr, main, target, gamma));
            count += tr.actions.size();
        }
        auto loss_at = [&](const ParamVector& params) {
            QNetwork probe = main;
            probe.params = params;
            double total = 0.0;
            for (std::size_t t = 0; t < batch.size(); ++t) {
                auto q = q_forward(probe, batch[t].state);
                for (std::size_t i = 0; i < batch[t].actions.size(); ++i) {
                    double diff = q[static_cast<std::size_t>(batch[t].actions[i])] - frozen[t][i];
                    total += diff * diff;
                }
            }
            return total / static_cast<double>(count);
        };

        const double lr = 1e-3, h = 1e-6;
        auto theta0 = main.params;
        ddql_update(main, target, batch, gamma, lr);
        double worst = 0.0;
        for (std::size_t i = 0; i < theta0.size(); ++i) {
            double analytic = (theta0[i] - main.params[i]) / lr;
            ParamVector plus = theta0, minus = theta0;
            plus[i] += h;
            minus[i] -= h;
            double numeric = (loss_at(plus) - loss_at(minus)) / (2.0 * h);
            double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, std::abs(analytic - numeric) / scale);
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("ddql_update: loss strictly decreases at small lr") {
    for (int inst = 0; inst < 10; ++inst) {
        Rng rng(derive_seed(900, "down", static_cast<std::uint64_t>(inst)));
        auto main = QNetwork::init(9, 5, 3, rng);
        auto target = QNetwork::init(9, 5, 3, rng);
        std::vector<Transition> batch;
        for (int b = 0; b < 4; ++b) batch.push_back(make_transition(rng, 9, 3, 2));
        double before = ddql_batch_loss(main, target, batch, 0.9);
        ddql_update(main, target, batch, 0.9, 1e-4);
        double after = ddql_batch_loss(main, target, batch, 0.9);
        CHECK(after < before);
    }
}

TEST_CASE("sync_target: copies every P steps only") {
    Rng rng(41);
    auto main = QNetwork::init(3, 2, 2, rng);
    auto target = QNetwork::init(3, 2, 2, rng);
    CHECK(main.params != target.params);
    for (long long step = 1; step <= 9; ++step) CHECK(!sync_target(main, target, step, 10));
    CHECK(main.params != target.params);
    CHECK(sync_target(main, target, 10, 10));
    CHECK(main.params == target.params);

    // P=1 syncs every step; after syncing, outputs agree on any state
    main.params[0] += 0.5;
    CHECK(sync_target(main, target, 11, 1));
    AgentState s{0.2, -0.4, 0.9};
    CHECK(q_forward(main, s) == q_forward(target, s));
    CHECK_THROWS_AS(sync_target(main, target, 1, 0), std::invalid_argument);
}

TEST_CASE("replay buffer: FIFO eviction at capacity") {
    ReplayBuffer buf(3);
    Rng rng(43);
    for (int i = 0; i < 4; ++i) {
        auto tr = make_transition(rng, 4, 3, 1);
        tr.rewards[0] = static_cast<double>(i);
        buf.push(std::move(tr));
    }
    CHECK(buf.size() == 3);
    CHECK(buf.at(0).rewards[0] == 1.0);  // transition 0 evicted
    CHECK(buf.at(2).rewards[0] == 3.0);
}

TEST_CASE("replay buffer: sampling rules and empty-buffer error") {
    ReplayBuffer buf(10);
    Rng rng(44);
    Rng sample_rng(45);
    CHECK_THROWS_AS(buf.sample(5, sample_rng), std::runtime_error);

    for (int i = 0; i < 3; ++i) buf.push(make_transition(rng, 4, 3, 1));
    // fewer stored than requested: sample with replacement to full batch size
    auto batch = buf.sample(50, sample_rng);
    CHECK(batch.size() == 50);

    for (int i = 0; i < 7; ++i) buf.push(make_transition(rng, 4, 3, 1));
    // enough stored: distinct picks
    auto distinct = buf.sample(10, sample_rng);
    CHECK(distinct.size() == 10);
}

TEST_CASE("replay buffer: uniform sampling passes a chi-squared test") {
    ReplayBuffer buf(10);
    Rng rng(46);
    for (int i = 0; i < 10; ++i) {
        auto tr = make_transition(rng, 4, 3, 1);
        tr.rewards[0] = static_cast<double>(i);
        buf.push(std::move(tr));
    }
    std::vector<int> counts(10, 0);
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        Rng s(derive_seed(31337, "chi", static_cast<std::uint64_t>(t)));
        for (const auto& tr : buf.sample(5, s)) {
            ++counts[static_cast<std::size_t>(tr.rewards[0])];
        }
    }
    double expected = trials * 5.0 / 10.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 9 degrees of freedom, alpha = 0.01 -> critical value 21.67
    CHECK(chi2 < 21.67);
}

TEST_CASE("qnetwork and projector JSON round-trips") {
    Rng rng(47);
    auto net = QNetwork::init(5, 4, 3, rng);
    auto net2 = qnetwork_from_json(qnetwork_to_json(net));
    CHECK(net2.params == net.params);
    CHECK(net2.input_dim == net.input_dim);

    auto rows = factor_rows(6, 5, 2, rng);
    auto p = fit_pca(rows, 2);
    auto p2 = projector_from_json(projector_to_json(p));
    CHECK(p2.components == p.components);
    CHECK(p2.mean == p.mean);
    CHECK(p2.k_pca == p.k_pca);
}
