#include "flsim/rl_agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace flsim {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void orthogonalize_against(std::vector<double>& v, const std::vector<double>& components,
                           int count, int dim) {
    for (int c = 0; c < count; ++c) {
        const double* row = components.data() + static_cast<std::size_t>(c) * dim;
        double proj = 0.0;
        for (int j = 0; j < dim; ++j) proj += v[static_cast<std::size_t>(j)] * row[j];
        for (int j = 0; j < dim; ++j) v[static_cast<std::size_t>(j)] -= proj * row[j];
    }
}

double norm2(const std::vector<double>& v) { return std::sqrt(dot(v, v)); }

// scale so the largest-|coord| entry is positive; lowest index breaks ties
void canonicalize_sign(std::vector<double>& v) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < v.size(); ++j) {
        if (std::abs(v[j]) > std::abs(v[best])) best = j;
    }
    if (v[best] < 0.0) {
        for (auto& x : v) x = -x;
    }
}

double minmax_scale(double v, double lo, double hi) {
    if (hi == lo) return 0.5;
    return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

// tanh-hidden forward; hidden activations kept when backprop needs them
std::vector<double> net_forward(const QNetwork& net, std::span<const double> in,
                                std::vector<double>* hidden_out) {
    const int I = net.input_dim, H = net.hidden_dim, O = net.output_dim;
    const double* w1 = net.params.data();
    const double* b1 = w1 + static_cast<std::size_t>(H) * I;
    const double* w2 = b1 + H;
    const double* b2 = w2 + static_cast<std::size_t>(O) * H;

    std::vector<double> h(static_cast<std::size_t>(H));
    for (int j = 0; j < H; ++j) {
        double acc = b1[j];
        const double* row = w1 + static_cast<std::size_t>(j) * I;
        for (int i = 0; i < I; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
        h[static_cast<std::size_t>(j)] = std::tanh(acc);
    }
    std::vector<double> out(static_cast<std::size_t>(O));
    for (int o = 0; o < O; ++o) {
        double acc = b2[o];
        const double* row = w2 + static_cast<std::size_t>(o) * H;
        for (int j = 0; j < H; ++j) acc += row[j] * h[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(o)] = acc;
    }
    if (hidden_out) *hidden_out = std::move(h);
    return out;
}

int argmax_lowest_tie(const std::vector<double>& v) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(v.size()); ++i) {
        if (v[static_cast<std::size_t>(i)] > v[static_cast<std::size_t>(best)]) best = i;
    }
    return best;
}

void check_state_dim(const QNetwork& net, const AgentState& state) {
    if (static_cast<int>(state.size()) != net.input_dim) {
        throw std::invalid_argument("q_forward: state length " + std::to_string(state.size()) +
                                    " does not match network input " +
                                    std::to_string(net.input_dim));
    }
}

}  // namespace

PcaProjector fit_pca(const std::vector<ParamVector>& rows, int k_pca, std::uint64_t seed) {
    const int m = static_cast<int>(rows.size());
    if (m < 2) throw std::invalid_argument("fit_pca: need at least 2 rows");
    const int dim = static_cast<int>(rows[0].size());
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != dim) throw std::invalid_argument("fit_pca: ragged rows");
    }
    if (k_pca < 1 || k_pca > std::min(m - 1, dim)) {
        throw std::invalid_argument("fit_pca: k_pca " + std::to_string(k_pca) +
                                    " out of range [1, min(M-1, D)] = [1, " +
                                    std::to_string(std::min(m - 1, dim)) + "]");
    }

    PcaProjector p;
    p.dim = dim;
    p.k_pca = k_pca;
    p.mean.assign(static_cast<std::size_t>(dim), 0.0);
    for (const auto& r : rows) {
        for (int j = 0; j < dim; ++j) p.mean[static_cast<std::size_t>(j)] += r[static_cast<std::size_t>(j)];
    }
    for (auto& v : p.mean) v /= m;

    // centered data, row-major m x dim
    std::vector<double> x(static_cast<std::size_t>(m) * dim);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < dim; ++j) {
            x[static_cast<std::size_t>(i) * dim + j] =
                rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -
                p.mean[static_cast<std::size_t>(j)];
        }
    }

    // applies the sample covariance without forming it: v -> X^T (X v) / (m-1)
    auto apply_cov = [&](const std::vector<double>& v, std::vector<double>& out) {
        std::vector<double> xv(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) {
            xv[static_cast<std::size_t>(i)] = dot({x.data() + static_cast<std::size_t>(i) * dim,
                                                   static_cast<std::size_t>(dim)},
                                                  v);
        }
        std::fill(out.begin(), out.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const double* row = x.data() + static_cast<std::size_t>(i) * dim;
            double s = xv[static_cast<std::size_t>(i)];
            for (int j = 0; j < dim; ++j) out[static_cast<std::size_t>(j)] += s * row[j];
        }
        for (auto& o : out) o /= (m - 1);
    };

    constexpr int kMaxIters = 500;
    constexpr double kResidual = 1e-9;
    Rng rng(seed);
    p.components.resize(static_cast<std::size_t>(k_pca) * dim);
    p.explained_variance.resize(static_cast<std::size_t>(k_pca));

    std::vector<double> v(static_cast<std::size_t>(dim)), av(static_cast<std::size_t>(dim));
    for (int c = 0; c < k_pca; ++c) {
        for (auto& e : v) e = rng.normal();
        orthogonalize_against(v, p.components, c, dim);
        double n = norm2(v);
        if (n < 1e-30) throw std::runtime_error("fit_pca: degenerate start vector");
        for (auto& e : v) e /= n;

        double eigen = 0.0;
        for (int it = 0; it < kMaxIters; ++it) {
            apply_cov(v, av);
            orthogonalize_against(av, p.components, c, dim);
            double an = norm2(av);
            if (an < 1e-30) {
                // no variance left in the orthogonal complement; keep v as-is
                eigen = 0.0;
                break;
            }
            double diff = 0.0;
            for (int j = 0; j < dim; ++j) {
                double nv = av[static_cast<std::size_t>(j)] / an;
                diff += (nv - v[static_cast<std::size_t>(j)]) * (nv - v[static_cast<std::size_t>(j)]);
                v[static_cast<std::size_t>(j)] = nv;
            }
            eigen = an;
            if (std::sqrt(diff) < kResidual) break;
        }
        canonicalize_sign(v);
        std::copy(v.begin(), v.end(), p.components.begin() + static_cast<std::size_t>(c) * dim);
        p.explained_variance[static_cast<std::size_t>(c)] = eigen;
    }
    return p;
}

std::vector<double> project(const PcaProjector& p, const ParamVector& w) {
    if (static_cast<int>(w.size()) != p.dim) {
        throw std::invalid_argument("project: vector length " + std::to_string(w.size()) +
                                    " does not match projector dim " + std::to_string(p.dim));
    }
    std::vector<double> centered(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) centered[j] = w[j] - p.mean[j];
    std::vector<double> out(static_cast<std::size_t>(p.k_pca));
    for (int c = 0; c < p.k_pca; ++c) {
        out[static_cast<std::size_t>(c)] = dot(p.component(c), centered);
    }
    return out;
}

AgentState encode_state(std::span<const ClientStateInput> clients, const PcaProjector& projector,
                        const StateNormStats& stats) {
    AgentState state;
    state.reserve(clients.size() * static_cast<std::size_t>(projector.k_pca + 4));
    for (const auto& c : clients) {
        if (!c.weights) throw std::invalid_argument("encode_state: missing client weights");
        auto reduced = project(projector, *c.weights);
        state.insert(state.end(), reduced.begin(), reduced.end());
        state.push_back(minmax_scale(c.data_count, stats.n_min, stats.n_max));
        state.push_back(minmax_scale(c.cores, stats.cores_min, stats.cores_max));
        state.push_back(minmax_scale(c.freq_mhz, stats.freq_min, stats.freq_max));
        state.push_back(minmax_scale(c.bandwidth_mbps, stats.bw_min, stats.bw_max));
    }
    for (double v : state) {
        if (!std::isfinite(v)) throw std::runtime_error("encode_state: non-finite feature");
    }
    return state;
}

double epsilon_at(const EpsilonSchedule& s, int round) {
    if (round < 0) throw std::invalid_argument("epsilon_at: round must be >= 0");
    if (s.decay_rounds < 1 || round >= s.decay_rounds) return s.eps_end;
    double t = static_cast<double>(round) / s.decay_rounds;
    return s.eps_init + (s.eps_end - s.eps_init) * t;
}

std::vector<int> select_top_u(const std::vector<double>& qvals, int u, double eps, Rng& rng) {
    const int n = static_cast<int>(qvals.size());
    if (u < 1 || u > n) {
        throw std::invalid_argument("select_top_u: U " + std::to_string(u) +
                                    " out of range for N = " + std::to_string(n));
    }
    bool explore = rng.uniform() < eps;
    if (explore) return rng.sample_without_replacement(n, u);

    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::stable_sort(idx.begin(), idx.end(), [&qvals](int a, int b) {
        return qvals[static_cast<std::size_t>(a)] > qvals[static_cast<std::size_t>(b)];
    });
    std::vector<int> out(idx.begin(), idx.begin() + u);
    std::sort(out.begin(), out.end());
    return out;
}

QNetwork QNetwork::init(int input_dim, int hidden_dim, int output_dim, Rng& rng) {
    if (input_dim < 1 || hidden_dim < 1 || output_dim < 1) {
        throw std::invalid_argument("QNetwork: all dimensions must be >= 1");
    }
    QNetwork net;
    net.input_dim = input_dim;
    net.hidden_dim = hidden_dim;
    net.output_dim = output_dim;
    std::size_t count = static_cast<std::size_t>(hidden_dim) * input_dim + hidden_dim +
                        static_cast<std::size_t>(output_dim) * hidden_dim + output_dim;
    net.params.resize(count);
    for (auto& v : net.params) v = rng.uniform(-0.05, 0.05);
    return net;
}

std::vector<double> q_forward(const QNetwork& net, const AgentState& state) {
    check_state_dim(net, state);
    auto out = net_forward(net, state, nullptr);
    for (double v : out) {
        if (!std::isfinite(v)) throw std::runtime_error("q_forward: non-finite output");
    }
    return out;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer: capacity must be >= 1");
}

void ReplayBuffer::push(Transition tr) {
    if (ring_.size() == capacity_) ring_.pop_front();
    ring_.push_back(std::move(tr));
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
    if (ring_.empty()) throw std::runtime_error("ReplayBuffer: cannot sample from empty buffer");
    if (batch_size == 0) throw std::invalid_argument("ReplayBuffer: batch_size must be >= 1");
    std::vector<Transition> out;
    out.reserve(batch_size);
    if (ring_.size() < batch_size) {
        for (std::size_t i = 0; i < batch_size; ++i) {
            out.push_back(ring_[rng.below(ring_.size())]);
        }
    } else {
        auto picks = rng.sample_without_replacement(static_cast<int>(ring_.size()),
                                                    static_cast<int>(batch_size));
        for (int i : picks) out.push_back(ring_[static_cast<std::size_t>(i)]);
    }
    return out;
}

std::vector<double> ddql_target(const Transition& tr, const QNetwork& main, const QNetwork& target,
                                double gamma, TargetState mode) {
    if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("ddql_target: gamma must lie in [0,1]");
    if (tr.actions.size() != tr.rewards.size()) {
        throw std::invalid_argument("ddql_target: actions/rewards misaligned");
    }
    std::vector<double> y(tr.rewards);
    if (tr.done || gamma == 0.0) return y;

    const AgentState& eval_state = mode == TargetState::Next ? tr.next_state : tr.state;
    auto q_main = q_forward(main, eval_state);
    int best = argmax_lowest_tie(q_main);
    auto q_tgt = q_forward(target, eval_state);
    double bootstrap = gamma * q_tgt[static_cast<std::size_t>(best)];
    for (auto& v : y) v += bootstrap;
    return y;
}

double ddql_batch_loss(const QNetwork& main, const QNetwork& target,
                       const std::vector<Transition>& batch, double gamma, TargetState mode) {
    if (batch.empty()) throw std::invalid_argument("ddql_batch_loss: empty batch");
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& tr : batch) {
        auto y = ddql_target(tr, main, target, gamma, mode);
        auto q = q_forward(main, tr.state);
        for (std::size_t i = 0; i < tr.actions.size(); ++i) {
            double diff = q[static_cast<std::size_t>(tr.actions[i])] - y[i];
            total += diff * diff;
            ++count;
        }
    }
    if (count == 0) throw std::invalid_argument("ddql_batch_loss: no actions in batch");
    return total / static_cast<double>(count);
}

double ddql_update(QNetwork& main, const QNetwork& target, const std::vector<Transition>& batch,
                   double gamma, double lr, TargetState mode) {
    if (batch.empty()) throw std::invalid_argument("ddql_update: empty batch");
    if (lr <= 0.0) throw std::invalid_argument("ddql_update: lr must be > 0");

    std::size_t count = 0;
    for (const auto& tr : batch) count += tr.actions.size();
    if (count == 0) throw std::invalid_argument("ddql_update: no actions in batch");

    const int I = main.input_dim, H = main.hidden_dim, O = main.output_dim;
    const std::size_t w1_off = 0;
    const std::size_t b1_off = static_cast<std::size_t>(H) * I;
    const std::size_t w2_off = b1_off + static_cast<std::size_t>(H);
    const std::size_t b2_off = w2_off + static_cast<std::size_t>(O) * H;

    ParamVector g(main.params.size(), 0.0);
    double total = 0.0;
    std::vector<double> h;
    for (const auto& tr : batch) {
        auto y = ddql_target(tr, main, target, gamma, mode);
        check_state_dim(main, tr.state);
        auto q = net_forward(main, tr.state, &h);

        std::vector<double> dz(static_cast<std::size_t>(O), 0.0);
        for (std::size_t i = 0; i < tr.actions.size(); ++i) {
            int a = tr.actions[i];
            double diff = q[static_cast<std::size_t>(a)] - y[i];
            total += diff * diff;
            dz[static_cast<std::size_t>(a)] += 2.0 * diff / static_cast<double>(count);
        }

        std::vector<double> dh(static_cast<std::size_t>(H), 0.0);
        for (int o = 0; o < O; ++o) {
            double d = dz[static_cast<std::size_t>(o)];
            if (d == 0.0) continue;
            g[b2_off + static_cast<std::size_t>(o)] += d;
            const double* w2 = main.params.data() + w2_off + static_cast<std::size_t>(o) * H;
            double* gw2 = g.data() + w2_off + static_cast<std::size_t>(o) * H;
            for (int j = 0; j < H; ++j) {
                gw2[j] += d * h[static_cast<std::size_t>(j)];
                dh[static_cast<std::size_t>(j)] += d * w2[j];
            }
        }
        for (int j = 0; j < H; ++j) {
            double hv = h[static_cast<std::size_t>(j)];
            double dpre = dh[static_cast<std::size_t>(j)] * (1.0 - hv * hv);
            if (dpre == 0.0) continue;
            g[b1_off + static_cast<std::size_t>(j)] += dpre;
            double* gw1 = g.data() + w1_off + static_cast<std::size_t>(j) * I;
            for (int i = 0; i < I; ++i) gw1[i] += dpre * tr.state[static_cast<std::size_t>(i)];
        }
    }
    for (std::size_t i = 0; i < main.params.size(); ++i) main.params[i] -= lr * g[i];
    return total / static_cast<double>(count);
}

bool sync_target(const QNetwork& main, QNetwork& target, long long step_counter, int period) {
    if (period < 1) throw std::invalid_argument("sync_target: period must be >= 1");
    if (step_counter % period != 0) return false;
    target = main;
    return true;
}

nlohmann::json qnetwork_to_json(const QNetwork& net) {
    return {{"input_dim", net.input_dim},
            {"hidden_dim", net.hidden_dim},
            {"output_dim", net.output_dim},
            {"params", net.params}};
}

QNetwork qnetwork_from_json(const nlohmann::json& j) {
    QNetwork net;
    net.input_dim = j.at("input_dim").get<int>();
    net.hidden_dim = j.at("hidden_dim").get<int>();
    net.output_dim = j.at("output_dim").get<int>();
    net.params = j.at("params").get<ParamVector>();
    return net;
}

nlohmann::json projector_to_json(const PcaProjector& p) {
    return {{"dim", p.dim},
            {"k_pca", p.k_pca},
            {"mean", p.mean},
            {"components", p.components},
            {"explained_variance", p.explained_variance}};
}

PcaProjector projector_from_json(const nlohmann::json& j) {
    PcaProjector p;
    p.dim = j.at("dim").get<int>();
    p.k_pca = j.at("k_pca").get<int>();
    p.mean = j.at("mean").get<std::vector<double>>();
    p.components = j.at("components").get<std::vector<double>>();
    p.explained_variance = j.at("explained_variance").get<std::vector<double>>();
    return p;
}

}  // namespace flsim
