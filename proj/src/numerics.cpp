#include "flsim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flsim {

namespace {

constexpr double kProbFloor = 1e-12;

void check_dims(int expected, int actual, const char* what) {
    if (expected != actual) {
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(expected) +
                                    ", got " + std::to_string(actual));
    }
}

// Parameter layout:
//   softmax regression: W[C x I] row-major, then b[C]
//   MLP:                W1[H x I], b1[H], W2[C x H], b2[C]
struct Layout {
    int input, hidden, classes;
    explicit Layout(const ModelSpec& s) : input(s.input_dim), hidden(s.hidden_dim), classes(s.num_classes) {}
    int w1() const { return 0; }
    int b1() const { return hidden * input; }
    int w2() const { return hidden * input + hidden; }
    int b2() const { return hidden * input + hidden + classes * hidden; }
    int wsm() const { return 0; }
    int bsm() const { return classes * input; }
};

void softmax_inplace(std::vector<double>& z) {
    double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (auto& v : z) v /= sum;
}

// Forward pass keeping the hidden activation for backprop.
std::vector<double> forward_keep(const ParamVector& p, const ModelSpec& spec,
                                 std::span<const double> x, std::vector<double>* hidden_out) {
    Layout L(spec);
    std::vector<double> z(static_cast<std::size_t>(L.classes), 0.0);
    if (L.hidden == 0) {
        for (int c = 0; c < L.classes; ++c) {
            double acc = p[static_cast<std::size_t>(L.bsm() + c)];
            const double* w = p.data() + L.wsm() + static_cast<std::size_t>(c) * L.input;
            for (int i = 0; i < L.input; ++i) acc += w[i] * x[static_cast<std::size_t>(i)];
            z[static_cast<std::size_t>(c)] = acc;
        }
    } else {
        std::vector<double> h(static_cast<std::size_t>(L.hidden));
        for (int j = 0; j < L.hidden; ++j) {
            double acc = p[static_cast<std::size_t>(L.b1() + j)];
            const double* w = p.data() + L.w1() + static_cast<std::size_t>(j) * L.input;
            for (int i = 0; i < L.input; ++i) acc += w[i] * x[static_cast<std::size_t>(i)];
            h[static_cast<std::size_t>(j)] = std::tanh(acc);
        }
        for (int c = 0; c < L.classes; ++c) {
            double acc = p[static_cast<std::size_t>(L.b2() + c)];
            const double* w = p.data() + L.w2() + static_cast<std::size_t>(c) * L.hidden;
            for (int j = 0; j < L.hidden; ++j) acc += w[j] * h[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(c)] = acc;
        }
        if (hidden_out) *hidden_out = std::move(h);
    }
    softmax_inplace(z);
    return z;
}

// Accumulates loss and (optionally) gradient over the given sample indices.
double accumulate(const ParamVector& p, const ModelSpec& spec, const LabeledDataset& ds,
                  std::span<const int> idx, ParamVector* grad_out) {
    Layout L(spec);
    double total = 0.0;
    const double inv_n = 1.0 / static_cast<double>(idx.size());
    std::vector<double> h;
    for (int i : idx) {
        auto x = ds.row(i);
        int y = ds.labels[static_cast<std::size_t>(i)];
        auto probs = forward_keep(p, spec, x, L.hidden > 0 ? &h : nullptr);
        total += -std::log(std::max(probs[static_cast<std::size_t>(y)], kProbFloor));
        if (!grad_out) continue;

        // dL/dz_c = (p_c - 1{c==y}) / n
        std::vector<double>& dz = probs;
        dz[static_cast<std::size_t>(y)] -= 1.0;
        for (auto& v : dz) v *= inv_n;

        ParamVector& g = *grad_out;
        if (L.hidden == 0) {
            for (int c = 0; c < L.classes; ++c) {
                double d = dz[static_cast<std::size_t>(c)];
                g[static_cast<std::size_t>(L.bsm() + c)] += d;
                double* gw = g.data() + L.wsm() + static_cast<std::size_t>(c) * L.input;
                for (int k = 0; k < L.input; ++k) gw[k] += d * x[static_cast<std::size_t>(k)];
            }
        } else {
            std::vector<double> dh(static_cast<std::size_t>(L.hidden), 0.0);
            for (int c = 0; c < L.classes; ++c) {
                double d = dz[static_cast<std::size_t>(c)];
                g[static_cast<std::size_t>(L.b2() + c)] += d;
                const double* w2 = p.data() + L.w2() + static_cast<std::size_t>(c) * L.hidden;
                double* gw2 = g.data() + L.w2() + static_cast<std::size_t>(c) * L.hidden;
                for (int j = 0; j < L.hidden; ++j) {
                    gw2[j] += d * h[static_cast<std::size_t>(j)];
                    dh[static_cast<std::size_t>(j)] += d * w2[j];
                }
            }
            for (int j = 0; j < L.hidden; ++j) {
                double hv = h[static_cast<std::size_t>(j)];
                double dpre = dh[static_cast<std::size_t>(j)] * (1.0 - hv * hv);
                g[static_cast<std::size_t>(L.b1() + j)] += dpre;
                double* gw1 = g.data() + L.w1() + static_cast<std::size_t>(j) * L.input;
                for (int k = 0; k < L.input; ++k) gw1[k] += dpre * x[static_cast<std::size_t>(k)];
            }
        }
    }
    return total * inv_n;
}

void check_model_inputs(const ParamVector& params, const ModelSpec& spec,
                        const LabeledDataset& ds) {
    spec.validate();
    check_dims(spec.param_count(), static_cast<int>(params.size()), "parameter vector length");
    check_dims(spec.input_dim, ds.input_dim, "dataset feature dimension");
}

}  // namespace

int ModelSpec::param_count() const {
    if (hidden_dim == 0) return num_classes * input_dim + num_classes;
    return hidden_dim * input_dim + hidden_dim + num_classes * hidden_dim + num_classes;
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
    if (num_classes < 2) throw std::invalid_argument("ModelSpec: num_classes must be >= 2");
    if (hidden_dim < 0) throw std::invalid_argument("ModelSpec: hidden_dim must be >= 0");
}

LabeledDataset LabeledDataset::subset(const std::vector<int>& indices) const {
    LabeledDataset out;
    out.input_dim = input_dim;
    out.bits_per_sample = bits_per_sample;
    out.features.reserve(indices.size() * static_cast<std::size_t>(input_dim));
    out.labels.reserve(indices.size());
    for (int i : indices) {
        auto r = row(i);
        out.features.insert(out.features.end(), r.begin(), r.end());
        out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return out;
}

int LabeledDataset::num_labels() const {
    int m = -1;
    for (int l : labels) m = std::max(m, l);
    return m + 1;
}

ParamVector init_params(const ModelSpec& spec, Rng& rng) {
    spec.validate();
    ParamVector p(static_cast<std::size_t>(spec.param_count()));
    for (auto& v : p) v = rng.uniform(-0.05, 0.05);
    return p;
}

std::vector<double> forward(const ParamVector& params, const ModelSpec& spec,
                            std::span<const double> x) {
    spec.validate();
    check_dims(spec.param_count(), static_cast<int>(params.size()), "parameter vector length");
    check_dims(spec.input_dim, static_cast<int>(x.size()), "input feature dimension");
    return forward_keep(params, spec, x, nullptr);
}

double loss(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& batch) {
    check_model_inputs(params, spec, batch);
    if (batch.size() == 0) throw std::invalid_argument("loss: batch is empty");
    std::vector<int> idx(static_cast<std::size_t>(batch.size()));
    std::iota(idx.begin(), idx.end(), 0);
    return accumulate(params, spec, batch, idx, nullptr);
}

ParamVector grad(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& batch) {
    check_model_inputs(params, spec, batch);
    if (batch.size() == 0) throw std::invalid_argument("grad: batch is empty");
    std::vector<int> idx(static_cast<std::size_t>(batch.size()));
    std::iota(idx.begin(), idx.end(), 0);
    ParamVector g(params.size(), 0.0);
    accumulate(params, spec, batch, idx, &g);
    return g;
}

std::pair<ParamVector, OptimizerState> sgd_step(const ParamVector& params, const ParamVector& g,
                                                const OptimizerState& opt) {
    if (params.size() != g.size() || params.size() != opt.velocity.size()) {
        throw std::invalid_argument("sgd_step: params/grad/velocity lengths disagree (" +
                                    std::to_string(params.size()) + "/" + std::to_string(g.size()) +
                                    "/" + std::to_string(opt.velocity.size()) + ")");
    }
    OptimizerState next = opt;
    ParamVector out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        next.velocity[i] = opt.momentum * opt.velocity[i] + g[i];
        out[i] = params[i] - opt.learning_rate * next.velocity[i];
    }
    return {std::move(out), std::move(next)};
}

LocalTrainResult local_train(ParamVector params, const ModelSpec& spec, const LabeledDataset& data,
                             int epochs, int batch_size, OptimizerState opt, Rng& rng) {
    check_model_inputs(params, spec, data);
    if (epochs < 1) throw std::invalid_argument("local_train: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("local_train: batch_size must be >= 1");
    if (data.size() == 0) return {std::move(params), true};

    if (opt.velocity.empty()) opt.velocity.assign(params.size(), 0.0);

    std::vector<int> order(static_cast<std::size_t>(data.size()));
    std::iota(order.begin(), order.end(), 0);
    ParamVector g(params.size());
    for (int e = 0; e < epochs; ++e) {
        rng.shuffle(order);
        for (int start = 0; start < data.size(); start += batch_size) {
            int end = std::min(start + batch_size, data.size());
            std::span<const int> idx(order.data() + start, static_cast<std::size_t>(end - start));
            std::fill(g.begin(), g.end(), 0.0);
            accumulate(params, spec, data, idx, &g);
            auto [p2, o2] = sgd_step(params, g, opt);
            params = std::move(p2);
            opt = std::move(o2);
        }
    }
    if (!all_finite(params)) throw std::runtime_error("local_train: non-finite parameters");
    return {std::move(params), false};
}

Metrics evaluate(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& data) {
    check_model_inputs(params, spec, data);
    if (data.size() == 0) throw std::invalid_argument("evaluate: dataset is empty");

    const int C = spec.num_classes;
    std::vector<long long> tp(static_cast<std::size_t>(C), 0), fp(static_cast<std::size_t>(C), 0),
        fn(static_cast<std::size_t>(C), 0);
    long long correct = 0;
    for (int i = 0; i < data.size(); ++i) {
        auto probs = forward_keep(params, spec, data.row(i), nullptr);
        int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        int y = data.labels[static_cast<std::size_t>(i)];
        if (pred == y) {
            ++correct;
            ++tp[static_cast<std::size_t>(y)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(y)];
        }
    }
    double f1_sum = 0.0;
    for (int c = 0; c < C; ++c) {
        double denom = static_cast<double>(2 * tp[static_cast<std::size_t>(c)] +
                                           fp[static_cast<std::size_t>(c)] +
                                           fn[static_cast<std::size_t>(c)]);
        f1_sum += denom > 0.0 ? 2.0 * static_cast<double>(tp[static_cast<std::size_t>(c)]) / denom
                              : 0.0;
    }
    return {static_cast<double>(correct) / data.size(), f1_sum / C};
}

bool all_finite(const ParamVector& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace flsim
