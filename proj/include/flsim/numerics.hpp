/*
 * Dense-vector math and small framework-free classifiers: softmax regression
 * and a one-hidden-layer tanh MLP, with cross-entropy loss, analytic
 * gradients and momentum-SGD local training.
 */
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "flsim/rng.hpp"

namespace flsim {

using ParamVector = std::vector<double>;

// hidden_dim == 0 selects plain softmax regression.
struct ModelSpec {
    int input_dim = 0;
    int hidden_dim = 0;
    int num_classes = 0;

    int param_count() const;
    void validate() const;  // throws std::invalid_argument
};

struct LabeledDataset {
    std::vector<double> features;  // row-major, size() x input_dim
    std::vector<int> labels;
    int input_dim = 0;
    long long bits_per_sample = 0;

    int size() const { return static_cast<int>(labels.size()); }
    std::span<const double> row(int i) const {
        return {features.data() + static_cast<std::size_t>(i) * input_dim,
                static_cast<std::size_t>(input_dim)};
    }
    LabeledDataset subset(const std::vector<int>& indices) const;
    int num_labels() const;  // 1 + max label, 0 when empty
};

struct OptimizerState {
    ParamVector velocity;
    double learning_rate = 0.01;
    double momentum = 0.9;
};

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

// Uniform init in [-0.05, 0.05] per coordinate.
ParamVector init_params(const ModelSpec& spec, Rng& rng);

// Class probabilities for one sample. Softmax is computed max-shifted.
std::vector<double> forward(const ParamVector& params, const ModelSpec& spec,
                            std::span<const double> x);

// Mean cross-entropy over the batch; probabilities clamped at 1e-12 before log.
double loss(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& batch);

// Analytic gradient of loss() w.r.t. params.
ParamVector grad(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& batch);

// v' = momentum * v + g;  params' = params - lr * v'
std::pair<ParamVector, OptimizerState> sgd_step(const ParamVector& params, const ParamVector& g,
                                                const OptimizerState& opt);

struct LocalTrainResult {
    ParamVector params;
    bool empty_dataset = false;
};

// Epochs of mini-batch momentum SGD. Indices are shuffled once per epoch from
// the caller's stream; batches are consecutive chunks of size batch_size.
LocalTrainResult local_train(ParamVector params, const ModelSpec& spec, const LabeledDataset& data,
                             int epochs, int batch_size, OptimizerState opt, Rng& rng);

// Accuracy and macro F1 (per-class F1 averaged over all classes; empty classes
// count as 0). Prediction ties resolve to the lowest class index.
Metrics evaluate(const ParamVector& params, const ModelSpec& spec, const LabeledDataset& data);

bool all_finite(const ParamVector& v);

}  // namespace flsim
