#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedlorar/data.hpp"
#include "fedlorar/tensor.hpp"

namespace fedlorar {

enum class ModelKind { LinearRegression, LogisticRegression, MlpOneHidden };
enum class Activation { Relu, Tanh };

struct ModelSpec {
    ModelKind kind = ModelKind::LogisticRegression;
    std::size_t input_dim = 1;
    std::size_t hidden_dim = 0; // 0 unless mlp
    std::size_t num_classes = 1; // 1 for regression
    Activation activation = Activation::Relu;
};

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);
Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);

// Validates the spec; throws InvalidSpec.
void validate(const ModelSpec& spec);

// Number of parameters:
//   linear/logistic: input_dim * out + out
//   mlp: input_dim * hidden + hidden + hidden * out + out
// where out = num_classes (1 for regression).
std::size_t param_dim(const ModelSpec& spec);

// A training batch. Views rows [begin, begin+count) of a Split.
struct Batch {
    const Split* split = nullptr;
    std::vector<std::size_t> rows; // example indices into the split

    std::size_t size() const { return rows.size(); }
};

Batch full_batch(const Split& split);

// Deterministic He-initialized parameters (Gaussian weights scaled by
// sqrt(2 / fan_in), zero biases).
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

// Mean-per-example loss: MSE for regression, stabilized softmax
// cross-entropy (natural log) for classification.
double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch);

// Loss plus its gradient with respect to w.
std::pair<double, ParamVector> loss_and_grad(const ModelSpec& spec, const ParamVector& w,
                                             const Batch& batch);

// Logits (or regression outputs) for a single example.
std::vector<double> forward(const ModelSpec& spec, const ParamVector& w, const double* x);

// Argmax class with ties broken toward the lowest index.
std::size_t predict_class(const ModelSpec& spec, const ParamVector& w, const double* x);

// Fraction of split examples whose argmax prediction matches the target.
double accuracy(const ModelSpec& spec, const ParamVector& w, const Split& split);

std::size_t count_correct(const ModelSpec& spec, const ParamVector& w, const Split& split);

} // namespace fedlorar
