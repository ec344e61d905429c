#pragma once

#include <string>
#include <vector>

#include "fedlorar/tensor.hpp"

namespace fedlorar {

enum class OptimizerKind { Sgd, SgdMomentum, AdamLike };

OptimizerKind optimizer_kind_from_string(const std::string& s);
std::string to_string(OptimizerKind k);

// Shared spec for the client optimizer (eta_i) and the server optimizer
// (eta applied to the pseudo-gradient delta-w).
struct OptimizerSpec {
    OptimizerKind kind = OptimizerKind::Sgd;
    double learning_rate = 0.1;
    double momentum = 0.9; // beta for sgd-momentum, beta1 for adam-like
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

void validate(const OptimizerSpec& spec);

// Per-actor optimizer state. Applies descent steps in place:
//   sgd:          w -= eta * g
//   sgd-momentum: v = beta * v + g;  w -= eta * v        (heavy ball)
//   adam-like:    bias-corrected first/second moments on g
// The server passes the aggregated local change delta-w as g, which yields
// exactly w_{t+1} = w_t - eta * delta-w for the sgd kind.
class Optimizer {
public:
    explicit Optimizer(OptimizerSpec spec);

    void step(ParamVector& w, const ParamVector& grad);

    const OptimizerSpec& spec() const { return spec_; }

private:
    OptimizerSpec spec_;
    ParamVector velocity_;
    ParamVector second_moment_;
    long step_count_ = 0;
};

} // namespace fedlorar
