#include "fedlorar/optim.hpp"

#include <cmath>

#include "fedlorar/errors.hpp"

namespace fedlorar {

OptimizerKind optimizer_kind_from_string(const std::string& s) {
    if (s == "sgd") return OptimizerKind::Sgd;
    if (s == "sgd-momentum") return OptimizerKind::SgdMomentum;
    if (s == "adam-like") return OptimizerKind::AdamLike;
    throw InvalidSpec("unknown optimizer kind: " + s);
}

std::string to_string(OptimizerKind k) {
    switch (k) {
    case OptimizerKind::Sgd: return "sgd";
    case OptimizerKind::SgdMomentum: return "sgd-momentum";
    case OptimizerKind::AdamLike: return "adam-like";
    }
    return "?";
}

void validate(const OptimizerSpec& spec) {
    if (!(spec.learning_rate > 0.0)) throw InvalidSpec("learning_rate must be > 0");
    if (spec.momentum < 0.0 || spec.momentum >= 1.0) throw InvalidSpec("momentum must be in [0,1)");
    if (spec.beta2 < 0.0 || spec.beta2 >= 1.0) throw InvalidSpec("beta2 must be in [0,1)");
    if (!(spec.epsilon > 0.0)) throw InvalidSpec("epsilon must be > 0");
}

Optimizer::Optimizer(OptimizerSpec spec) : spec_(spec) { validate(spec_); }

void Optimizer::step(ParamVector& w, const ParamVector& grad) {
    if (grad.size() != w.size()) {
        throw DimensionMismatch("optimizer step: grad dim != param dim");
    }
    const double eta = spec_.learning_rate;
    switch (spec_.kind) {
    case OptimizerKind::Sgd:
        for (std::size_t k = 0; k < w.size(); ++k) w[k] -= eta * grad[k];
        break;
    case OptimizerKind::SgdMomentum: {
        if (velocity_.empty()) velocity_.assign(w.size(), 0.0);
        const double beta = spec_.momentum;
        for (std::size_t k = 0; k < w.size(); ++k) {
            velocity_[k] = beta * velocity_[k] + grad[k];
            w[k] -= eta * velocity_[k];
        }
        break;
    }
    case OptimizerKind::AdamLike: {
        if (velocity_.empty()) {
            velocity_.assign(w.size(), 0.0);
            second_moment_.assign(w.size(), 0.0);
        }
        ++step_count_;
        const double b1 = spec_.momentum;
        const double b2 = spec_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_count_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_count_));
        for (std::size_t k = 0; k < w.size(); ++k) {
            const double g = grad[k];
            velocity_[k] = b1 * velocity_[k] + (1.0 - b1) * g;
            second_moment_[k] = b2 * second_moment_[k] + (1.0 - b2) * g * g;
            const double m_hat = velocity_[k] / c1;
            const double v_hat = second_moment_[k] / c2;
            w[k] -= eta * m_hat / (std::sqrt(v_hat) + spec_.epsilon);
        }
        break;
    }
    }
    check_finite(w, "optimizer step");
}

} // namespace fedlorar
