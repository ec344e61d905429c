#include "fedlorar/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedlorar/errors.hpp"
#include "fedlorar/rng.hpp"

namespace fedlorar {

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "linear-regression") return ModelKind::LinearRegression;
    if (s == "logistic-regression") return ModelKind::LogisticRegression;
    if (s == "mlp-1-hidden") return ModelKind::MlpOneHidden;
    throw InvalidSpec("unknown model kind: " + s);
}

std::string to_string(ModelKind k) {
    switch (k) {
    case ModelKind::LinearRegression: return "linear-regression";
    case ModelKind::LogisticRegression: return "logistic-regression";
    case ModelKind::MlpOneHidden: return "mlp-1-hidden";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    throw InvalidSpec("unknown activation: " + s);
}

std::string to_string(Activation a) { return a == Activation::Relu ? "relu" : "tanh"; }

void validate(const ModelSpec& spec) {
    if (spec.input_dim < 1) throw InvalidSpec("input_dim must be >= 1");
    if (spec.num_classes < 1) throw InvalidSpec("num_classes must be >= 1");
    if (spec.kind == ModelKind::MlpOneHidden && spec.hidden_dim < 1) {
        throw InvalidSpec("mlp-1-hidden requires hidden_dim >= 1");
    }
    if (spec.kind == ModelKind::LinearRegression && spec.num_classes != 1) {
        throw InvalidSpec("linear-regression requires num_classes == 1");
    }
    if (spec.kind == ModelKind::LogisticRegression && spec.num_classes < 2) {
        throw InvalidSpec("logistic-regression requires num_classes >= 2");
    }
}

std::size_t param_dim(const ModelSpec& spec) {
    validate(spec);
    const std::size_t out = spec.num_classes;
    if (spec.kind == ModelKind::MlpOneHidden) {
        return spec.input_dim * spec.hidden_dim + spec.hidden_dim + spec.hidden_dim * out + out;
    }
    return spec.input_dim * out + out;
}

Batch full_batch(const Split& split) {
    Batch b;
    b.split = &split;
    b.rows.resize(split.size);
    std::iota(b.rows.begin(), b.rows.end(), std::size_t{0});
    return b;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    validate(spec);
    Rng rng(derive_seed(seed, 0x1717));
    ParamVector w(param_dim(spec), 0.0);
    const std::size_t out = spec.num_classes;
    std::size_t pos = 0;
    auto fill_layer = [&](std::size_t fan_in, std::size_t fan_out) {
        const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (std::size_t k = 0; k < fan_in * fan_out; ++k) {
            w[pos++] = scale * rng.normal();
        }
        pos += fan_out; // biases stay zero
    };
    if (spec.kind == ModelKind::MlpOneHidden) {
        fill_layer(spec.input_dim, spec.hidden_dim);
        fill_layer(spec.hidden_dim, out);
    } else {
        fill_layer(spec.input_dim, out);
    }
    return w;
}

namespace {

void check_w(const ModelSpec& spec, const ParamVector& w) {
    if (w.size() != param_dim(spec)) {
        throw DimensionMismatch("parameter vector dim " + std::to_string(w.size()) +
                                " does not match spec dim " + std::to_string(param_dim(spec)));
    }
}

double act(Activation a, double z) {
    return a == Activation::Relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

double act_grad(Activation a, double z) {
    if (a == Activation::Relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

// Stabilized log-sum-exp over logits.
double log_sum_exp(const std::vector<double>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double v : logits) s += std::exp(v - m);
    return m + std::log(s);
}

struct MlpLayout {
    std::size_t w1, b1, w2, b2;
};

MlpLayout mlp_layout(const ModelSpec& spec) {
    MlpLayout l;
    l.w1 = 0;
    l.b1 = spec.input_dim * spec.hidden_dim;
    l.w2 = l.b1 + spec.hidden_dim;
    l.b2 = l.w2 + spec.hidden_dim * spec.num_classes;
    return l;
}

} // namespace

std::vector<double> forward(const ModelSpec& spec, const ParamVector& w, const double* x) {
    const std::size_t in = spec.input_dim;
    const std::size_t out = spec.num_classes;
    std::vector<double> y(out, 0.0);
    if (spec.kind == ModelKind::MlpOneHidden) {
        const auto l = mlp_layout(spec);
        const std::size_t h = spec.hidden_dim;
        std::vector<double> hidden(h);
        for (std::size_t j = 0; j < h; ++j) {
            double z = w[l.b1 + j];
            const double* row = &w[l.w1 + j * in];
            for (std::size_t k = 0; k < in; ++k) z += row[k] * x[k];
            hidden[j] = act(spec.activation, z);
        }
        for (std::size_t c = 0; c < out; ++c) {
            double z = w[l.b2 + c];
            const double* row = &w[l.w2 + c * h];
            for (std::size_t j = 0; j < h; ++j) z += row[j] * hidden[j];
            y[c] = z;
        }
    } else {
        for (std::size_t c = 0; c < out; ++c) {
            double z = w[in * out + c];
            const double* row = &w[c * in];
            for (std::size_t k = 0; k < in; ++k) z += row[k] * x[k];
            y[c] = z;
        }
    }
    return y;
}

double loss(const ModelSpec& spec, const ParamVector& w, const Batch& batch) {
    check_w(spec, w);
    if (batch.size() == 0) throw EmptyInput("loss: empty batch");
    const Split& s = *batch.split;
    double total = 0.0;
    for (std::size_t r : batch.rows) {
        const double* x = &s.inputs[r * s.input_dim];
        const auto y = forward(spec, w, x);
        if (spec.kind == ModelKind::LinearRegression) {
            const double e = y[0] - s.targets[r];
            total += e * e;
        } else {
            const auto target = static_cast<std::size_t>(s.targets[r]);
            total += log_sum_exp(y) - y[target];
        }
    }
    return total / static_cast<double>(batch.size());
}

std::pair<double, ParamVector> loss_and_grad(const ModelSpec& spec, const ParamVector& w,
                                             const Batch& batch) {
    check_w(spec, w);
    if (batch.size() == 0) throw EmptyInput("loss_and_grad: empty batch");
    const Split& s = *batch.split;
    const std::size_t in = spec.input_dim;
    const std::size_t out = spec.num_classes;
    ParamVector grad(w.size(), 0.0);
    double total = 0.0;

    const bool is_mlp = spec.kind == ModelKind::MlpOneHidden;
    const auto l = is_mlp ? mlp_layout(spec) : MlpLayout{};
    const std::size_t h = spec.hidden_dim;
    std::vector<double> z1(h), hidden(h), dy(out), dh(h);

    for (std::size_t r : batch.rows) {
        const double* x = &s.inputs[r * in];
        std::vector<double> y(out, 0.0);
        if (is_mlp) {
            for (std::size_t j = 0; j < h; ++j) {
                double z = w[l.b1 + j];
                const double* row = &w[l.w1 + j * in];
                for (std::size_t k = 0; k < in; ++k) z += row[k] * x[k];
                z1[j] = z;
                hidden[j] = act(spec.activation, z);
            }
            for (std::size_t c = 0; c < out; ++c) {
                double z = w[l.b2 + c];
                const double* row = &w[l.w2 + c * h];
                for (std::size_t j = 0; j < h; ++j) z += row[j] * hidden[j];
                y[c] = z;
            }
        } else {
            for (std::size_t c = 0; c < out; ++c) {
                double z = w[in * out + c];
                const double* row = &w[c * in];
                for (std::size_t k = 0; k < in; ++k) z += row[k] * x[k];
                y[c] = z;
            }
        }

        // dL/dlogits for this example
        if (spec.kind == ModelKind::LinearRegression) {
            const double e = y[0] - s.targets[r];
            total += e * e;
            dy[0] = 2.0 * e;
        } else {
            const auto target = static_cast<std::size_t>(s.targets[r]);
            const double lse = log_sum_exp(y);
            total += lse - y[target];
            for (std::size_t c = 0; c < out; ++c) {
                dy[c] = std::exp(y[c] - lse);
            }
            dy[target] -= 1.0;
        }

        if (is_mlp) {
            for (std::size_t c = 0; c < out; ++c) {
                double* grow = &grad[l.w2 + c * h];
                for (std::size_t j = 0; j < h; ++j) grow[j] += dy[c] * hidden[j];
                grad[l.b2 + c] += dy[c];
            }
            for (std::size_t j = 0; j < h; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < out; ++c) acc += w[l.w2 + c * h + j] * dy[c];
                dh[j] = acc * act_grad(spec.activation, z1[j]);
            }
            for (std::size_t j = 0; j < h; ++j) {
                double* grow = &grad[l.w1 + j * in];
                for (std::size_t k = 0; k < in; ++k) grow[k] += dh[j] * x[k];
                grad[l.b1 + j] += dh[j];
            }
        } else {
            for (std::size_t c = 0; c < out; ++c) {
                double* grow = &grad[c * in];
                for (std::size_t k = 0; k < in; ++k) grow[k] += dy[c] * x[k];
                grad[in * out + c] += dy[c];
            }
        }
    }

    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (auto& g : grad) g *= inv_n;
    check_finite(grad, "loss_and_grad");
    return {total * inv_n, grad};
}

std::size_t predict_class(const ModelSpec& spec, const ParamVector& w, const double* x) {
    const auto y = forward(spec, w, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < y.size(); ++c) {
        if (y[c] > y[best]) best = c; // strict: ties go to the lowest index
    }
    return best;
}

std::size_t count_correct(const ModelSpec& spec, const ParamVector& w, const Split& split) {
    if (spec.kind == ModelKind::LinearRegression) {
        throw NotClassification("accuracy is undefined for regression specs");
    }
    check_w(spec, w);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < split.size; ++r) {
        const double* x = &split.inputs[r * split.input_dim];
        if (predict_class(spec, w, x) == static_cast<std::size_t>(split.targets[r])) ++correct;
    }
    return correct;
}

double accuracy(const ModelSpec& spec, const ParamVector& w, const Split& split) {
    if (split.size == 0) throw EmptyInput("accuracy: empty split");
    return static_cast<double>(count_correct(spec, w, split)) / static_cast<double>(split.size);
}

} // namespace fedlorar
