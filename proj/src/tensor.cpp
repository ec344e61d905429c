#include "fedlorar/tensor.hpp"

#include <cmath>
#include <string>

#include "fedlorar/errors.hpp"

namespace fedlorar {

void check_finite(const ParamVector& x, const char* context) {
    for (double v : x) {
        if (!std::isfinite(v)) {
            throw NonFiniteResult(std::string(context) + ": non-finite entry");
        }
    }
}

ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y) {
    if (x.size() != y.size()) {
        throw DimensionMismatch("axpy: x.dim=" + std::to_string(x.size()) +
                                " y.dim=" + std::to_string(y.size()));
    }
    ParamVector out(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) {
        out[k] = alpha * x[k] + y[k];
    }
    check_finite(out, "axpy");
    return out;
}

ParamVector weighted_sum(const std::vector<double>& weights,
                         const std::vector<ParamVector>& vectors) {
    if (weights.empty() || vectors.empty()) {
        throw EmptyInput("weighted_sum: empty input");
    }
    if (weights.size() != vectors.size()) {
        throw DimensionMismatch("weighted_sum: weights/vectors length mismatch");
    }
    const std::size_t dim = vectors.front().size();
    for (const auto& v : vectors) {
        if (v.size() != dim) {
            throw DimensionMismatch("weighted_sum: inconsistent vector dims");
        }
    }
    ParamVector out(dim, 0.0);
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        const double w = weights[i];
        const ParamVector& v = vectors[i];
        for (std::size_t k = 0; k < dim; ++k) {
            out[k] += w * v[k];
        }
    }
    check_finite(out, "weighted_sum");
    return out;
}

double l2_norm_sq(const ParamVector& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    if (!std::isfinite(acc)) {
        throw NonFiniteResult("l2_norm_sq: non-finite accumulation");
    }
    return acc;
}

double l2_norm(const ParamVector& x) { return std::sqrt(l2_norm_sq(x)); }

} // namespace fedlorar
