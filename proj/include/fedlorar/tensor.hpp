#pragma once

#include <cstddef>
#include <vector>

namespace fedlorar {

// Flat parameter vector; holds global models w and local changes delta-w.
using ParamVector = std::vector<double>;

// Throws NonFiniteResult if any entry is NaN or infinite.
void check_finite(const ParamVector& x, const char* context);

// alpha * x + y. Throws DimensionMismatch / NonFiniteResult.
ParamVector axpy(double alpha, const ParamVector& x, const ParamVector& y);

// Sum of weights[i] * vectors[i] in ascending index order. The fixed
// summation order makes aggregation bit-reproducible.
ParamVector weighted_sum(const std::vector<double>& weights,
                         const std::vector<ParamVector>& vectors);

// Squared L2 norm.
double l2_norm_sq(const ParamVector& x);

double l2_norm(const ParamVector& x);

} // namespace fedlorar
