#pragma once

#include <cstddef>
#include <functional>

#include "npe/matrix.hpp"

namespace npe {

// Logistic function 1/(1+e^{-u}), overflow-safe for the whole double range.
double sigmoid(double u);

// log(1 + e^u), overflow-safe. -log sigmoid(u) == softplus(-u).
double softplus(double u);

// Principal branch of the Lambert W function: the w >= -1 solving w*e^w = z,
// defined for z >= -1/e. Halley iteration to a relative residual of 1e-14 on
// |w*e^w - z| / max(|z|, 1); at most 100 iterations, throws on
// non-convergence. Initial guess: sqrt expansion -1 + p - p^2/3 with
// p = sqrt(2(1 + e*z)) near the branch point, w0 = z for z in (-1/4, e),
// w0 = log z - log log z + log log z / log z for z >= e.
// Throws std::domain_error for z < -1/e.
double lambert_w(double z);

// Cross-entropy loss and gradient for one logit row: loss is
// -log softmax(z)[label] computed with max-subtraction, grad is
// softmax(z) - one_hot(label). Throws std::out_of_range for a bad label.
double softmax_ce_row(const double* z, std::size_t n, std::size_t label, double* grad);

struct SoftmaxCeResult {
    double loss;
    Matrix grad;  // 1×C row
};
SoftmaxCeResult softmax_ce(const Matrix& logits, std::size_t label);

// Central finite differences (f(x+eps*e_ij) - f(x-eps*e_ij)) / (2 eps),
// entry by entry. The gradient-check oracle; independent of any analytic path.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double eps = 1e-5);

// max over entries of |a-b| / max(|a|,|b|,floor). The floor keeps
// finite-difference noise on true-zero entries from registering as error.
double max_rel_error(const Matrix& a, const Matrix& b, double floor = 1e-4);

}  // namespace npe
