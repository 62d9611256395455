#include "npe/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace npe {

double sigmoid(double u) {
    if (u >= 0.0) {
        return 1.0 / (1.0 + std::exp(-u));
    }
    const double e = std::exp(u);
    return e / (1.0 + e);
}

double softplus(double u) {
    if (u > 0.0) {
        return u + std::log1p(std::exp(-u));
    }
    return std::log1p(std::exp(u));
}

double lambert_w(double z) {
    constexpr double inv_e = 0.36787944117144233;  // 1/e
    if (!(z >= -inv_e)) {
        throw std::domain_error("lambert_w: argument below -1/e");
    }
    if (z == 0.0) return 0.0;

    double w;
    if (z < -0.25) {
        // Series about the branch point z = -1/e.
        const double p = std::sqrt(std::max(0.0, 2.0 * (1.0 + std::exp(1.0) * z)));
        w = -1.0 + p - p * p / 3.0;
    } else if (z < std::exp(1.0)) {
        w = z;
    } else {
        const double l1 = std::log(z);
        const double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }

    const double tol = 1e-14 * std::max(std::abs(z), 1.0);
    for (int it = 0; it < 100; ++it) {
        const double ew = std::exp(w);
        const double f = w * ew - z;
        if (std::abs(f) <= tol) {
            return w;
        }
        // Halley step.
        const double fp = ew * (w + 1.0);
        const double denom = fp - f * (w + 2.0) / (2.0 * (w + 1.0));
        w -= f / denom;
    }
    throw std::runtime_error("lambert_w: did not converge");
}

double softmax_ce_row(const double* z, std::size_t n, std::size_t label, double* grad) {
    if (label >= n) {
        throw std::out_of_range("softmax_ce_row: label out of range");
    }
    double m = z[0];
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, z[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(z[j] - m);
    const double log_sum = std::log(sum);
    const double loss = log_sum - (z[label] - m);
    if (grad) {
        for (std::size_t j = 0; j < n; ++j) {
            grad[j] = std::exp(z[j] - m) / sum;
        }
        grad[label] -= 1.0;
    }
    return loss;
}

SoftmaxCeResult softmax_ce(const Matrix& logits, std::size_t label) {
    require(logits.rows == 1 && logits.cols >= 1, "softmax_ce: expected a 1xC row");
    SoftmaxCeResult r{0.0, Matrix(1, logits.cols)};
    r.loss = softmax_ce_row(logits.v.data(), logits.cols, label, r.grad.v.data());
    return r;
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f, const Matrix& x,
                        double eps) {
    Matrix g(x.rows, x.cols);
    Matrix xp = x;
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        const double orig = xp.v[i];
        xp.v[i] = orig + eps;
        const double fp = f(xp);
        xp.v[i] = orig - eps;
        const double fm = f(xp);
        xp.v[i] = orig;
        g.v[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

double max_rel_error(const Matrix& a, const Matrix& b, double floor) {
    require(a.same_shape(b), "max_rel_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        const double denom = std::max({std::abs(a.v[i]), std::abs(b.v[i]), floor});
        worst = std::max(worst, std::abs(a.v[i] - b.v[i]) / denom);
    }
    return worst;
}

}  // namespace npe
