#include "npe/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "npe/matrix.hpp"
#include "npe/numerics.hpp"

namespace npe {

namespace {

void check(const CollapseObjective& obj) {
    require(obj.n_c >= 1.0, "collapse objective: n_c must be >= 1");
    require(obj.lambda > 0.0, "collapse objective: lambda must be positive");
}

}  // namespace

double objective_value(const CollapseObjective& obj, double eta) {
    check(obj);
    require(std::isfinite(eta), "objective_value: eta must be finite");
    // −log σ(η) = softplus(−η)
    return obj.n_c * softplus(-eta) + 0.5 * obj.lambda * eta * eta;
}

double objective_gradient(const CollapseObjective& obj, double eta) {
    check(obj);
    return -obj.n_c * sigmoid(-eta) + obj.lambda * eta;
}

double stationarity_residual(const CollapseObjective& obj, double eta) {
    check(obj);
    return obj.lambda * eta - obj.n_c * std::exp(-eta);
}

double closed_form_eta(const CollapseObjective& obj) {
    check(obj);
    return lambert_w(obj.n_c / obj.lambda);
}

double numeric_minimize(const CollapseObjective& obj) {
    check(obj);
    // The residual is strictly increasing, negative at 0, and positive at
    // max(0, log(N_c/λ)) + 2, so the root is bracketed.
    const double z = obj.n_c / obj.lambda;
    double lo = 0.0;
    double hi = std::max(0.0, std::log(z)) + 2.0;
    double eta = 0.5 * hi;
    for (int it = 0; it < 200; ++it) {
        const double tail = obj.n_c * std::exp(-eta);
        const double r = obj.lambda * eta - tail;
        if (std::abs(r) < 1e-12) return eta;
        if (r > 0.0) {
            hi = eta;
        } else {
            lo = eta;
        }
        if (hi - lo < 4e-16 * std::max(1.0, hi)) {
            // double precision exhausted before the absolute target; the
            // midpoint is the representable root
            return 0.5 * (lo + hi);
        }
        double next = eta - r / (obj.lambda + tail);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);  // bisection fallback
        eta = next;
    }
    throw std::runtime_error("numeric_minimize: no convergence in 200 iterations");
}

double asymptotic_eta(const CollapseObjective& obj) {
    check(obj);
    const double z = obj.n_c / obj.lambda;
    if (!(z > std::exp(1.0))) {
        throw std::domain_error("asymptotic_eta: requires N_c/lambda > e");
    }
    const double l = std::log(z);
    return l - std::log(l);
}

PriorDecomposition decompose(double n_c, double n_total, double lambda) {
    require(n_c >= 1.0, "decompose: n_c must be >= 1");
    require(n_total >= n_c, "decompose: n_total must be >= n_c");
    require(lambda > 0.0, "decompose: lambda must be positive");
    const double z = n_c / lambda;
    if (!(z > std::exp(1.0))) {
        throw std::domain_error("decompose: requires N_c/lambda > e");
    }
    PriorDecomposition d;
    d.log_prior = std::log(n_c / n_total);
    d.c0 = -std::log(lambda) + std::log(n_total);
    d.eps_c = -std::log(std::log(z));
    return d;
}

namespace {

// tie-averaged ranks, 1-based
std::vector<double> ranks_of(const std::vector<double>& xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = avg;
        i = j + 1;
    }
    return rank;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size(), "spearman: length mismatch");
    require(x.size() >= 2, "spearman: need at least 2 points");
    const std::vector<double> rx = ranks_of(x);
    const std::vector<double> ry = ranks_of(y);
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

PemValidation validate_trained_pem(const std::vector<double>& trained_eta,
                                   const std::vector<long long>& counts, double lambda) {
    require(trained_eta.size() == counts.size(), "validate_trained_pem: length mismatch");
    require(lambda > 0.0, "validate_trained_pem: lambda must be positive");
    std::vector<long long> distinct = counts;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    require(distinct.size() >= 2, "validate_trained_pem: fewer than 2 distinct counts");

    std::vector<double> log_n(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        require(counts[c] >= 1, "validate_trained_pem: counts must be >= 1");
        log_n[c] = std::log(static_cast<double>(counts[c]));
    }

    PemValidation v;
    const auto rho = spearman(trained_eta, log_n);
    v.degenerate = !rho.has_value();
    v.spearman_rank = rho.value_or(0.0);

    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double w = closed_form_eta({static_cast<double>(counts[c]), lambda});
        v.max_abs_dev = std::max(v.max_abs_dev, std::abs(trained_eta[c] - w));
    }

    double mx = 0.0, my = 0.0;
    const double n = static_cast<double>(counts.size());
    for (std::size_t c = 0; c < counts.size(); ++c) {
        mx += log_n[c];
        my += trained_eta[c];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        sxy += (log_n[c] - mx) * (trained_eta[c] - my);
        sxx += (log_n[c] - mx) * (log_n[c] - mx);
    }
    v.slope = sxy / sxx;  // sxx > 0: at least 2 distinct counts
    return v;
}

}  // namespace npe
