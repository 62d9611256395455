#pragma once

#include <optional>
#include <vector>

namespace npe {

// Per-class collapsed objective J_c(η) = −N_c·log σ(η) + (λ/2)·η², the
// regularized one-way loss once all inputs of one class share a feature and
// the class's PEM logit is a free scalar. Strictly convex for λ > 0.
struct CollapseObjective {
    double n_c = 1.0;
    double lambda = 1.0;
};

double objective_value(const CollapseObjective& obj, double eta);
// dJ/dη = −N_c·σ(−η) + λ·η (the exact logistic gradient)
double objective_gradient(const CollapseObjective& obj, double eta);

// The balance the closed form solves: λ·η − N_c·e^{−η}. For η > 0 this is
// the logistic gradient with σ(−η) replaced by its tail e^{−η}; the two
// differ by a factor 1+e^{−η}, negligible in saturation and the reading
// under which W(N_c/λ) is the exact stationary point.
double stationarity_residual(const CollapseObjective& obj, double eta);

// η* = W(N_c/λ), principal Lambert branch: the exact root of the saturated
// balance above, and the asymptotic minimizer of J_c itself.
double closed_form_eta(const CollapseObjective& obj);

// Independent root of stationarity_residual: safeguarded Newton with a
// bisection fallback on [0, max(0, log(N_c/λ)) + 2]; shares no code with
// lambert_w so the two can cross-validate each other. Converges to an
// absolute residual below 1e−12 (or to the limit of double precision when
// the terms are too large for that).
double numeric_minimize(const CollapseObjective& obj);

// Saturation-regime expansion log(N_c/λ) − log log(N_c/λ).
// Throws std::domain_error for N_c/λ <= e.
double asymptotic_eta(const CollapseObjective& obj);

// η*_c ≈ log p_c + C0 + ε_c: the class log-prior, a class-agnostic shift,
// and a slowly varying residual.
struct PriorDecomposition {
    double log_prior = 0.0;  // log(N_c / N)
    double c0 = 0.0;         // −log λ + log N
    double eps_c = 0.0;      // −log log(N_c/λ)

    double sum() const { return log_prior + c0 + eps_c; }
};

PriorDecomposition decompose(double n_c, double n_total, double lambda);

// Spearman rank correlation with tie-averaged ranks; nullopt when either
// input is constant (ranks degenerate).
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

struct PemValidation {
    bool degenerate = false;   // constant η across classes, correlation undefined
    double spearman_rank = 0.0;  // trained η_c vs log N_c
    double max_abs_dev = 0.0;    // max_c |η_c − W(N_c/λ)|
    double slope = 0.0;          // least-squares slope of η_c against log N_c
};

// Compare per-class estimates from a trained PEM against the closed form.
// The rank correlation and slope carry the claim; the absolute deviation is
// informational, since training-time weight decay is not literally the η
// penalty of the collapsed objective.
PemValidation validate_trained_pem(const std::vector<double>& trained_eta,
                                   const std::vector<long long>& counts, double lambda);

}  // namespace npe
