#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npe/config.hpp"
#include "npe/metrics.hpp"
#include "npe/train.hpp"

namespace npe {

struct ExperimentResult {
    ExperimentConfig cfg;
    DataBundle data;
    TrainResult trained;
    std::optional<ClassifierHead> crt_head;
    MetricsReport report;
};

// Data, training, method-specific evaluation, one report. The method picks
// how the trained model is read out; training itself is always the joint
// objective from the config (n_pem = 0 gives a plain CE model).
ExperimentResult run_experiment(const ExperimentConfig& cfg);

struct SweepSpec {
    std::string axis;  // n_pem | rho | alpha
    std::vector<double> values;
    int repeats = 1;
};

// Cross product of axis values and seeds seed..seed+repeats-1. Emits the
// per-seed rows followed by mean and sample-std rows per value, in
// deterministic (value, seed) order.
std::string run_sweep(const ExperimentConfig& base, const SweepSpec& spec);

struct TheoryCheckSpec {
    std::vector<long long> counts;
    std::vector<double> lambdas = {1.0};
    std::vector<double> trained_eta;    // empty = no trained-PEM comparison
    double trained_lambda = -1.0;       // required when trained_eta is given
};

// One row per (lambda, count): closed-form vs numeric minimizer vs
// asymptotic expansion plus the log-prior decomposition. Asymptotic columns
// are NA outside the saturation regime (N_c/lambda <= e). A trained-PEM
// comparison, when supplied, is appended as comment lines.
std::string theory_check_csv(const TheoryCheckSpec& spec);

// True-class estimate per class: row c of class_features is class c's
// feature, and the returned value is eta(x_c)[c].
std::vector<double> per_class_eta(const NpeModel& model, const Matrix& class_features);

struct GradCheckOptions {
    int instances = 24;
    std::uint64_t seed = 0;
    bool corrupt = false;  // test hook: damage one analytic gradient entry
};

struct GradCheckReport {
    bool pass = false;
    double max_rel = 0.0;
    std::vector<std::string> rows;

    std::string text() const;
};

// Finite-difference check of every parameter gradient (and the input
// gradient) of the joint loss over random small instances.
GradCheckReport grad_check(const GradCheckOptions& opt);

}  // namespace npe
