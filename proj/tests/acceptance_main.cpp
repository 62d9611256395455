// End-to-end acceptance gate: every release-blocking property in one binary,
// one verdict line per check, exit 0 only if all of them hold.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "npe/config.hpp"
#include "npe/harness.hpp"
#include "npe/numerics.hpp"
#include "npe/theory.hpp"

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = true;
    std::string detail;
};

int g_failures = 0;

void report(int id, const char* name, const Verdict& v, double seconds, double budget) {
    const bool in_time = seconds < budget;
    const bool ok = v.pass && in_time;
    if (!ok) ++g_failures;
    std::printf("[%d] %s: %s (%s; %.2fs %s %.0fs)\n", id, name, ok ? "PASS" : "FAIL",
                v.detail.c_str(), seconds, in_time ? "<" : ">=", budget);
    std::fflush(stdout);
}

template <typename F>
void run_check(int id, const char* name, double budget_seconds, F body) {
    const auto start = Clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v.pass = false;
        v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    report(id, name, v, secs, budget_seconds);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof(buf), f, args);
    va_end(args);
    return buf;
}

// ---- [1] analytic gradients of the joint loss vs finite differences ----

Verdict check_gradients() {
    npe::GradCheckOptions opt;
    opt.instances = 24;  // covers 1..3 estimator maps and both sign conventions
    opt.seed = 0;
    const npe::GradCheckReport rep = npe::grad_check(opt);
    Verdict v;
    v.pass = rep.pass && rep.max_rel < 1e-4;
    v.detail = fmt("%d instances, max_rel=%.3e, threshold 1e-4", opt.instances, rep.max_rel);
    return v;
}

// ---- [2] closed-form minimizer vs independent numeric root ----

Verdict check_closed_form() {
    // N_c/lambda spanning 0.1 .. 1e6
    const std::vector<std::pair<double, double>> cases{
        {1.0, 10.0}, {1.0, 1.0}, {10.0, 1.0}, {1e3, 1.0}, {1e6, 1.0}};
    double max_diff = 0.0, max_resid = 0.0;
    for (const auto& [n_c, lambda] : cases) {
        const npe::CollapseObjective obj{n_c, lambda};
        const double closed = npe::closed_form_eta(obj);
        const double numeric = npe::numeric_minimize(obj);
        max_diff = std::max(max_diff, std::abs(closed - numeric));
        max_resid = std::max(max_resid, std::abs(npe::stationarity_residual(obj, closed)));
    }
    Verdict v;
    v.pass = max_diff <= 1e-9 && max_resid <= 1e-10;
    v.detail = fmt("ratios 0.1..1e6: |closed-numeric|<=%.2e (tol 1e-9), residual<=%.2e (tol 1e-10)",
                   max_diff, max_resid);
    return v;
}

// ---- [3] saturation expansion stays inside the envelope ----

Verdict check_asymptotics() {
    const double lo = 20.0, hi = 1e6;
    double max_gap = 0.0;
    for (int i = 0; i < 200; ++i) {
        const double z = lo * std::pow(hi / lo, static_cast<double>(i) / 199.0);
        const npe::CollapseObjective obj{z, 1.0};
        max_gap = std::max(max_gap,
                           std::abs(npe::closed_form_eta(obj) - npe::asymptotic_eta(obj)));
    }
    const double gap_100 =
        std::abs(npe::closed_form_eta({100.0, 1.0}) - npe::asymptotic_eta({100.0, 1.0}));
    const double gap_1e6 =
        std::abs(npe::closed_form_eta({1e6, 1.0}) - npe::asymptotic_eta({1e6, 1.0}));
    Verdict v;
    v.pass = max_gap <= 0.5 && gap_1e6 < gap_100;
    v.detail = fmt("max|W-(log z - log log z)|=%.4f on [20,1e6] (tol 0.5), gap(1e6)=%.4f < gap(1e2)=%.4f",
                   max_gap, gap_1e6, gap_100);
    return v;
}

// ---- [4] a PEM trained on collapsed features recovers the log-prior order ----

Verdict check_trained_pem() {
    npe::ExperimentConfig cfg;
    cfg.data = "etf";
    cfg.classes = 10;
    cfg.n_max = 500;
    cfg.rho = 100.0;
    cfg.dim = 9;
    cfg.test_per_class = 1;
    cfg.hidden = {};
    cfg.feature_dim = 0;  // estimator sees the fixed collapsed features directly
    cfg.n_pem = 1;
    cfg.t = 1;
    cfg.init_std = 1e-3;
    cfg.lr = 0.3;
    cfg.momentum = 0.9;
    cfg.weight_decay = 1e-2;
    cfg.pem_weight_decay = 1e-2;
    cfg.batch_size = 1242;  // full batch: plain gradient flow to the fixed point
    cfg.epochs = 1200;
    cfg.milestones = {};
    cfg.seed = 0;

    const npe::RunOutput out = npe::run_training(cfg);
    const npe::Matrix verts = npe::simplex_etf_vertices(cfg.classes, cfg.dim);
    const std::vector<double> eta = npe::per_class_eta(out.trained.model, verts);
    const npe::PemValidation val =
        npe::validate_trained_pem(eta, out.data.train.counts, cfg.pem_weight_decay);

    Verdict v;
    v.pass = !val.degenerate && val.spearman_rank == 1.0 && val.slope >= 0.5 &&
             val.slope <= 1.5;
    v.detail = fmt("spearman=%g (need 1), slope=%.3f (need [0.5,1.5]); "
                   "max|eta-W(N_c/lambda)|=%.3f reported, not asserted",
                   val.spearman_rank, val.slope, val.max_abs_dev);
    return v;
}

// ---- [5] folded head equals two-pass adjusted inference ----

Verdict check_folding() {
    npe::Rng rng(7);
    double max_diff = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d_in = 2 + rng.below(6);
        std::vector<std::size_t> dims{d_in};
        if (trial % 4 != 0) dims.push_back(2 + rng.below(7));
        const int c_count = static_cast<int>(2 + rng.below(5));
        const int n_pem = static_cast<int>(1 + rng.below(4));
        const int t = trial % 2;
        npe::NpeModel m = npe::make_model(dims, c_count, n_pem, t, 0.01, rng);
        for (auto& w : m.pems.weights)
            for (double& x : w.v) x = rng.normal();
        for (auto& b : m.pems.biases)
            for (double& x : b.v) x = rng.normal();
        const double alpha = 0.1 + rng.uniform() * 2.0;

        npe::Matrix input(5, d_in);
        for (double& x : input.v) x = rng.normal();
        const npe::Matrix h = npe::forward_features(m, input);
        const npe::Matrix two_pass = npe::adjust_logits(
            npe::classifier_logits(m.head, h), npe::npe_estimate(m.pems, h), alpha);
        const npe::Matrix folded =
            npe::classifier_logits(npe::fold_linear(m.head, m.pems, alpha), h);
        max_diff = std::max(max_diff, npe::max_abs_diff(two_pass, folded));
    }
    Verdict v;
    v.pass = max_diff <= 1e-9;
    v.detail = fmt("100 instances, max logit difference %.2e (tol 1e-9)", max_diff);
    return v;
}

// ---- [6] additive-shift equivalences of the adjustment rule ----

std::vector<double> softmax_row(const double* z, std::size_t n) {
    double zmax = z[0];
    for (std::size_t j = 1; j < n; ++j) zmax = std::max(zmax, z[j]);
    std::vector<double> p(n);
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        p[j] = std::exp(z[j] - zmax);
        sum += p[j];
    }
    for (double& x : p) x /= sum;
    return p;
}

Verdict check_shift_equivalences() {
    npe::Rng rng(11);
    const std::size_t n = 200, c_count = 10;
    const std::vector<long long> counts = npe::exp_profile({500, 10, 100.0});

    // (a) adding a constant to every estimator coordinate cannot move softmax
    double max_prob_diff = 0.0;
    for (int trial = 0; trial < 5; ++trial) {
        npe::Matrix z(n, c_count), eta(n, c_count);
        for (double& x : z.v) x = 3.0 * rng.normal();
        for (double& x : eta.v) x = rng.normal();
        const double alpha = 0.25 + rng.uniform();
        const double shift = 10.0 * rng.normal();
        npe::Matrix eta_shifted = eta;
        for (double& x : eta_shifted.v) x += shift;
        const npe::Matrix a = npe::adjust_logits(z, eta, alpha);
        const npe::Matrix b = npe::adjust_logits(z, eta_shifted, alpha);
        for (std::size_t i = 0; i < n; ++i) {
            const auto pa = softmax_row(a.row(i), c_count);
            const auto pb = softmax_row(b.row(i), c_count);
            for (std::size_t j = 0; j < c_count; ++j) {
                max_prob_diff = std::max(max_prob_diff, std::abs(pa[j] - pb[j]));
            }
        }
    }

    // (b) an estimate of exactly log N_c decides like classical adjustment
    std::size_t mismatches = 0;
    npe::Matrix z(n, c_count), log_counts(n, c_count);
    for (double& x : z.v) x = 3.0 * rng.normal();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < c_count; ++c) {
            log_counts.at(i, c) = std::log(static_cast<double>(counts[c]));
        }
    }
    const npe::Matrix learned = npe::adjust_logits(z, log_counts, 1.0);
    const npe::Matrix classical = npe::classical_la(z, counts);
    for (std::size_t i = 0; i < n; ++i) {
        if (npe::argmax_row(learned.row(i), c_count) !=
            npe::argmax_row(classical.row(i), c_count)) {
            ++mismatches;
        }
    }

    Verdict v;
    v.pass = max_prob_diff <= 1e-12 && mismatches == 0;
    v.detail = fmt("softmax shift residual %.2e (tol 1e-12); %zu/%zu decision mismatches vs "
                   "classical adjustment (need 0)",
                   max_prob_diff, mismatches, n);
    return v;
}

// ---- [7] desk-scale method ordering ----

struct DeskRun {
    npe::MetricsReport ce, crt, npe_la;
};

DeskRun desk_run(std::uint64_t seed) {
    npe::ExperimentConfig base;  // desk defaults: C=10, rho=100
    base.seed = seed;

    DeskRun out;
    // one plain-CE training serves both the CE readout and the retrained head
    npe::ExperimentConfig ce_cfg = base;
    ce_cfg.method = "ce";
    ce_cfg.n_pem = 0;
    {
        const npe::RunOutput run = npe::run_training(ce_cfg);
        out.ce = npe::evaluate(run.trained.model, run.data.test, npe::EvalMode::ce(),
                               run.data.train.counts, {base.group_hi, base.group_lo});
        npe::Rng crt_rng = npe::Rng::stream(seed, npe::streams::crt);
        npe::CrtOptions opt;
        opt.lr = ce_cfg.lr;
        opt.momentum = ce_cfg.momentum;
        opt.weight_decay = ce_cfg.weight_decay;
        opt.batch_size = static_cast<std::size_t>(ce_cfg.batch_size);
        const npe::ClassifierHead head =
            npe::crt_retrain(run.trained.model, run.data.train, ce_cfg.crt_epochs, crt_rng, opt);
        out.crt = npe::evaluate(run.trained.model, run.data.test, npe::EvalMode::crt(head),
                                run.data.train.counts, {base.group_hi, base.group_lo});
    }
    npe::ExperimentConfig npe_cfg = base;
    npe_cfg.method = "npe-la";
    npe_cfg.n_pem = 16;
    npe_cfg.alpha = 1.0;
    out.npe_la = npe::run_experiment(npe_cfg).report;
    return out;
}

double opt_or_one(const std::optional<double>& x) { return x ? *x : 1.0; }

Verdict check_desk_ordering() {
    double ce_bal = 0.0, crt_bal = 0.0, npe_bal = 0.0, ce_tail = 0.0, npe_tail = 0.0;
    const int seeds = 3;
    for (int s = 0; s < seeds; ++s) {
        const DeskRun r = desk_run(static_cast<std::uint64_t>(s));
        ce_bal += r.ce.balanced_acc;
        crt_bal += r.crt.balanced_acc;
        npe_bal += r.npe_la.balanced_acc;
        ce_tail += opt_or_one(r.ce.tail_acc);
        npe_tail += opt_or_one(r.npe_la.tail_acc);
    }
    ce_bal /= seeds;
    crt_bal /= seeds;
    npe_bal /= seeds;
    ce_tail /= seeds;
    npe_tail /= seeds;

    Verdict v;
    v.pass = (npe_bal - ce_bal >= 0.03) && (npe_tail > ce_tail) && (crt_bal > ce_bal);
    v.detail = fmt("balanced: ce=%.3f crt=%.3f npe-la=%.3f (need npe-la-ce>=0.03, crt>ce); "
                   "tail: ce=%.3f npe-la=%.3f (need strict gain)",
                   ce_bal, crt_bal, npe_bal, ce_tail, npe_tail);
    return v;
}

// ---- [8] estimator-count sweep moves the scarce-class accuracy ----

Verdict check_pem_sweep() {
    const std::vector<int> pem_counts{0, 1, 4, 8, 16};
    const int seeds = 3;
    npe::ExperimentConfig base;  // desk defaults
    base.method = "npe-la";
    base.alpha = 1.0;

    const npe::ClassGroups groups =
        npe::group_classes(npe::exp_profile({base.n_max, base.classes, base.rho}),
                           {base.group_hi, base.group_lo});
    std::vector<int> scarce = groups.medium;
    scarce.insert(scarce.end(), groups.tail.begin(), groups.tail.end());

    std::vector<double> scarce_acc;
    std::string cells;
    for (const int k : pem_counts) {
        double acc = 0.0;
        for (int s = 0; s < seeds; ++s) {
            npe::ExperimentConfig cfg = base;
            cfg.n_pem = k;
            cfg.seed = static_cast<std::uint64_t>(s);
            const npe::MetricsReport rep = npe::run_experiment(cfg).report;
            double cell = 0.0;
            for (const int c : scarce) cell += rep.per_class_acc[static_cast<std::size_t>(c)];
            acc += cell / static_cast<double>(scarce.size());
        }
        scarce_acc.push_back(acc / seeds);
        cells += fmt("%s%d:%.3f", cells.empty() ? "" : " ", k, scarce_acc.back());
    }

    Verdict v;
    v.pass = scarce_acc.back() > scarce_acc.front();
    v.detail = fmt("mean tail+medium acc by estimator count {%s}; need 16 > 0", cells.c_str());
    return v;
}

// ---- [9] repeated runs are byte-identical ----

Verdict check_determinism() {
    npe::ExperimentConfig cfg;
    cfg.classes = 5;
    cfg.n_max = 60;
    cfg.rho = 20.0;
    cfg.dim = 8;
    cfg.sep = 3.0;
    cfg.noise = 0.8;
    cfg.test_per_class = 40;
    cfg.hidden = {16};
    cfg.feature_dim = 8;
    cfg.n_pem = 4;
    cfg.batch_size = 32;
    cfg.epochs = 12;
    cfg.milestones = {9};
    cfg.seed = 5;

    const npe::RunOutput first = npe::run_training(cfg);
    const npe::RunOutput second = npe::run_training(cfg);
    const bool train_same =
        npe::trace_csv(first.trained.trace) == npe::trace_csv(second.trained.trace) &&
        first.trained.model.head.W == second.trained.model.head.W;

    npe::SweepSpec spec;
    spec.axis = "alpha";
    spec.values = {0.5, 1.0};
    spec.repeats = 2;
    const std::string sweep_a = npe::run_sweep(cfg, spec);
    const std::string sweep_b = npe::run_sweep(cfg, spec);

    Verdict v;
    v.pass = train_same && sweep_a == sweep_b;
    v.detail = fmt("train rerun identical: %s; sweep rerun identical: %s",
                   train_same ? "yes" : "no", sweep_a == sweep_b ? "yes" : "no");
    return v;
}

}  // namespace

int main() {
    std::printf("acceptance checks\n");
    run_check(1, "joint-loss gradient check", 10.0, check_gradients);
    run_check(2, "closed-form vs numeric minimizer", 1.0, check_closed_form);
    run_check(3, "asymptotic expansion envelope", 1.0, check_asymptotics);
    run_check(4, "trained estimator log-prior recovery", 30.0, check_trained_pem);
    run_check(5, "fold/two-pass equality", 1.0, check_folding);
    run_check(6, "additive-shift equivalences", 1.0, check_shift_equivalences);
    run_check(7, "desk benchmark method ordering", 300.0, check_desk_ordering);
    run_check(8, "estimator-count sweep trend", 600.0, check_pem_sweep);
    run_check(9, "byte-identical reruns", 120.0, check_determinism);

    if (g_failures == 0) {
        std::printf("acceptance: all 9 checks passed\n");
        return 0;
    }
    std::printf("acceptance: %d of 9 checks FAILED\n", g_failures);
    return 1;
}
