#include "npe/harness.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "npe/numerics.hpp"
#include "npe/theory.hpp"

namespace npe {

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    ExperimentResult r;
    r.cfg = cfg;
    RunOutput out = run_training(cfg);
    r.data = std::move(out.data);
    r.trained = std::move(out.trained);

    EvalMode mode;
    if (cfg.method == "ce") {
        mode = EvalMode::ce();
    } else if (cfg.method == "la") {
        mode = EvalMode::la();
    } else if (cfg.method == "crt") {
        Rng crt_rng = Rng::stream(cfg.seed, streams::crt);
        CrtOptions opt;
        opt.lr = cfg.lr;
        opt.momentum = cfg.momentum;
        opt.weight_decay = cfg.weight_decay;
        opt.batch_size = static_cast<std::size_t>(cfg.batch_size);
        r.crt_head =
            crt_retrain(r.trained.model, r.data.train, cfg.crt_epochs, crt_rng, opt);
        mode = EvalMode::crt(*r.crt_head);
    } else {
        mode = EvalMode::npe_la(cfg.alpha, cfg.use_folding);
    }
    r.report = evaluate(r.trained.model, r.data.test, mode, r.data.train.counts,
                        {cfg.group_hi, cfg.group_lo});
    r.report.seed = cfg.seed;
    r.report.config_digest = config_digest(cfg);
    return r;
}

namespace {

std::string axis_tag(const std::string& axis, double value) {
    char buf[48];
    if (axis == "n_pem") {
        std::snprintf(buf, sizeof(buf), "npem%d", static_cast<int>(value));
    } else if (axis == "rho") {
        std::snprintf(buf, sizeof(buf), "rho%g", value);
    } else {
        std::snprintf(buf, sizeof(buf), "alpha%g", value);
    }
    return buf;
}

void set_axis(ExperimentConfig& cfg, const std::string& axis, double value) {
    if (axis == "n_pem") {
        const int as_int = static_cast<int>(value);
        require(static_cast<double>(as_int) == value && as_int >= 0,
                "sweep: n_pem values must be non-negative integers");
        cfg.n_pem = as_int;
    } else if (axis == "rho") {
        cfg.rho = value;
    } else if (axis == "alpha") {
        cfg.alpha = value;
    } else {
        throw std::invalid_argument("sweep: axis must be n_pem, rho or alpha");
    }
}

std::optional<double> opt_mean(const std::vector<std::optional<double>>& xs) {
    double sum = 0.0;
    for (const auto& x : xs) {
        if (!x) return std::nullopt;
        sum += *x;
    }
    return sum / static_cast<double>(xs.size());
}

double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : xs) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::optional<double> opt_std(const std::vector<std::optional<double>>& xs,
                              const std::optional<double>& mean) {
    if (!mean) return std::nullopt;
    std::vector<double> vals;
    vals.reserve(xs.size());
    for (const auto& x : xs) vals.push_back(*x);
    return sample_std(vals, *mean);
}

}  // namespace

std::string run_sweep(const ExperimentConfig& base, const SweepSpec& spec) {
    require(!spec.values.empty(), "sweep: empty value list");
    require(spec.repeats >= 1, "sweep: repeats must be >= 1");

    std::string rows;
    int classes = 0;
    for (double value : spec.values) {
        std::vector<MetricsReport> reports;
        const std::string tag = axis_tag(spec.axis, value);
        ExperimentConfig cell = base;
        set_axis(cell, spec.axis, value);
        for (int rep = 0; rep < spec.repeats; ++rep) {
            cell.seed = base.seed + static_cast<std::uint64_t>(rep);
            const ExperimentResult res = run_experiment(cell);
            classes = res.data.train.num_classes;
            rows += metrics_csv_row(tag + "_s" + std::to_string(cell.seed),
                                    std::to_string(cell.seed), cell.method, cell.n_pem,
                                    cell.rho, cell.alpha, res.report);
            reports.push_back(res.report);
        }

        MetricsReport mean, stdev;
        const std::size_t c_count = reports[0].per_class_acc.size();
        std::vector<double> col(reports.size());
        auto agg = [&](auto getter, double& m_out, double& s_out) {
            for (std::size_t i = 0; i < reports.size(); ++i) col[i] = getter(reports[i]);
            m_out = mean_of(col);
            s_out = sample_std(col, m_out);
        };
        agg([](const MetricsReport& r) { return r.top1; }, mean.top1, stdev.top1);
        agg([](const MetricsReport& r) { return r.balanced_acc; }, mean.balanced_acc,
            stdev.balanced_acc);
        std::vector<std::optional<double>> opt_col(reports.size());
        auto agg_opt = [&](auto getter, std::optional<double>& m_out,
                           std::optional<double>& s_out) {
            for (std::size_t i = 0; i < reports.size(); ++i) opt_col[i] = getter(reports[i]);
            m_out = opt_mean(opt_col);
            s_out = opt_std(opt_col, m_out);
        };
        agg_opt([](const MetricsReport& r) { return r.head_acc; }, mean.head_acc,
                stdev.head_acc);
        agg_opt([](const MetricsReport& r) { return r.medium_acc; }, mean.medium_acc,
                stdev.medium_acc);
        agg_opt([](const MetricsReport& r) { return r.tail_acc; }, mean.tail_acc,
                stdev.tail_acc);
        mean.per_class_acc.resize(c_count);
        stdev.per_class_acc.resize(c_count);
        for (std::size_t c = 0; c < c_count; ++c) {
            for (std::size_t i = 0; i < reports.size(); ++i) {
                col[i] = reports[i].per_class_acc[c];
            }
            mean.per_class_acc[c] = mean_of(col);
            stdev.per_class_acc[c] = sample_std(col, mean.per_class_acc[c]);
        }
        rows += metrics_csv_row(tag + "_mean", "NA", cell.method, cell.n_pem, cell.rho,
                                cell.alpha, mean);
        rows += metrics_csv_row(tag + "_std", "NA", cell.method, cell.n_pem, cell.rho,
                                cell.alpha, stdev);
    }
    return metrics_csv_header(classes) + rows;
}

std::string theory_check_csv(const TheoryCheckSpec& spec) {
    require(!spec.counts.empty(), "theory-check: empty counts");
    require(!spec.lambdas.empty(), "theory-check: empty lambda grid");
    long long n_total = 0;
    for (long long n : spec.counts) {
        require(n >= 1, "theory-check: counts must be >= 1");
        n_total += n;
    }
    for (double l : spec.lambdas) require(l > 0.0, "theory-check: lambdas must be positive");

    std::string s = "n_c,lambda,eta_closed,eta_numeric,eta_asymptotic,log_prior,c0,eps_c\n";
    char buf[256];
    const double e = std::exp(1.0);
    for (double lambda : spec.lambdas) {
        for (long long n_c : spec.counts) {
            const CollapseObjective obj{static_cast<double>(n_c), lambda};
            const double closed = closed_form_eta(obj);
            const double numeric = numeric_minimize(obj);
            const double log_prior =
                std::log(static_cast<double>(n_c) / static_cast<double>(n_total));
            const double c0 = -std::log(lambda) + std::log(static_cast<double>(n_total));
            std::snprintf(buf, sizeof(buf), "%lld,%.12g,%.12g,%.12g,", n_c, lambda, closed,
                          numeric);
            s += buf;
            if (static_cast<double>(n_c) / lambda > e) {
                const PriorDecomposition dec =
                    decompose(static_cast<double>(n_c), static_cast<double>(n_total), lambda);
                std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g\n",
                              asymptotic_eta(obj), dec.log_prior, dec.c0, dec.eps_c);
            } else {
                std::snprintf(buf, sizeof(buf), "NA,%.12g,%.12g,NA\n", log_prior, c0);
            }
            s += buf;
        }
    }
    if (!spec.trained_eta.empty()) {
        require(spec.trained_lambda > 0.0,
                "theory-check: trained eta supplied without a positive lambda");
        const PemValidation v =
            validate_trained_pem(spec.trained_eta, spec.counts, spec.trained_lambda);
        std::snprintf(buf, sizeof(buf),
                      "# validation lambda=%.12g spearman=%.12g max_abs_dev=%.12g "
                      "slope=%.12g degenerate=%d\n",
                      spec.trained_lambda, v.spearman_rank, v.max_abs_dev, v.slope,
                      v.degenerate ? 1 : 0);
        s += buf;
    }
    return s;
}

std::vector<double> per_class_eta(const NpeModel& model, const Matrix& class_features) {
    require(model.pems.size() > 0, "per_class_eta: model has no PEMs");
    require(class_features.rows == model.num_classes(),
            "per_class_eta: need one feature row per class");
    const Matrix h = forward_features(model, class_features);
    const Matrix eta = npe_estimate(model.pems, h);
    std::vector<double> out(eta.rows);
    for (std::size_t c = 0; c < eta.rows; ++c) out[c] = eta.at(c, c);
    return out;
}

std::string GradCheckReport::text() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "grad-check: max_rel=%.3e threshold=1e-04 %s\n", max_rel,
                  pass ? "PASS" : "FAIL");
    std::string s = buf;
    for (const std::string& row : rows) s += row + "\n";
    return s;
}

GradCheckReport grad_check(const GradCheckOptions& opt) {
    require(opt.instances >= 1, "grad-check: need at least one instance");
    GradCheckReport rep;
    Rng rng(opt.seed);
    for (int inst = 0; inst < opt.instances; ++inst) {
        const std::size_t d_in = 2 + rng.below(5);  // 2..6
        std::vector<std::size_t> dims{d_in};
        std::string dims_str = std::to_string(d_in);
        if (inst % 5 != 0) {  // every fifth instance exercises the identity backbone
            const std::size_t layers = rng.below(3);
            for (std::size_t l = 0; l < layers; ++l) {
                dims.push_back(2 + rng.below(7));  // 2..8
            }
            dims.push_back(2 + rng.below(7));
            for (std::size_t i = 1; i < dims.size(); ++i) {
                dims_str += "-" + std::to_string(dims[i]);
            }
        }
        const int c_count = static_cast<int>(2 + rng.below(4));  // 2..5
        const int n_pem = 1 + inst % 3;
        const int t = inst % 2;
        const std::size_t batch = 2 + rng.below(4);  // 2..5

        NpeModel model = make_model(dims, c_count, n_pem, t, 0.01, rng);
        require(model.param_count() <= 2000, "grad-check: instance too large");
        Matrix x(batch, d_in);
        for (double& v : x.v) v = rng.normal();
        std::vector<int> y(batch);
        for (int& yi : y) yi = static_cast<int>(rng.below(static_cast<std::uint64_t>(c_count)));

        ModelGrads grads;
        Matrix dx;
        total_loss(model, x, y, &grads, &dx);
        std::vector<Matrix*> ps = main_params(model);
        for (Matrix* p : pem_params(model)) ps.push_back(p);
        std::vector<const Matrix*> gs = main_grad_views(grads);
        for (const Matrix* g : pem_grad_views(grads)) gs.push_back(g);

        double inst_rel = 0.0;
        for (std::size_t k = 0; k < ps.size(); ++k) {
            Matrix analytic = *gs[k];
            if (opt.corrupt && inst == 0 && k == 0) analytic.v[0] += 1e-3;
            const Matrix numeric = finite_diff_grad(
                [&](const Matrix& cand) {
                    NpeModel m2 = model;
                    std::vector<Matrix*> ps2 = main_params(m2);
                    for (Matrix* p : pem_params(m2)) ps2.push_back(p);
                    *ps2[k] = cand;
                    return total_loss(m2, x, y).total;
                },
                *ps[k]);
            inst_rel = std::max(inst_rel, max_rel_error(analytic, numeric));
        }
        const Matrix dx_numeric = finite_diff_grad(
            [&](const Matrix& cand) { return total_loss(model, cand, y).total; }, x);
        inst_rel = std::max(inst_rel, max_rel_error(dx, dx_numeric));

        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "instance %d: dims=%s C=%d n_pem=%d t=%d batch=%zu max_rel=%.3e", inst,
                      dims_str.c_str(), c_count, n_pem, t, batch, inst_rel);
        rep.rows.push_back(buf);
        rep.max_rel = std::max(rep.max_rel, inst_rel);
    }
    rep.pass = rep.max_rel < 1e-4;
    return rep;
}

}  // namespace npe
