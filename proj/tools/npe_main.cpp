#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "npe/config.hpp"
#include "npe/dataset.hpp"
#include "npe/harness.hpp"
#include "npe/theory.hpp"
#include "npe/train.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string out;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path, "config file with 'key = value' lines");
    sub->add_option("--preset", c.preset, "hyperparameter preset")
        ->check(CLI::IsMember({"hp1", "hp2", "desk"}));
    c.seed_opt = sub->add_option("--seed", c.seed, "run seed");
    sub->add_option("--out", c.out, "output path (default: stdout)");
    sub->add_option("--set", c.sets, "config override key=value (repeatable)");
}

// defaults <- preset <- config file <- --set <- --seed
npe::ExperimentConfig resolve(const CommonOpts& c) {
    npe::ExperimentConfig cfg;
    if (!c.preset.empty()) npe::apply_preset(cfg, c.preset);
    if (!c.config_path.empty()) npe::parse_config_file(cfg, c.config_path);
    for (const std::string& s : c.sets) npe::apply_override(cfg, s);
    if (c.seed_opt && c.seed_opt->count() > 0) cfg.seed = c.seed;
    cfg.validate();
    return cfg;
}

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open output file " + out_path);
    out << text;
    if (!out) throw std::runtime_error("write failed for " + out_path);
}

std::vector<double> parse_double_list(const std::string& s, const char* what) {
    std::vector<double> xs;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const double x = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            xs.push_back(x);
        } catch (const std::exception&) {
            throw std::invalid_argument(std::string("bad ") + what + " value: " + item);
        }
    }
    if (xs.empty()) throw std::invalid_argument(std::string("empty ") + what + " list");
    return xs;
}

std::vector<long long> parse_count_list(const std::string& s) {
    std::vector<long long> xs;
    for (double v : parse_double_list(s, "counts")) {
        const long long n = static_cast<long long>(v);
        if (static_cast<double>(n) != v || n < 1) {
            throw std::invalid_argument("counts must be positive integers");
        }
        xs.push_back(n);
    }
    return xs;
}

int run_eval(const npe::ExperimentConfig& cfg, const std::string& model_path,
             const std::string& out_path) {
    npe::MetricsReport rep;
    int classes = 0;
    if (model_path.empty()) {
        npe::ExperimentResult res = npe::run_experiment(cfg);
        rep = res.report;
        classes = res.data.train.num_classes;
    } else {
        const npe::NpeModel model = npe::load_model(model_path);
        const npe::DataBundle data = npe::make_datasets(cfg);
        classes = data.train.num_classes;
        npe::EvalMode mode;
        std::optional<npe::ClassifierHead> crt_head;
        if (cfg.method == "ce") {
            mode = npe::EvalMode::ce();
        } else if (cfg.method == "la") {
            mode = npe::EvalMode::la();
        } else if (cfg.method == "crt") {
            npe::Rng crt_rng = npe::Rng::stream(cfg.seed, npe::streams::crt);
            npe::CrtOptions opt;
            opt.lr = cfg.lr;
            opt.momentum = cfg.momentum;
            opt.weight_decay = cfg.weight_decay;
            opt.batch_size = static_cast<std::size_t>(cfg.batch_size);
            crt_head = npe::crt_retrain(model, data.train, cfg.crt_epochs, crt_rng, opt);
            mode = npe::EvalMode::crt(*crt_head);
        } else {
            mode = npe::EvalMode::npe_la(cfg.alpha, cfg.use_folding);
        }
        rep = npe::evaluate(model, data.test, mode, data.train.counts,
                            {cfg.group_hi, cfg.group_lo});
        rep.seed = cfg.seed;
        rep.config_digest = npe::config_digest(cfg);
    }
    const std::string run_id = cfg.method + "_s" + std::to_string(cfg.seed);
    emit(npe::metrics_csv_header(classes) +
             npe::metrics_csv_row(run_id, std::to_string(cfg.seed), cfg.method, cfg.n_pem,
                                  cfg.rho, cfg.alpha, rep),
         out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"long-tail prior-estimation experiments"};
    app.require_subcommand(1);

    CommonOpts gen_c, train_c, eval_c, sweep_c, theory_c, grad_c;

    CLI::App* gen = app.add_subcommand("gen-data", "generate and save a dataset");
    add_common(gen, gen_c);
    std::string gen_test_out;
    gen->add_option("--test-out", gen_test_out, "also save the balanced test split here");

    CLI::App* train = app.add_subcommand("train", "train a model per config");
    add_common(train, train_c);
    std::string train_trace;
    train->add_option("--trace", train_trace, "write the per-epoch loss CSV here");

    CLI::App* eval = app.add_subcommand("eval", "evaluate per config method");
    add_common(eval, eval_c);
    std::string eval_model;
    eval->add_option("--model", eval_model, "evaluate this saved model instead of retraining");

    CLI::App* sweep = app.add_subcommand("sweep", "run an axis sweep with repeats");
    add_common(sweep, sweep_c);
    std::string sweep_axis, sweep_values;
    int sweep_repeats = 1;
    sweep->add_option("--axis", sweep_axis, "n_pem | rho | alpha")->required();
    sweep->add_option("--values", sweep_values, "comma-separated axis values")->required();
    sweep->add_option("--repeats", sweep_repeats, "seeds per cell");

    CLI::App* theory = app.add_subcommand("theory-check", "closed form vs numeric minimizer");
    add_common(theory, theory_c);
    std::string theory_counts, theory_lambdas, theory_model;
    double theory_lambda = -1.0;
    theory->add_option("--counts", theory_counts,
                       "per-class counts (default: the config's long-tail profile)");
    theory->add_option("--lambdas", theory_lambdas, "lambda grid (default: 1)");
    theory->add_option("--model", theory_model, "saved model whose PEMs to validate");
    theory->add_option("--lambda", theory_lambda,
                       "weight decay the model's PEMs were trained with");

    CLI::App* grad = app.add_subcommand("grad-check", "finite-difference gradient check");
    add_common(grad, grad_c);
    int grad_instances = 24;
    bool grad_corrupt = false;
    grad->add_option("--instances", grad_instances, "number of random instances");
    grad->add_flag("--corrupt", grad_corrupt, "damage one gradient (checker self-test)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (gen->parsed()) {
            const npe::ExperimentConfig cfg = resolve(gen_c);
            if (gen_c.out.empty()) throw std::invalid_argument("gen-data requires --out");
            const npe::DataBundle data = npe::make_datasets(cfg);
            npe::save_dataset(data.train, gen_c.out);
            std::cout << "wrote " << data.train.size() << " train rows to " << gen_c.out
                      << "\n";
            if (!gen_test_out.empty()) {
                npe::save_dataset(data.test, gen_test_out);
                std::cout << "wrote " << data.test.size() << " test rows to " << gen_test_out
                          << "\n";
            }
        } else if (train->parsed()) {
            const npe::ExperimentConfig cfg = resolve(train_c);
            const npe::RunOutput out = npe::run_training(cfg);
            if (!train_c.out.empty()) npe::save_model(out.trained.model, train_c.out);
            if (!train_trace.empty()) emit(npe::trace_csv(out.trained.trace), train_trace);
            if (out.trained.trace.empty()) {
                std::cout << "trained 0 epochs (initialization only)\n";
            } else {
                const npe::EpochLoss& last = out.trained.trace.back();
                std::cout << "trained " << cfg.epochs << " epochs, final ce=" << last.ce
                          << " npe=" << last.npe << "\n";
            }
        } else if (eval->parsed()) {
            return run_eval(resolve(eval_c), eval_model, eval_c.out);
        } else if (sweep->parsed()) {
            const npe::ExperimentConfig cfg = resolve(sweep_c);
            npe::SweepSpec spec;
            spec.axis = sweep_axis;
            spec.values = parse_double_list(sweep_values, "axis");
            spec.repeats = sweep_repeats;
            emit(npe::run_sweep(cfg, spec), sweep_c.out);
        } else if (theory->parsed()) {
            const npe::ExperimentConfig cfg = resolve(theory_c);
            npe::TheoryCheckSpec spec;
            spec.counts = theory_counts.empty()
                              ? npe::exp_profile({cfg.n_max, cfg.classes, cfg.rho})
                              : parse_count_list(theory_counts);
            if (!theory_lambdas.empty()) {
                spec.lambdas = parse_double_list(theory_lambdas, "lambda");
            }
            if (!theory_model.empty()) {
                if (theory_lambda <= 0.0) {
                    throw std::invalid_argument(
                        "theory-check --model requires --lambda (the PEM training weight "
                        "decay)");
                }
                const npe::NpeModel model = npe::load_model(theory_model);
                if (spec.counts.size() != model.num_classes()) {
                    throw std::invalid_argument(
                        "theory-check: counts length must match the model's class count");
                }
                const npe::Matrix verts = npe::simplex_etf_vertices(
                    static_cast<int>(model.num_classes()),
                    static_cast<int>(model.input_dim()));
                spec.trained_eta = npe::per_class_eta(model, verts);
                spec.trained_lambda = theory_lambda;
            }
            emit(npe::theory_check_csv(spec), theory_c.out);
        } else if (grad->parsed()) {
            (void)resolve(grad_c);  // surface bad --config/--set even though only seed matters
            npe::GradCheckOptions opt;
            opt.instances = grad_instances;
            opt.corrupt = grad_corrupt;
            if (grad_c.seed_opt && grad_c.seed_opt->count() > 0) opt.seed = grad_c.seed;
            const npe::GradCheckReport rep = npe::grad_check(opt);
            emit(rep.text(), grad_c.out);
            return rep.pass ? 0 : 2;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
