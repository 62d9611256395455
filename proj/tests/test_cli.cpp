#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <doctest.h>

#include "npe/dataset.hpp"
#include "npe/model.hpp"

// NPE_CLI_PATH is injected by the build
namespace {

namespace fs = std::filesystem;

const std::string kCli = NPE_CLI_PATH;

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "npe_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run(const std::string& args, bool keep_stdout = false) {
    const std::string cmd =
        kCli + " " + args + (keep_stdout ? " 2>/dev/null" : " >/dev/null 2>&1");
    const int rc = std::system(cmd.c_str());
    if (rc == -1) return -1;
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -2;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(static_cast<bool>(in));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

// small shared problem so each spawned run finishes in milliseconds
std::string tiny_args() {
    return "--set classes=3 --set n_max=30 --set rho=10 --set dim=4 --set sep=3 "
           "--set noise=0.5 --set test_per_class=10 --set hidden=8 --set feature_dim=6 "
           "--set n_pem=2 --set epochs=4 --set milestones= --set batch_size=16";
}

}  // namespace

TEST_CASE("cli help and usage errors") {
    CHECK(run("--help") == 0);
    CHECK(run("") == 1);              // a subcommand is required
    CHECK(run("frobnicate") == 1);    // unknown subcommand
    CHECK(run("sweep --values 1") == 1);  // --axis is required
    CHECK(run("train --preset hp9") == 1);
    CHECK(run("train --set bogus_key=1") == 1);
    CHECK(run("train --set epochs=-3") == 1);  // fails config validation
}

TEST_CASE("cli gen-data writes loadable splits") {
    const fs::path train_path = work_dir() / "train.csv";
    const fs::path test_path = work_dir() / "test.csv";
    CHECK(run("gen-data " + tiny_args() + " --out " + train_path.string() + " --test-out " +
              test_path.string()) == 0);

    const npe::LabeledDataset train = npe::load_dataset(train_path.string());
    const npe::LabeledDataset test = npe::load_dataset(test_path.string());
    CHECK(train.counts == npe::exp_profile({30, 3, 10.0}));
    CHECK(test.counts == std::vector<long long>(3, 10));
    CHECK(train.dim() == 4);

    CHECK(run("gen-data " + tiny_args()) == 1);  // --out is mandatory here
}

TEST_CASE("cli train, eval and reproducibility") {
    const fs::path model_path = work_dir() / "model.txt";
    const fs::path trace_path = work_dir() / "trace.csv";
    CHECK(run("train " + tiny_args() + " --seed 3 --out " + model_path.string() + " --trace " +
              trace_path.string()) == 0);

    const npe::NpeModel model = npe::load_model(model_path.string());
    CHECK(model.num_classes() == 3);
    CHECK(model.pems.size() == 2);

    const std::string trace = slurp(trace_path);
    CHECK(trace.rfind("epoch,lr,ce_loss,npe_loss\n", 0) == 0);
    CHECK(line_count(trace) == 1 + 4);

    // byte-identical artifacts on a second run with the same seed
    const fs::path model2 = work_dir() / "model2.txt";
    const fs::path trace2 = work_dir() / "trace2.csv";
    CHECK(run("train " + tiny_args() + " --seed 3 --out " + model2.string() + " --trace " +
              trace2.string()) == 0);
    CHECK(slurp(model2) == slurp(model_path));
    CHECK(slurp(trace2) == slurp(trace_path));

    // a different seed trains a different model
    const fs::path model3 = work_dir() / "model3.txt";
    CHECK(run("train " + tiny_args() + " --seed 4 --out " + model3.string()) == 0);
    CHECK(slurp(model3) != slurp(model_path));

    // evaluate the saved model without retraining
    const fs::path metrics_path = work_dir() / "metrics.csv";
    CHECK(run("eval " + tiny_args() + " --seed 3 --set method=la --model " +
              model_path.string() + " --out " + metrics_path.string()) == 0);
    const std::string metrics = slurp(metrics_path);
    CHECK(metrics.rfind("run_id,seed,method,n_pem,rho,alpha,", 0) == 0);
    CHECK(line_count(metrics) == 2);
    CHECK(metrics.find("la_s3,3,la,") != std::string::npos);

    CHECK(run("eval " + tiny_args() + " --model /nonexistent/model.txt") == 2);
}

TEST_CASE("cli config file and stdout emission") {
    const fs::path cfg_path = work_dir() / "run.cfg";
    {
        std::ofstream out(cfg_path);
        out << "# tiny run\n"
               "classes = 3\n"
               "n_max = 30\n"
               "rho = 10\n"
               "dim = 4\n"
               "sep = 3\n"
               "noise = 0.5\n"
               "test_per_class = 10\n"
               "hidden = 8\n"
               "feature_dim = 6\n"
               "epochs = 3\n"
               "milestones =\n"
               "batch_size = 16\n";
    }
    const fs::path trace_path = work_dir() / "cfg_trace.csv";
    CHECK(run("train --config " + cfg_path.string() + " --trace " + trace_path.string()) == 0);
    CHECK(line_count(slurp(trace_path)) == 1 + 3);  // epochs from the file

    // --set overrides the file
    const fs::path trace_path2 = work_dir() / "cfg_trace2.csv";
    CHECK(run("train --config " + cfg_path.string() + " --set epochs=2 --trace " +
              trace_path2.string()) == 0);
    CHECK(line_count(slurp(trace_path2)) == 1 + 2);

    // without --out the report goes to stdout
    const fs::path sweep_path = work_dir() / "sweep_stdout.csv";
    CHECK(run("sweep " + tiny_args() +
                  " --axis alpha --values 0.5,1 --repeats 1 > " + sweep_path.string(),
              true) == 0);
    const std::string sweep = slurp(sweep_path);
    CHECK(sweep.rfind("run_id,seed,", 0) == 0);
    // header + 2 values x (1 seed + mean + std)
    CHECK(line_count(sweep) == 1 + 2 * 3);
    CHECK(sweep.find("alpha0.5_s0,") != std::string::npos);
    CHECK(sweep.find("alpha1_mean,NA,") != std::string::npos);

    CHECK(run("train --config /nonexistent.cfg") == 1);
}

TEST_CASE("cli theory-check") {
    const fs::path out_path = work_dir() / "theory.csv";
    CHECK(run("theory-check --counts 500,5 --lambdas 1 --out " + out_path.string()) == 0);
    const std::string csv = slurp(out_path);
    CHECK(csv.rfind("n_c,lambda,eta_closed,eta_numeric,eta_asymptotic,log_prior,c0,eps_c\n",
                    0) == 0);
    CHECK(line_count(csv) == 1 + 2);

    CHECK(run("theory-check --counts 500,0.5") == 1);
    CHECK(run("theory-check --lambdas=-1") == 1);

    // fixed-feature training run whose PEMs the checker can validate
    const std::string etf_args =
        "--set data=etf --set classes=3 --set dim=2 --set n_max=30 --set rho=10 "
        "--set hidden= --set feature_dim=0 --set n_pem=1 --set epochs=5 "
        "--set milestones= --set batch_size=42 --set test_per_class=5";
    const fs::path model_path = work_dir() / "etf_model.txt";
    CHECK(run("train " + etf_args + " --out " + model_path.string()) == 0);

    const fs::path val_path = work_dir() / "theory_val.csv";
    CHECK(run("theory-check --counts 30,9,3 --lambdas 0.01 --model " + model_path.string() +
              " --lambda 0.01 --out " + val_path.string()) == 0);
    const std::string val = slurp(val_path);
    CHECK(val.find("# validation lambda=0.01 ") != std::string::npos);

    // --model without --lambda is an error
    CHECK(run("theory-check --counts 30,9,3 --model " + model_path.string()) == 1);
    // counts must match the model's classes
    CHECK(run("theory-check --counts 30,9 --model " + model_path.string() + " --lambda 0.01") ==
          1);
}

TEST_CASE("cli grad-check") {
    const fs::path out_path = work_dir() / "gradcheck.txt";
    CHECK(run("grad-check --instances 2 --out " + out_path.string()) == 0);
    const std::string text = slurp(out_path);
    CHECK(text.find("grad-check: max_rel=") != std::string::npos);
    CHECK(text.find("PASS") != std::string::npos);
    CHECK(text.find("instance 1:") != std::string::npos);

    CHECK(run("grad-check --instances 1 --corrupt") == 2);
    CHECK(run("grad-check --instances 2 --set bogus=1") == 1);
}
