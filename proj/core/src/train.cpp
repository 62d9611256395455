#include "npe/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "npe/sgd.hpp"

namespace npe {

DataBundle make_datasets(const ExperimentConfig& cfg) {
    cfg.validate();
    DataBundle b;
    if (cfg.data == "file") {
        b.train = load_dataset(cfg.data_path);
        b.test = cfg.test_path.empty() ? b.train : load_dataset(cfg.test_path);
        require(b.train.dim() == b.test.dim() && b.train.num_classes == b.test.num_classes,
                "make_datasets: train/test splits disagree on shape");
        return b;
    }
    const std::vector<long long> counts = exp_profile({cfg.n_max, cfg.classes, cfg.rho});
    const std::vector<long long> balanced(static_cast<std::size_t>(cfg.classes),
                                          cfg.test_per_class);
    if (cfg.data == "gaussian") {
        Rng means_rng = Rng::stream(cfg.seed, streams::means);
        const Matrix means = make_class_means(cfg.classes, cfg.dim, cfg.sep, means_rng);
        Rng train_rng = Rng::stream(cfg.seed, streams::train_samples);
        Rng test_rng = Rng::stream(cfg.seed, streams::test_samples);
        b.train = sample_clusters(means, counts, cfg.noise, train_rng);
        b.test = sample_clusters(means, balanced, cfg.noise, test_rng);
    } else {  // etf
        b.train = simplex_etf_features(counts, cfg.dim);
        b.test = simplex_etf_features(balanced, cfg.dim);
    }
    return b;
}

TrainResult train_model(const ExperimentConfig& cfg, const LabeledDataset& train) {
    cfg.validate();
    train.validate();

    std::vector<std::size_t> dims;
    dims.push_back(train.dim());
    if (cfg.feature_dim > 0) {
        for (int h : cfg.hidden) dims.push_back(static_cast<std::size_t>(h));
        dims.push_back(static_cast<std::size_t>(cfg.feature_dim));
    }
    Rng init_rng = Rng::stream(cfg.seed, streams::init);
    TrainResult r;
    r.model = make_model(dims, train.num_classes, cfg.n_pem, cfg.t, cfg.init_std, init_rng);

    std::vector<Matrix*> main_ps = main_params(r.model);
    std::vector<Matrix*> pem_ps = pem_params(r.model);
    SgdState main_sgd =
        make_sgd_state(cfg.lr, cfg.momentum, cfg.weight_decay, const_views(main_ps));
    SgdState pem_sgd = make_sgd_state(cfg.lr, cfg.momentum, cfg.effective_pem_weight_decay(),
                                      const_views(pem_ps));

    Rng shuffle_rng = Rng::stream(cfg.seed, streams::shuffle);
    const std::size_t n = train.size();
    const std::size_t bs = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    ModelGrads grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (std::find(cfg.milestones.begin(), cfg.milestones.end(), epoch) !=
            cfg.milestones.end()) {
            main_sgd.lr *= cfg.lr_decay;
            pem_sgd.lr *= cfg.lr_decay;
        }
        shuffle_rng.shuffle(order);
        double ce_sum = 0.0, npe_sum = 0.0;
        std::size_t step = 0;
        for (std::size_t start = 0; start < n; start += bs, ++step) {
            const std::size_t b = std::min(bs, n - start);
            Matrix x(b, train.dim());
            std::vector<int> y(b);
            for (std::size_t i = 0; i < b; ++i) {
                const std::size_t src = order[start + i];
                const double* sp = train.features.row(src);
                double* dp = x.row(i);
                for (std::size_t j = 0; j < x.cols; ++j) dp[j] = sp[j];
                y[i] = train.labels[src];
            }
            const LossReport rep = total_loss(r.model, x, y, &grads);
            if (!std::isfinite(rep.total)) {
                throw std::runtime_error("train_model: non-finite loss at epoch " +
                                         std::to_string(epoch) + " step " +
                                         std::to_string(step));
            }
            sgd_step(main_ps, main_grad_views(grads), main_sgd);
            sgd_step(pem_ps, pem_grad_views(grads), pem_sgd);
            ce_sum += rep.ce * static_cast<double>(b);
            npe_sum += rep.npe * static_cast<double>(b);
        }
        r.trace.push_back({epoch, main_sgd.lr, ce_sum / static_cast<double>(n),
                           npe_sum / static_cast<double>(n)});
    }
    return r;
}

RunOutput run_training(const ExperimentConfig& cfg) {
    RunOutput out;
    out.data = make_datasets(cfg);
    out.trained = train_model(cfg, out.data.train);
    return out;
}

std::string trace_csv(const std::vector<EpochLoss>& trace) {
    std::string s = "epoch,lr,ce_loss,npe_loss\n";
    char buf[96];
    for (const EpochLoss& e : trace) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g\n", e.epoch, e.lr, e.ce, e.npe);
        s += buf;
    }
    return s;
}

}  // namespace npe
