#include "npe/metrics.hpp"

#include <cstdio>

namespace npe {

std::size_t argmax_row(const double* z, std::size_t n) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
        if (z[j] > z[best]) best = j;
    }
    return best;
}

namespace {

std::optional<double> group_accuracy(const std::vector<int>& members,
                                     const std::vector<long long>& correct,
                                     const std::vector<long long>& total) {
    long long c = 0, t = 0;
    for (int cls : members) {
        c += correct[static_cast<std::size_t>(cls)];
        t += total[static_cast<std::size_t>(cls)];
    }
    if (t == 0) return std::nullopt;
    return static_cast<double>(c) / static_cast<double>(t);
}

}  // namespace

MetricsReport evaluate(const NpeModel& model, const LabeledDataset& eval_ds, const EvalMode& mode,
                       const std::vector<long long>& train_counts, GroupThresholds thresholds) {
    eval_ds.validate();
    require(eval_ds.num_classes == static_cast<int>(model.num_classes()),
            "evaluate: class count mismatch");
    require(train_counts.size() == model.num_classes(),
            "evaluate: train counts length mismatch");

    const Matrix h = forward_features(model, eval_ds.features);
    Matrix z;
    switch (mode.kind) {
        case EvalMode::Kind::Ce:
            z = classifier_logits(model.head, h);
            break;
        case EvalMode::Kind::La:
            z = classical_la(classifier_logits(model.head, h), train_counts);
            break;
        case EvalMode::Kind::CrtHead:
            require(mode.crt_head != nullptr, "evaluate: crt mode without a retrained head");
            z = classifier_logits(*mode.crt_head, h);
            break;
        case EvalMode::Kind::NpeLa:
            if (mode.fold && model.pems.size() > 0) {
                z = classifier_logits(fold_linear(model.head, model.pems, mode.alpha), h);
            } else {
                const Matrix eta =
                    npe_estimate(model.pems, h, nullptr, model.num_classes());
                z = adjust_logits(classifier_logits(model.head, h), eta, mode.alpha);
            }
            break;
    }

    const std::size_t c_count = model.num_classes();
    std::vector<long long> correct(c_count, 0), total(c_count, 0);
    long long hits = 0;
    for (std::size_t i = 0; i < z.rows; ++i) {
        const std::size_t pred = argmax_row(z.row(i), z.cols);
        const std::size_t y = static_cast<std::size_t>(eval_ds.labels[i]);
        ++total[y];
        if (pred == y) {
            ++correct[y];
            ++hits;
        }
    }

    MetricsReport rep;
    rep.top1 = static_cast<double>(hits) / static_cast<double>(z.rows);
    rep.per_class_acc.assign(c_count, 0.0);
    double bal = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < c_count; ++c) {
        if (total[c] > 0) {
            rep.per_class_acc[c] =
                static_cast<double>(correct[c]) / static_cast<double>(total[c]);
            bal += rep.per_class_acc[c];
            ++present;
        }
    }
    rep.balanced_acc = bal / static_cast<double>(present);

    const ClassGroups groups = group_classes(train_counts, thresholds);
    rep.head_acc = group_accuracy(groups.head, correct, total);
    rep.medium_acc = group_accuracy(groups.medium, correct, total);
    rep.tail_acc = group_accuracy(groups.tail, correct, total);
    return rep;
}

std::string metrics_csv_header(int num_classes) {
    std::string s = "run_id,seed,method,n_pem,rho,alpha,top1,balanced_acc,head_acc,medium_acc,tail_acc";
    for (int c = 0; c < num_classes; ++c) {
        s += ",class_" + std::to_string(c) + "_acc";
    }
    s += "\n";
    return s;
}

namespace {

std::string fmt6(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", x);
    return buf;
}

std::string fmt6_opt(const std::optional<double>& x) { return x ? fmt6(*x) : "NA"; }

}  // namespace

std::string metrics_csv_row(const std::string& run_id, const std::string& seed_field,
                            const std::string& method, int n_pem, double rho, double alpha,
                            const MetricsReport& rep) {
    std::string s = run_id + "," + seed_field + "," + method + "," + std::to_string(n_pem) +
                    "," + fmt6(rho) + "," + fmt6(alpha) + "," + fmt6(rep.top1) + "," +
                    fmt6(rep.balanced_acc) + "," + fmt6_opt(rep.head_acc) + "," +
                    fmt6_opt(rep.medium_acc) + "," + fmt6_opt(rep.tail_acc);
    for (double a : rep.per_class_acc) s += "," + fmt6(a);
    s += "\n";
    return s;
}

}  // namespace npe
