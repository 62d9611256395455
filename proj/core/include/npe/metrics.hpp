#pragma once

#include <optional>
#include <string>
#include <vector>

#include "npe/dataset.hpp"
#include "npe/model.hpp"

namespace npe {

struct MetricsReport {
    double top1 = 0.0;
    double balanced_acc = 0.0;
    std::optional<double> head_acc;  // absent when the group has no classes
    std::optional<double> medium_acc;
    std::optional<double> tail_acc;
    std::vector<double> per_class_acc;
    std::uint64_t seed = 0;
    std::string config_digest;
};

struct EvalMode {
    enum class Kind { Ce, La, CrtHead, NpeLa };
    Kind kind = Kind::Ce;
    double alpha = 1.0;                      // NpeLa
    bool fold = false;                       // NpeLa: use the folded classifier
    const ClassifierHead* crt_head = nullptr;  // CrtHead

    static EvalMode ce() { return {}; }
    static EvalMode la() { return {Kind::La, 1.0, false, nullptr}; }
    static EvalMode crt(const ClassifierHead& head) { return {Kind::CrtHead, 1.0, false, &head}; }
    static EvalMode npe_la(double alpha, bool fold = false) {
        return {Kind::NpeLa, alpha, fold, nullptr};
    }
};

// argmax with lowest-index tie-break
std::size_t argmax_row(const double* z, std::size_t n);

// Predicts per mode (plain logits / classical LA / retrained head / NPE-LA),
// then scores top-1, per-class, balanced (mean over classes present in the
// eval set), and head/medium/tail accuracies. Groups come from the TRAINING
// counts; group accuracy is correct/total inside the group.
MetricsReport evaluate(const NpeModel& model, const LabeledDataset& eval_ds, const EvalMode& mode,
                       const std::vector<long long>& train_counts, GroupThresholds thresholds);

std::string metrics_csv_header(int num_classes);

// One CSV row. seed_field is printed verbatim so aggregate rows can say NA.
std::string metrics_csv_row(const std::string& run_id, const std::string& seed_field,
                            const std::string& method, int n_pem, double rho, double alpha,
                            const MetricsReport& rep);

}  // namespace npe
