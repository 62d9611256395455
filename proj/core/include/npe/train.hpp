#pragma once

#include <string>
#include <vector>

#include "npe/config.hpp"
#include "npe/dataset.hpp"
#include "npe/model.hpp"

namespace npe {

// Fixed sub-stream ids (Rng::stream) per random consumer; frozen so that
// e.g. changing the model never shifts the data.
namespace streams {
constexpr std::uint64_t means = 1;
constexpr std::uint64_t train_samples = 2;
constexpr std::uint64_t test_samples = 3;
constexpr std::uint64_t init = 4;
constexpr std::uint64_t shuffle = 5;
constexpr std::uint64_t crt = 6;
}  // namespace streams

struct DataBundle {
    LabeledDataset train;
    LabeledDataset test;
};

// Long-tailed train split plus a balanced test split from the same class
// means. Sub-streams keep the splits decoupled: changing the seed of one
// consumer (say, init) can never shift the data of another.
DataBundle make_datasets(const ExperimentConfig& cfg);

struct EpochLoss {
    int epoch = 0;
    double lr = 0.0;
    double ce = 0.0;
    double npe = 0.0;
};

struct TrainResult {
    NpeModel model;
    std::vector<EpochLoss> trace;  // per-epoch sample-mean losses
};

// Minibatch SGD on the joint objective. Backbone+head and PEM parameters sit
// in two optimizer groups so the PEM weight decay (the λ of the collapsed
// objective) can differ from the main one. Deterministic for a fixed config.
// Throws std::runtime_error with epoch/step on a non-finite loss.
TrainResult train_model(const ExperimentConfig& cfg, const LabeledDataset& train);

struct RunOutput {
    DataBundle data;
    TrainResult trained;
};

RunOutput run_training(const ExperimentConfig& cfg);

// `epoch,lr,ce_loss,npe_loss` rows
std::string trace_csv(const std::vector<EpochLoss>& trace);

}  // namespace npe
