#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace npe {

// Everything a run needs, resolvable from defaults + preset + config file +
// command-line overrides, in that order. Defaults are the desk-scale profile.
struct ExperimentConfig {
    // data
    std::string data = "gaussian";  // gaussian | etf | file
    std::string data_path;
    std::string test_path;
    long long n_max = 500;
    int classes = 10;
    double rho = 100.0;
    int dim = 32;
    double sep = 2.5;
    double noise = 1.0;
    long long test_per_class = 500;

    // model
    std::vector<int> hidden = {64, 64};
    int feature_dim = 16;  // 0 = identity backbone (no layers; requires empty hidden)
    int n_pem = 1;
    int t = 1;
    double init_std = 0.001;
    double alpha = 1.0;

    // optimizer
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    double pem_weight_decay = -1.0;  // -1 = follow weight_decay
    long long batch_size = 64;
    int epochs = 60;
    std::vector<int> milestones = {45, 55};
    double lr_decay = 0.1;

    // evaluation / method
    std::string method = "npe-la";  // ce | la | crt | npe-la
    int crt_epochs = 20;
    long long group_hi = 100;
    long long group_lo = 20;
    bool use_folding = false;

    std::uint64_t seed = 0;

    double effective_pem_weight_decay() const {
        return pem_weight_decay < 0.0 ? weight_decay : pem_weight_decay;
    }

    // Throws std::invalid_argument on any broken invariant (bad ranges,
    // milestones not strictly increasing or >= epochs, missing data path...).
    void validate() const;
};

// hp1/hp2 carry the full-scale training recipes (lr, weight decay, batch,
// epochs, milestones, decay); desk is the scaled-down default profile.
void apply_preset(ExperimentConfig& cfg, const std::string& name);

// `key = value` lines, '#' comments, unknown keys are errors.
void parse_config_text(ExperimentConfig& cfg, const std::string& text);
void parse_config_file(ExperimentConfig& cfg, const std::string& path);

// One "key=value" assignment, same key set as the config file.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

// Canonical round-trippable rendering; parse_config_text(serialize(c))
// reproduces c exactly.
std::string serialize(const ExperimentConfig& cfg);

// FNV-1a over the canonical rendering, as 16 hex digits. Stable run identity.
std::string config_digest(const ExperimentConfig& cfg);

}  // namespace npe
