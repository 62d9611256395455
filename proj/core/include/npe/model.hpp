#pragma once

#include <string>
#include <vector>

#include "npe/dataset.hpp"
#include "npe/matrix.hpp"
#include "npe/rng.hpp"

namespace npe {

// MLP feature extractor: ReLU on hidden layers, identity on the last layer.
// Zero layers means the identity map (features = inputs).
struct Backbone {
    std::size_t input_dim = 0;
    std::vector<Matrix> weights;  // layer l: out_l × in_l
    std::vector<Matrix> biases;   // layer l: out_l × 1

    std::size_t feature_dim() const { return weights.empty() ? input_dim : weights.back().rows; }
};

struct BackboneCache {
    std::vector<Matrix> acts;  // acts[0] = input, acts[l+1] = layer-l output post-activation
    std::vector<Matrix> pre;   // pre[l] = layer-l pre-activation
};

struct ClassifierHead {
    Matrix W;  // C × d
    Matrix b;  // C × 1
};

// Bank of prior-estimation maps, each a linear map from features to C
// coordinates. t picks the sign convention: estimates enter with (-1)^t.
struct PemBank {
    std::vector<Matrix> weights;  // each C × d
    std::vector<Matrix> biases;   // each C × 1
    int t = 1;
    double init_std = 0.001;

    std::size_t size() const { return weights.size(); }
    double sign() const { return t == 0 ? 1.0 : -1.0; }  // (-1)^t
};

struct NpeModel {
    Backbone backbone;
    ClassifierHead head;
    PemBank pems;

    std::size_t input_dim() const { return backbone.input_dim; }
    std::size_t feature_dim() const { return backbone.feature_dim(); }
    std::size_t num_classes() const { return head.W.rows; }
    std::size_t param_count() const;
};

// dims = {d_in, hidden..., d_feature}; dims of size 1 gives an identity
// backbone. Hidden layers use He init, the final linear layer and the head
// use 1/sqrt(fan_in); PEM weights AND biases are Normal(0, init_std), kept
// tiny so the one-way loss starts un-saturated.
NpeModel make_model(const std::vector<std::size_t>& dims, int num_classes, int n_pem, int t,
                    double init_std, Rng& rng);

void reinit_head(ClassifierHead& head, Rng& rng);

Matrix backbone_forward(const Backbone& bb, const Matrix& x, BackboneCache* cache = nullptr);
// dh is the loss gradient at the features; fills per-layer dW/db and
// optionally the gradient at the inputs.
void backbone_backward(const Backbone& bb, const BackboneCache& cache, const Matrix& dh,
                       std::vector<Matrix>& dW, std::vector<Matrix>& db, Matrix* dx = nullptr);

Matrix forward_features(const NpeModel& model, const Matrix& x);

// z = h·Wᵀ + b
Matrix classifier_logits(const ClassifierHead& head, const Matrix& h);

// u_k = h·A_kᵀ + c_k for every map in the bank
std::vector<Matrix> pem_outputs(const PemBank& pems, const Matrix& h);

struct PemLoss {
    double loss = 0.0;
    std::vector<Matrix> dW;
    std::vector<Matrix> db;
    Matrix dh;  // N × d
};

// (1/N)·Σ_k Σ_i −log σ((−1)ᵗ·u_k(x_i)[y_i]). Only the true-class coordinate
// of each map carries gradient; it flows into the PEM parameters and into h.
PemLoss one_way_logistic_loss(const PemBank& pems, const Matrix& h,
                              const std::vector<int>& labels);

struct ModelGrads {
    std::vector<Matrix> backbone_w, backbone_b;
    Matrix head_w, head_b;
    std::vector<Matrix> pem_w, pem_b;
};

struct LossReport {
    double total = 0.0;
    double ce = 0.0;
    double npe = 0.0;
};

// Joint objective, mean-reduced over the batch. One backward pass fills
// gradients for backbone, head and PEMs; dx additionally returns the
// gradient at the inputs (used by the gradient checker).
LossReport total_loss(const NpeModel& model, const Matrix& x, const std::vector<int>& labels,
                      ModelGrads* grads = nullptr, Matrix* dx = nullptr);

// η(x) = ((−1)ᵗ/N_PEM)·Σ_k u_k(x). An empty bank yields an all-zero N×C
// matrix (C from classes_hint, since the bank itself no longer knows it) and
// sets *degenerate so callers can tell "no estimator" from a genuine zero.
Matrix npe_estimate(const PemBank& pems, const Matrix& h, bool* degenerate = nullptr,
                    std::size_t classes_hint = 0);

// z̃ = z − alpha·η
Matrix adjust_logits(const Matrix& z, const Matrix& eta, double alpha);

// Collapse head and bank into one equivalent linear classifier:
// W′ = W − alpha·((−1)ᵗ/N_PEM)·Σ_k A_k, b′ likewise.
ClassifierHead fold_linear(const ClassifierHead& head, const PemBank& pems, double alpha);

// z̃ = z − log p with p_c = N_c / Σ_j N_j (post-hoc logit adjustment)
Matrix classical_la(const Matrix& z, const std::vector<long long>& counts);

struct CrtOptions {
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-3;
    std::size_t batch_size = 64;
};

// Freeze the backbone, reinitialize the head, retrain it with class-balanced
// sampling (class uniform, then uniform within class) under plain CE.
ClassifierHead crt_retrain(const NpeModel& model, const LabeledDataset& ds, int epochs, Rng& rng,
                           const CrtOptions& opt = {});

// Parameter/gradient views in a fixed traversal order, for the optimizer.
std::vector<Matrix*> main_params(NpeModel& m);  // backbone + head
std::vector<Matrix*> pem_params(NpeModel& m);
std::vector<const Matrix*> main_grad_views(const ModelGrads& g);
std::vector<const Matrix*> pem_grad_views(const ModelGrads& g);

inline std::vector<const Matrix*> const_views(const std::vector<Matrix*>& xs) {
    return std::vector<const Matrix*>(xs.begin(), xs.end());
}

void save_model(const NpeModel& model, const std::string& path);
NpeModel load_model(const std::string& path);

}  // namespace npe
