#pragma once

#include <string>
#include <vector>

#include "npe/matrix.hpp"
#include "npe/rng.hpp"

namespace npe {

struct LabeledDataset {
    Matrix features;  // N × d
    std::vector<int> labels;
    int num_classes = 0;
    std::vector<long long> counts;  // per-class N_c, length num_classes

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols; }

    // Throws std::invalid_argument unless: shapes agree, labels are in
    // [0, num_classes), counts match the labels, and every class occurs.
    void validate() const;
};

std::vector<long long> count_labels(const std::vector<int>& labels, int num_classes);

struct LongTailProfile {
    long long n_max = 0;
    int num_classes = 0;
    double rho = 1.0;  // imbalance ratio, >= 1
};

struct GroupThresholds {
    long long hi = 100;  // head: N_c > hi
    long long lo = 20;   // tail: N_c < lo
};

struct ClassGroups {
    std::vector<int> head;
    std::vector<int> medium;
    std::vector<int> tail;
    GroupThresholds thresholds;
};

// max_c N_c / min_c N_c
double imbalance_ratio(const std::vector<long long>& counts);

// Exponentially decaying counts N_c = round(n_max * rho^(-c/(C-1))), the
// standard long-tail construction. Endpoints are exactly n_max and
// round(n_max/rho).
std::vector<long long> exp_profile(const LongTailProfile& profile);

// sep * (orthonormal directions), one row per class. Directions come from
// Gram-Schmidt on gaussian draws; once the draws exceed the ambient dimension
// the fallback is a plain random unit vector.
Matrix make_class_means(int num_classes, int dim, double sep, Rng& rng);

// mean[label] + noise * standard normal per coordinate; row order shuffled.
LabeledDataset sample_clusters(const Matrix& means, const std::vector<long long>& counts,
                               double noise, Rng& rng);

LabeledDataset gaussian_clusters(const std::vector<long long>& counts, int dim, double sep,
                                 double noise, Rng& rng);

// C unit vectors with all pairwise inner products -1/(C-1): a simplex
// equiangular tight frame, one row per class, living in the first C-1 of
// dim coordinates. Deliberately rotation-free so repeated runs agree exactly.
Matrix simplex_etf_vertices(int num_classes, int dim);

// Every sample of class c is exactly the c-th ETF vertex: the zero
// within-class-variance regime where all inputs of a class collapse to one
// shared feature.
LabeledDataset simplex_etf_features(const std::vector<long long>& counts, int dim);

ClassGroups group_classes(const std::vector<long long>& counts, GroupThresholds t = {});

void save_dataset(const LabeledDataset& ds, const std::string& path);
LabeledDataset load_dataset(const std::string& path);

}  // namespace npe
