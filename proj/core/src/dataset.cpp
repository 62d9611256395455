#include "npe/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace npe {

void LabeledDataset::validate() const {
    require(num_classes >= 1, "dataset: num_classes must be >= 1");
    require(features.rows == labels.size(), "dataset: feature/label row mismatch");
    require(counts.size() == static_cast<std::size_t>(num_classes),
            "dataset: counts length != num_classes");
    for (int y : labels) {
        require(y >= 0 && y < num_classes, "dataset: label out of range");
    }
    const auto recount = count_labels(labels, num_classes);
    require(recount == counts, "dataset: counts do not match labels");
    for (long long n : counts) {
        require(n >= 1, "dataset: every class needs at least one sample");
    }
}

std::vector<long long> count_labels(const std::vector<int>& labels, int num_classes) {
    std::vector<long long> counts(static_cast<std::size_t>(num_classes), 0);
    for (int y : labels) {
        require(y >= 0 && y < num_classes, "count_labels: label out of range");
        ++counts[static_cast<std::size_t>(y)];
    }
    return counts;
}

double imbalance_ratio(const std::vector<long long>& counts) {
    require(!counts.empty(), "imbalance_ratio: empty counts");
    long long mn = counts[0], mx = counts[0];
    for (long long n : counts) {
        require(n >= 1, "imbalance_ratio: counts must be >= 1");
        mn = std::min(mn, n);
        mx = std::max(mx, n);
    }
    return static_cast<double>(mx) / static_cast<double>(mn);
}

std::vector<long long> exp_profile(const LongTailProfile& profile) {
    require(profile.num_classes >= 2, "exp_profile: need at least 2 classes");
    require(profile.rho >= 1.0, "exp_profile: rho must be >= 1");
    require(static_cast<double>(profile.n_max) >= profile.rho,
            "exp_profile: n_max must be >= rho so the smallest class is non-empty");
    const int c_count = profile.num_classes;
    std::vector<long long> counts(static_cast<std::size_t>(c_count));
    for (int c = 0; c < c_count; ++c) {
        const double exponent = -static_cast<double>(c) / static_cast<double>(c_count - 1);
        counts[static_cast<std::size_t>(c)] =
            std::llround(static_cast<double>(profile.n_max) * std::pow(profile.rho, exponent));
    }
    return counts;
}

Matrix make_class_means(int num_classes, int dim, double sep, Rng& rng) {
    require(num_classes >= 1, "make_class_means: need at least one class");
    require(dim >= 1, "make_class_means: dim must be >= 1");
    require(sep > 0.0, "make_class_means: sep must be positive");
    Matrix means(static_cast<std::size_t>(num_classes), static_cast<std::size_t>(dim));
    for (std::size_t c = 0; c < means.rows; ++c) {
        double* mc = means.row(c);
        double norm2 = 0.0;
        // Redraw until Gram-Schmidt leaves something with usable norm; with
        // gaussian draws a single pass all but surely succeeds.
        while (norm2 < 1e-12) {
            for (std::size_t j = 0; j < means.cols; ++j) mc[j] = rng.normal();
            const std::size_t ortho = std::min(c, means.cols - 1);
            for (std::size_t p = c - ortho; p < c; ++p) {
                const double* mp = means.row(p);
                double dot = 0.0;
                for (std::size_t j = 0; j < means.cols; ++j) dot += mc[j] * mp[j];
                // previous rows already have norm sep
                const double coef = dot / (sep * sep);
                for (std::size_t j = 0; j < means.cols; ++j) mc[j] -= coef * mp[j];
            }
            norm2 = 0.0;
            for (std::size_t j = 0; j < means.cols; ++j) norm2 += mc[j] * mc[j];
        }
        const double scale = sep / std::sqrt(norm2);
        for (std::size_t j = 0; j < means.cols; ++j) mc[j] *= scale;
    }
    return means;
}

LabeledDataset sample_clusters(const Matrix& means, const std::vector<long long>& counts,
                               double noise, Rng& rng) {
    require(counts.size() == means.rows, "sample_clusters: counts/means mismatch");
    require(noise > 0.0, "sample_clusters: noise must be positive");
    long long total = 0;
    for (long long n : counts) {
        require(n >= 1, "sample_clusters: counts must be >= 1");
        total += n;
    }
    LabeledDataset ds;
    ds.num_classes = static_cast<int>(means.rows);
    ds.counts = counts;
    ds.features = Matrix(static_cast<std::size_t>(total), means.cols);
    ds.labels.resize(static_cast<std::size_t>(total));
    std::size_t r = 0;
    for (std::size_t c = 0; c < means.rows; ++c) {
        const double* mc = means.row(c);
        for (long long i = 0; i < counts[c]; ++i, ++r) {
            double* x = ds.features.row(r);
            for (std::size_t j = 0; j < means.cols; ++j) x[j] = mc[j] + noise * rng.normal();
            ds.labels[r] = static_cast<int>(c);
        }
    }
    std::vector<std::size_t> perm(ds.labels.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    Matrix shuffled(ds.features.rows, ds.features.cols);
    std::vector<int> shuffled_labels(ds.labels.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        const double* src = ds.features.row(perm[i]);
        double* dst = shuffled.row(i);
        for (std::size_t j = 0; j < shuffled.cols; ++j) dst[j] = src[j];
        shuffled_labels[i] = ds.labels[perm[i]];
    }
    ds.features = std::move(shuffled);
    ds.labels = std::move(shuffled_labels);
    ds.validate();
    return ds;
}

LabeledDataset gaussian_clusters(const std::vector<long long>& counts, int dim, double sep,
                                 double noise, Rng& rng) {
    const Matrix means = make_class_means(static_cast<int>(counts.size()), dim, sep, rng);
    return sample_clusters(means, counts, noise, rng);
}

Matrix simplex_etf_vertices(int num_classes, int dim) {
    require(num_classes >= 2, "simplex_etf_vertices: need at least 2 classes");
    require(dim >= num_classes - 1, "simplex_etf_vertices: dim must be >= C-1");
    const std::size_t c_count = static_cast<std::size_t>(num_classes);
    Matrix verts(c_count, static_cast<std::size_t>(dim));
    // Helmert rows h_k, k = 1..C-1, are an orthonormal basis of the
    // complement of the all-ones vector; the columns scaled by
    // sqrt(C/(C-1)) are the ETF vertices.
    const double scale = std::sqrt(static_cast<double>(num_classes) /
                                   static_cast<double>(num_classes - 1));
    for (std::size_t k = 1; k < c_count; ++k) {
        const double inv = 1.0 / std::sqrt(static_cast<double>(k) * static_cast<double>(k + 1));
        for (std::size_t c = 0; c < k; ++c) verts.at(c, k - 1) = scale * inv;
        verts.at(k, k - 1) = -scale * inv * static_cast<double>(k);
    }
    return verts;
}

LabeledDataset simplex_etf_features(const std::vector<long long>& counts, int dim) {
    const Matrix verts = simplex_etf_vertices(static_cast<int>(counts.size()), dim);
    long long total = 0;
    for (long long n : counts) {
        require(n >= 1, "simplex_etf_features: counts must be >= 1");
        total += n;
    }
    LabeledDataset ds;
    ds.num_classes = static_cast<int>(counts.size());
    ds.counts = counts;
    ds.features = Matrix(static_cast<std::size_t>(total), static_cast<std::size_t>(dim));
    ds.labels.resize(static_cast<std::size_t>(total));
    std::size_t r = 0;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double* vc = verts.row(c);
        for (long long i = 0; i < counts[c]; ++i, ++r) {
            double* x = ds.features.row(r);
            for (std::size_t j = 0; j < ds.features.cols; ++j) x[j] = vc[j];
            ds.labels[r] = static_cast<int>(c);
        }
    }
    ds.validate();
    return ds;
}

ClassGroups group_classes(const std::vector<long long>& counts, GroupThresholds t) {
    require(t.lo <= t.hi, "group_classes: lo threshold above hi");
    ClassGroups g;
    g.thresholds = t;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const int ci = static_cast<int>(c);
        if (counts[c] > t.hi) {
            g.head.push_back(ci);
        } else if (counts[c] < t.lo) {
            g.tail.push_back(ci);
        } else {
            g.medium.push_back(ci);
        }
    }
    return g;
}

void save_dataset(const LabeledDataset& ds, const std::string& path) {
    ds.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
    out << "# npe-dataset v1 classes=" << ds.num_classes << " dim=" << ds.features.cols << "\n";
    char buf[40];
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        out << ds.labels[i];
        const double* x = ds.features.row(i);
        for (std::size_t j = 0; j < ds.features.cols; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", x[j]);
            out << ',' << buf;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

namespace {

long long parse_ll(const std::string& s, std::size_t& pos, const char* what) {
    char* end = nullptr;
    const long long x = std::strtoll(s.c_str() + pos, &end, 10);
    if (end == s.c_str() + pos) throw std::runtime_error(std::string("load_dataset: bad ") + what);
    pos = static_cast<std::size_t>(end - s.c_str());
    return x;
}

}  // namespace

LabeledDataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("load_dataset: empty file " + path);
    const std::string tag = "# npe-dataset v1 classes=";
    if (line.rfind(tag, 0) != 0) {
        throw std::runtime_error("load_dataset: bad header in " + path);
    }
    std::size_t pos = tag.size();
    const long long classes = parse_ll(line, pos, "class count");
    const std::string dim_tag = " dim=";
    if (line.compare(pos, dim_tag.size(), dim_tag) != 0) {
        throw std::runtime_error("load_dataset: bad header in " + path);
    }
    pos += dim_tag.size();
    const long long dim = parse_ll(line, pos, "dim");
    if (classes < 1 || dim < 1) throw std::runtime_error("load_dataset: bad header in " + path);

    std::vector<int> labels;
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) throw std::runtime_error("load_dataset: empty row in " + path);
        pos = 0;
        const long long y = parse_ll(line, pos, "label");
        if (y < 0 || y >= classes) {
            throw std::runtime_error("load_dataset: label out of range in " + path);
        }
        labels.push_back(static_cast<int>(y));
        for (long long j = 0; j < dim; ++j) {
            if (pos >= line.size() || line[pos] != ',') {
                throw std::runtime_error("load_dataset: short row in " + path);
            }
            ++pos;
            char* end = nullptr;
            const double x = std::strtod(line.c_str() + pos, &end);
            if (end == line.c_str() + pos) {
                throw std::runtime_error("load_dataset: bad value in " + path);
            }
            pos = static_cast<std::size_t>(end - line.c_str());
            values.push_back(x);
        }
        if (pos != line.size()) throw std::runtime_error("load_dataset: long row in " + path);
    }
    if (labels.empty()) throw std::runtime_error("load_dataset: no rows in " + path);

    LabeledDataset ds;
    ds.num_classes = static_cast<int>(classes);
    ds.labels = std::move(labels);
    ds.features = Matrix(ds.labels.size(), static_cast<std::size_t>(dim));
    ds.features.v = std::move(values);
    ds.counts = count_labels(ds.labels, ds.num_classes);
    ds.validate();
    return ds;
}

}  // namespace npe
