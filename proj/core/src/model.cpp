#include "npe/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "npe/numerics.hpp"
#include "npe/sgd.hpp"

namespace npe {

std::size_t NpeModel::param_count() const {
    std::size_t n = 0;
    for (const Matrix& w : backbone.weights) n += w.size();
    for (const Matrix& b : backbone.biases) n += b.size();
    n += head.W.size() + head.b.size();
    for (const Matrix& w : pems.weights) n += w.size();
    for (const Matrix& b : pems.biases) n += b.size();
    return n;
}

namespace {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
    Matrix m(rows, cols);
    for (double& x : m.v) x = rng.normal(0.0, stddev);
    return m;
}

}  // namespace

NpeModel make_model(const std::vector<std::size_t>& dims, int num_classes, int n_pem, int t,
                    double init_std, Rng& rng) {
    require(!dims.empty(), "make_model: dims must at least give the input size");
    for (std::size_t d : dims) require(d >= 1, "make_model: zero layer width");
    require(num_classes >= 2, "make_model: need at least 2 classes");
    require(n_pem >= 0, "make_model: negative PEM count");
    require(t == 0 || t == 1, "make_model: t must be 0 or 1");
    require(init_std > 0.0, "make_model: init_std must be positive");

    NpeModel m;
    m.backbone.input_dim = dims[0];
    const std::size_t layers = dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t fan_in = dims[l];
        // He for layers feeding a ReLU, 1/sqrt(fan_in) for the linear output.
        const double stddev = (l + 1 < layers) ? std::sqrt(2.0 / static_cast<double>(fan_in))
                                               : 1.0 / std::sqrt(static_cast<double>(fan_in));
        m.backbone.weights.push_back(gaussian_matrix(dims[l + 1], dims[l], stddev, rng));
        m.backbone.biases.emplace_back(dims[l + 1], 1);
    }
    const std::size_t feat = m.backbone.feature_dim();
    const std::size_t c_count = static_cast<std::size_t>(num_classes);
    m.head.W = gaussian_matrix(c_count, feat, 1.0 / std::sqrt(static_cast<double>(feat)), rng);
    m.head.b = Matrix(c_count, 1);
    m.pems.t = t;
    m.pems.init_std = init_std;
    for (int k = 0; k < n_pem; ++k) {
        m.pems.weights.push_back(gaussian_matrix(c_count, feat, init_std, rng));
        m.pems.biases.push_back(gaussian_matrix(c_count, 1, init_std, rng));
    }
    return m;
}

void reinit_head(ClassifierHead& head, Rng& rng) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(head.W.cols));
    for (double& x : head.W.v) x = rng.normal(0.0, stddev);
    head.b.fill(0.0);
}

Matrix backbone_forward(const Backbone& bb, const Matrix& x, BackboneCache* cache) {
    require(x.cols == bb.input_dim, "backbone_forward: input dim mismatch");
    if (cache) {
        cache->acts.clear();
        cache->pre.clear();
        cache->acts.push_back(x);
    }
    Matrix a = x;
    for (std::size_t l = 0; l < bb.weights.size(); ++l) {
        Matrix z = matmul_nt(a, bb.weights[l]);
        const Matrix& bias = bb.biases[l];
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += bias.v[j];
        }
        if (cache) cache->pre.push_back(z);
        if (l + 1 < bb.weights.size()) {
            for (double& v : z.v) v = std::max(0.0, v);  // ReLU
        }
        if (cache) cache->acts.push_back(z);
        a = std::move(z);
    }
    return a;
}

void backbone_backward(const Backbone& bb, const BackboneCache& cache, const Matrix& dh,
                       std::vector<Matrix>& dW, std::vector<Matrix>& db, Matrix* dx) {
    const std::size_t layers = bb.weights.size();
    require(cache.acts.size() == layers + 1 && cache.pre.size() == layers,
            "backbone_backward: cache does not match backbone");
    dW.assign(layers, Matrix());
    db.assign(layers, Matrix());
    if (layers == 0) {
        if (dx) *dx = dh;
        return;
    }
    Matrix delta = dh;
    for (std::size_t l = layers; l-- > 0;) {
        dW[l] = matmul_tn(delta, cache.acts[l]);
        db[l] = column_sums(delta);
        if (l == 0 && !dx) break;
        Matrix prev = matmul(delta, bb.weights[l]);
        if (l > 0) {
            const Matrix& z = cache.pre[l - 1];
            for (std::size_t i = 0; i < prev.size(); ++i) {
                if (z.v[i] <= 0.0) prev.v[i] = 0.0;
            }
            delta = std::move(prev);
        } else {
            *dx = std::move(prev);
        }
    }
}

Matrix forward_features(const NpeModel& model, const Matrix& x) {
    return backbone_forward(model.backbone, x);
}

Matrix classifier_logits(const ClassifierHead& head, const Matrix& h) {
    require(h.cols == head.W.cols, "classifier_logits: feature dim mismatch");
    Matrix z = matmul_nt(h, head.W);
    for (std::size_t i = 0; i < z.rows; ++i) {
        double* zi = z.row(i);
        for (std::size_t j = 0; j < z.cols; ++j) zi[j] += head.b.v[j];
    }
    return z;
}

std::vector<Matrix> pem_outputs(const PemBank& pems, const Matrix& h) {
    std::vector<Matrix> out;
    out.reserve(pems.size());
    for (std::size_t k = 0; k < pems.size(); ++k) {
        require(h.cols == pems.weights[k].cols, "pem_outputs: feature dim mismatch");
        Matrix u = matmul_nt(h, pems.weights[k]);
        const Matrix& bias = pems.biases[k];
        for (std::size_t i = 0; i < u.rows; ++i) {
            double* ui = u.row(i);
            for (std::size_t j = 0; j < u.cols; ++j) ui[j] += bias.v[j];
        }
        out.push_back(std::move(u));
    }
    return out;
}

PemLoss one_way_logistic_loss(const PemBank& pems, const Matrix& h,
                              const std::vector<int>& labels) {
    require(h.rows == labels.size(), "one_way_logistic_loss: batch size mismatch");
    require(h.rows >= 1, "one_way_logistic_loss: empty batch");
    PemLoss r;
    r.dh = Matrix(h.rows, h.cols);
    if (pems.size() == 0) return r;

    const double s = pems.sign();
    const double inv_n = 1.0 / static_cast<double>(h.rows);
    const std::size_t c_count = pems.weights[0].rows;
    const std::vector<Matrix> us = pem_outputs(pems, h);
    for (std::size_t k = 0; k < pems.size(); ++k) {
        const Matrix& u = us[k];
        Matrix du(u.rows, u.cols);  // gradient only at the true-class coordinate
        for (std::size_t i = 0; i < u.rows; ++i) {
            const int y = labels[i];
            require(y >= 0 && static_cast<std::size_t>(y) < c_count,
                    "one_way_logistic_loss: label out of range");
            const double uy = u.at(i, static_cast<std::size_t>(y));
            r.loss += inv_n * softplus(-s * uy);
            du.at(i, static_cast<std::size_t>(y)) = -s * inv_n * sigmoid(-s * uy);
        }
        r.dW.push_back(matmul_tn(du, h));
        r.db.push_back(column_sums(du));
        add_inplace(r.dh, matmul(du, pems.weights[k]));
    }
    return r;
}

LossReport total_loss(const NpeModel& model, const Matrix& x, const std::vector<int>& labels,
                      ModelGrads* grads, Matrix* dx) {
    require(x.rows == labels.size() && x.rows >= 1, "total_loss: batch/label mismatch");
    BackboneCache cache;
    const Matrix h = backbone_forward(model.backbone, x, grads || dx ? &cache : nullptr);
    const Matrix z = classifier_logits(model.head, h);

    LossReport rep;
    const double inv_n = 1.0 / static_cast<double>(x.rows);
    Matrix dz(z.rows, z.cols);
    for (std::size_t i = 0; i < z.rows; ++i) {
        const int y = labels[i];
        require(y >= 0 && static_cast<std::size_t>(y) < z.cols, "total_loss: label out of range");
        rep.ce += inv_n * softmax_ce_row(z.row(i), z.cols, static_cast<std::size_t>(y),
                                         grads || dx ? dz.row(i) : nullptr);
    }

    PemLoss pem;
    if (grads || dx) {
        pem = one_way_logistic_loss(model.pems, h, labels);
    } else if (model.pems.size() > 0) {
        const double s = model.pems.sign();
        const std::vector<Matrix> us = pem_outputs(model.pems, h);
        for (const Matrix& u : us) {
            for (std::size_t i = 0; i < u.rows; ++i) {
                pem.loss +=
                    inv_n * softplus(-s * u.at(i, static_cast<std::size_t>(labels[i])));
            }
        }
    }
    rep.npe = pem.loss;
    rep.total = rep.ce + rep.npe;
    if (!grads && !dx) return rep;

    for (double& g : dz.v) g *= inv_n;
    Matrix dh = matmul(dz, model.head.W);  // N×C · C×d
    if (model.pems.size() > 0) add_inplace(dh, pem.dh);

    ModelGrads local;
    ModelGrads& g = grads ? *grads : local;
    g.head_w = matmul_tn(dz, h);
    g.head_b = column_sums(dz);
    g.pem_w = std::move(pem.dW);
    g.pem_b = std::move(pem.db);
    backbone_backward(model.backbone, cache, dh, g.backbone_w, g.backbone_b, dx);
    return rep;
}

Matrix npe_estimate(const PemBank& pems, const Matrix& h, bool* degenerate,
                    std::size_t classes_hint) {
    if (pems.size() == 0) {
        if (degenerate) *degenerate = true;
        return Matrix(h.rows, classes_hint);
    }
    if (degenerate) *degenerate = false;
    Matrix eta(h.rows, pems.weights[0].rows);
    for (const Matrix& u : pem_outputs(pems, h)) add_inplace(eta, u);
    const double scale = pems.sign() / static_cast<double>(pems.size());
    for (double& x : eta.v) x *= scale;
    return eta;
}

Matrix adjust_logits(const Matrix& z, const Matrix& eta, double alpha) {
    require(z.same_shape(eta), "adjust_logits: shape mismatch");
    require(alpha >= 0.0, "adjust_logits: alpha must be non-negative");
    Matrix out = z;
    axpy(out, -alpha, eta);
    return out;
}

ClassifierHead fold_linear(const ClassifierHead& head, const PemBank& pems, double alpha) {
    require(pems.size() > 0, "fold_linear: empty PEM bank");
    require(alpha >= 0.0, "fold_linear: alpha must be non-negative");
    ClassifierHead folded = head;
    const double scale = -alpha * pems.sign() / static_cast<double>(pems.size());
    for (std::size_t k = 0; k < pems.size(); ++k) {
        require(pems.weights[k].same_shape(head.W), "fold_linear: PEM/head shape mismatch");
        axpy(folded.W, scale, pems.weights[k]);
        axpy(folded.b, scale, pems.biases[k]);
    }
    return folded;
}

Matrix classical_la(const Matrix& z, const std::vector<long long>& counts) {
    require(counts.size() == z.cols, "classical_la: counts length != class count");
    long long total = 0;
    for (long long n : counts) {
        require(n >= 1, "classical_la: counts must be >= 1");
        total += n;
    }
    Matrix out = z;
    for (std::size_t c = 0; c < counts.size(); ++c) {
        const double log_p =
            std::log(static_cast<double>(counts[c]) / static_cast<double>(total));
        for (std::size_t i = 0; i < out.rows; ++i) out.at(i, c) -= log_p;
    }
    return out;
}

ClassifierHead crt_retrain(const NpeModel& model, const LabeledDataset& ds, int epochs, Rng& rng,
                           const CrtOptions& opt) {
    ds.validate();
    require(ds.num_classes == static_cast<int>(model.num_classes()),
            "crt_retrain: class count mismatch");
    require(epochs >= 0, "crt_retrain: negative epochs");
    require(opt.batch_size >= 1, "crt_retrain: batch_size must be >= 1");

    std::vector<std::vector<std::size_t>> by_class(ds.counts.size());
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    }

    // Backbone is frozen, so features can be computed once.
    const Matrix h_all = forward_features(model, ds.features);
    ClassifierHead head = model.head;
    reinit_head(head, rng);

    std::vector<Matrix*> params{&head.W, &head.b};
    SgdState sgd = make_sgd_state(opt.lr, opt.momentum, opt.weight_decay, const_views(params));
    const std::size_t n = ds.labels.size();
    const std::size_t steps = (n + opt.batch_size - 1) / opt.batch_size;
    const std::size_t c_count = by_class.size();

    Matrix hb(opt.batch_size, h_all.cols);
    std::vector<int> yb(opt.batch_size);
    for (int e = 0; e < epochs; ++e) {
        for (std::size_t s = 0; s < steps; ++s) {
            for (std::size_t i = 0; i < opt.batch_size; ++i) {
                const std::size_t c = rng.below(c_count);
                const std::size_t idx = by_class[c][rng.below(by_class[c].size())];
                const double* src = h_all.row(idx);
                double* dst = hb.row(i);
                for (std::size_t j = 0; j < hb.cols; ++j) dst[j] = src[j];
                yb[i] = static_cast<int>(c);
            }
            const Matrix z = classifier_logits(head, hb);
            Matrix dz(z.rows, z.cols);
            const double inv_b = 1.0 / static_cast<double>(z.rows);
            for (std::size_t i = 0; i < z.rows; ++i) {
                softmax_ce_row(z.row(i), z.cols, static_cast<std::size_t>(yb[i]), dz.row(i));
            }
            for (double& gv : dz.v) gv *= inv_b;
            const Matrix gw = matmul_tn(dz, hb);
            const Matrix gb = column_sums(dz);
            std::vector<const Matrix*> grads{&gw, &gb};
            sgd_step(params, grads, sgd);
        }
    }
    return head;
}

std::vector<Matrix*> main_params(NpeModel& m) {
    std::vector<Matrix*> ps;
    for (Matrix& w : m.backbone.weights) ps.push_back(&w);
    for (Matrix& b : m.backbone.biases) ps.push_back(&b);
    ps.push_back(&m.head.W);
    ps.push_back(&m.head.b);
    return ps;
}

std::vector<Matrix*> pem_params(NpeModel& m) {
    std::vector<Matrix*> ps;
    for (Matrix& w : m.pems.weights) ps.push_back(&w);
    for (Matrix& b : m.pems.biases) ps.push_back(&b);
    return ps;
}

std::vector<const Matrix*> main_grad_views(const ModelGrads& g) {
    std::vector<const Matrix*> gs;
    for (const Matrix& w : g.backbone_w) gs.push_back(&w);
    for (const Matrix& b : g.backbone_b) gs.push_back(&b);
    gs.push_back(&g.head_w);
    gs.push_back(&g.head_b);
    return gs;
}

std::vector<const Matrix*> pem_grad_views(const ModelGrads& g) {
    std::vector<const Matrix*> gs;
    for (const Matrix& w : g.pem_w) gs.push_back(&w);
    for (const Matrix& b : g.pem_b) gs.push_back(&b);
    return gs;
}

namespace {

void write_matrix(std::ofstream& out, const Matrix& m) {
    char buf[40];
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", m.v[i]);
        out << buf << ((i + 1) % 8 == 0 || i + 1 == m.size() ? '\n' : ' ');
    }
}

Matrix read_matrix(std::ifstream& in, std::size_t rows, std::size_t cols, const char* what) {
    Matrix m(rows, cols);
    for (double& x : m.v) {
        if (!(in >> x)) throw std::runtime_error(std::string("load_model: truncated ") + what);
    }
    return m;
}

}  // namespace

void save_model(const NpeModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_model: cannot open " + path);
    out << "# npe-model v1\n";
    out << "input_dim " << model.backbone.input_dim << "\n";
    out << "layers " << model.backbone.weights.size() << "\n";
    for (std::size_t l = 0; l < model.backbone.weights.size(); ++l) {
        const Matrix& w = model.backbone.weights[l];
        out << w.rows << " " << w.cols << "\n";
        write_matrix(out, w);
        write_matrix(out, model.backbone.biases[l]);
    }
    out << "head " << model.head.W.rows << " " << model.head.W.cols << "\n";
    write_matrix(out, model.head.W);
    write_matrix(out, model.head.b);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", model.pems.init_std);
    out << "pems " << model.pems.size() << " " << model.pems.t << " " << buf << "\n";
    for (std::size_t k = 0; k < model.pems.size(); ++k) {
        write_matrix(out, model.pems.weights[k]);
        write_matrix(out, model.pems.biases[k]);
    }
    if (!out) throw std::runtime_error("save_model: write failed for " + path);
}

NpeModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_model: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "# npe-model v1") {
        throw std::runtime_error("load_model: bad header in " + path);
    }
    NpeModel m;
    std::string tok;
    std::size_t layers = 0;
    if (!(in >> tok >> m.backbone.input_dim) || tok != "input_dim" || m.backbone.input_dim < 1 ||
        !(in >> tok >> layers) || tok != "layers") {
        throw std::runtime_error("load_model: bad backbone meta in " + path);
    }
    std::size_t prev = m.backbone.input_dim;
    for (std::size_t l = 0; l < layers; ++l) {
        std::size_t rows = 0, cols = 0;
        if (!(in >> rows >> cols) || cols != prev || rows < 1) {
            throw std::runtime_error("load_model: bad layer shape in " + path);
        }
        m.backbone.weights.push_back(read_matrix(in, rows, cols, "layer weights"));
        m.backbone.biases.push_back(read_matrix(in, rows, 1, "layer bias"));
        prev = rows;
    }
    std::size_t c_count = 0, feat = 0;
    if (!(in >> tok >> c_count >> feat) || tok != "head" || c_count < 2 || feat != prev) {
        throw std::runtime_error("load_model: bad head meta in " + path);
    }
    m.head.W = read_matrix(in, c_count, feat, "head weights");
    m.head.b = read_matrix(in, c_count, 1, "head bias");
    std::size_t n_pem = 0;
    if (!(in >> tok >> n_pem >> m.pems.t >> m.pems.init_std) || tok != "pems" ||
        (m.pems.t != 0 && m.pems.t != 1)) {
        throw std::runtime_error("load_model: bad PEM meta in " + path);
    }
    for (std::size_t k = 0; k < n_pem; ++k) {
        m.pems.weights.push_back(read_matrix(in, c_count, feat, "PEM weights"));
        m.pems.biases.push_back(read_matrix(in, c_count, 1, "PEM bias"));
    }
    return m;
}

}  // namespace npe
