#include "npe/sgd.hpp"

namespace npe {

SgdState make_sgd_state(double lr, double momentum, double weight_decay,
                        const std::vector<const Matrix*>& params) {
    SgdState s;
    s.lr = lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    s.velocity.reserve(params.size());
    for (const Matrix* p : params) {
        require(p != nullptr, "make_sgd_state: null parameter");
        s.velocity.emplace_back(p->rows, p->cols);
    }
    return s;
}

void sgd_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
              SgdState& state) {
    require(params.size() == grads.size(), "sgd_step: params/grads size mismatch");
    require(params.size() == state.velocity.size(), "sgd_step: state built for another model");
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& p = *params[k];
        const Matrix& g = *grads[k];
        Matrix& v = state.velocity[k];
        require(p.same_shape(g) && p.same_shape(v), "sgd_step: shape mismatch");
        for (std::size_t i = 0; i < p.v.size(); ++i) {
            v.v[i] = state.momentum * v.v[i] + g.v[i] + state.weight_decay * p.v[i];
            p.v[i] -= state.lr * v.v[i];
        }
    }
}

}  // namespace npe
