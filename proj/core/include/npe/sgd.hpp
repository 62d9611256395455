#pragma once

#include <vector>

#include "npe/matrix.hpp"

namespace npe {

// SGD with classical (coupled) weight decay:
//   v <- momentum * v + grad + weight_decay * param
//   param <- param - lr * v
struct SgdState {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::vector<Matrix> velocity;
};

// Velocity buffers start at zero, one per parameter tensor.
SgdState make_sgd_state(double lr, double momentum, double weight_decay,
                        const std::vector<const Matrix*>& params);

void sgd_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
              SgdState& state);

}  // namespace npe
