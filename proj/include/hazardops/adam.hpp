#pragma once

#include "hazardops/tensor.hpp"

#include <vector>

namespace hazardops::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected adaptive-moment descent. Moment buffers persist per
// registered parameter; step() consumes the gradients currently stored on
// the parameters and updates values in place.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    // Applies one update (t advances). Throws StateError if any registered
    // parameter has no gradient buffer.
    void step();

    void zero_grad();

    void set_lr(double lr) { config_.lr = lr; }
    double lr() const { return config_.lr; }
    std::size_t step_count() const { return t_; }

    const std::vector<Tensor>& params() const { return params_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::size_t t_ = 0;
};

} // namespace hazardops::ad
