#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fairhead {

struct AdamConfig {
    double learning_rate = 1e-3;
    double weight_decay = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One parameter tensor and its gradient. Decay is off for biases.
struct ParamRef {
    std::span<double> value;
    std::span<const double> grad;
    bool decay = true;
};

// Adam with decoupled weight decay:
//   theta <- theta * (1 - lr * wd)                      (decay tensors only)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// Moment buffers are bound to tensor position, so step() must always be given
// the same tensors in the same order.
class AdamW {
public:
    explicit AdamW(AdamConfig cfg) : cfg_(cfg) {}

    void step(std::span<const ParamRef> params);
    std::size_t steps_taken() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return cfg_; }

private:
    AdamConfig cfg_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

}  // namespace fairhead
