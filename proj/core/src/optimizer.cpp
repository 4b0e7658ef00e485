#include "fairhead/optimizer.hpp"

#include <cmath>

#include "fairhead/error.hpp"

namespace fairhead {

void AdamW::step(std::span<const ParamRef> params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.size(), 0.0);
            v_.emplace_back(p.value.size(), 0.0);
        }
    }
    if (params.size() != m_.size()) throw Error("AdamW: parameter list changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double shrink = 1.0 - cfg_.learning_rate * cfg_.weight_decay;
    for (std::size_t p = 0; p < params.size(); ++p) {
        auto value = params[p].value;
        auto grad = params[p].grad;
        auto& m = m_[p];
        auto& v = v_[p];
        if (value.size() != m.size() || grad.size() != m.size()) throw Error("AdamW: tensor size changed between steps");
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (params[p].decay) value[i] *= shrink;
            m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
            v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            value[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
        }
    }
}

}  // namespace fairhead
