#include "edgeprobe/adam.hpp"

#include <cmath>
#include <string>

#include "edgeprobe/error.hpp"

namespace edgeprobe {

Adam::Adam(std::size_t n_params, AdamConfig config)
    : config_(config)
    , m_(n_params, 0.0)
    , v_(n_params, 0.0) {}

void Adam::step(std::span<double> params, std::span<const double> gradients) {
    if (params.size() != m_.size() || gradients.size() != m_.size()) {
        throw ShapeError("Adam state has " + std::to_string(m_.size()) + " slots, got " + std::to_string(params.size()) +
                         " params and " + std::to_string(gradients.size()) + " gradients");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = gradients[i];
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
        const double m_hat = m_[i] / c1;
        const double v_hat = v_[i] / c2;
        params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
}

}  // namespace edgeprobe
