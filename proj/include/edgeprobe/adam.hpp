#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace edgeprobe {

// Library defaults (Kingma & Ba).
struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Bias-corrected Adam over a flat parameter vector.
class Adam {
public:
    Adam(std::size_t n_params, AdamConfig config = {});

    void step(std::span<double> params, std::span<const double> gradients);

    std::uint64_t timestep() const noexcept { return t_; }
    const AdamConfig& config() const noexcept { return config_; }

private:
    AdamConfig config_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

}  // namespace edgeprobe
