#pragma once

#include "dismesh/tensor.hpp"

#include <cstdint>
#include <vector>

namespace dismesh {

struct AdamConfig {
    double lr_max = 1e-3;
    double lr_min = 1e-6;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t period = 1;  // cosine annealing period in steps
};

// lr(t) = lr_min + (lr_max - lr_min) * (1 + cos(pi * t / period)) / 2,
// clamped to lr_min for t > period.
double cosine_lr(std::int64_t t, const AdamConfig& config);

// Bias-corrected Adam over a fixed parameter list. NaN gradients abort the
// step: a silent clip would hide a training bug.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    void step(double lr);

    std::int64_t step_count() const { return t_; }
    const AdamConfig& config() const { return config_; }
    const std::vector<Tensor>& params() const { return params_; }

    // checkpoint plumbing
    const std::vector<Mat>& first_moments() const { return m_; }
    const std::vector<Mat>& second_moments() const { return v_; }
    void restore(std::int64_t t, std::vector<Mat> m, std::vector<Mat> v);

private:
    std::vector<Tensor> params_;
    AdamConfig config_;
    std::vector<Mat> m_, v_;
    std::int64_t t_ = 0;
};

}  // namespace dismesh
