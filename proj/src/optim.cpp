#include "dismesh/optim.hpp"

#include <cmath>

namespace dismesh {

double cosine_lr(std::int64_t t, const AdamConfig& config) {
    if (t < 0) throw TensorError("cosine_lr: negative step");
    if (t >= config.period) return config.lr_min;
    const double phase = M_PI * static_cast<double>(t) / static_cast<double>(config.period);
    return config.lr_min + 0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(phase));
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Tensor& p : params_) {
        if (!p.requires_grad()) throw TensorError("Adam: parameter without requires_grad");
        m_.push_back(Mat::Zero(p.rows(), p.cols()));
        v_.push_back(Mat::Zero(p.rows(), p.cols()));
    }
}

void Adam::step(double lr) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (!params_[i].grad().allFinite()) {
            throw TensorError("Adam: non-finite gradient in parameter " + std::to_string(i));
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        const Mat& g = params_[i].grad();
        m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
        v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g.cwiseProduct(g);
        const Mat m_hat = m_[i] / bc1;
        const Mat v_hat = v_[i] / bc2;
        const Mat denom = v_hat.cwiseSqrt() + Mat::Constant(m_hat.rows(), m_hat.cols(), config_.eps);
        params_[i].mutable_value() -= lr * m_hat.cwiseQuotient(denom);
    }
}

void Adam::restore(std::int64_t t, std::vector<Mat> m, std::vector<Mat> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
        throw TensorError("Adam::restore: moment count mismatch");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
        if (m[i].rows() != params_[i].rows() || m[i].cols() != params_[i].cols() ||
            v[i].rows() != params_[i].rows() || v[i].cols() != params_[i].cols()) {
            throw TensorError("Adam::restore: moment shape mismatch at parameter " +
                              std::to_string(i));
        }
    }
    t_ = t;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace dismesh
