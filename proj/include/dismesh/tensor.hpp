#pragma once

#include <Eigen/Core>

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace dismesh {

class TensorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// All tensors are dense row-major 2-D matrices of doubles; vectors are 1xN.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TensorData {
    Mat value;
    Mat grad;  // allocated iff requires_grad
    bool requires_grad = false;
};

// Shared handle to a value and its (optional) gradient slot. Copies alias the
// same storage, which is what lets backward rules accumulate in place.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_matrix(Mat m, bool requires_grad = false);
    static Tensor zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad = false);
    static Tensor scalar(double v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(data_); }
    Eigen::Index rows() const { return data_->value.rows(); }
    Eigen::Index cols() const { return data_->value.cols(); }
    Eigen::Index size() const { return data_->value.size(); }

    const Mat& value() const { return data_->value; }
    Mat& mutable_value() { return data_->value; }
    const Mat& grad() const;
    bool requires_grad() const { return data_ && data_->requires_grad; }
    void set_requires_grad(bool v);
    void zero_grad();

    double scalar_value() const;

    const std::shared_ptr<TensorData>& ptr() const { return data_; }

private:
    std::shared_ptr<TensorData> data_;
};

// Records the backward rules of one forward pass. A tape is single-use:
// recording or replaying after backward() throws.
class Tape {
public:
    bool grad_enabled() const { return no_grad_depth_ == 0; }
    bool used() const { return used_; }
    void record(std::function<void()> rule);
    std::size_t size() const { return nodes_.size(); }

    // Seeds d(loss)/d(loss) = 1 and replays the tape in reverse. loss must be
    // a 1x1 tensor that requires grad.
    void backward(const Tensor& loss);

    // Temporarily disables recording; ops run value-only and their outputs do
    // not require grad.
    class NoGradGuard {
    public:
        explicit NoGradGuard(Tape& tape) : tape_(tape) { ++tape_.no_grad_depth_; }
        ~NoGradGuard() { --tape_.no_grad_depth_; }
        NoGradGuard(const NoGradGuard&) = delete;
        NoGradGuard& operator=(const NoGradGuard&) = delete;

    private:
        Tape& tape_;
    };

private:
    std::vector<std::function<void()>> nodes_;
    bool used_ = false;
    int no_grad_depth_ = 0;
};

// Forward ops. Every op validates shapes (mismatches name the offending
// shapes) and registers a backward rule when grads are enabled and any input
// requires them.
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
// Elementwise when shapes match; b may also be a 1xC row vector broadcast
// over a's rows (bias add).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
// axis 0 stacks rows, axis 1 stacks columns.
Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, int axis);
Tensor slice(Tape& tape, const Tensor& a, Eigen::Index row0, Eigen::Index nrows,
             Eigen::Index col0, Eigen::Index ncols);
Tensor leaky_relu(Tape& tape, const Tensor& a, double negative_slope);
// Rows gathered by index; index -1 yields a zero row that passes no gradient.
Tensor gather_rows(Tape& tape, const Tensor& a, const std::vector<int>& indices);
// Row-major reinterpretation; element count must be preserved.
Tensor reshape(Tape& tape, const Tensor& a, Eigen::Index rows, Eigen::Index cols);
Tensor reduce_mean(Tape& tape, const Tensor& a);
// Row-averaged L1: sum of absolute differences divided by the row count, so
// per-vertex losses are mesh-size independent. Subgradient at zero is zero.
Tensor l1_loss(Tape& tape, const Tensor& a, const Tensor& b);

}  // namespace dismesh
