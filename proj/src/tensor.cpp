#include "dismesh/tensor.hpp"

#include <cmath>

namespace dismesh {

namespace {

std::string shape_str(const Tensor& t) {
    return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

[[noreturn]] void shape_error(const std::string& op, const Tensor& a, const Tensor& b) {
    throw TensorError(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b));
}

}  // namespace

Tensor Tensor::from_matrix(Mat m, bool requires_grad) {
    Tensor t;
    t.data_ = std::make_shared<TensorData>();
    t.data_->value = std::move(m);
    t.set_requires_grad(requires_grad);
    return t;
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, bool requires_grad) {
    return from_matrix(Mat::Zero(rows, cols), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
    Mat m(1, 1);
    m(0, 0) = v;
    return from_matrix(std::move(m), requires_grad);
}

const Mat& Tensor::grad() const {
    if (!requires_grad()) throw TensorError("grad requested on a tensor without requires_grad");
    return data_->grad;
}

void Tensor::set_requires_grad(bool v) {
    data_->requires_grad = v;
    if (v) {
        data_->grad = Mat::Zero(data_->value.rows(), data_->value.cols());
    } else {
        data_->grad.resize(0, 0);
    }
}

void Tensor::zero_grad() {
    if (requires_grad()) data_->grad.setZero();
}

double Tensor::scalar_value() const {
    if (rows() != 1 || cols() != 1) {
        throw TensorError("scalar_value on non-scalar tensor " + shape_str(*this));
    }
    return data_->value(0, 0);
}

void Tape::record(std::function<void()> rule) {
    if (used_) throw TensorError("tape reused after backward");
    nodes_.push_back(std::move(rule));
}

void Tape::backward(const Tensor& loss) {
    if (used_) throw TensorError("tape reused after backward");
    if (loss.rows() != 1 || loss.cols() != 1) {
        throw TensorError("backward requires a scalar loss, got (" + std::to_string(loss.rows()) +
                          "x" + std::to_string(loss.cols()) + ")");
    }
    if (!loss.requires_grad()) {
        throw TensorError("backward on a loss that is not connected to any parameter");
    }
    used_ = true;
    loss.ptr()->grad(0, 0) += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
    nodes_.clear();
}

namespace {

// Shared prologue: decides whether the result participates in autodiff.
bool track(Tape& tape, std::initializer_list<const Tensor*> inputs) {
    if (tape.used()) throw TensorError("tape reused after backward");
    if (!tape.grad_enabled()) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) shape_error("matmul", a, b);
    Tensor y = Tensor::from_matrix(a.value() * b.value(), track(tape, {&a, &b}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), bd = b.ptr(), yd = y.ptr()] {
            if (ad->requires_grad) ad->grad += yd->grad * bd->value.transpose();
            if (bd->requires_grad) bd->grad += ad->value.transpose() * yd->grad;
        });
    }
    return y;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    const bool broadcast = b.rows() == 1 && a.cols() == b.cols() && a.rows() != 1;
    if (!broadcast && (a.rows() != b.rows() || a.cols() != b.cols())) shape_error("add", a, b);
    Mat out = a.value();
    if (broadcast) {
        out.rowwise() += b.value().row(0);
    } else {
        out += b.value();
    }
    Tensor y = Tensor::from_matrix(std::move(out), track(tape, {&a, &b}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), bd = b.ptr(), yd = y.ptr(), broadcast] {
            if (ad->requires_grad) ad->grad += yd->grad;
            if (bd->requires_grad) {
                if (broadcast) {
                    bd->grad.row(0) += yd->grad.colwise().sum();
                } else {
                    bd->grad += yd->grad;
                }
            }
        });
    }
    return y;
}

Tensor concat(Tape& tape, const Tensor& a, const Tensor& b, int axis) {
    if (axis != 0 && axis != 1) throw TensorError("concat: axis must be 0 or 1");
    if (axis == 0 ? a.cols() != b.cols() : a.rows() != b.rows()) shape_error("concat", a, b);
    Mat out;
    if (axis == 0) {
        out.resize(a.rows() + b.rows(), a.cols());
        out.topRows(a.rows()) = a.value();
        out.bottomRows(b.rows()) = b.value();
    } else {
        out.resize(a.rows(), a.cols() + b.cols());
        out.leftCols(a.cols()) = a.value();
        out.rightCols(b.cols()) = b.value();
    }
    Tensor y = Tensor::from_matrix(std::move(out), track(tape, {&a, &b}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), bd = b.ptr(), yd = y.ptr(), axis] {
            const Eigen::Index ar = ad->value.rows(), ac = ad->value.cols();
            if (axis == 0) {
                if (ad->requires_grad) ad->grad += yd->grad.topRows(ar);
                if (bd->requires_grad) bd->grad += yd->grad.bottomRows(yd->grad.rows() - ar);
            } else {
                if (ad->requires_grad) ad->grad += yd->grad.leftCols(ac);
                if (bd->requires_grad) bd->grad += yd->grad.rightCols(yd->grad.cols() - ac);
            }
        });
    }
    return y;
}

Tensor slice(Tape& tape, const Tensor& a, Eigen::Index row0, Eigen::Index nrows,
             Eigen::Index col0, Eigen::Index ncols) {
    if (row0 < 0 || col0 < 0 || nrows < 0 || ncols < 0 || row0 + nrows > a.rows() ||
        col0 + ncols > a.cols()) {
        throw TensorError("slice: block [" + std::to_string(row0) + ":" +
                          std::to_string(row0 + nrows) + "," + std::to_string(col0) + ":" +
                          std::to_string(col0 + ncols) + "] out of bounds for " + shape_str(a));
    }
    Tensor y =
        Tensor::from_matrix(a.value().block(row0, col0, nrows, ncols), track(tape, {&a}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), yd = y.ptr(), row0, col0, nrows, ncols] {
            if (ad->requires_grad) ad->grad.block(row0, col0, nrows, ncols) += yd->grad;
        });
    }
    return y;
}

Tensor leaky_relu(Tape& tape, const Tensor& a, double negative_slope) {
    Mat out = a.value().unaryExpr(
        [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; });
    Tensor y = Tensor::from_matrix(std::move(out), track(tape, {&a}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), yd = y.ptr(), negative_slope] {
            if (!ad->requires_grad) return;
            ad->grad.array() += yd->grad.array() *
                                ad->value.unaryExpr([negative_slope](double x) {
                                       return x > 0.0 ? 1.0 : negative_slope;
                                   }).array();
        });
    }
    return y;
}

Tensor gather_rows(Tape& tape, const Tensor& a, const std::vector<int>& indices) {
    Mat out(static_cast<Eigen::Index>(indices.size()), a.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const int i = indices[r];
        if (i >= a.rows()) {
            throw TensorError("gather_rows: index " + std::to_string(i) + " out of range for " +
                              shape_str(a));
        }
        if (i < 0) {
            out.row(static_cast<Eigen::Index>(r)).setZero();  // padding
        } else {
            out.row(static_cast<Eigen::Index>(r)) = a.value().row(i);
        }
    }
    Tensor y = Tensor::from_matrix(std::move(out), track(tape, {&a}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), yd = y.ptr(), indices] {
            if (!ad->requires_grad) return;
            for (std::size_t r = 0; r < indices.size(); ++r) {
                if (indices[r] >= 0) {
                    ad->grad.row(indices[r]) += yd->grad.row(static_cast<Eigen::Index>(r));
                }
            }
        });
    }
    return y;
}

Tensor reshape(Tape& tape, const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != a.size()) {
        throw TensorError("reshape: cannot view " + shape_str(a) + " as (" + std::to_string(rows) +
                          "x" + std::to_string(cols) + ")");
    }
    Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
    Tensor y = Tensor::from_matrix(std::move(out), track(tape, {&a}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), yd = y.ptr()] {
            if (ad->requires_grad) {
                ad->grad += Eigen::Map<const Mat>(yd->grad.data(), ad->grad.rows(), ad->grad.cols());
            }
        });
    }
    return y;
}

Tensor reduce_mean(Tape& tape, const Tensor& a) {
    Tensor y = Tensor::scalar(a.value().mean(), track(tape, {&a}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), yd = y.ptr()] {
            if (ad->requires_grad) {
                ad->grad.array() += yd->grad(0, 0) / static_cast<double>(ad->value.size());
            }
        });
    }
    return y;
}

Tensor l1_loss(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error("l1_loss", a, b);
    const double inv_rows = 1.0 / static_cast<double>(a.rows());
    const double v = (a.value() - b.value()).array().abs().sum() * inv_rows;
    Tensor y = Tensor::scalar(v, track(tape, {&a, &b}));
    if (y.requires_grad()) {
        tape.record([ad = a.ptr(), bd = b.ptr(), yd = y.ptr(), inv_rows] {
            const double g = yd->grad(0, 0) * inv_rows;
            Mat s = (ad->value - bd->value)
                        .unaryExpr([](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
            if (ad->requires_grad) ad->grad += g * s;
            if (bd->requires_grad) bd->grad -= g * s;
        });
    }
    return y;
}

}  // namespace dismesh
