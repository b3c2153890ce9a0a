#include "flowlab/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace flowlab {

namespace {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must not be empty");
    std::int64_t n = 1;
    for (std::int64_t d : shape) {
        if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap as_mat(const Tensor& t) {
    return ConstMatMap(t.data(), t.rows(), t.cols());
}

}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), values_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(values_.size()))
        throw std::invalid_argument("tensor value count " + std::to_string(values_.size()) +
                                    " does not match shape " + shape_str(shape_));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::int64_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.values_.begin(), t.values_.end(), v);
    return t;
}

std::int64_t Tensor::rows() const {
    if (rank() != 2) throw std::invalid_argument("rows(): tensor is not a matrix, shape " + shape_str(shape_));
    return shape_[0];
}

std::int64_t Tensor::cols() const {
    if (rank() != 2) throw std::invalid_argument("cols(): tensor is not a matrix, shape " + shape_str(shape_));
    return shape_[1];
}

double& Tensor::at(std::int64_t r, std::int64_t c) {
    return values_[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::at(std::int64_t r, std::int64_t c) const {
    return values_[static_cast<std::size_t>(r * cols() + c)];
}

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item(): tensor has " + std::to_string(size()) + " elements");
    return values_[0];
}

bool Tensor::all_finite() const {
    for (double v : values_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string shape_str(const std::vector<std::int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
}

void check_finite(const Tensor& t, const std::string& what) {
    if (!t.all_finite()) throw std::runtime_error("non-finite value in " + what);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                                    shape_str(b.shape()));
    Tensor c({a.rows(), b.cols()});
    MatMap(c.data(), c.rows(), c.cols()).noalias() = as_mat(a) * as_mat(b);
    return c;
}

void matmul_acc(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c) {
    const std::int64_t am = transpose_a ? a.cols() : a.rows();
    const std::int64_t ak = transpose_a ? a.rows() : a.cols();
    const std::int64_t bk = transpose_b ? b.cols() : b.rows();
    const std::int64_t bn = transpose_b ? b.rows() : b.cols();
    if (ak != bk || c.rows() != am || c.cols() != bn)
        throw std::invalid_argument("matmul_acc: incompatible shapes");
    MatMap cm(c.data(), c.rows(), c.cols());
    if (!transpose_a && !transpose_b)
        cm.noalias() += as_mat(a) * as_mat(b);
    else if (transpose_a && !transpose_b)
        cm.noalias() += as_mat(a).transpose() * as_mat(b);
    else if (!transpose_a && transpose_b)
        cm.noalias() += as_mat(a) * as_mat(b).transpose();
    else
        cm.noalias() += as_mat(a).transpose() * as_mat(b).transpose();
}

Tensor transpose(const Tensor& a) {
    Tensor out({a.cols(), a.rows()});
    MatMap(out.data(), out.rows(), out.cols()).noalias() = as_mat(a).transpose();
    return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != b.rows())
        throw std::invalid_argument("concat_cols: incompatible shapes " + shape_str(a.shape()) + " and " +
                                    shape_str(b.shape()));
    Tensor out({a.rows(), a.cols() + b.cols()});
    for (std::int64_t r = 0; r < a.rows(); ++r) {
        double* dst = out.data() + r * out.cols();
        std::copy(a.data() + r * a.cols(), a.data() + (r + 1) * a.cols(), dst);
        std::copy(b.data() + r * b.cols(), b.data() + (r + 1) * b.cols(), dst + a.cols());
    }
    return out;
}

void add_row_inplace(Tensor& m, const Tensor& row) {
    if (m.rank() != 2 || row.size() != m.cols())
        throw std::invalid_argument("add_row_inplace: incompatible shapes");
    for (std::int64_t r = 0; r < m.rows(); ++r) {
        double* p = m.data() + r * m.cols();
        for (std::int64_t c = 0; c < m.cols(); ++c) p[c] += row[c];
    }
}

}  // namespace flowlab
