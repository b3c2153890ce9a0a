#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace flowlab {

// Dense row-major tensor of doubles. Rank is 1 or 2 in practice: vectors are
// {n}, matrices {rows, cols}; scalars are represented as {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);  // zero-filled
    Tensor(std::vector<std::int64_t> shape, std::vector<double> values);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor full(std::vector<std::int64_t> shape, double v);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t rows() const;  // rank-2 only
    std::int64_t cols() const;  // rank-2 only

    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
    double& at(std::int64_t r, std::int64_t c);
    double at(std::int64_t r, std::int64_t c) const;
    double item() const;  // requires size() == 1

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    bool empty() const { return values_.empty(); }

private:
    std::vector<std::int64_t> shape_;
    std::vector<double> values_;
};

std::string shape_str(const std::vector<std::int64_t>& shape);

// Plain (non-autodiff) kernels. The graph ops and the fast network
// evaluation paths share these.
Tensor matmul(const Tensor& a, const Tensor& b);
// c += a * b, shapes checked; used by backward accumulation
void matmul_acc(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& c);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
// m[r, :] += row for every r
void add_row_inplace(Tensor& m, const Tensor& row);

void check_finite(const Tensor& t, const std::string& what);

}  // namespace flowlab
