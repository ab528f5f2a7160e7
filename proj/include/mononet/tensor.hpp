#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "mononet/errors.hpp"

namespace mononet {

// Dense row-major tensor of doubles. Rank 1 and 2 cover everything in this
// project; the shape is kept as a vector so rank checks stay explicit.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);
    static Tensor row(std::vector<double> values);                   // shape [n]
    static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> values);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t ndim() const { return shape_.size(); }
    std::size_t numel() const { return data_.size(); }
    std::size_t dim(std::size_t i) const;

    // 2-D helpers; throw DimensionError when the tensor is not rank 2.
    std::size_t rows() const;
    std::size_t cols() const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    void fill(double v);
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // Throws NumericError naming `what` if any entry is NaN or Inf.
    void require_finite(const std::string& what) const;

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// C = A * B for 2-D tensors; inner dimensions must agree.
Tensor matmul(const Tensor& a, const Tensor& b);
// C = A * B^T (rows of A dotted with rows of B).
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// C = A^T * B.
Tensor matmul_tn(const Tensor& a, const Tensor& b);

} // namespace mononet
