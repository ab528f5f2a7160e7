#include "mononet/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mononet {

namespace {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != shape_numel(shape_)) {
        throw DimensionError("tensor: " + std::to_string(data_.size()) +
                             " values do not fill shape " + shape_str());
    }
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::row(std::vector<double> values) {
    std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t r, std::size_t c, std::vector<double> values) {
    return Tensor({r, c}, std::move(values));
}

std::size_t Tensor::dim(std::size_t i) const {
    if (i >= shape_.size()) {
        throw DimensionError("tensor: dim " + std::to_string(i) + " out of range for shape " +
                             shape_str());
    }
    return shape_[i];
}

std::size_t Tensor::rows() const {
    if (ndim() != 2) throw DimensionError("tensor: rows() needs rank 2, got shape " + shape_str());
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (ndim() != 2) throw DimensionError("tensor: cols() needs rank 2, got shape " + shape_str());
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) {
    return data_[r * cols() + c];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    return data_[r * cols() + c];
}

void Tensor::fill(double v) {
    for (double& x : data_) x = v;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Tensor::require_finite(const std::string& what) const {
    if (!all_finite()) {
        throw NumericError("non-finite values in " + what);
    }
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) os << 'x';
        os << shape_[i];
    }
    os << ']';
    return os.str();
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != k) {
        throw DimensionError("matmul: " + a.shape_str() + " x " + b.shape_str());
    }
    Tensor c({m, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    // i-k-j order: the inner loop walks both B and C contiguously.
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = cp + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ap[i * k + kk];
            const double* brow = bp + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
    if (b.cols() != k) {
        throw DimensionError("matmul_nt: " + a.shape_str() + " x " + b.shape_str() + "^T");
    }
    Tensor c({m, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ap + i * k;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = bp + j * k;
            double s = 0.0;
            for (std::size_t kk = 0; kk < k; ++kk) {
                s += arow[kk] * brow[kk];
            }
            cp[i * n + j] = s;
        }
    }
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    if (b.rows() != m) {
        throw DimensionError("matmul_tn: " + a.shape_str() + "^T x " + b.shape_str());
    }
    Tensor c({k, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    // Accumulate rank-1 updates; inner loop contiguous over both B and C rows.
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = ap + i * k;
        const double* brow = bp + i * n;
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = arow[kk];
            double* crow = cp + kk * n;
            for (std::size_t j = 0; j < n; ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

} // namespace mononet
