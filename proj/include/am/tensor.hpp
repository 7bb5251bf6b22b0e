#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace am {

class Rng;

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 and 2 cover
// everything in this project; higher ranks are flattened by callers.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::int64_t> shape);
    Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::int64_t> shape);
    static Tensor full(std::vector<std::int64_t> shape, double v);
    static Tensor from_rows(const std::vector<std::vector<double>>& rows);
    static Tensor randn(std::vector<std::int64_t> shape, Rng& rng, double stddev = 1.0);

    const std::vector<std::int64_t>& shape() const { return shape_; }
    std::int64_t rank() const { return static_cast<std::int64_t>(shape_.size()); }
    std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }
    std::int64_t dim(std::size_t i) const { return shape_[i]; }
    std::int64_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    std::int64_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[i]; }
    double operator[](std::int64_t i) const { return data_[i]; }
    double& at(std::int64_t i, std::int64_t j) { return data_[i * cols() + j]; }
    double at(std::int64_t i, std::int64_t j) const { return data_[i * cols() + j]; }

    double item() const;  // requires numel() == 1

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
    bool all_finite() const;
    void fill(double v);

private:
    std::vector<std::int64_t> shape_;
    std::vector<double> data_;
};

// C = A * B for 2-D tensors, [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

}  // namespace am
