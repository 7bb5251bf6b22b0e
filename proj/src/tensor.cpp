#include "am/tensor.hpp"

#include <cmath>
#include <stdexcept>

#include "am/rng.hpp"

namespace am {

namespace {
std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("Tensor: negative extent");
        n *= d;
    }
    return n;
}
}  // namespace

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
        throw std::invalid_argument("Tensor: data length does not match shape");
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::zeros(std::vector<std::int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<std::int64_t> shape, double v) {
    Tensor t(std::move(shape));
    t.fill(v);
    return t;
}

Tensor Tensor::from_rows(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("from_rows: empty");
    const auto n = static_cast<std::int64_t>(rows.size());
    const auto d = static_cast<std::int64_t>(rows[0].size());
    Tensor t({n, d});
    for (std::int64_t i = 0; i < n; ++i) {
        if (static_cast<std::int64_t>(rows[i].size()) != d)
            throw std::invalid_argument("from_rows: ragged rows");
        for (std::int64_t j = 0; j < d; ++j) t.at(i, j) = rows[i][j];
    }
    return t;
}

Tensor Tensor::randn(std::vector<std::int64_t> shape, Rng& rng, double stddev) {
    Tensor t(std::move(shape));
    for (auto& x : t.vec()) x = stddev * rng.normal();
    return t;
}

double Tensor::item() const {
    if (data_.size() != 1) throw std::invalid_argument("item: tensor is not a scalar");
    return data_[0];
}

bool Tensor::all_finite() const {
    for (double x : data_)
        if (!std::isfinite(x)) return false;
    return true;
}

void Tensor::fill(double v) {
    for (auto& x : data_) x = v;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
        throw std::invalid_argument("matmul: shape mismatch");
    const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
    for (std::int64_t i = 0; i < m; ++i) {
        for (std::int64_t p = 0; p < k; ++p) {
            const double av = ap[i * k + p];
            const double* brow = bp + p * n;
            double* crow = cp + i * n;
            for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw std::invalid_argument("transpose: rank-2 only");
    const std::int64_t m = a.dim(0), n = a.dim(1);
    Tensor t({n, m});
    for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j) t.at(j, i) = a.at(i, j);
    return t;
}

}  // namespace am
