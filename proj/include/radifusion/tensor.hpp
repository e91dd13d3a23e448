#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace radif {

// Dense row-major tensor of doubles. Plain value type: copyable, no view
// semantics, no reference counting. Shapes use int extents; a "scalar" is
// represented as shape {1}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor scalar(double v) { return Tensor({1}, {v}); }
    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int> shape, double v);

    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }

    // Multi-index access (bounds unchecked beyond rank match, row-major).
    double& at(const std::vector<int>& idx);
    double at(const std::vector<int>& idx) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

std::int64_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// NumPy-style broadcast of two shapes (right-aligned, dims equal or 1).
// Throws Error::validation when incompatible.
std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b);

} // namespace radif
