#include "radifusion/tensor.hpp"

#include <cmath>
#include <sstream>

#include "radifusion/error.hpp"

namespace radif {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d <= 0) throw Error::validation("tensor extents must be positive, got shape " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<std::size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
        throw Error::validation("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                                shape_str(shape_));
}

Tensor Tensor::full(std::vector<int> shape, double v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
}

double& Tensor::at(const std::vector<int>& idx) {
    (void)static_cast<const Tensor*>(this)->at(idx); // bounds check
    std::int64_t flat = 0;
    for (std::size_t i = 0; i < shape_.size(); ++i) flat = flat * shape_[i] + idx[i];
    return data_[static_cast<std::size_t>(flat)];
}

double Tensor::at(const std::vector<int>& idx) const {
    if (idx.size() != shape_.size()) throw Error::validation("index rank mismatch");
    std::int64_t flat = 0;
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= shape_[i]) throw Error::validation("index out of range");
        flat = flat * shape_[i] + idx[i];
    }
    return data_[static_cast<std::size_t>(flat)];
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::vector<int> broadcast_shape(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t r = std::max(a.size(), b.size());
    std::vector<int> out(r, 1);
    for (std::size_t i = 0; i < r; ++i) {
        const int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw Error::validation("shapes " + shape_str(a) + " and " + shape_str(b) + " are not broadcastable");
        out[i] = std::max(da, db);
    }
    return out;
}

} // namespace radif
