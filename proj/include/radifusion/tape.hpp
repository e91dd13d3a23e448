#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <vector>

#include "radifusion/tensor.hpp"

namespace radif {

// Handle into a Tape. Valid only for the tape that produced it.
using VarId = int;

enum class TemporalPad { zero, replicate };

struct Conv3dOpts {
    int stride = 1;                              // spatial stride, both axes
    int pad = 0;                                 // spatial zero padding, both sides
    int pad_t = -1;                              // temporal padding; -1 means (kt-1)/2
    TemporalPad temporal = TemporalPad::replicate;
};

// Reverse-mode automatic differentiation over a linear tape of nodes.
// Nodes are appended in evaluation order, which is automatically a
// topological order, so the backward sweep is a single reverse pass over
// the node array. One Tape instance is one computation graph; tapes are
// cheap to build and are discarded after each optimization step.
class Tape {
public:
    VarId input(Tensor value, bool requires_grad = false);

    // Elementwise binary ops with broadcasting (right-aligned, size-1 axes
    // stretch). Gradients are reduced back over the broadcast axes.
    VarId add(VarId a, VarId b);
    VarId sub(VarId a, VarId b);
    VarId mul(VarId a, VarId b);
    VarId div(VarId a, VarId b);

    // Elementwise unary ops.
    VarId neg(VarId a);
    VarId sigmoid(VarId a);
    VarId tanh(VarId a);
    VarId exp(VarId a);
    VarId log(VarId a);
    VarId abs(VarId a);
    VarId relu(VarId a);
    VarId affine(VarId a, double scale, double shift); // scale * x + shift

    VarId matmul(VarId a, VarId b); // [m,k] x [k,n] -> [m,n]
    VarId transpose(VarId a);       // rank-2 only
    VarId reshape(VarId a, std::vector<int> shape);
    VarId concat(const std::vector<VarId>& parts, int axis);

    // Numerically stable softmax along one axis (max-subtracted).
    VarId softmax(VarId a, int axis);

    // Reductions. With an axis the output shape drops that axis; without,
    // the result is a {1} scalar. max/min route gradient to the first
    // (lowest flat index) extremum.
    VarId reduce_sum(VarId a, std::optional<int> axis = std::nullopt);
    VarId reduce_mean(VarId a, std::optional<int> axis = std::nullopt);
    VarId reduce_max(VarId a, std::optional<int> axis = std::nullopt);
    VarId reduce_min(VarId a, std::optional<int> axis = std::nullopt);

    // 3-D cross-correlation: x [Cin,T,H,W], w [Cout,Cin,kt,kh,kw] ->
    // [Cout,T',H',W']. Spatial padding is zero-filled; temporal padding is
    // zero or edge-replicate; temporal stride is fixed at 1.
    VarId conv3d(VarId x, VarId w, const Conv3dOpts& opts = {});

    const Tensor& value(VarId id) const;
    const Tensor& grad(VarId id) const;
    bool requires_grad(VarId id) const;
    std::size_t size() const { return nodes_.size(); }

    // Root must be a single-element tensor. Seeds d(root)/d(root) = 1 and
    // accumulates gradients into every reachable node that requires grad.
    void backward(VarId root);

private:
    struct Node {
        Tensor value;
        Tensor grad; // allocated by backward()
        std::vector<VarId> inputs;
        std::function<void(Tape&, VarId)> back;
        bool requires_grad = false;
    };

    // deque keeps node (and value/grad) references stable as the tape grows
    std::deque<Node> nodes_;

    VarId push(Tensor value, std::vector<VarId> inputs, std::function<void(Tape&, VarId)> back);
    void check(VarId id) const;
    double* grad_buf(VarId id);   // nullptr when the node does not need grad
    const Tensor& val(VarId id) const { return nodes_[static_cast<std::size_t>(id)].value; }

    VarId unary(VarId a, int which);
    VarId binary(VarId a, VarId b, int which); // 0 add, 1 sub, 2 mul, 3 div
    VarId reduce(VarId a, std::optional<int> axis, int which); // 0 sum, 1 mean, 2 max, 3 min
};

// The engine's scalar sigmoid; scalar-path code shares it so results match
// the tensor ops bitwise.
inline double sigmoid_scalar(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Relative-error gradient check by central differences, for a scalar-valued
// function of one tensor. Returns the max over coordinates of
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double grad_check(const std::function<VarId(Tape&, VarId)>& f, const Tensor& x, double eps = 1e-6,
                  double floor = 1e-8);

// Same, for a function of several tensors (checks every coordinate of each).
double grad_check_multi(const std::function<VarId(Tape&, const std::vector<VarId>&)>& f, std::vector<Tensor> xs,
                        double eps = 1e-6, double floor = 1e-8);

} // namespace radif
