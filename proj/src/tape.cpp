#include "radifusion/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "radifusion/error.hpp"

namespace radif {

namespace {

std::vector<std::int64_t> row_major_strides(const std::vector<int>& shape) {
    std::vector<std::int64_t> s(shape.size(), 1);
    for (int i = static_cast<int>(shape.size()) - 2; i >= 0; --i)
        s[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i) + 1] * shape[static_cast<std::size_t>(i) + 1];
    return s;
}

// Precomputed odometer for iterating an output shape while tracking the
// flat offsets into two (possibly broadcast) operands.
struct Bcast {
    std::vector<int> out;
    std::vector<std::int64_t> sa, sb; // per-out-dim strides; 0 on broadcast dims
    std::int64_t n = 0;
};

Bcast make_bcast(const std::vector<int>& a, const std::vector<int>& b) {
    Bcast bc;
    bc.out = broadcast_shape(a, b);
    const std::size_t r = bc.out.size();
    const auto stra = row_major_strides(a);
    const auto strb = row_major_strides(b);
    bc.sa.assign(r, 0);
    bc.sb.assign(r, 0);
    for (std::size_t i = 0; i < r; ++i) {
        if (i >= r - a.size()) {
            const std::size_t ia = i - (r - a.size());
            bc.sa[i] = a[ia] == 1 ? 0 : stra[ia];
        }
        if (i >= r - b.size()) {
            const std::size_t ib = i - (r - b.size());
            bc.sb[i] = b[ib] == 1 ? 0 : strb[ib];
        }
    }
    bc.n = shape_numel(bc.out);
    return bc;
}

template <class F>
void bcast_iter(const Bcast& bc, F&& f) {
    const int r = static_cast<int>(bc.out.size());
    std::vector<int> idx(static_cast<std::size_t>(r), 0);
    std::int64_t fa = 0, fb = 0;
    for (std::int64_t i = 0; i < bc.n; ++i) {
        f(i, fa, fb);
        for (int d = r - 1; d >= 0; --d) {
            const std::size_t du = static_cast<std::size_t>(d);
            ++idx[du];
            fa += bc.sa[du];
            fb += bc.sb[du];
            if (idx[du] < bc.out[du]) break;
            idx[du] = 0;
            fa -= bc.sa[du] * bc.out[du];
            fb -= bc.sb[du] * bc.out[du];
        }
    }
}

enum { OP_ADD = 0, OP_SUB, OP_MUL, OP_DIV };
enum { UN_NEG = 0, UN_SIGMOID, UN_TANH, UN_EXP, UN_LOG, UN_ABS, UN_RELU };
enum { RED_SUM = 0, RED_MEAN, RED_MAX, RED_MIN };

double unary_fwd(int which, double x) {
    switch (which) {
        case UN_NEG: return -x;
        case UN_SIGMOID: return sigmoid_scalar(x);
        case UN_TANH: return std::tanh(x);
        case UN_EXP: return std::exp(x);
        case UN_LOG: return std::log(x);
        case UN_ABS: return std::abs(x);
        default: return x > 0.0 ? x : 0.0; // relu
    }
}

double unary_dydx(int which, double x, double y) {
    switch (which) {
        case UN_NEG: return -1.0;
        case UN_SIGMOID: return y * (1.0 - y);
        case UN_TANH: return 1.0 - y * y;
        case UN_EXP: return y;
        case UN_LOG: return 1.0 / x;
        case UN_ABS: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        default: return x > 0.0 ? 1.0 : 0.0; // relu; zero subgradient at 0
    }
}

// Splits a shape into (outer, len, inner) around one axis.
void lane_split(const std::vector<int>& shape, int axis, std::int64_t& outer, std::int64_t& len,
                std::int64_t& inner) {
    outer = 1;
    inner = 1;
    for (int i = 0; i < axis; ++i) outer *= shape[static_cast<std::size_t>(i)];
    len = shape[static_cast<std::size_t>(axis)];
    for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size(); ++i) inner *= shape[i];
}

std::vector<int> erase_axis(const std::vector<int>& shape, int axis) {
    std::vector<int> out = shape;
    out.erase(out.begin() + axis);
    if (out.empty()) out.push_back(1);
    return out;
}

} // namespace

VarId Tape::push(Tensor value, std::vector<VarId> inputs, std::function<void(Tape&, VarId)> back) {
    Node n;
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.back = std::move(back);
    for (VarId in : n.inputs)
        if (nodes_[static_cast<std::size_t>(in)].requires_grad) n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size()) - 1;
}

void Tape::check(VarId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size())
        throw Error::validation("invalid tape variable id " + std::to_string(id));
}

VarId Tape::input(Tensor value, bool requires_grad) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size()) - 1;
}

const Tensor& Tape::value(VarId id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)].value;
}

bool Tape::requires_grad(VarId id) const {
    check(id);
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
}

const Tensor& Tape::grad(VarId id) const {
    check(id);
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) throw Error::runtime("variable does not track gradients");
    if (n.grad.size() == 0) throw Error::runtime("backward() has not been run on this tape");
    return n.grad;
}

double* Tape::grad_buf(VarId id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0) return nullptr;
    return n.grad.data();
}

VarId Tape::binary(VarId a, VarId b, int which) {
    check(a);
    check(b);
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    Bcast bc = make_bcast(va.shape(), vb.shape());
    Tensor out(bc.out);
    {
        const double* pa = va.data();
        const double* pb = vb.data();
        double* po = out.data();
        switch (which) {
            case OP_ADD:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) { po[i] = pa[fa] + pb[fb]; });
                break;
            case OP_SUB:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) { po[i] = pa[fa] - pb[fb]; });
                break;
            case OP_MUL:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) { po[i] = pa[fa] * pb[fb]; });
                break;
            default:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) { po[i] = pa[fa] / pb[fb]; });
                break;
        }
    }
    return push(std::move(out), {a, b}, [bc, which](Tape& t, VarId self) {
        const Node& n = t.nodes_[static_cast<std::size_t>(self)];
        const VarId a = n.inputs[0], b = n.inputs[1];
        const double* g = n.grad.data();
        const double* pa = t.val(a).data();
        const double* pb = t.val(b).data();
        double* ga = t.grad_buf(a);
        double* gb = t.grad_buf(b);
        switch (which) {
            case OP_ADD:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) {
                    if (ga) ga[fa] += g[i];
                    if (gb) gb[fb] += g[i];
                });
                break;
            case OP_SUB:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) {
                    if (ga) ga[fa] += g[i];
                    if (gb) gb[fb] -= g[i];
                });
                break;
            case OP_MUL:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) {
                    if (ga) ga[fa] += g[i] * pb[fb];
                    if (gb) gb[fb] += g[i] * pa[fa];
                });
                break;
            default:
                bcast_iter(bc, [&](std::int64_t i, std::int64_t fa, std::int64_t fb) {
                    if (ga) ga[fa] += g[i] / pb[fb];
                    if (gb) gb[fb] -= g[i] * pa[fa] / (pb[fb] * pb[fb]);
                });
                break;
        }
    });
}

VarId Tape::add(VarId a, VarId b) { return binary(a, b, OP_ADD); }
VarId Tape::sub(VarId a, VarId b) { return binary(a, b, OP_SUB); }
VarId Tape::mul(VarId a, VarId b) { return binary(a, b, OP_MUL); }
VarId Tape::div(VarId a, VarId b) { return binary(a, b, OP_DIV); }

VarId Tape::unary(VarId a, int which) {
    check(a);
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (std::int64_t i = 0; i < va.size(); ++i) out[i] = unary_fwd(which, va[i]);
    return push(std::move(out), {a}, [which](Tape& t, VarId self) {
        const Node& n = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(n.inputs[0]);
        if (!ga) return;
        const double* g = n.grad.data();
        const double* x = t.val(n.inputs[0]).data();
        const double* y = n.value.data();
        for (std::int64_t i = 0; i < n.value.size(); ++i) ga[i] += g[i] * unary_dydx(which, x[i], y[i]);
    });
}

VarId Tape::neg(VarId a) { return unary(a, UN_NEG); }
VarId Tape::sigmoid(VarId a) { return unary(a, UN_SIGMOID); }
VarId Tape::tanh(VarId a) { return unary(a, UN_TANH); }
VarId Tape::exp(VarId a) { return unary(a, UN_EXP); }
VarId Tape::log(VarId a) { return unary(a, UN_LOG); }
VarId Tape::abs(VarId a) { return unary(a, UN_ABS); }
VarId Tape::relu(VarId a) { return unary(a, UN_RELU); }

VarId Tape::affine(VarId a, double scale, double shift) {
    check(a);
    const Tensor& va = val(a);
    Tensor out(va.shape());
    for (std::int64_t i = 0; i < va.size(); ++i) out[i] = scale * va[i] + shift;
    return push(std::move(out), {a}, [scale](Tape& t, VarId self) {
        const Node& n = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(n.inputs[0]);
        if (!ga) return;
        const double* g = n.grad.data();
        for (std::int64_t i = 0; i < n.value.size(); ++i) ga[i] += g[i] * scale;
    });
}

VarId Tape::matmul(VarId a, VarId b) {
    check(a);
    check(b);
    const Tensor& va = val(a);
    const Tensor& vb = val(b);
    if (va.rank() != 2 || vb.rank() != 2)
        throw Error::validation("matmul expects rank-2 operands, got " + shape_str(va.shape()) + " and " +
                                shape_str(vb.shape()));
    if (va.dim(1) != vb.dim(0))
        throw Error::validation("matmul inner dimensions differ: " + shape_str(va.shape()) + " vs " +
                                shape_str(vb.shape()));
    const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
    Tensor out({m, n});
    {
        const double* A = va.data();
        const double* B = vb.data();
        double* C = out.data();
        for (int i = 0; i < m; ++i)
            for (int kk = 0; kk < k; ++kk) {
                const double aik = A[static_cast<std::int64_t>(i) * k + kk];
                if (aik == 0.0) continue;
                const double* Brow = B + static_cast<std::int64_t>(kk) * n;
                double* Crow = C + static_cast<std::int64_t>(i) * n;
                for (int j = 0; j < n; ++j) Crow[j] += aik * Brow[j];
            }
    }
    return push(std::move(out), {a, b}, [m, k, n](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        const double* G = nd.grad.data();
        const double* A = t.val(nd.inputs[0]).data();
        const double* B = t.val(nd.inputs[1]).data();
        double* gA = t.grad_buf(nd.inputs[0]);
        double* gB = t.grad_buf(nd.inputs[1]);
        if (gA) {
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const double* Grow = G + static_cast<std::int64_t>(i) * n;
                    const double* Brow = B + static_cast<std::int64_t>(kk) * n;
                    double s = 0.0;
                    for (int j = 0; j < n; ++j) s += Grow[j] * Brow[j];
                    gA[static_cast<std::int64_t>(i) * k + kk] += s;
                }
        }
        if (gB) {
            for (int i = 0; i < m; ++i)
                for (int kk = 0; kk < k; ++kk) {
                    const double aik = A[static_cast<std::int64_t>(i) * k + kk];
                    if (aik == 0.0) continue;
                    const double* Grow = G + static_cast<std::int64_t>(i) * n;
                    double* gBrow = gB + static_cast<std::int64_t>(kk) * n;
                    for (int j = 0; j < n; ++j) gBrow[j] += aik * Grow[j];
                }
        }
    });
}

VarId Tape::transpose(VarId a) {
    check(a);
    const Tensor& va = val(a);
    if (va.rank() != 2) throw Error::validation("transpose expects a rank-2 tensor, got " + shape_str(va.shape()));
    const int m = va.dim(0), n = va.dim(1);
    Tensor out({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out[static_cast<std::int64_t>(j) * m + i] = va[static_cast<std::int64_t>(i) * n + j];
    return push(std::move(out), {a}, [m, n](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(nd.inputs[0]);
        if (!ga) return;
        const double* g = nd.grad.data();
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i) ga[static_cast<std::int64_t>(i) * n + j] += g[static_cast<std::int64_t>(j) * m + i];
    });
}

VarId Tape::reshape(VarId a, std::vector<int> shape) {
    check(a);
    const Tensor& va = val(a);
    if (shape_numel(shape) != va.size())
        throw Error::validation("reshape from " + shape_str(va.shape()) + " to " + shape_str(shape) +
                                " changes element count");
    Tensor out(std::move(shape), va.vec());
    return push(std::move(out), {a}, [](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(nd.inputs[0]);
        if (!ga) return;
        const double* g = nd.grad.data();
        for (std::int64_t i = 0; i < nd.value.size(); ++i) ga[i] += g[i];
    });
}

VarId Tape::concat(const std::vector<VarId>& parts, int axis) {
    if (parts.empty()) throw Error::validation("concat needs at least one input");
    for (VarId p : parts) check(p);
    const std::vector<int>& s0 = val(parts[0]).shape();
    if (axis < 0 || axis >= static_cast<int>(s0.size()))
        throw Error::validation("concat axis out of range for shape " + shape_str(s0));
    std::vector<int> out_shape = s0;
    out_shape[static_cast<std::size_t>(axis)] = 0;
    for (VarId p : parts) {
        const std::vector<int>& sp = val(p).shape();
        if (sp.size() != s0.size()) throw Error::validation("concat rank mismatch");
        for (std::size_t i = 0; i < sp.size(); ++i)
            if (static_cast<int>(i) != axis && sp[i] != s0[i])
                throw Error::validation("concat shapes differ off-axis: " + shape_str(s0) + " vs " + shape_str(sp));
        out_shape[static_cast<std::size_t>(axis)] += sp[static_cast<std::size_t>(axis)];
    }
    std::int64_t outer, len_total, inner;
    lane_split(out_shape, axis, outer, len_total, inner);
    Tensor out(out_shape);
    std::vector<std::int64_t> lens;
    {
        std::int64_t off = 0;
        for (VarId p : parts) {
            const Tensor& vp = val(p);
            const std::int64_t lp = vp.shape()[static_cast<std::size_t>(axis)];
            lens.push_back(lp);
            for (std::int64_t o = 0; o < outer; ++o)
                std::memcpy(out.data() + (o * len_total + off) * inner, vp.data() + o * lp * inner,
                            static_cast<std::size_t>(lp * inner) * sizeof(double));
            off += lp;
        }
    }
    return push(std::move(out), parts, [outer, len_total, inner, lens](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        const double* g = nd.grad.data();
        std::int64_t off = 0;
        for (std::size_t pi = 0; pi < nd.inputs.size(); ++pi) {
            const std::int64_t lp = lens[pi];
            double* gp = t.grad_buf(nd.inputs[pi]);
            if (gp) {
                for (std::int64_t o = 0; o < outer; ++o) {
                    const double* src = g + (o * len_total + off) * inner;
                    double* dst = gp + o * lp * inner;
                    for (std::int64_t i = 0; i < lp * inner; ++i) dst[i] += src[i];
                }
            }
            off += lp;
        }
    });
}

VarId Tape::softmax(VarId a, int axis) {
    check(a);
    const Tensor& va = val(a);
    if (axis < 0 || axis >= va.rank())
        throw Error::validation("softmax axis out of range for shape " + shape_str(va.shape()));
    std::int64_t outer, len, inner;
    lane_split(va.shape(), axis, outer, len, inner);
    Tensor out(va.shape());
    {
        const double* x = va.data();
        double* y = out.data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * len * inner + in;
                double m = x[base];
                for (std::int64_t l = 1; l < len; ++l) m = std::max(m, x[base + l * inner]);
                double s = 0.0;
                for (std::int64_t l = 0; l < len; ++l) {
                    const double e = std::exp(x[base + l * inner] - m);
                    y[base + l * inner] = e;
                    s += e;
                }
                for (std::int64_t l = 0; l < len; ++l) y[base + l * inner] /= s;
            }
    }
    return push(std::move(out), {a}, [outer, len, inner](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(nd.inputs[0]);
        if (!ga) return;
        const double* g = nd.grad.data();
        const double* y = nd.value.data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * len * inner + in;
                double dot = 0.0;
                for (std::int64_t l = 0; l < len; ++l) dot += g[base + l * inner] * y[base + l * inner];
                for (std::int64_t l = 0; l < len; ++l)
                    ga[base + l * inner] += y[base + l * inner] * (g[base + l * inner] - dot);
            }
    });
}

VarId Tape::reduce(VarId a, std::optional<int> axis, int which) {
    check(a);
    const Tensor& va = val(a);
    if (axis) {
        if (*axis < 0 || *axis >= va.rank())
            throw Error::validation("reduce axis out of range for shape " + shape_str(va.shape()));
        std::int64_t outer, len, inner;
        lane_split(va.shape(), *axis, outer, len, inner);
        Tensor out(erase_axis(va.shape(), *axis));
        std::vector<std::int64_t> arg; // flat argmax/argmin per lane (max/min only)
        if (which == RED_MAX || which == RED_MIN) arg.assign(static_cast<std::size_t>(outer * inner), 0);
        const double* x = va.data();
        double* y = out.data();
        for (std::int64_t o = 0; o < outer; ++o)
            for (std::int64_t in = 0; in < inner; ++in) {
                const std::int64_t base = o * len * inner + in;
                const std::int64_t lane = o * inner + in;
                if (which == RED_SUM || which == RED_MEAN) {
                    double s = 0.0;
                    for (std::int64_t l = 0; l < len; ++l) s += x[base + l * inner];
                    y[lane] = which == RED_MEAN ? s / static_cast<double>(len) : s;
                } else {
                    double best = x[base];
                    std::int64_t bi = base;
                    for (std::int64_t l = 1; l < len; ++l) {
                        const double v = x[base + l * inner];
                        if (which == RED_MAX ? v > best : v < best) {
                            best = v;
                            bi = base + l * inner;
                        }
                    }
                    y[lane] = best;
                    arg[static_cast<std::size_t>(lane)] = bi;
                }
            }
        return push(std::move(out), {a}, [which, arg, outer, len, inner](Tape& t, VarId self) {
            const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
            double* ga = t.grad_buf(nd.inputs[0]);
            if (!ga) return;
            const double* g = nd.grad.data();
            if (which == RED_MAX || which == RED_MIN) {
                const std::int64_t lanes = outer * inner;
                for (std::int64_t lane = 0; lane < lanes; ++lane) ga[arg[static_cast<std::size_t>(lane)]] += g[lane];
                return;
            }
            const double scale = which == RED_MEAN ? 1.0 / static_cast<double>(len) : 1.0;
            for (std::int64_t o = 0; o < outer; ++o)
                for (std::int64_t in = 0; in < inner; ++in) {
                    const std::int64_t base = o * len * inner + in;
                    const double gv = g[o * inner + in] * scale;
                    for (std::int64_t l = 0; l < len; ++l) ga[base + l * inner] += gv;
                }
        });
    }
    // full reduction -> {1}
    Tensor out({1});
    std::int64_t arg0 = 0;
    const double* x = va.data();
    if (which == RED_SUM || which == RED_MEAN) {
        double s = 0.0;
        for (std::int64_t i = 0; i < va.size(); ++i) s += x[i];
        out[0] = which == RED_MEAN ? s / static_cast<double>(va.size()) : s;
    } else {
        double best = x[0];
        for (std::int64_t i = 1; i < va.size(); ++i)
            if (which == RED_MAX ? x[i] > best : x[i] < best) {
                best = x[i];
                arg0 = i;
            }
        out[0] = best;
    }
    return push(std::move(out), {a}, [which, arg0](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        double* ga = t.grad_buf(nd.inputs[0]);
        if (!ga) return;
        const double g = nd.grad[0];
        const std::int64_t n = t.val(nd.inputs[0]).size();
        if (which == RED_SUM) {
            for (std::int64_t i = 0; i < n; ++i) ga[i] += g;
        } else if (which == RED_MEAN) {
            const double gv = g / static_cast<double>(n);
            for (std::int64_t i = 0; i < n; ++i) ga[i] += gv;
        } else {
            ga[arg0] += g;
        }
    });
}

VarId Tape::reduce_sum(VarId a, std::optional<int> axis) { return reduce(a, axis, RED_SUM); }
VarId Tape::reduce_mean(VarId a, std::optional<int> axis) { return reduce(a, axis, RED_MEAN); }
VarId Tape::reduce_max(VarId a, std::optional<int> axis) { return reduce(a, axis, RED_MAX); }
VarId Tape::reduce_min(VarId a, std::optional<int> axis) { return reduce(a, axis, RED_MIN); }

VarId Tape::conv3d(VarId x, VarId w, const Conv3dOpts& opts) {
    check(x);
    check(w);
    const Tensor& vx = val(x);
    const Tensor& vw = val(w);
    if (vx.rank() != 4) throw Error::validation("conv3d input must be [C,T,H,W], got " + shape_str(vx.shape()));
    if (vw.rank() != 5)
        throw Error::validation("conv3d weight must be [Cout,Cin,kt,kh,kw], got " + shape_str(vw.shape()));
    if (vw.dim(1) != vx.dim(0))
        throw Error::validation("conv3d weight expects " + std::to_string(vw.dim(1)) + " input channels, input has " +
                                std::to_string(vx.dim(0)));
    if (opts.stride < 1) throw Error::validation("conv3d stride must be >= 1");
    if (opts.pad < 0) throw Error::validation("conv3d spatial padding must be >= 0");
    const int Cin = vx.dim(0), T = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Cout = vw.dim(0), kt = vw.dim(2), kh = vw.dim(3), kw = vw.dim(4);
    const int pt = opts.pad_t < 0 ? (kt - 1) / 2 : opts.pad_t;
    const int p = opts.pad, s = opts.stride;
    if (T + 2 * pt < kt || H + 2 * p < kh || W + 2 * p < kw)
        throw Error::validation("conv3d kernel " + shape_str({kt, kh, kw}) + " larger than padded input " +
                                shape_str({T + 2 * pt, H + 2 * p, W + 2 * p}));
    const int To = T + 2 * pt - kt + 1;
    const int Ho = (H + 2 * p - kh) / s + 1;
    const int Wo = (W + 2 * p - kw) / s + 1;
    const bool repl = opts.temporal == TemporalPad::replicate;

    Tensor out({Cout, To, Ho, Wo});
    {
        const double* X = vx.data();
        const double* Wt = vw.data();
        double* Y = out.data();
        for (int co = 0; co < Cout; ++co)
            for (int ot = 0; ot < To; ++ot)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        double acc = 0.0;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int dt = 0; dt < kt; ++dt) {
                                int ti = ot + dt - pt;
                                if (repl)
                                    ti = std::clamp(ti, 0, T - 1);
                                else if (ti < 0 || ti >= T)
                                    continue;
                                for (int dy = 0; dy < kh; ++dy) {
                                    const int iy = oy * s + dy - p;
                                    if (iy < 0 || iy >= H) continue;
                                    const double* xrow =
                                        X + ((static_cast<std::int64_t>(ci) * T + ti) * H + iy) * W;
                                    const double* wrow =
                                        Wt + (((static_cast<std::int64_t>(co) * Cin + ci) * kt + dt) * kh + dy) * kw;
                                    const int x0 = ox * s - p;
                                    for (int dx = 0; dx < kw; ++dx) {
                                        const int ix = x0 + dx;
                                        if (ix < 0 || ix >= W) continue;
                                        acc += xrow[ix] * wrow[dx];
                                    }
                                }
                            }
                        Y[((static_cast<std::int64_t>(co) * To + ot) * Ho + oy) * Wo + ox] = acc;
                    }
    }
    const int cT = T, cH = H, cW = W;
    return push(std::move(out), {x, w}, [=](Tape& t, VarId self) {
        const Node& nd = t.nodes_[static_cast<std::size_t>(self)];
        const double* G = nd.grad.data();
        const double* X = t.val(nd.inputs[0]).data();
        const double* Wt = t.val(nd.inputs[1]).data();
        double* gX = t.grad_buf(nd.inputs[0]);
        double* gW = t.grad_buf(nd.inputs[1]);
        if (!gX && !gW) return;
        for (int co = 0; co < Cout; ++co)
            for (int ot = 0; ot < To; ++ot)
                for (int oy = 0; oy < Ho; ++oy)
                    for (int ox = 0; ox < Wo; ++ox) {
                        const double g = G[((static_cast<std::int64_t>(co) * To + ot) * Ho + oy) * Wo + ox];
                        if (g == 0.0) continue;
                        for (int ci = 0; ci < Cin; ++ci)
                            for (int dt = 0; dt < kt; ++dt) {
                                int ti = ot + dt - pt;
                                if (repl)
                                    ti = std::clamp(ti, 0, cT - 1);
                                else if (ti < 0 || ti >= cT)
                                    continue;
                                for (int dy = 0; dy < kh; ++dy) {
                                    const int iy = oy * s + dy - p;
                                    if (iy < 0 || iy >= cH) continue;
                                    const std::int64_t xbase = ((static_cast<std::int64_t>(ci) * cT + ti) * cH + iy) * cW;
                                    const std::int64_t wbase =
                                        (((static_cast<std::int64_t>(co) * Cin + ci) * kt + dt) * kh + dy) * kw;
                                    const int x0 = ox * s - p;
                                    for (int dx = 0; dx < kw; ++dx) {
                                        const int ix = x0 + dx;
                                        if (ix < 0 || ix >= cW) continue;
                                        if (gX) gX[xbase + ix] += g * Wt[wbase + dx];
                                        if (gW) gW[wbase + dx] += g * X[xbase + ix];
                                    }
                                }
                            }
                    }
    });
}

void Tape::backward(VarId root) {
    check(root);
    if (val(root).size() != 1) throw Error::validation("backward root must be a single-element tensor");
    // Allocate (or reset) gradient buffers for every grad-tracking node.
    for (Node& n : nodes_)
        if (n.requires_grad)
            n.grad = Tensor(n.value.shape());
        else
            n.grad = Tensor();
    if (!nodes_[static_cast<std::size_t>(root)].requires_grad) return; // nothing depends on a tracked input
    // Mark the subgraph that actually feeds the root.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<VarId> stack{root};
    reach[static_cast<std::size_t>(root)] = 1;
    while (!stack.empty()) {
        const VarId v = stack.back();
        stack.pop_back();
        for (VarId in : nodes_[static_cast<std::size_t>(v)].inputs)
            if (nodes_[static_cast<std::size_t>(in)].requires_grad && !reach[static_cast<std::size_t>(in)]) {
                reach[static_cast<std::size_t>(in)] = 1;
                stack.push_back(in);
            }
    }
    nodes_[static_cast<std::size_t>(root)].grad[0] = 1.0;
    for (VarId i = root; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (reach[static_cast<std::size_t>(i)] && n.back) n.back(*this, i);
    }
}

double grad_check_multi(const std::function<VarId(Tape&, const std::vector<VarId>&)>& f, std::vector<Tensor> xs,
                        double eps, double floor) {
    Tape t;
    std::vector<VarId> ids;
    ids.reserve(xs.size());
    for (const Tensor& x : xs) ids.push_back(t.input(x, true));
    const VarId y = f(t, ids);
    if (t.value(y).size() != 1) throw Error::validation("gradient check target must be a scalar");
    t.backward(y);
    std::vector<Tensor> analytic;
    analytic.reserve(xs.size());
    for (VarId id : ids) analytic.push_back(t.grad(id));

    const auto eval_at = [&](std::size_t which, std::int64_t coord, double v) {
        Tensor mod = xs[which];
        mod[coord] = v;
        Tape tt;
        std::vector<VarId> vv;
        vv.reserve(xs.size());
        for (std::size_t j = 0; j < xs.size(); ++j) vv.push_back(tt.input(j == which ? mod : xs[j], false));
        return tt.value(f(tt, vv))[0];
    };

    double worst = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::int64_t c = 0; c < xs[i].size(); ++c) {
            const double x0 = xs[i][c];
            const double num = (eval_at(i, c, x0 + eps) - eval_at(i, c, x0 - eps)) / (2.0 * eps);
            const double ana = analytic[i][c];
            const double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

double grad_check(const std::function<VarId(Tape&, VarId)>& f, const Tensor& x, double eps, double floor) {
    return grad_check_multi([&f](Tape& t, const std::vector<VarId>& v) { return f(t, v[0]); }, {x}, eps, floor);
}

} // namespace radif
