#include "gcnbert/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gcnbert/kernels.hpp"

namespace gcnbert {

namespace {

struct AxisSplit {
    std::size_t outer = 1;
    std::size_t len = 1;
    std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, const char* op) {
    if (axis >= shape.size()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_to_string(shape));
    }
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.len = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) + " vs " +
                         shape_to_string(b.shape()));
    }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
    if (a.shape().size() != rank) {
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_to_string(a.shape()));
    }
}

void add_into(Tensor& dst, std::span<const Real> src) {
    auto d = dst.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

Tape& tape_of(const Var& a, const Var& b) {
    if (&a.tape() != &b.tape()) throw std::logic_error("operands recorded on different tapes");
    return a.tape();
}

}  // namespace

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
    require_finite(value, "constant");
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::leaf(Tensor value) {
    require_finite(value, "leaf");
    Node n;
    n.op = "leaf";
    n.value = std::move(value);
    n.needs_grad = recording_;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

Var Tape::parameter(const Parameter& p) {
    require_finite(p.value, "parameter " + p.name);
    Node n;
    n.op = "parameter";
    n.borrowed = &p.value;
    n.param = &p;
    n.needs_grad = recording_;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.borrowed != nullptr ? *n.borrowed : n.value;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.shape() != value(id).shape() || (n.grad.empty() && value(id).size() > 0)) {
        n.grad = Tensor(value(id).shape());
    }
    return n.grad;
}

Var Tape::record(std::string op, Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
    require_finite(value, op);
    Node n;
    n.op = std::move(op);
    n.value = std::move(value);
    if (recording_) {
        n.needs_grad = std::any_of(inputs.begin(), inputs.end(), [&](std::size_t i) { return nodes_[i].needs_grad; });
        if (n.needs_grad) {
            n.inputs = std::move(inputs);
            n.backward = std::move(fn);
        }
    }
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
}

void Tape::backward(Var root) {
    if (!recording_) throw std::logic_error("backward() on a tape that does not record gradients");
    if (root.value().size() != 1) {
        throw ShapeError("backward root must be a single element, got " + shape_to_string(root.shape()));
    }
    for (Node& n : nodes_) n.grad = Tensor();
    backward_order_.clear();
    grad_buffer(root.id())[0] = Real(1);
    for (std::size_t id = root.id() + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.backward || n.grad.shape() != value(id).shape()) continue;
        backward_order_.push_back(id);
        n.backward(*this, id);
    }
    for (const Node& n : nodes_) {
        if (n.param != nullptr && n.grad.shape() == n.borrowed->shape()) {
            require_finite(n.grad, "gradient of " + n.param->name);
        }
    }
}

Tensor Tape::gradient(Var v) const {
    const Node& n = nodes_[v.id()];
    if (n.grad.shape() == value(v.id()).shape() && !n.grad.empty()) return n.grad;
    return Tensor(value(v.id()).shape());
}

std::optional<Tensor> Tape::gradient_of(const Parameter& p) const {
    std::optional<Tensor> out;
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
        if (nodes_[id].param != &p) continue;
        if (!out) out = Tensor(p.value.shape());
        const Tensor g = gradient({const_cast<Tape*>(this), id});
        add_into(*out, g.data());
    }
    return out;
}

// ---- linear algebra --------------------------------------------------------

Var matmul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ShapeError("matmul: shape mismatch " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
    }
    const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out({m, n});
    kernels::gemm(a.value().data(), b.value().data(), out.data(), {m, k, n}, kernels::Transpose::None, false);
    const std::size_t ia = a.id(), ib = b.id();
    return t.record("matmul", std::move(out), {ia, ib}, [ia, ib, m, k, n](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        if (tp.needs_grad(ia)) {
            kernels::gemm(g.data(), tp.value(ib).data(), tp.grad_buffer(ia).data(), {m, n, k},
                          kernels::Transpose::Right, true);
        }
        if (tp.needs_grad(ib)) {
            kernels::gemm(tp.value(ia).data(), g.data(), tp.grad_buffer(ib).data(), {k, m, n},
                          kernels::Transpose::Left, true);
        }
    });
}

namespace {

// T×k×n → k×(T·n), so a shared left factor multiplies every frame in one gemm.
std::vector<Real> frames_side_by_side(std::span<const Real> x, std::size_t batch, std::size_t rows, std::size_t n) {
    std::vector<Real> out(batch * rows * n);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(x.data() + (b * rows + r) * n, n, out.data() + r * batch * n + b * n);
    return out;
}

void add_frames_back(std::span<const Real> wide, std::span<Real> x, std::size_t batch, std::size_t rows,
                     std::size_t n, bool accumulate) {
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t r = 0; r < rows; ++r) {
            const Real* src = wide.data() + r * batch * n + b * n;
            Real* dst = x.data() + (b * rows + r) * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] = accumulate ? dst[j] + src[j] : src[j];
        }
}

}  // namespace

Var matmul_each(Var a, Var x) {
    Tape& t = tape_of(a, x);
    if (a.shape().size() != 2 || x.shape().size() != 3 || a.shape()[1] != x.shape()[1]) {
        throw ShapeError("matmul_each: shape mismatch " + shape_to_string(a.shape()) + " x " +
                         shape_to_string(x.shape()));
    }
    const std::size_t batch = x.shape()[0], m = a.shape()[0], k = a.shape()[1], n = x.shape()[2];
    const std::size_t wide_n = batch * n;
    Tensor out({batch, m, n});
    const std::vector<Real> xw = frames_side_by_side(x.value().data(), batch, k, n);
    std::vector<Real> ow(m * wide_n);
    kernels::gemm(a.value().data(), xw, ow, {m, k, wide_n}, kernels::Transpose::None, false);
    add_frames_back(ow, out.data(), batch, m, n, false);

    const std::size_t ia = a.id(), ix = x.id();
    return t.record("matmul_each", std::move(out), {ia, ix}, [=](Tape& tp, std::size_t self) {
        const std::vector<Real> gw = frames_side_by_side(tp.grad(self).data(), batch, m, n);
        if (tp.needs_grad(ia)) {
            const std::vector<Real> xw2 = frames_side_by_side(tp.value(ix).data(), batch, k, n);
            kernels::gemm(gw, xw2, tp.grad_buffer(ia).data(), {m, wide_n, k}, kernels::Transpose::Right, true);
        }
        if (tp.needs_grad(ix)) {
            std::vector<Real> dw(k * wide_n);
            kernels::gemm(tp.value(ia).data(), gw, dw, {k, m, wide_n}, kernels::Transpose::Left, false);
            add_frames_back(dw, tp.grad_buffer(ix).data(), batch, k, n, true);
        }
    });
}

Var transpose(Var a) {
    require_rank(a, 2, "transpose");
    const std::size_t r = a.shape()[0], c = a.shape()[1];
    Tensor out({c, r});
    const Tensor& av = a.value();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) out.at(j, i) = av.at(i, j);
    const std::size_t ia = a.id();
    return a.tape().record("transpose", std::move(out), {ia}, [ia, r, c](Tape& tp, std::size_t self) {
        const Tensor& g = tp.grad(self);
        Tensor& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) ga.at(i, j) += g.at(j, i);
    });
}

Var reshape(Var a, Shape shape) {
    Tensor out = a.value().reshaped(std::move(shape));
    const std::size_t ia = a.id();
    return a.tape().record("reshape", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        add_into(tp.grad_buffer(ia), tp.grad(self).data());
    });
}

// ---- elementwise -------------------------------------------------------------

Var add(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "add");
    Tensor out = a.value();
    add_into(out, b.value().data());
    const std::size_t ia = a.id(), ib = b.id();
    return t.record("add", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
        if (tp.needs_grad(ia)) add_into(tp.grad_buffer(ia), tp.grad(self).data());
        if (tp.needs_grad(ib)) add_into(tp.grad_buffer(ib), tp.grad(self).data());
    });
}

Var sub(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "sub");
    Tensor out = a.value();
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record("sub", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        if (tp.needs_grad(ia)) add_into(tp.grad_buffer(ia), g);
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
    });
}

Var mul(Var a, Var b) {
    Tape& t = tape_of(a, b);
    require_same_shape(a, b, "mul");
    Tensor out = a.value();
    const auto bv = b.value().data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const std::size_t ia = a.id(), ib = b.id();
    return t.record("mul", std::move(out), {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        if (tp.needs_grad(ia)) {
            Tensor& ga = tp.grad_buffer(ia);
            const auto bvv = tp.value(ib).data();
            for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bvv[i];
        }
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            const auto avv = tp.value(ia).data();
            for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * avv[i];
        }
    });
}

Var scale(Var a, Real factor) {
    Tensor out = a.value();
    for (Real& v : out.storage()) v *= factor;
    const std::size_t ia = a.id();
    return a.tape().record("scale", std::move(out), {ia}, [ia, factor](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        Tensor& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
}

Var tanh(Var a) {
    Tensor out = a.value();
    for (Real& v : out.storage()) v = std::tanh(v);
    const std::size_t ia = a.id();
    return a.tape().record("tanh", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto y = tp.value(self).data();
        Tensor& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (Real(1) - y[i] * y[i]);
    });
}

Real gelu_value(Real x) { return Real(0.5) * x * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>)); }

Real gelu_derivative(Real x) {
    const Real cdf = Real(0.5) * (Real(1) + std::erf(x / std::numbers::sqrt2_v<Real>));
    const Real pdf = std::exp(Real(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<Real> / std::numbers::sqrt2_v<Real>;
    return cdf + x * pdf;
}

Var gelu(Var a) {
    Tensor out = a.value();
    for (Real& v : out.storage()) v = gelu_value(v);
    const std::size_t ia = a.id();
    return a.tape().record("gelu", std::move(out), {ia}, [ia](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto x = tp.value(ia).data();
        Tensor& ga = tp.grad_buffer(ia);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * gelu_derivative(x[i]);
    });
}

Var add_bias(Var x, Var bias) {
    Tape& t = tape_of(x, bias);
    require_rank(bias, 1, "add_bias");
    const Shape& xs = x.shape();
    const std::size_t d = bias.shape()[0];
    if (xs.empty() || xs.back() != d || xs.size() > 2) {
        throw ShapeError("add_bias: shape mismatch " + shape_to_string(xs) + " + " + shape_to_string(bias.shape()));
    }
    const std::size_t n = x.value().size() / d;
    Tensor out = x.value();
    const auto bv = bias.value().data();
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] += bv[j];
    const std::size_t ix = x.id(), ib = bias.id();
    return t.record("add_bias", std::move(out), {ix, ib}, [ix, ib, n, d](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        if (tp.needs_grad(ix)) add_into(tp.grad_buffer(ix), g);
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
        }
    });
}

// ---- reductions and structure -----------------------------------------------

Var softmax(Var x, std::size_t axis) {
    const auto s = split_axis(x.shape(), axis, "softmax");
    if (s.len == 0) throw ShapeError("softmax: empty axis");
    Tensor out = x.value();
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.len * s.inner + in;
            Real mx = out[base];
            for (std::size_t l = 1; l < s.len; ++l) mx = std::max(mx, out[base + l * s.inner]);
            Real total = 0;
            for (std::size_t l = 0; l < s.len; ++l) {
                Real& v = out[base + l * s.inner];
                v = std::exp(v - mx);
                total += v;
            }
            for (std::size_t l = 0; l < s.len; ++l) out[base + l * s.inner] /= total;
        }
    }
    const std::size_t ix = x.id();
    return x.tape().record("softmax", std::move(out), {ix}, [ix, s](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        const auto y = tp.value(self).data();
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t o = 0; o < s.outer; ++o) {
            for (std::size_t in = 0; in < s.inner; ++in) {
                const std::size_t base = o * s.len * s.inner + in;
                Real dot = 0;
                for (std::size_t l = 0; l < s.len; ++l) dot += g[base + l * s.inner] * y[base + l * s.inner];
                for (std::size_t l = 0; l < s.len; ++l) {
                    const std::size_t i = base + l * s.inner;
                    gx[i] += y[i] * (g[i] - dot);
                }
            }
        }
    });
}

Var reduce_mean(Var x, std::size_t axis) {
    const auto s = split_axis(x.shape(), axis, "reduce_mean");
    if (s.len == 0) throw ShapeError("reduce_mean: empty axis");
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    if (out_shape.empty()) out_shape = {1};
    Tensor out(out_shape);
    const auto xv = x.value().data();
    const Real inv = Real(1) / static_cast<Real>(s.len);
    for (std::size_t o = 0; o < s.outer; ++o) {
        for (std::size_t in = 0; in < s.inner; ++in) {
            Real total = 0;
            for (std::size_t l = 0; l < s.len; ++l) total += xv[(o * s.len + l) * s.inner + in];
            out[o * s.inner + in] = total * inv;
        }
    }
    const std::size_t ix = x.id();
    return x.tape().record("reduce_mean", std::move(out), {ix}, [ix, s, inv](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t o = 0; o < s.outer; ++o)
            for (std::size_t l = 0; l < s.len; ++l)
                for (std::size_t in = 0; in < s.inner; ++in)
                    gx[(o * s.len + l) * s.inner + in] += g[o * s.inner + in] * inv;
    });
}

Var sum(Var x) {
    Real total = 0;
    for (Real v : x.value().data()) total += v;
    const std::size_t ix = x.id();
    return x.tape().record("sum", Tensor::scalar(total), {ix}, [ix](Tape& tp, std::size_t self) {
        const Real g = tp.grad(self)[0];
        for (Real& v : tp.grad_buffer(ix).storage()) v += g;
    });
}

Var concat(Var a, Var b, std::size_t axis) {
    Tape& t = tape_of(a, b);
    const Shape& as = a.shape();
    const Shape& bs = b.shape();
    bool ok = as.size() == bs.size() && axis < as.size();
    for (std::size_t i = 0; ok && i < as.size(); ++i) ok = i == axis || as[i] == bs[i];
    if (!ok) {
        throw ShapeError("concat: incompatible shapes " + shape_to_string(as) + " and " + shape_to_string(bs) +
                         " on axis " + std::to_string(axis));
    }
    const auto sa = split_axis(as, axis, "concat");
    const auto sb = split_axis(bs, axis, "concat");
    Shape os = as;
    os[axis] = sa.len + sb.len;
    Tensor out(os);
    const std::size_t ca = sa.len * sa.inner, cb = sb.len * sb.inner;
    const auto av = a.value().data();
    const auto bv = b.value().data();
    for (std::size_t o = 0; o < sa.outer; ++o) {
        std::copy_n(av.begin() + o * ca, ca, out.storage().begin() + o * (ca + cb));
        std::copy_n(bv.begin() + o * cb, cb, out.storage().begin() + o * (ca + cb) + ca);
    }
    const std::size_t ia = a.id(), ib = b.id();
    const std::size_t outer = sa.outer;
    return t.record("concat", std::move(out), {ia, ib}, [ia, ib, ca, cb, outer](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        if (tp.needs_grad(ia)) {
            Tensor& ga = tp.grad_buffer(ia);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < ca; ++i) ga[o * ca + i] += g[o * (ca + cb) + i];
        }
        if (tp.needs_grad(ib)) {
            Tensor& gb = tp.grad_buffer(ib);
            for (std::size_t o = 0; o < outer; ++o)
                for (std::size_t i = 0; i < cb; ++i) gb[o * cb + i] += g[o * (ca + cb) + ca + i];
        }
    });
}

Var rows(Var x, std::size_t begin, std::size_t end) {
    const Shape& xs = x.shape();
    if (xs.empty() || begin > end || end > xs[0]) {
        throw ShapeError("rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + shape_to_string(xs));
    }
    const std::size_t stride = xs[0] == 0 ? 0 : x.value().size() / xs[0];
    Shape os = xs;
    os[0] = end - begin;
    std::vector<Real> data(x.value().storage().begin() + static_cast<std::ptrdiff_t>(begin * stride),
                           x.value().storage().begin() + static_cast<std::ptrdiff_t>(end * stride));
    const std::size_t ix = x.id();
    return x.tape().record("rows", Tensor(os, std::move(data)), {ix}, [ix, begin, stride](Tape& tp, std::size_t self) {
        const auto g = tp.grad(self).data();
        Tensor& gx = tp.grad_buffer(ix);
        for (std::size_t i = 0; i < g.size(); ++i) gx[begin * stride + i] += g[i];
    });
}

Var layer_norm(Var x, Var gamma, Var beta, Real eps) {
    Tape& t = tape_of(x, gamma);
    require_rank(x, 2, "layer_norm");
    const std::size_t n = x.shape()[0], d = x.shape()[1];
    if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
        throw ShapeError("layer_norm: gamma/beta must have shape [" + std::to_string(d) + "]");
    }
    Tensor out({n, d});
    Tensor normalized({n, d});
    std::vector<Real> inv_std(n);
    const Tensor& xv = x.value();
    const auto gv = gamma.value().data();
    const auto bv = beta.value().data();
    for (std::size_t r = 0; r < n; ++r) {
        Real mean = 0;
        for (std::size_t j = 0; j < d; ++j) mean += xv.at(r, j);
        mean /= static_cast<Real>(d);
        Real var = 0;
        for (std::size_t j = 0; j < d; ++j) var += (xv.at(r, j) - mean) * (xv.at(r, j) - mean);
        var /= static_cast<Real>(d);
        inv_std[r] = Real(1) / std::sqrt(var + eps);
        for (std::size_t j = 0; j < d; ++j) {
            normalized.at(r, j) = (xv.at(r, j) - mean) * inv_std[r];
            out.at(r, j) = normalized.at(r, j) * gv[j] + bv[j];
        }
    }
    const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
    return t.record("layer_norm", std::move(out), {ix, ig, ib},
                    [ix, ig, ib, n, d, normalized = std::move(normalized),
                     inv_std = std::move(inv_std)](Tape& tp, std::size_t self) {
                        const Tensor& g = tp.grad(self);
                        const auto gv2 = tp.value(ig).data();
                        if (tp.needs_grad(ig) || tp.needs_grad(ib)) {
                            Tensor& gg = tp.grad_buffer(ig);
                            Tensor& gb = tp.grad_buffer(ib);
                            for (std::size_t r = 0; r < n; ++r)
                                for (std::size_t j = 0; j < d; ++j) {
                                    gg[j] += g.at(r, j) * normalized.at(r, j);
                                    gb[j] += g.at(r, j);
                                }
                        }
                        if (!tp.needs_grad(ix)) return;
                        Tensor& gx = tp.grad_buffer(ix);
                        for (std::size_t r = 0; r < n; ++r) {
                            Real mean_dxhat = 0, mean_dxhat_xhat = 0;
                            for (std::size_t j = 0; j < d; ++j) {
                                const Real dxhat = g.at(r, j) * gv2[j];
                                mean_dxhat += dxhat;
                                mean_dxhat_xhat += dxhat * normalized.at(r, j);
                            }
                            mean_dxhat /= static_cast<Real>(d);
                            mean_dxhat_xhat /= static_cast<Real>(d);
                            for (std::size_t j = 0; j < d; ++j) {
                                const Real dxhat = g.at(r, j) * gv2[j];
                                gx.at(r, j) +=
                                    inv_std[r] * (dxhat - mean_dxhat - normalized.at(r, j) * mean_dxhat_xhat);
                            }
                        }
                    });
}

Var cross_entropy(Var logits, std::size_t target) {
    require_rank(logits, 1, "cross_entropy");
    const auto z = logits.value().data();
    if (target >= z.size()) {
        throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside [0, " +
                                std::to_string(z.size()) + ")");
    }
    const Real mx = *std::max_element(z.begin(), z.end());
    Real total = 0;
    for (Real v : z) total += std::exp(v - mx);
    const Real log_sum = mx + std::log(total);
    const std::size_t il = logits.id();
    return logits.tape().record(
        "cross_entropy", Tensor::scalar(log_sum - z[target]), {il}, [il, target, log_sum](Tape& tp, std::size_t self) {
            const Real g = tp.grad(self)[0];
            const auto zz = tp.value(il).data();
            Tensor& gl = tp.grad_buffer(il);
            for (std::size_t i = 0; i < zz.size(); ++i) {
                const Real p = std::exp(zz[i] - log_sum);
                gl[i] += g * (p - (i == target ? Real(1) : Real(0)));
            }
        });
}

}  // namespace gcnbert
