#include "gocom/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gocom {
namespace {

Tape& tape_of(std::string_view prim, std::initializer_list<Var> vars) {
    Tape* t = nullptr;
    for (const auto& v : vars) {
        if (!v.tape) throw std::logic_error(std::string(prim) + ": unbound operand");
        if (t && v.tape != t) throw std::logic_error(std::string(prim) + ": operands on different tapes");
        t = v.tape;
    }
    return *t;
}

void require(bool ok, std::string_view prim, const std::string& detail) {
    if (!ok) throw ShapeError(prim, detail);
}

// C[M,N] = op(A) op(B) + beta*C, all row-major and densely packed.
void gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k, const double* a,
          const double* b, double beta, double* c) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const RowMajor>;
    const auto mi = static_cast<Eigen::Index>(m), ni = static_cast<Eigen::Index>(n),
               ki = static_cast<Eigen::Index>(k);
    Eigen::Map<RowMajor> cm(c, mi, ni);
    if (beta == 0.0) cm.setZero();
    else if (beta != 1.0) cm *= beta;
    const CMap am(a, ta ? ki : mi, ta ? mi : ki);
    const CMap bm(b, tb ? ni : ki, tb ? ki : ni);
    if (!ta && !tb) cm.noalias() += am * bm;
    else if (ta && !tb) cm.noalias() += am.transpose() * bm;
    else if (!ta && tb) cm.noalias() += am * bm.transpose();
    else cm.noalias() += am.transpose() * bm.transpose();
}

void add_into(Tensor* dst, const Tensor& src) {
    if (!dst) return;
    auto d = dst->data();
    auto s = src.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Geometry of a sliding window over an image of shape [channels, ih, iw]
// that produces a grid of [oh, ow] positions.
struct Window {
    std::size_t channels, ih, iw, oh, ow, k, stride, pad;

    std::size_t rows() const { return channels * k * k; }
    std::size_t cols() const { return oh * ow; }
};

void im2col(const Window& w, const double* img, double* cols) {
    const std::size_t ncol = w.cols();
    for (std::size_t c = 0; c < w.channels; ++c) {
        for (std::size_t ki = 0; ki < w.k; ++ki) {
            for (std::size_t kj = 0; kj < w.k; ++kj) {
                double* row = cols + ((c * w.k + ki) * w.k + kj) * ncol;
                for (std::size_t y = 0; y < w.oh; ++y) {
                    const long iy = static_cast<long>(y * w.stride + ki) - static_cast<long>(w.pad);
                    for (std::size_t x = 0; x < w.ow; ++x) {
                        const long ix = static_cast<long>(x * w.stride + kj) - static_cast<long>(w.pad);
                        const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(w.ih) &&
                                            ix < static_cast<long>(w.iw);
                        row[y * w.ow + x] = inside ? img[(c * w.ih + iy) * w.iw + ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const Window& w, const double* cols, double* img) {
    const std::size_t ncol = w.cols();
    for (std::size_t c = 0; c < w.channels; ++c) {
        for (std::size_t ki = 0; ki < w.k; ++ki) {
            for (std::size_t kj = 0; kj < w.k; ++kj) {
                const double* row = cols + ((c * w.k + ki) * w.k + kj) * ncol;
                for (std::size_t y = 0; y < w.oh; ++y) {
                    const long iy = static_cast<long>(y * w.stride + ki) - static_cast<long>(w.pad);
                    if (iy < 0 || iy >= static_cast<long>(w.ih)) continue;
                    for (std::size_t x = 0; x < w.ow; ++x) {
                        const long ix = static_cast<long>(x * w.stride + kj) - static_cast<long>(w.pad);
                        if (ix < 0 || ix >= static_cast<long>(w.iw)) continue;
                        img[(c * w.ih + iy) * w.iw + ix] += row[y * w.ow + x];
                    }
                }
            }
        }
    }
}

void check_stride(std::string_view prim, const ConvAttrs& a) {
    require(a.stride == 1 || a.stride == 2 || a.stride == 4, prim,
            "stride must be 1, 2 or 4, got " + std::to_string(a.stride));
}

std::size_t inner_size(const Shape& s, std::size_t from) {
    std::size_t n = 1;
    for (std::size_t i = from; i < s.size(); ++i) n *= s[i];
    return n;
}

template <typename F>
Var unary_map(std::string_view prim, Var x, F&& f, BackwardFn bwd) {
    Tape& t = tape_of(prim, {x});
    const Tensor& in = x.value();
    Tensor out(in.shape());
    auto o = out.data();
    auto i = in.data();
    for (std::size_t k = 0; k < o.size(); ++k) o[k] = f(i[k]);
    return t.record(prim, std::move(out), {x.id}, std::move(bwd));
}

void require_same(std::string_view prim, Var a, Var b) {
    require(a.shape() == b.shape(), prim, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Var matmul(Var a, Var b) {
    constexpr std::string_view prim = "matmul";
    Tape& t = tape_of(prim, {a, b});
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    require(sa.size() == 2 && sb.size() == 2 && sa[1] == sb[0], prim,
            "lhs " + shape_str(sa) + " rhs " + shape_str(sb));
    const std::size_t m = sa[0], k = sa[1], n = sb[1];
    Tensor out({m, n});
    gemm(false, false, m, n, k, a.value().data().data(), b.value().data().data(), 0.0,
         out.data().data());
    return t.record(prim, std::move(out), {a.id, b.id}, [m, k, n](const BackwardArgs& g) {
        const double* ga = g.out_grad.data().data();
        if (g.in_grads[0]) gemm(false, true, m, k, n, ga, g.in_values[1]->data().data(), 1.0,
                                g.in_grads[0]->data().data());
        if (g.in_grads[1]) gemm(true, false, k, n, m, g.in_values[0]->data().data(), ga, 1.0,
                                g.in_grads[1]->data().data());
    });
}

Var conv2d(Var x, Var w, ConvAttrs attrs) {
    constexpr std::string_view prim = "conv2d";
    Tape& t = tape_of(prim, {x, w});
    check_stride(prim, attrs);
    const auto& sx = x.shape();
    const auto& sw = w.shape();
    require(sx.size() == 4 && sw.size() == 4 && sw[1] == sx[1] && sw[2] == sw[3], prim,
            "input " + shape_str(sx) + " kernel " + shape_str(sw));
    const std::size_t n = sx[0], c = sx[1], h = sx[2], wd = sx[3], o = sw[0], k = sw[2];
    require(h + 2 * attrs.padding >= k && wd + 2 * attrs.padding >= k, prim,
            "kernel " + shape_str(sw) + " larger than padded input " + shape_str(sx));
    const Window win{c, h, wd, (h + 2 * attrs.padding - k) / attrs.stride + 1,
                     (wd + 2 * attrs.padding - k) / attrs.stride + 1, k, attrs.stride,
                     attrs.padding};
    Tensor out({n, o, win.oh, win.ow});
    std::vector<double> cols(win.rows() * win.cols());
    const double* xd = x.value().data().data();
    const double* wdat = w.value().data().data();
    for (std::size_t s = 0; s < n; ++s) {
        im2col(win, xd + s * c * h * wd, cols.data());
        gemm(false, false, o, win.cols(), win.rows(), wdat, cols.data(), 0.0,
             out.data().data() + s * o * win.cols());
    }
    return t.record(prim, std::move(out), {x.id, w.id}, [win, n, o](const BackwardArgs& g) {
        std::vector<double> cols(win.rows() * win.cols());
        const std::size_t in_sz = win.channels * win.ih * win.iw;
        const std::size_t out_sz = o * win.cols();
        for (std::size_t s = 0; s < n; ++s) {
            const double* gout = g.out_grad.data().data() + s * out_sz;
            if (g.in_grads[1]) {
                im2col(win, g.in_values[0]->data().data() + s * in_sz, cols.data());
                gemm(false, true, o, win.rows(), win.cols(), gout, cols.data(), 1.0,
                     g.in_grads[1]->data().data());
            }
            if (g.in_grads[0]) {
                gemm(true, false, win.rows(), win.cols(), o, g.in_values[1]->data().data(), gout,
                     0.0, cols.data());
                col2im(win, cols.data(), g.in_grads[0]->data().data() + s * in_sz);
            }
        }
    });
}

Var conv2d_transpose(Var x, Var w, ConvAttrs attrs) {
    constexpr std::string_view prim = "conv2d_transpose";
    Tape& t = tape_of(prim, {x, w});
    check_stride(prim, attrs);
    const auto& sx = x.shape();
    const auto& sw = w.shape();
    require(sx.size() == 4 && sw.size() == 4 && sw[0] == sx[1] && sw[2] == sw[3], prim,
            "input " + shape_str(sx) + " kernel " + shape_str(sw));
    require(attrs.output_padding < attrs.stride, prim, "output_padding must be below stride");
    const std::size_t n = sx[0], c = sx[1], h = sx[2], wd = sx[3], o = sw[1], k = sw[2];
    const long oh = static_cast<long>((h - 1) * attrs.stride + k + attrs.output_padding) -
                    2 * static_cast<long>(attrs.padding);
    const long ow = static_cast<long>((wd - 1) * attrs.stride + k + attrs.output_padding) -
                    2 * static_cast<long>(attrs.padding);
    require(oh > 0 && ow > 0, prim, "empty output for input " + shape_str(sx));
    // Window over the *output* image whose grid is the input's spatial extent.
    const Window win{o, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), h, wd, k,
                     attrs.stride, attrs.padding};
    Tensor out({n, o, win.ih, win.iw});
    std::vector<double> cols(win.rows() * win.cols());
    const double* xd = x.value().data().data();
    const double* wdat = w.value().data().data();
    const std::size_t out_sz = o * win.ih * win.iw;
    for (std::size_t s = 0; s < n; ++s) {
        gemm(true, false, win.rows(), win.cols(), c, wdat, xd + s * c * h * wd, 0.0, cols.data());
        col2im(win, cols.data(), out.data().data() + s * out_sz);
    }
    return t.record(prim, std::move(out), {x.id, w.id}, [win, n, c, out_sz](const BackwardArgs& g) {
        std::vector<double> cols(win.rows() * win.cols());
        const std::size_t in_sz = c * win.cols();
        for (std::size_t s = 0; s < n; ++s) {
            im2col(win, g.out_grad.data().data() + s * out_sz, cols.data());
            if (g.in_grads[0]) {
                gemm(false, false, c, win.cols(), win.rows(), g.in_values[1]->data().data(),
                     cols.data(), 1.0, g.in_grads[0]->data().data() + s * in_sz);
            }
            if (g.in_grads[1]) {
                gemm(false, true, c, win.rows(), win.cols(),
                     g.in_values[0]->data().data() + s * in_sz, cols.data(), 1.0,
                     g.in_grads[1]->data().data());
            }
        }
    });
}

Var add_bias(Var x, Var b) {
    constexpr std::string_view prim = "add_bias";
    Tape& t = tape_of(prim, {x, b});
    const auto& sx = x.shape();
    require(sx.size() >= 2 && b.shape().size() == 1 && b.shape()[0] == sx[1], prim,
            "input " + shape_str(sx) + " bias " + shape_str(b.shape()));
    const std::size_t n = sx[0], c = sx[1], inner = inner_size(sx, 2);
    Tensor out = x.value();
    auto o = out.data();
    auto bd = b.value().data();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < inner; ++i) o[(s * c + ch) * inner + i] += bd[ch];
    return t.record(prim, std::move(out), {x.id, b.id}, [n, c, inner](const BackwardArgs& g) {
        add_into(g.in_grads[0], g.out_grad);
        if (auto* gb = g.in_grads[1]) {
            auto go = g.out_grad.data();
            auto d = gb->data();
            for (std::size_t s = 0; s < n; ++s)
                for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t i = 0; i < inner; ++i) d[ch] += go[(s * c + ch) * inner + i];
        }
    });
}

Var relu(Var x) {
    return unary_map("relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
                     [](const BackwardArgs& g) {
                         auto d = g.in_grads[0]->data();
                         auto xi = g.in_values[0]->data();
                         auto go = g.out_grad.data();
                         for (std::size_t i = 0; i < d.size(); ++i)
                             if (xi[i] > 0.0) d[i] += go[i];
                     });
}

Var prelu(Var x, Var slope) {
    constexpr std::string_view prim = "prelu";
    Tape& t = tape_of(prim, {x, slope});
    const auto& sx = x.shape();
    require(sx.size() >= 2 && slope.shape().size() == 1 && slope.shape()[0] == sx[1], prim,
            "input " + shape_str(sx) + " slope " + shape_str(slope.shape()));
    const std::size_t n = sx[0], c = sx[1], inner = inner_size(sx, 2);
    Tensor out(sx);
    auto o = out.data();
    auto xi = x.value().data();
    auto a = slope.value().data();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = (s * c + ch) * inner + i;
                o[k] = xi[k] > 0.0 ? xi[k] : a[ch] * xi[k];
            }
    return t.record(prim, std::move(out), {x.id, slope.id}, [n, c, inner](const BackwardArgs& g) {
        auto go = g.out_grad.data();
        auto xi = g.in_values[0]->data();
        auto a = g.in_values[1]->data();
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t ch = 0; ch < c; ++ch)
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t k = (s * c + ch) * inner + i;
                    const bool pos = xi[k] > 0.0;
                    if (g.in_grads[0]) g.in_grads[0]->data()[k] += pos ? go[k] : a[ch] * go[k];
                    if (g.in_grads[1] && !pos) g.in_grads[1]->data()[ch] += go[k] * xi[k];
                }
    });
}

Var sigmoid(Var x) {
    return unary_map(
        "sigmoid", x,
        [](double v) {
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            const double e = std::exp(v);
            return e / (1.0 + e);
        },
        [](const BackwardArgs& g) {
            auto d = g.in_grads[0]->data();
            auto y = g.out_value.data();
            auto go = g.out_grad.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * y[i] * (1.0 - y[i]);
        });
}

Var reshape(Var x, Shape shape) {
    constexpr std::string_view prim = "reshape";
    Tape& t = tape_of(prim, {x});
    require(numel(shape) == x.value().size(), prim,
            shape_str(x.shape()) + " -> " + shape_str(shape));
    return t.record(prim, x.value().reshaped(std::move(shape)), {x.id},
                    [](const BackwardArgs& g) {
                        auto d = g.in_grads[0]->data();
                        auto go = g.out_grad.data();
                        for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i];
                    });
}

Var flatten(Var x) {
    const auto& s = x.shape();
    if (s.size() < 2) throw ShapeError("flatten", "needs a batch axis, got " + shape_str(s));
    return reshape(x, {s[0], inner_size(s, 1)});
}

Var mean(Var x) {
    constexpr std::string_view prim = "mean";
    Tape& t = tape_of(prim, {x});
    double acc = 0.0;
    for (double v : x.value().data()) acc += v;
    const double n = static_cast<double>(x.value().size());
    return t.record(prim, Tensor::scalar(acc / n), {x.id}, [n](const BackwardArgs& g) {
        const double gv = g.out_grad[0] / n;
        for (auto& d : g.in_grads[0]->data()) d += gv;
    });
}

Var add(Var a, Var b) {
    constexpr std::string_view prim = "add";
    Tape& t = tape_of(prim, {a, b});
    require_same(prim, a, b);
    Tensor out = a.value();
    auto o = out.data();
    auto bd = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
    return t.record(prim, std::move(out), {a.id, b.id}, [](const BackwardArgs& g) {
        add_into(g.in_grads[0], g.out_grad);
        add_into(g.in_grads[1], g.out_grad);
    });
}

Var sub(Var a, Var b) {
    constexpr std::string_view prim = "sub";
    Tape& t = tape_of(prim, {a, b});
    require_same(prim, a, b);
    Tensor out = a.value();
    auto o = out.data();
    auto bd = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
    return t.record(prim, std::move(out), {a.id, b.id}, [](const BackwardArgs& g) {
        add_into(g.in_grads[0], g.out_grad);
        if (auto* gb = g.in_grads[1]) {
            auto d = gb->data();
            auto go = g.out_grad.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= go[i];
        }
    });
}

Var mul(Var a, Var b) {
    constexpr std::string_view prim = "mul";
    Tape& t = tape_of(prim, {a, b});
    require_same(prim, a, b);
    Tensor out = a.value();
    auto o = out.data();
    auto bd = b.value().data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
    return t.record(prim, std::move(out), {a.id, b.id}, [](const BackwardArgs& g) {
        auto go = g.out_grad.data();
        for (int side = 0; side < 2; ++side) {
            if (!g.in_grads[side]) continue;
            auto d = g.in_grads[side]->data();
            auto other = g.in_values[1 - side]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += go[i] * other[i];
        }
    });
}

Var scale(Var x, double k) {
    return unary_map("scale", x, [k](double v) { return k * v; }, [k](const BackwardArgs& g) {
        auto d = g.in_grads[0]->data();
        auto go = g.out_grad.data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += k * go[i];
    });
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
    constexpr std::string_view prim = "softmax_cross_entropy";
    Tape& t = tape_of(prim, {logits});
    const auto& s = logits.shape();
    require(s.size() == 2 && labels.size() == s[0], prim,
            "logits " + shape_str(s) + " with " + std::to_string(labels.size()) + " labels");
    const std::size_t n = s[0], c = s[1];
    for (auto y : labels) require(y < c, prim, "label " + std::to_string(y) + " >= classes " + std::to_string(c));
    auto z = logits.value().data();
    // Row-wise softmax probabilities are kept for the backward rule.
    std::vector<double> prob(n * c);
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = z.data() + r * c;
        const double mx = *std::max_element(row, row + c);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) prob[r * c + j] = std::exp(row[j] - mx) / sum;
        loss += std::log(sum) + mx - row[labels[r]];
    }
    std::vector<std::size_t> ys(labels.begin(), labels.end());
    return t.record(prim, Tensor::scalar(loss / static_cast<double>(n)), {logits.id},
                    [prob = std::move(prob), ys = std::move(ys), n, c](const BackwardArgs& g) {
                        const double gv = g.out_grad[0] / static_cast<double>(n);
                        auto d = g.in_grads[0]->data();
                        for (std::size_t r = 0; r < n; ++r)
                            for (std::size_t j = 0; j < c; ++j)
                                d[r * c + j] += gv * (prob[r * c + j] - (j == ys[r] ? 1.0 : 0.0));
                    });
}

Var mse(Var a, Var b) {
    constexpr std::string_view prim = "mse";
    Tape& t = tape_of(prim, {a, b});
    require_same(prim, a, b);
    auto ad = a.value().data();
    auto bd = b.value().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) acc += (ad[i] - bd[i]) * (ad[i] - bd[i]);
    const double n = static_cast<double>(ad.size());
    return t.record(prim, Tensor::scalar(acc / n), {a.id, b.id}, [n](const BackwardArgs& g) {
        const double gv = 2.0 * g.out_grad[0] / n;
        auto ad = g.in_values[0]->data();
        auto bd = g.in_values[1]->data();
        if (g.in_grads[0]) {
            auto d = g.in_grads[0]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += gv * (ad[i] - bd[i]);
        }
        if (g.in_grads[1]) {
            auto d = g.in_grads[1]->data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gv * (ad[i] - bd[i]);
        }
    });
}

Var huber(Var a, Var b, double delta) {
    constexpr std::string_view prim = "huber";
    Tape& t = tape_of(prim, {a, b});
    require_same(prim, a, b);
    if (!(delta > 0.0)) throw std::invalid_argument("huber: delta must be positive");
    auto ad = a.value().data();
    auto bd = b.value().data();
    double acc = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double d = ad[i] - bd[i];
        acc += std::abs(d) <= delta ? 0.5 * d * d : delta * (std::abs(d) - 0.5 * delta);
    }
    const double n = static_cast<double>(ad.size());
    return t.record(prim, Tensor::scalar(acc / n), {a.id, b.id}, [n, delta](const BackwardArgs& g) {
        const double gv = g.out_grad[0] / n;
        auto ad = g.in_values[0]->data();
        auto bd = g.in_values[1]->data();
        for (std::size_t i = 0; i < ad.size(); ++i) {
            const double dd = std::clamp(ad[i] - bd[i], -delta, delta) * gv;
            if (g.in_grads[0]) g.in_grads[0]->data()[i] += dd;
            if (g.in_grads[1]) g.in_grads[1]->data()[i] -= dd;
        }
    });
}

Var channel_mean(Var x) {
    constexpr std::string_view prim = "channel_mean";
    Tape& t = tape_of(prim, {x});
    const auto& s = x.shape();
    require(s.size() >= 3, prim, "needs [N,C,...], got " + shape_str(s));
    const std::size_t n = s[0], c = s[1], inner = inner_size(s, 2);
    Tensor out({n, c});
    auto xi = x.value().data();
    for (std::size_t r = 0; r < n * c; ++r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < inner; ++i) acc += xi[r * inner + i];
        out[r] = acc / static_cast<double>(inner);
    }
    return t.record(prim, std::move(out), {x.id}, [n, c, inner](const BackwardArgs& g) {
        auto d = g.in_grads[0]->data();
        for (std::size_t r = 0; r < n * c; ++r) {
            const double gv = g.out_grad[r] / static_cast<double>(inner);
            for (std::size_t i = 0; i < inner; ++i) d[r * inner + i] += gv;
        }
    });
}

Var concat_cols(Var a, Var b) {
    constexpr std::string_view prim = "concat_cols";
    Tape& t = tape_of(prim, {a, b});
    const auto& sa = a.shape();
    const auto& sb = b.shape();
    require(sa.size() == 2 && sb.size() == 2 && sa[0] == sb[0], prim,
            shape_str(sa) + " ++ " + shape_str(sb));
    const std::size_t n = sa[0], p = sa[1], q = sb[1];
    Tensor out({n, p + q});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a.value().data().data() + r * p, p, out.data().data() + r * (p + q));
        std::copy_n(b.value().data().data() + r * q, q, out.data().data() + r * (p + q) + p);
    }
    return t.record(prim, std::move(out), {a.id, b.id}, [n, p, q](const BackwardArgs& g) {
        auto go = g.out_grad.data();
        for (std::size_t r = 0; r < n; ++r) {
            if (g.in_grads[0])
                for (std::size_t j = 0; j < p; ++j) g.in_grads[0]->data()[r * p + j] += go[r * (p + q) + j];
            if (g.in_grads[1])
                for (std::size_t j = 0; j < q; ++j) g.in_grads[1]->data()[r * q + j] += go[r * (p + q) + p + j];
        }
    });
}

Var mul_channel(Var x, Var s) {
    constexpr std::string_view prim = "mul_channel";
    Tape& t = tape_of(prim, {x, s});
    const auto& sx = x.shape();
    require(sx.size() >= 2 && s.shape() == Shape{sx[0], sx[1]}, prim,
            "input " + shape_str(sx) + " scales " + shape_str(s.shape()));
    const std::size_t nc = sx[0] * sx[1], inner = inner_size(sx, 2);
    Tensor out = x.value();
    auto o = out.data();
    auto sd = s.value().data();
    for (std::size_t r = 0; r < nc; ++r)
        for (std::size_t i = 0; i < inner; ++i) o[r * inner + i] *= sd[r];
    return t.record(prim, std::move(out), {x.id, s.id}, [nc, inner](const BackwardArgs& g) {
        auto go = g.out_grad.data();
        auto xi = g.in_values[0]->data();
        auto sd = g.in_values[1]->data();
        for (std::size_t r = 0; r < nc; ++r) {
            double acc = 0.0;
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = r * inner + i;
                if (g.in_grads[0]) g.in_grads[0]->data()[k] += go[k] * sd[r];
                acc += go[k] * xi[k];
            }
            if (g.in_grads[1]) g.in_grads[1]->data()[r] += acc;
        }
    });
}

Var gather_cols(Var x, std::span<const std::size_t> idx) {
    constexpr std::string_view prim = "gather_cols";
    Tape& t = tape_of(prim, {x});
    const auto& s = x.shape();
    require(s.size() == 2 && idx.size() == s[0], prim,
            shape_str(s) + " with " + std::to_string(idx.size()) + " indices");
    const std::size_t n = s[0], a = s[1];
    for (auto i : idx) require(i < a, prim, "index " + std::to_string(i) + " >= " + std::to_string(a));
    Tensor out({n});
    for (std::size_t r = 0; r < n; ++r) out[r] = x.value()[r * a + idx[r]];
    std::vector<std::size_t> cols(idx.begin(), idx.end());
    return t.record(prim, std::move(out), {x.id}, [cols = std::move(cols), a](const BackwardArgs& g) {
        auto d = g.in_grads[0]->data();
        for (std::size_t r = 0; r < cols.size(); ++r) d[r * a + cols[r]] += g.out_grad[r];
    });
}

Var normalize_power(Var x) {
    constexpr std::string_view prim = "normalize_power";
    Tape& t = tape_of(prim, {x});
    const auto& s = x.shape();
    require(s.size() == 2 && s[1] % 2 == 0, prim, "needs [N, 2s], got " + shape_str(s));
    const std::size_t n = s[0], len = s[1];
    const double symbols = static_cast<double>(len / 2);
    Tensor out(s);
    std::vector<double> power(n);
    auto xi = x.value().data();
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t j = 0; j < len; ++j) acc += xi[r * len + j] * xi[r * len + j];
        if (acc == 0.0) throw std::domain_error("zero-power signal");
        power[r] = acc / symbols;
        const double inv = 1.0 / std::sqrt(power[r]);
        for (std::size_t j = 0; j < len; ++j) out[r * len + j] = xi[r * len + j] * inv;
    }
    return t.record(prim, std::move(out), {x.id},
                    [power = std::move(power), len, symbols](const BackwardArgs& g) {
                        auto d = g.in_grads[0]->data();
                        auto go = g.out_grad.data();
                        auto xi = g.in_values[0]->data();
                        for (std::size_t r = 0; r < power.size(); ++r) {
                            const double inv = 1.0 / std::sqrt(power[r]);
                            double dot = 0.0;
                            for (std::size_t j = 0; j < len; ++j) dot += go[r * len + j] * xi[r * len + j];
                            const double corr = dot * inv / (power[r] * symbols);
                            for (std::size_t j = 0; j < len; ++j)
                                d[r * len + j] += go[r * len + j] * inv - corr * xi[r * len + j];
                        }
                    });
}

namespace {
constexpr std::array kAllPrims{
    Prim::matmul,       Prim::conv2d,       Prim::conv2d_transpose,
    Prim::add_bias,     Prim::relu,         Prim::prelu,
    Prim::sigmoid,      Prim::reshape,      Prim::flatten,
    Prim::mean,         Prim::add,          Prim::sub,
    Prim::mul,          Prim::scale,        Prim::softmax_cross_entropy,
    Prim::mse,          Prim::huber,        Prim::channel_mean,
    Prim::concat_cols,  Prim::mul_channel,  Prim::gather_cols,
    Prim::normalize_power,
};
}  // namespace

std::span<const Prim> all_prims() { return kAllPrims; }

std::string_view prim_name(Prim p) {
    switch (p) {
        case Prim::matmul: return "matmul";
        case Prim::conv2d: return "conv2d";
        case Prim::conv2d_transpose: return "conv2d_transpose";
        case Prim::add_bias: return "add_bias";
        case Prim::relu: return "relu";
        case Prim::prelu: return "prelu";
        case Prim::sigmoid: return "sigmoid";
        case Prim::reshape: return "reshape";
        case Prim::flatten: return "flatten";
        case Prim::mean: return "mean";
        case Prim::add: return "add";
        case Prim::sub: return "sub";
        case Prim::mul: return "mul";
        case Prim::scale: return "scale";
        case Prim::softmax_cross_entropy: return "softmax_cross_entropy";
        case Prim::mse: return "mse";
        case Prim::huber: return "huber";
        case Prim::channel_mean: return "channel_mean";
        case Prim::concat_cols: return "concat_cols";
        case Prim::mul_channel: return "mul_channel";
        case Prim::gather_cols: return "gather_cols";
        case Prim::normalize_power: return "normalize_power";
    }
    return "unknown";
}

Var forward_primitive(Prim prim, std::span<const Var> in, const PrimAttrs& attrs) {
    auto arity = [&](std::size_t k) {
        if (in.size() != k) {
            throw std::invalid_argument(std::string(prim_name(prim)) + ": expected " +
                                        std::to_string(k) + " inputs, got " +
                                        std::to_string(in.size()));
        }
    };
    switch (prim) {
        case Prim::matmul: arity(2); return matmul(in[0], in[1]);
        case Prim::conv2d: arity(2); return conv2d(in[0], in[1], attrs.conv);
        case Prim::conv2d_transpose: arity(2); return conv2d_transpose(in[0], in[1], attrs.conv);
        case Prim::add_bias: arity(2); return add_bias(in[0], in[1]);
        case Prim::relu: arity(1); return relu(in[0]);
        case Prim::prelu: arity(2); return prelu(in[0], in[1]);
        case Prim::sigmoid: arity(1); return sigmoid(in[0]);
        case Prim::reshape: arity(1); return reshape(in[0], attrs.shape);
        case Prim::flatten: arity(1); return flatten(in[0]);
        case Prim::mean: arity(1); return mean(in[0]);
        case Prim::add: arity(2); return add(in[0], in[1]);
        case Prim::sub: arity(2); return sub(in[0], in[1]);
        case Prim::mul: arity(2); return mul(in[0], in[1]);
        case Prim::scale: arity(1); return scale(in[0], attrs.factor);
        case Prim::softmax_cross_entropy: arity(1); return softmax_cross_entropy(in[0], attrs.indices);
        case Prim::mse: arity(2); return mse(in[0], in[1]);
        case Prim::huber: arity(2); return huber(in[0], in[1], attrs.delta);
        case Prim::channel_mean: arity(1); return channel_mean(in[0]);
        case Prim::concat_cols: arity(2); return concat_cols(in[0], in[1]);
        case Prim::mul_channel: arity(2); return mul_channel(in[0], in[1]);
        case Prim::gather_cols: arity(1); return gather_cols(in[0], attrs.indices);
        case Prim::normalize_power: arity(1); return normalize_power(in[0]);
    }
    throw std::invalid_argument("unknown primitive");
}

}  // namespace gocom
