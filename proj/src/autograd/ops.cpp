#include "ivanet/ops.hpp"

// blocked GEMM for every size, no coefficient-based fallback
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 0
#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace ivanet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

void require_rank(const Tensor& t, std::size_t rank, const char* op, const char* what) {
    if (t.rank() != rank) {
        throw ShapeError(std::string(op) + ": " + what + " must have rank " + std::to_string(rank) + ", got " +
                         shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

struct ConvGeometry {
    std::size_t n, c, h, w;
    std::size_t k, kh, kw;
    std::size_t stride, pad;
    std::size_t oh, ow;

    std::size_t col_rows() const { return c * kh * kw; }
    std::size_t col_cols() const { return oh * ow; }
    bool is_pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// Unfolds one sample [C,H,W] into columns [C*kh*kw, oh*ow].
void im2col(const ConvGeometry& g, const double* x, double* col) {
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.col_cols();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    double* dst = row + oy * g.ow;
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(dst, dst + g.ow, 0.0);
                        continue;
                    }
                    const double* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? 0.0 : src[ix];
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates columns back into one sample.
void col2im_add(const ConvGeometry& g, const double* col, double* x) {
    for (std::size_t c = 0; c < g.c; ++c) {
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const double* row = col + ((c * g.kh + ky) * g.kw + kx) * g.col_cols();
                for (std::size_t oy = 0; oy < g.oh; ++oy) {
                    const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const double* src = row + oy * g.ow;
                    double* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w;
                    for (std::size_t ox = 0; ox < g.ow; ++ox) {
                        const auto ix =
                            static_cast<std::ptrdiff_t>(ox * g.stride + kx) - static_cast<std::ptrdiff_t>(g.pad);
                        if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) dst[ix] += src[ox];
                    }
                }
            }
        }
    }
}

struct AxisTaps {
    std::vector<std::size_t> lo, hi;
    std::vector<double> frac;
};

AxisTaps bilinear_taps(std::size_t in, std::size_t out) {
    AxisTaps t;
    t.lo.resize(out);
    t.hi.resize(out);
    t.frac.resize(out);
    const double ratio = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t d = 0; d < out; ++d) {
        double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        t.lo[d] = lo;
        t.hi[d] = std::min(lo + 1, in - 1);
        t.frac[d] = src - static_cast<double>(lo);
    }
    return t;
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias, Conv2dOptions opts) {
    require_rank(input, 4, "conv2d", "input");
    require_rank(weight, 4, "conv2d", "weight");
    if (input.dim(1) != weight.dim(1)) {
        throw ShapeError("conv2d: input " + shape_str(input.shape()) + " has " + std::to_string(input.dim(1)) +
                         " channels but weight " + shape_str(weight.shape()) + " expects " +
                         std::to_string(weight.dim(1)));
    }
    if (!bias.empty() && bias.shape() != Shape{weight.dim(0)}) {
        throw ShapeError("conv2d: bias " + shape_str(bias.shape()) + " does not match weight " +
                         shape_str(weight.shape()));
    }
    if (opts.stride == 0) throw ArgumentError("conv2d: stride must be positive");

    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), weight.dim(2),
                   weight.dim(3), opts.stride, opts.padding, 0, 0};
    if (g.kh > g.h + 2 * g.pad || g.kw > g.w + 2 * g.pad) {
        throw ShapeError("conv2d: kernel " + shape_str(weight.shape()) + " larger than padded input " +
                         shape_str(input.shape()));
    }
    g.oh = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
    g.ow = (g.w + 2 * g.pad - g.kw) / g.stride + 1;

    const std::size_t in_plane = g.c * g.h * g.w;
    const std::size_t out_plane = g.k * g.col_cols();
    std::vector<double> out(g.n * out_plane);
    std::vector<double> col(g.is_pointwise() ? 0 : g.col_rows() * g.col_cols());
    const ConstMatMap wmat(weight.data().data(), static_cast<Eigen::Index>(g.k),
                           static_cast<Eigen::Index>(g.col_rows()));
    for (std::size_t n = 0; n < g.n; ++n) {
        const double* xs = input.data().data() + n * in_plane;
        const double* cols = xs;
        if (!g.is_pointwise()) {
            im2col(g, xs, col.data());
            cols = col.data();
        }
        const ConstMatMap cmat(cols, static_cast<Eigen::Index>(g.col_rows()), static_cast<Eigen::Index>(g.col_cols()));
        MatMap omat(out.data() + n * out_plane, static_cast<Eigen::Index>(g.k), static_cast<Eigen::Index>(g.col_cols()));
        omat.noalias() = wmat * cmat;
        if (!bias.empty()) {
            for (std::size_t k = 0; k < g.k; ++k) omat.row(static_cast<Eigen::Index>(k)).array() += bias[k];
        }
    }

    Tensor result({g.n, g.k, g.oh, g.ow}, std::move(out));
    return tape.record(
        "conv2d", result, {input, weight, bias}, [input, weight, g](std::span<const double> gout, InputGrads gin) {
            const std::size_t in_plane = g.c * g.h * g.w;
            const std::size_t out_plane = g.k * g.col_cols();
            const auto rows = static_cast<Eigen::Index>(g.col_rows());
            const auto cols_n = static_cast<Eigen::Index>(g.col_cols());
            const auto k = static_cast<Eigen::Index>(g.k);
            const ConstMatMap wmat(weight.data().data(), k, rows);
            std::vector<double> col(g.col_rows() * g.col_cols());
            std::vector<double> dcol(g.col_rows() * g.col_cols());
            for (std::size_t n = 0; n < g.n; ++n) {
                const ConstMatMap gmat(gout.data() + n * out_plane, k, cols_n);
                if (!gin[1].empty()) {
                    const double* cols = input.data().data() + n * in_plane;
                    if (!g.is_pointwise()) {
                        im2col(g, cols, col.data());
                        cols = col.data();
                    }
                    const ConstMatMap cmat(cols, rows, cols_n);
                    MatMap dw(gin[1].data(), k, rows);
                    dw.noalias() += gmat * cmat.transpose();
                }
                if (!gin[2].empty()) {
                    const double* gp = gout.data() + n * out_plane;
                    for (std::size_t c = 0; c < g.k; ++c) {
                        double s = 0;
                        for (std::size_t j = 0; j < g.col_cols(); ++j) s += gp[c * g.col_cols() + j];
                        gin[2][c] += s;
                    }
                }
                if (!gin[0].empty()) {
                    double* dx = gin[0].data() + n * in_plane;
                    if (g.is_pointwise()) {
                        MatMap dxm(dx, rows, cols_n);
                        dxm.noalias() += wmat.transpose() * gmat;
                    } else {
                        MatMap dcm(dcol.data(), rows, cols_n);
                        dcm.noalias() = wmat.transpose() * gmat;
                        col2im_add(g, dcol.data(), dx);
                    }
                }
            }
        });
}

Tensor bilinear_upsample(Tape& tape, const Tensor& input, std::size_t out_h, std::size_t out_w) {
    require_rank(input, 4, "bilinear_upsample", "input");
    if (out_h == 0 || out_w == 0) throw ArgumentError("bilinear_upsample: target dimensions must be positive");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    if (out_h < h || out_w < w) {
        throw ArgumentError("bilinear_upsample: target " + std::to_string(out_h) + "x" + std::to_string(out_w) +
                            " smaller than input " + shape_str(input.shape()));
    }
    const AxisTaps ty = bilinear_taps(h, out_h);
    const AxisTaps tx = bilinear_taps(w, out_w);

    std::vector<double> out(n * c * out_h * out_w);
    const double* in = input.data().data();
    for (std::size_t p = 0; p < n * c; ++p) {
        const double* src = in + p * h * w;
        double* dst = out.data() + p * out_h * out_w;
        for (std::size_t y = 0; y < out_h; ++y) {
            const double fy = ty.frac[y];
            const double* r0 = src + ty.lo[y] * w;
            const double* r1 = src + ty.hi[y] * w;
            for (std::size_t x = 0; x < out_w; ++x) {
                const double fx = tx.frac[x];
                const double top = (1.0 - fx) * r0[tx.lo[x]] + fx * r0[tx.hi[x]];
                const double bot = (1.0 - fx) * r1[tx.lo[x]] + fx * r1[tx.hi[x]];
                dst[y * out_w + x] = (1.0 - fy) * top + fy * bot;
            }
        }
    }
    Tensor result({n, c, out_h, out_w}, std::move(out));
    return tape.record("bilinear_upsample", result, {input},
                       [ty, tx, n, c, h, w, out_h, out_w](std::span<const double> gout, InputGrads gin) {
                           for (std::size_t p = 0; p < n * c; ++p) {
                               const double* g = gout.data() + p * out_h * out_w;
                               double* dx = gin[0].data() + p * h * w;
                               for (std::size_t y = 0; y < out_h; ++y) {
                                   const double fy = ty.frac[y];
                                   double* r0 = dx + ty.lo[y] * w;
                                   double* r1 = dx + ty.hi[y] * w;
                                   for (std::size_t x = 0; x < out_w; ++x) {
                                       const double fx = tx.frac[x];
                                       const double v = g[y * out_w + x];
                                       r0[tx.lo[x]] += (1.0 - fy) * (1.0 - fx) * v;
                                       r0[tx.hi[x]] += (1.0 - fy) * fx * v;
                                       r1[tx.lo[x]] += fy * (1.0 - fx) * v;
                                       r1[tx.hi[x]] += fy * fx * v;
                                   }
                               }
                           }
                       });
}

Tensor relu(Tape& tape, const Tensor& input) {
    std::vector<double> out(input.data().begin(), input.data().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    Tensor result(input.shape(), std::move(out));
    return tape.record("relu", result, {input}, [input](std::span<const double> gout, InputGrads gin) {
        const auto x = input.data();
        for (std::size_t i = 0; i < gout.size(); ++i) {
            if (x[i] > 0.0) gin[0][i] += gout[i];
        }
    });
}

Tensor concat_channels(Tape& tape, std::span<const Tensor> inputs) {
    if (inputs.empty()) throw ArgumentError("concat_channels: no inputs");
    for (const Tensor& t : inputs) require_rank(t, 4, "concat_channels", "input");
    const std::size_t n = inputs[0].dim(0), h = inputs[0].dim(2), w = inputs[0].dim(3);
    std::size_t total_c = 0;
    for (const Tensor& t : inputs) {
        if (t.dim(0) != n || t.dim(2) != h || t.dim(3) != w) {
            throw ShapeError("concat_channels: " + shape_str(t.shape()) + " does not match " +
                             shape_str(inputs[0].shape()) + " outside the channel axis");
        }
        total_c += t.dim(1);
    }
    const std::size_t plane = h * w;
    std::vector<double> out(n * total_c * plane);
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const Tensor& t : inputs) {
        offsets.push_back(off);
        const std::size_t chunk = t.dim(1) * plane;
        for (std::size_t b = 0; b < n; ++b) {
            std::copy_n(t.data().data() + b * chunk, chunk, out.data() + (b * total_c + off) * plane);
        }
        off += t.dim(1);
    }
    std::vector<std::size_t> channels;
    for (const Tensor& t : inputs) channels.push_back(t.dim(1));
    Tensor result({n, total_c, h, w}, std::move(out));
    return tape.record("concat_channels", result, inputs,
                       [offsets, channels, n, total_c, plane](std::span<const double> gout, InputGrads gin) {
                           for (std::size_t i = 0; i < channels.size(); ++i) {
                               if (gin[i].empty()) continue;
                               const std::size_t chunk = channels[i] * plane;
                               for (std::size_t b = 0; b < n; ++b) {
                                   const double* src = gout.data() + (b * total_c + offsets[i]) * plane;
                                   double* dst = gin[i].data() + b * chunk;
                                   for (std::size_t j = 0; j < chunk; ++j) dst[j] += src[j];
                               }
                           }
                       });
}

Tensor softmax(Tape& tape, const Tensor& logits) {
    if (logits.rank() == 0) throw ShapeError("softmax: scalar input");
    const std::size_t m = logits.shape().back();
    const std::size_t rows = logits.numel() / m;
    std::vector<double> out(logits.numel());
    const double* x = logits.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * m;
        double* yr = out.data() + r * m;
        const double mx = *std::max_element(xr, xr + m);
        double z = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            yr[j] = std::exp(xr[j] - mx);
            z += yr[j];
        }
        for (std::size_t j = 0; j < m; ++j) yr[j] /= z;
    }
    Tensor result(logits.shape(), std::move(out));
    return tape.record("softmax", result, {logits}, [result, m, rows](std::span<const double> gout, InputGrads gin) {
        const double* y = result.data().data();
        for (std::size_t r = 0; r < rows; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += gout[r * m + j] * y[r * m + j];
            for (std::size_t j = 0; j < m; ++j) gin[0][r * m + j] += y[r * m + j] * (gout[r * m + j] - dot);
        }
    });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    Tensor result(a.shape(), std::move(out));
    return tape.record("add", result, {a, b}, [](std::span<const double> gout, InputGrads gin) {
        for (std::size_t k = 0; k < 2; ++k) {
            if (gin[k].empty()) continue;
            for (std::size_t i = 0; i < gout.size(); ++i) gin[k][i] += gout[i];
        }
    });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    Tensor result(a.shape(), std::move(out));
    return tape.record("mul", result, {a, b}, [a, b](std::span<const double> gout, InputGrads gin) {
        for (std::size_t i = 0; i < gout.size(); ++i) {
            if (!gin[0].empty()) gin[0][i] += gout[i] * b[i];
            if (!gin[1].empty()) gin[1][i] += gout[i] * a[i];
        }
    });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
    std::vector<double> out(x.data().begin(), x.data().end());
    for (double& v : out) v *= factor;
    Tensor result(x.shape(), std::move(out));
    return tape.record("scale", result, {x}, [factor](std::span<const double> gout, InputGrads gin) {
        for (std::size_t i = 0; i < gout.size(); ++i) gin[0][i] += factor * gout[i];
    });
}

Tensor log(Tape& tape, const Tensor& x) {
    std::vector<double> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!(x[i] > 0.0)) throw InputError("log: non-positive input " + std::to_string(x[i]));
        out[i] = std::log(x[i]);
    }
    Tensor result(x.shape(), std::move(out));
    return tape.record("log", result, {x}, [x](std::span<const double> gout, InputGrads gin) {
        for (std::size_t i = 0; i < gout.size(); ++i) gin[0][i] += gout[i] / x[i];
    });
}

Tensor sum(Tape& tape, const Tensor& x) {
    double s = 0.0;
    for (double v : x.data()) s += v;
    return tape.record("sum", Tensor::scalar(s), {x}, [](std::span<const double> gout, InputGrads gin) {
        for (double& g : gin[0]) g += gout[0];
    });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
    Tensor result = x.reshaped_value(std::move(shape));
    return tape.record("reshape", result, {x}, [](std::span<const double> gout, InputGrads gin) {
        for (std::size_t i = 0; i < gout.size(); ++i) gin[0][i] += gout[i];
    });
}

Tensor anchor_rows(Tape& tape, std::span<const Tensor> levels, std::size_t row_width) {
    if (levels.empty()) throw ArgumentError("anchor_rows: no levels");
    if (row_width == 0) throw ArgumentError("anchor_rows: row width must be positive");
    const std::size_t n = levels[0].dim(0);
    std::size_t total = 0;
    std::vector<std::size_t> row_offset;
    for (const Tensor& t : levels) {
        require_rank(t, 4, "anchor_rows", "level");
        if (t.dim(0) != n) throw ShapeError("anchor_rows: batch mismatch at " + shape_str(t.shape()));
        if (t.dim(1) % row_width != 0) {
            throw ShapeError("anchor_rows: channels of " + shape_str(t.shape()) + " not a multiple of " +
                             std::to_string(row_width));
        }
        row_offset.push_back(total);
        total += t.dim(2) * t.dim(3) * (t.dim(1) / row_width);
    }

    // Visits every (level, batch, channel, cell) with its destination index.
    auto for_each = [levels = std::vector<Tensor>(levels.begin(), levels.end()), row_offset, n, total,
                     row_width](auto&& fn) {
        for (std::size_t l = 0; l < levels.size(); ++l) {
            const Tensor& t = levels[l];
            const std::size_t ch = t.dim(1), h = t.dim(2), w = t.dim(3), a_count = ch / row_width;
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t c = 0; c < ch; ++c) {
                    const std::size_t a = c / row_width, k = c % row_width;
                    for (std::size_t cell = 0; cell < h * w; ++cell) {
                        const std::size_t src = (b * ch + c) * h * w + cell;
                        const std::size_t row = row_offset[l] + cell * a_count + a;
                        fn(l, src, (b * total + row) * row_width + k);
                    }
                }
            }
        }
    };

    std::vector<double> out(n * total * row_width);
    for_each([&](std::size_t l, std::size_t src, std::size_t dst) { out[dst] = levels[l][src]; });
    Tensor result({n, total, row_width}, std::move(out));
    return tape.record("anchor_rows", result, levels, [for_each](std::span<const double> gout, InputGrads gin) {
        for_each([&](std::size_t l, std::size_t src, std::size_t dst) {
            if (!gin[l].empty()) gin[l][src] += gout[dst];
        });
    });
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets,
                             std::span<const double> weights) {
    if (logits.rank() == 0) throw ShapeError("softmax_cross_entropy: scalar logits");
    const std::size_t k = logits.shape().back();
    const std::size_t rows = logits.numel() / k;
    if (targets.size() != rows || weights.size() != rows) {
        throw ShapeError("softmax_cross_entropy: " + std::to_string(rows) + " rows but " +
                         std::to_string(targets.size()) + " targets and " + std::to_string(weights.size()) +
                         " weights");
    }
    std::vector<double> probs(logits.numel(), 0.0);
    double total = 0.0;
    const double* x = logits.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        if (weights[r] == 0.0) continue;
        if (targets[r] < 0 || static_cast<std::size_t>(targets[r]) >= k) {
            throw InputError("softmax_cross_entropy: target " + std::to_string(targets[r]) + " outside [0, " +
                             std::to_string(k) + ")");
        }
        const double* xr = x + r * k;
        const double mx = *std::max_element(xr, xr + k);
        double z = 0.0;
        for (std::size_t j = 0; j < k; ++j) z += std::exp(xr[j] - mx);
        const double lse = mx + std::log(z);
        total += weights[r] * (lse - xr[targets[r]]);
        for (std::size_t j = 0; j < k; ++j) probs[r * k + j] = std::exp(xr[j] - lse);
    }
    std::vector<int> t(targets.begin(), targets.end());
    std::vector<double> w(weights.begin(), weights.end());
    return tape.record("softmax_cross_entropy", Tensor::scalar(total), {logits},
                       [probs = std::move(probs), t = std::move(t), w = std::move(w), k,
                        rows](std::span<const double> gout, InputGrads gin) {
                           for (std::size_t r = 0; r < rows; ++r) {
                               if (w[r] == 0.0) continue;
                               const double s = gout[0] * w[r];
                               for (std::size_t j = 0; j < k; ++j) gin[0][r * k + j] += s * probs[r * k + j];
                               gin[0][r * k + static_cast<std::size_t>(t[r])] -= s;
                           }
                       });
}

Tensor smooth_l1(Tape& tape, const Tensor& pred, std::span<const double> targets, std::span<const double> weights) {
    if (pred.rank() == 0) throw ShapeError("smooth_l1: scalar prediction");
    const std::size_t k = pred.shape().back();
    const std::size_t rows = pred.numel() / k;
    if (targets.size() != pred.numel() || weights.size() != rows) {
        throw ShapeError("smooth_l1: prediction " + shape_str(pred.shape()) + " with " +
                         std::to_string(targets.size()) + " targets and " + std::to_string(weights.size()) +
                         " weights");
    }
    std::vector<double> slope(pred.numel(), 0.0);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        if (weights[r] == 0.0) continue;
        for (std::size_t j = 0; j < k; ++j) {
            const std::size_t i = r * k + j;
            const double d = pred[i] - targets[i];
            const double ad = std::abs(d);
            if (ad < 1.0) {
                total += weights[r] * 0.5 * d * d;
                slope[i] = weights[r] * d;
            } else {
                total += weights[r] * (ad - 0.5);
                slope[i] = weights[r] * (d > 0.0 ? 1.0 : -1.0);
            }
        }
    }
    return tape.record("smooth_l1", Tensor::scalar(total), {pred},
                       [slope = std::move(slope)](std::span<const double> gout, InputGrads gin) {
                           for (std::size_t i = 0; i < slope.size(); ++i) gin[0][i] += gout[0] * slope[i];
                       });
}

}  // namespace ivanet
