#include "aiacr/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace aiacr::kernels {

namespace {

constexpr int kMr = 4;
constexpr int kNr = 64;
constexpr int kKc = 256;

// Register tile: kMr rows of C, kNr contiguous columns, kc steps of K.
inline void tile_nn(int kc, const float* a, int lda, const float* b, int ldb, float* c, int ldc, bool load) {
    float acc[kMr][kNr];
    for (int i = 0; i < kMr; ++i) {
        for (int j = 0; j < kNr; ++j) acc[i][j] = load ? c[i * ldc + j] : 0.0f;
    }
    for (int p = 0; p < kc; ++p) {
        const float* bp = b + static_cast<std::ptrdiff_t>(p) * ldb;
        const float a0 = a[p];
        const float a1 = a[lda + p];
        const float a2 = a[2 * lda + p];
        const float a3 = a[3 * lda + p];
#pragma omp simd
        for (int j = 0; j < kNr; ++j) {
            const float bv = bp[j];
            acc[0][j] += a0 * bv;
            acc[1][j] += a1 * bv;
            acc[2][j] += a2 * bv;
            acc[3][j] += a3 * bv;
        }
    }
    for (int i = 0; i < kMr; ++i) {
        for (int j = 0; j < kNr; ++j) c[i * ldc + j] = acc[i][j];
    }
}

inline void edge_nn(int mr, int nr, int kc, const float* a, int lda, const float* b, int ldb, float* c, int ldc,
                    bool load) {
    for (int i = 0; i < mr; ++i) {
        float* ci = c + static_cast<std::ptrdiff_t>(i) * ldc;
        if (!load) std::fill(ci, ci + nr, 0.0f);
        for (int p = 0; p < kc; ++p) {
            const float av = a[static_cast<std::ptrdiff_t>(i) * lda + p];
            const float* bp = b + static_cast<std::ptrdiff_t>(p) * ldb;
#pragma omp simd
            for (int j = 0; j < nr; ++j) ci[j] += av * bp[j];
        }
    }
}

}  // namespace

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    if (m <= 0 || n <= 0) return;
    if (k <= 0) {
        if (!accumulate) std::fill(c, c + static_cast<std::ptrdiff_t>(m) * n, 0.0f);
        return;
    }
    const int mb = (m + kMr - 1) / kMr;
    const int nb = (n + kNr - 1) / kNr;
#pragma omp parallel
    for (int k0 = 0; k0 < k; k0 += kKc) {
        const int kc = std::min(kKc, k - k0);
        const bool load = accumulate || k0 > 0;
#pragma omp for collapse(2) schedule(static)
        for (int ib = 0; ib < mb; ++ib) {
            for (int jb = 0; jb < nb; ++jb) {
                const int i0 = ib * kMr;
                const int j0 = jb * kNr;
                const int mr = std::min(kMr, m - i0);
                const int nr = std::min(kNr, n - j0);
                const float* ap = a + static_cast<std::ptrdiff_t>(i0) * k + k0;
                const float* bp = b + static_cast<std::ptrdiff_t>(k0) * n + j0;
                float* cp = c + static_cast<std::ptrdiff_t>(i0) * n + j0;
                if (mr == kMr && nr == kNr) {
                    tile_nn(kc, ap, k, bp, n, cp, n, load);
                } else {
                    edge_nn(mr, nr, kc, ap, k, bp, n, cp, n, load);
                }
            }
        }
    }
}

void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    constexpr int kTi = 4;
    constexpr int kTj = 4;
    constexpr int kLanes = 16;
    const int mb = (m + kTi - 1) / kTi;
    const int nb = (n + kTj - 1) / kTj;
    const int kv = k - k % kLanes;
#pragma omp parallel for collapse(2) schedule(static)
    for (int ib = 0; ib < mb; ++ib) {
        for (int jb = 0; jb < nb; ++jb) {
            const int i0 = ib * kTi;
            const int j0 = jb * kTj;
            const int ti = std::min(kTi, m - i0);
            const int tj = std::min(kTj, n - j0);
            float acc[kTi][kTj][kLanes] = {};
            if (ti == kTi && tj == kTj) {
                for (int p = 0; p < kv; p += kLanes) {
                    for (int i = 0; i < kTi; ++i) {
                        const float* ai = a + static_cast<std::ptrdiff_t>(i0 + i) * k + p;
                        for (int j = 0; j < kTj; ++j) {
                            const float* bj = b + static_cast<std::ptrdiff_t>(j0 + j) * k + p;
#pragma omp simd
                            for (int l = 0; l < kLanes; ++l) acc[i][j][l] += ai[l] * bj[l];
                        }
                    }
                }
            }
            const int vec_end = (ti == kTi && tj == kTj) ? kv : 0;
            for (int i = 0; i < ti; ++i) {
                const float* ai = a + static_cast<std::ptrdiff_t>(i0 + i) * k;
                for (int j = 0; j < tj; ++j) {
                    const float* bj = b + static_cast<std::ptrdiff_t>(j0 + j) * k;
                    float sum = 0.0f;
                    for (int l = 0; l < kLanes; ++l) sum += acc[i][j][l];
                    for (int p = vec_end; p < k; ++p) sum += ai[p] * bj[p];
                    float& out = c[static_cast<std::ptrdiff_t>(i0 + i) * n + j0 + j];
                    out = accumulate ? out + sum : sum;
                }
            }
        }
    }
}

void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c) {
    std::vector<float> at(static_cast<std::size_t>(m) * k);
    for (int p = 0; p < k; ++p) {
        for (int i = 0; i < m; ++i) at[static_cast<std::size_t>(i) * k + p] = a[static_cast<std::size_t>(p) * m + i];
    }
    gemm_nn(m, n, k, at.data(), b, c, false);
}

int conv_output_size(int input, int stride) { return (input + 2 - 3) / stride + 1; }

void im2col(const Tensor& input, int stride, std::span<float> col) {
    const int ho = conv_output_size(input.height, stride);
    const int wo = conv_output_size(input.width, stride);
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    const int rows = input.channels * 9;
    if (col.size() != static_cast<std::size_t>(rows) * plane) {
        fail(ErrorCode::ShapeMismatch, "im2col buffer has the wrong size");
    }
#pragma omp parallel for schedule(static)
    for (int row = 0; row < rows; ++row) {
        const int ci = row / 9;
        const int ky = (row / 3) % 3;
        const int kx = row % 3;
        const float* src = input.channel(ci);
        float* dst = col.data() + static_cast<std::size_t>(row) * plane;
        for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * stride + ky - 1;
            float* drow = dst + static_cast<std::size_t>(oy) * wo;
            if (iy < 0 || iy >= input.height) {
                std::fill(drow, drow + wo, 0.0f);
                continue;
            }
            const float* srow = src + static_cast<std::size_t>(iy) * input.width;
            for (int ox = 0; ox < wo; ++ox) {
                const int ix = ox * stride + kx - 1;
                drow[ox] = (ix >= 0 && ix < input.width) ? srow[ix] : 0.0f;
            }
        }
    }
}

void col2im(std::span<const float> col, int stride, Tensor& grad_input) {
    const int ho = conv_output_size(grad_input.height, stride);
    const int wo = conv_output_size(grad_input.width, stride);
    const std::size_t plane = static_cast<std::size_t>(ho) * wo;
    if (col.size() != static_cast<std::size_t>(grad_input.channels) * 9 * plane) {
        fail(ErrorCode::ShapeMismatch, "col2im buffer has the wrong size");
    }
    std::fill(grad_input.data.begin(), grad_input.data.end(), 0.0f);
#pragma omp parallel for schedule(static)
    for (int ci = 0; ci < grad_input.channels; ++ci) {
        float* dst = grad_input.channel(ci);
        for (int kk = 0; kk < 9; ++kk) {
            const int ky = kk / 3;
            const int kx = kk % 3;
            const float* src = col.data() + (static_cast<std::size_t>(ci) * 9 + kk) * plane;
            for (int oy = 0; oy < ho; ++oy) {
                const int iy = oy * stride + ky - 1;
                if (iy < 0 || iy >= grad_input.height) continue;
                float* drow = dst + static_cast<std::size_t>(iy) * grad_input.width;
                const float* srow = src + static_cast<std::size_t>(oy) * wo;
                for (int ox = 0; ox < wo; ++ox) {
                    const int ix = ox * stride + kx - 1;
                    if (ix >= 0 && ix < grad_input.width) drow[ix] += srow[ox];
                }
            }
        }
    }
}

Tensor conv2d_forward(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
                      int out_channels, int stride) {
    const int kdim = input.channels * 9;
    if (weights.size() != static_cast<std::size_t>(out_channels) * kdim) {
        fail(ErrorCode::ShapeMismatch, "conv weights do not match channel counts");
    }
    Tensor out(out_channels, conv_output_size(input.height, stride), conv_output_size(input.width, stride));
    const int plane = static_cast<int>(out.plane());
    std::vector<float> col(static_cast<std::size_t>(kdim) * plane);
    im2col(input, stride, col);
    gemm_nn(out_channels, plane, kdim, weights.data(), col.data(), out.data.data(), false);
    if (!bias.empty()) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < out_channels; ++co) {
            float* o = out.channel(co);
            for (int i = 0; i < plane; ++i) o[i] += bias[co];
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, std::span<const float> weights, const Tensor& grad_output, int stride,
                     std::span<float> grad_weights, std::span<float> grad_bias, Tensor& grad_input) {
    const int kdim = input.channels * 9;
    const int cout = grad_output.channels;
    const int plane = static_cast<int>(grad_output.plane());
    if (grad_weights.size() != weights.size() || weights.size() != static_cast<std::size_t>(cout) * kdim) {
        fail(ErrorCode::ShapeMismatch, "conv gradient buffers do not match weights");
    }
    std::vector<float> col(static_cast<std::size_t>(kdim) * plane);
    im2col(input, stride, col);
    gemm_nt(cout, kdim, plane, grad_output.data.data(), col.data(), grad_weights.data(), true);
    if (!grad_bias.empty()) {
#pragma omp parallel for schedule(static)
        for (int co = 0; co < cout; ++co) {
            const float* g = grad_output.channel(co);
            float sum = 0.0f;
            for (int i = 0; i < plane; ++i) sum += g[i];
            grad_bias[co] += sum;
        }
    }
    gemm_tn(kdim, plane, cout, weights.data(), grad_output.data.data(), col.data());
    if (!grad_input.same_shape(input)) grad_input = Tensor(input.channels, input.height, input.width);
    col2im(col, stride, grad_input);
}

Tensor instance_norm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                             NormCache* cache) {
    Tensor y(x.channels, x.height, x.width);
    if (cache != nullptr) {
        cache->normalized = Tensor(x.channels, x.height, x.width);
        cache->inv_std.assign(static_cast<std::size_t>(x.channels), 0.0f);
    }
    const std::size_t n = x.plane();
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.channels; ++c) {
        const float* xc = x.channel(c);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += xc[i];
        const double mean = sum / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = xc[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(n);
        const auto inv_std = static_cast<float>(1.0 / std::sqrt(var + kNormEpsilon));
        const auto meanf = static_cast<float>(mean);
        float* yc = y.channel(c);
        float* hc = cache != nullptr ? cache->normalized.channel(c) : nullptr;
        for (std::size_t i = 0; i < n; ++i) {
            const float h = (xc[i] - meanf) * inv_std;
            if (hc != nullptr) hc[i] = h;
            yc[i] = gamma[c] * h + beta[c];
        }
        if (cache != nullptr) cache->inv_std[c] = inv_std;
    }
    return y;
}

void instance_norm_backward(const NormCache& cache, std::span<const float> gamma, const Tensor& grad_output,
                            std::span<float> grad_gamma, std::span<float> grad_beta, Tensor& grad_input) {
    const Tensor& xhat = cache.normalized;
    if (!grad_input.same_shape(xhat)) grad_input = Tensor(xhat.channels, xhat.height, xhat.width);
    const std::size_t n = xhat.plane();
    const auto nf = static_cast<double>(n);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < xhat.channels; ++c) {
        const float* dy = grad_output.channel(c);
        const float* h = xhat.channel(c);
        double sum_dy = 0.0;
        double sum_dy_h = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            sum_dy += dy[i];
            sum_dy_h += static_cast<double>(dy[i]) * h[i];
        }
        grad_gamma[c] += static_cast<float>(sum_dy_h);
        grad_beta[c] += static_cast<float>(sum_dy);
        const double scale = gamma[c] * cache.inv_std[c] / nf;
        float* dx = grad_input.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            dx[i] = static_cast<float>(scale * (nf * dy[i] - sum_dy - h[i] * sum_dy_h));
        }
    }
}

void relu_inplace(Tensor& x) {
    float* d = x.data.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(x.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) d[i] = d[i] > 0.0f ? d[i] : 0.0f;
}

void relu_backward(const Tensor& output, Tensor& grad) {
    const float* o = output.data.data();
    float* g = grad.data.data();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(grad.size());
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) g[i] = o[i] > 0.0f ? g[i] : 0.0f;
}

Tensor upsample2x(const Tensor& x) {
    Tensor y(x.channels, x.height * 2, x.width * 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.channels; ++c) {
        const float* src = x.channel(c);
        float* dst = y.channel(c);
        for (int r = 0; r < y.height; ++r) {
            const float* srow = src + static_cast<std::size_t>(r / 2) * x.width;
            float* drow = dst + static_cast<std::size_t>(r) * y.width;
            for (int col = 0; col < y.width; ++col) drow[col] = srow[col / 2];
        }
    }
    return y;
}

Tensor upsample2x_backward(const Tensor& grad_output) {
    Tensor g(grad_output.channels, grad_output.height / 2, grad_output.width / 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < g.channels; ++c) {
        const float* src = grad_output.channel(c);
        float* dst = g.channel(c);
        for (int r = 0; r < g.height; ++r) {
            const float* s0 = src + static_cast<std::size_t>(2 * r) * grad_output.width;
            const float* s1 = s0 + grad_output.width;
            float* drow = dst + static_cast<std::size_t>(r) * g.width;
            for (int col = 0; col < g.width; ++col) {
                drow[col] = s0[2 * col] + s0[2 * col + 1] + s1[2 * col] + s1[2 * col + 1];
            }
        }
    }
    return g;
}

Tensor concat(const Tensor& a, const Tensor& b) {
    if (a.height != b.height || a.width != b.width) fail(ErrorCode::ShapeMismatch, "concat of mismatched planes");
    Tensor out(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
    return out;
}

void split(const Tensor& grad, int first_channels, Tensor& grad_a, Tensor& grad_b) {
    grad_a = Tensor(first_channels, grad.height, grad.width);
    grad_b = Tensor(grad.channels - first_channels, grad.height, grad.width);
    std::copy(grad.data.begin(), grad.data.begin() + static_cast<std::ptrdiff_t>(grad_a.size()), grad_a.data.begin());
    std::copy(grad.data.begin() + static_cast<std::ptrdiff_t>(grad_a.size()), grad.data.end(), grad_b.data.begin());
}

}  // namespace aiacr::kernels
