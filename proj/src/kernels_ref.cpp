#include "aiacr/kernels_ref.hpp"

#include <cmath>

namespace aiacr::kernels_ref {

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double sum = accumulate ? c[i * n + j] : 0.0;
            for (int p = 0; p < k; ++p) sum += static_cast<double>(a[i * k + p]) * b[p * n + j];
            c[i * n + j] = static_cast<float>(sum);
        }
    }
}

Tensor conv2d_forward(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
                      int out_channels, int stride) {
    const int ho = kernels::conv_output_size(input.height, stride);
    const int wo = kernels::conv_output_size(input.width, stride);
    Tensor out(out_channels, ho, wo);
    for (int co = 0; co < out_channels; ++co) {
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                double sum = bias.empty() ? 0.0 : bias[co];
                for (int ci = 0; ci < input.channels; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * stride + ky - 1;
                            const int ix = ox * stride + kx - 1;
                            if (iy < 0 || ix < 0 || iy >= input.height || ix >= input.width) continue;
                            sum += static_cast<double>(weights[((co * input.channels + ci) * 3 + ky) * 3 + kx]) *
                                   input.at(ci, iy, ix);
                        }
                    }
                }
                out.at(co, oy, ox) = static_cast<float>(sum);
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor& input, std::span<const float> weights, const Tensor& grad_output, int stride,
                     std::span<float> grad_weights, std::span<float> grad_bias, Tensor& grad_input) {
    grad_input = Tensor(input.channels, input.height, input.width);
    for (int co = 0; co < grad_output.channels; ++co) {
        for (int oy = 0; oy < grad_output.height; ++oy) {
            for (int ox = 0; ox < grad_output.width; ++ox) {
                const float g = grad_output.at(co, oy, ox);
                if (!grad_bias.empty()) grad_bias[co] += g;
                for (int ci = 0; ci < input.channels; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        for (int kx = 0; kx < 3; ++kx) {
                            const int iy = oy * stride + ky - 1;
                            const int ix = ox * stride + kx - 1;
                            if (iy < 0 || ix < 0 || iy >= input.height || ix >= input.width) continue;
                            const std::size_t w = static_cast<std::size_t>(((co * input.channels + ci) * 3 + ky) * 3 + kx);
                            grad_weights[w] += g * input.at(ci, iy, ix);
                            grad_input.at(ci, iy, ix) += g * weights[w];
                        }
                    }
                }
            }
        }
    }
}

Tensor instance_norm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta) {
    Tensor y(x.channels, x.height, x.width);
    const double n = static_cast<double>(x.plane());
    for (int c = 0; c < x.channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) mean += x.channel(c)[i];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) var += (x.channel(c)[i] - mean) * (x.channel(c)[i] - mean);
        var /= n;
        for (std::size_t i = 0; i < x.plane(); ++i) {
            y.channel(c)[i] = static_cast<float>(gamma[c] * (x.channel(c)[i] - mean) / std::sqrt(var + kernels::kNormEpsilon) + beta[c]);
        }
    }
    return y;
}

void instance_norm_backward(const Tensor& x, std::span<const float> gamma, const Tensor& grad_output,
                            std::span<float> grad_gamma, std::span<float> grad_beta, Tensor& grad_input) {
    grad_input = Tensor(x.channels, x.height, x.width);
    const double n = static_cast<double>(x.plane());
    for (int c = 0; c < x.channels; ++c) {
        const float* xc = x.channel(c);
        const float* dy = grad_output.channel(c);
        double mean = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) mean += xc[i];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) var += (xc[i] - mean) * (xc[i] - mean);
        var /= n;
        const double sd = std::sqrt(var + kernels::kNormEpsilon);
        // Differentiate y_i = gamma (x_i - mu) / sd + beta term by term.
        double dvar = 0.0;
        double dmean = 0.0;
        for (std::size_t i = 0; i < x.plane(); ++i) {
            const double dxhat = dy[i] * gamma[c];
            dvar += dxhat * (xc[i] - mean) * -0.5 / (sd * sd * sd);
            dmean += -dxhat / sd;
            grad_gamma[c] += static_cast<float>(dy[i] * (xc[i] - mean) / sd);
            grad_beta[c] += dy[i];
        }
        for (std::size_t i = 0; i < x.plane(); ++i) {
            const double dxhat = dy[i] * gamma[c];
            grad_input.channel(c)[i] = static_cast<float>(dxhat / sd + dvar * 2.0 * (xc[i] - mean) / n + dmean / n);
        }
    }
}

Tensor upsample2x(const Tensor& x) {
    Tensor y(x.channels, x.height * 2, x.width * 2);
    for (int c = 0; c < y.channels; ++c) {
        for (int r = 0; r < y.height; ++r) {
            for (int col = 0; col < y.width; ++col) y.at(c, r, col) = x.at(c, r / 2, col / 2);
        }
    }
    return y;
}

}  // namespace aiacr::kernels_ref
