#pragma once

// OpenMP-parallel compute kernels for the revision network. Every kernel
// writes each output element from exactly one thread in a fixed order, so
// results do not depend on the thread count. Serial reference versions used
// by the tests live in kernels_ref.hpp.
//
// Convolutions are 3x3 with zero padding 1 and stride 1 or 2. Weights are
// laid out [out][in][ky][kx].

#include <span>

#include "aiacr/tensor.hpp"

namespace aiacr::kernels {

/// C(MxN) = A(MxK) B(KxN), or C += A B when `accumulate`.
void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
/// C(MxN) = A(MxK) B(NxK)^T, or C += ... when `accumulate`.
void gemm_nt(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);
/// C(MxN) = A(KxM)^T B(KxN).
void gemm_tn(int m, int n, int k, const float* a, const float* b, float* c);

int conv_output_size(int input, int stride);

/// Unfold 3x3 patches into a (C*9) x (Ho*Wo) matrix.
void im2col(const Tensor& input, int stride, std::span<float> col);
/// Adjoint of im2col: scatter-add columns back into `grad_input`.
void col2im(std::span<const float> col, int stride, Tensor& grad_input);

Tensor conv2d_forward(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
                      int out_channels, int stride);
/// Accumulates into grad_weights / grad_bias (bias may be empty) and
/// overwrites grad_input.
void conv2d_backward(const Tensor& input, std::span<const float> weights, const Tensor& grad_output, int stride,
                     std::span<float> grad_weights, std::span<float> grad_bias, Tensor& grad_input);

struct NormCache {
    Tensor normalized;               ///< x-hat
    std::vector<float> inv_std;      ///< per channel
};

constexpr float kNormEpsilon = 1e-5f;

/// Per-channel instance normalisation with affine gamma/beta.
Tensor instance_norm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                             NormCache* cache);
void instance_norm_backward(const NormCache& cache, std::span<const float> gamma, const Tensor& grad_output,
                            std::span<float> grad_gamma, std::span<float> grad_beta, Tensor& grad_input);

void relu_inplace(Tensor& x);
/// Zeroes gradient entries whose forward output was not positive.
void relu_backward(const Tensor& output, Tensor& grad);

Tensor upsample2x(const Tensor& x);
Tensor upsample2x_backward(const Tensor& grad_output);

Tensor concat(const Tensor& a, const Tensor& b);
/// Splits a concatenated gradient back into its first `first_channels` and the rest.
void split(const Tensor& grad, int first_channels, Tensor& grad_a, Tensor& grad_b);

}  // namespace aiacr::kernels
