#pragma once

// Serial, loop-nest reference implementations of the network kernels. They
// follow the textbook definitions directly and exist to check the parallel
// kernels in tests and benchmarks.

#include <span>

#include "aiacr/kernels.hpp"

namespace aiacr::kernels_ref {

void gemm_nn(int m, int n, int k, const float* a, const float* b, float* c, bool accumulate);

/// Direct 3x3 convolution, no unfolding.
Tensor conv2d_forward(const Tensor& input, std::span<const float> weights, std::span<const float> bias,
                      int out_channels, int stride);
void conv2d_backward(const Tensor& input, std::span<const float> weights, const Tensor& grad_output, int stride,
                     std::span<float> grad_weights, std::span<float> grad_bias, Tensor& grad_input);

Tensor instance_norm_forward(const Tensor& x, std::span<const float> gamma, std::span<const float> beta);
void instance_norm_backward(const Tensor& x, std::span<const float> gamma, const Tensor& grad_output,
                            std::span<float> grad_gamma, std::span<float> grad_beta, Tensor& grad_input);

Tensor upsample2x(const Tensor& x);

}  // namespace aiacr::kernels_ref
