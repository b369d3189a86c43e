#include "aiacr/optim.hpp"

#include <cmath>

#include "aiacr/error.hpp"

namespace aiacr {

void OptimizerSchedule::validate() const {
    if (total_iterations <= 0) fail(ErrorCode::InvalidArgument, "total_iterations must be positive");
    if (batch_size != 1) fail(ErrorCode::InvalidArgument, "only batch_size = 1 is supported");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        fail(ErrorCode::InvalidArgument, "Adam betas must lie in [0, 1)");
    }
    if (lr_steps.empty() || lr_steps.front().iteration != 0) {
        fail(ErrorCode::InvalidArgument, "lr_steps must start at iteration 0");
    }
    for (std::size_t i = 0; i < lr_steps.size(); ++i) {
        if (!(lr_steps[i].rate > 0.0)) fail(ErrorCode::InvalidArgument, "learning rates must be positive");
        if (i > 0 && lr_steps[i].iteration <= lr_steps[i - 1].iteration) {
            fail(ErrorCode::InvalidArgument, "lr_steps must be strictly increasing in iteration");
        }
    }
}

double lr_at(const OptimizerSchedule& schedule, std::int64_t iteration) {
    if (iteration < 0 || iteration >= schedule.total_iterations) {
        fail(ErrorCode::OutOfRange, "iteration " + std::to_string(iteration) + " outside the schedule");
    }
    double rate = schedule.lr_steps.front().rate;
    for (const LrStep& s : schedule.lr_steps) {
        if (s.iteration > iteration) break;
        rate = s.rate;
    }
    return rate;
}

Adam::Adam(std::size_t size, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), m_(size, 0.0f), v_(size, 0.0f) {}

void Adam::step(std::span<float> params, std::span<const float> grads, double lr) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
        fail(ErrorCode::ShapeMismatch, "Adam state does not match parameter count");
    }
    ++steps_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
    const auto b1 = static_cast<float>(beta1_);
    const auto b2 = static_cast<float>(beta2_);
    const auto step_size = static_cast<float>(lr / c1);
    const auto inv_c2 = static_cast<float>(1.0 / c2);
    const auto eps = static_cast<float>(epsilon_);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(params.size());
    float* p = params.data();
    const float* g = grads.data();
    float* m = m_.data();
    float* v = v_.data();
#pragma omp parallel for simd schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * g[i];
        v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
        p[i] -= step_size * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
    }
}

void Adam::restore(std::int64_t steps, std::vector<float> m, std::vector<float> v) {
    if (m.size() != m_.size() || v.size() != v_.size()) {
        fail(ErrorCode::ConfigMismatch, "optimizer state size does not match the network");
    }
    steps_ = steps;
    m_ = std::move(m);
    v_ = std::move(v);
}

}  // namespace aiacr
