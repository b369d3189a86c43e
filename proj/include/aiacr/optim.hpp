#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace aiacr {

struct LrStep {
    std::int64_t iteration = 0;
    double rate = 0.0;
    bool operator==(const LrStep&) const = default;
};

struct OptimizerSchedule {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t total_iterations = 100000;
    std::vector<LrStep> lr_steps{{0, 1e-4}, {50000, 1e-5}, {75000, 1e-6}};
    int batch_size = 1;

    /// Steps must start at 0, strictly increase and carry positive rates.
    void validate() const;
    bool operator==(const OptimizerSchedule&) const = default;
};

/// Piecewise-constant learning rate; OutOfRange outside [0, total_iterations).
double lr_at(const OptimizerSchedule& schedule, std::int64_t iteration);

/// Adam with bias correction. Moments are kept in float like the parameters.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t size, double beta1, double beta2, double epsilon);

    void step(std::span<float> params, std::span<const float> grads, double lr);

    std::int64_t steps() const { return steps_; }
    const std::vector<float>& first_moment() const { return m_; }
    const std::vector<float>& second_moment() const { return v_; }
    /// Restores saved state; sizes must match.
    void restore(std::int64_t steps, std::vector<float> m, std::vector<float> v);

private:
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double epsilon_ = 1e-8;
    std::int64_t steps_ = 0;
    std::vector<float> m_;
    std::vector<float> v_;
};

}  // namespace aiacr
