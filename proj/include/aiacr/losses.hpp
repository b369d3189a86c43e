#pragma once

// Training losses on the sigmoid output. Each returns its value and the
// gradient with respect to the probabilities.

#include "aiacr/network.hpp"

namespace aiacr {

struct LossValue {
    double value = 0.0;
    Grid<double> grad;  ///< d(value)/d(p), same shape as p
};

/// 1 - (2 sum(p g) + eps) / (sum(p) + sum(g) + eps).
LossValue dice_loss(const ProbabilityMap& p, const BinaryMask& gt, double epsilon = 1.0);

/// Distance-transform Hausdorff loss with exponent 2:
///   mean over pixels of (p - g)^2 (dt_gt^2 + dt_pred^2)
/// where dt_gt / dt_pred are distances to the ground-truth contour and to the
/// contour of to_mask(p). Both transforms are constants for the gradient.
LossValue hd_loss(const ProbabilityMap& p, const BinaryMask& gt);

/// Same loss with caller-supplied distance maps.
LossValue hd_loss(const ProbabilityMap& p, const BinaryMask& gt, const Grid<double>& dt_gt,
                  const Grid<double>& dt_pred);

struct LossBreakdown {
    double dice_loss = 0.0;
    double hd_loss = 0.0;
    double balance_weight = 0.0;
    double total = 0.0;
};

constexpr double kBalanceGuard = 1e-8;

/// Weight w = d / (h + 1e-8), treated as a constant, so that w h matches d.
LossBreakdown balanced_total(double dice_value, double hd_value);

}  // namespace aiacr
