#include "aiacr/losses.hpp"

namespace aiacr {

namespace {

void require_same_shape(const ProbabilityMap& p, const BinaryMask& gt) {
    if (p.shape() != gt.shape()) fail(ErrorCode::ShapeMismatch, "prediction and ground truth shapes differ");
}

}  // namespace

LossValue dice_loss(const ProbabilityMap& p, const BinaryMask& gt, double epsilon) {
    require_same_shape(p, gt);
    double sum_pg = 0.0;
    double sum_p = 0.0;
    double sum_g = 0.0;
    const auto pv = p.values();
    const auto gv = gt.cells().values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
        sum_pg += pv[i] * gv[i];
        sum_p += pv[i];
        sum_g += gv[i];
    }
    const double num = 2.0 * sum_pg + epsilon;
    const double den = sum_p + sum_g + epsilon;

    LossValue out{1.0 - num / den, Grid<double>(p.shape(), 0.0)};
    const double inv_den2 = 1.0 / (den * den);
    for (std::size_t i = 0; i < pv.size(); ++i) {
        out.grad.values()[i] = -(2.0 * gv[i] * den - num) * inv_den2;
    }
    return out;
}

LossValue hd_loss(const ProbabilityMap& p, const BinaryMask& gt, const Grid<double>& dt_gt,
                  const Grid<double>& dt_pred) {
    require_same_shape(p, gt);
    if (dt_gt.shape() != p.shape() || dt_pred.shape() != p.shape()) {
        fail(ErrorCode::ShapeMismatch, "distance maps must match the prediction shape");
    }
    const auto pv = p.values();
    const auto gv = gt.cells().values();
    const double n = static_cast<double>(pv.size());
    LossValue out{0.0, Grid<double>(p.shape(), 0.0)};
    for (std::size_t i = 0; i < pv.size(); ++i) {
        const double residual = pv[i] - gv[i];
        const double weight = dt_gt.values()[i] * dt_gt.values()[i] + dt_pred.values()[i] * dt_pred.values()[i];
        out.value += residual * residual * weight;
        out.grad.values()[i] = 2.0 * residual * weight / n;
    }
    out.value /= n;
    return out;
}

LossValue hd_loss(const ProbabilityMap& p, const BinaryMask& gt) {
    require_same_shape(p, gt);
    return hd_loss(p, gt, contour_distance_map(gt), contour_distance_map(to_mask(p)));
}

LossBreakdown balanced_total(double dice_value, double hd_value) {
    if (dice_value < 0.0 || hd_value < 0.0) fail(ErrorCode::InvalidArgument, "loss terms must be nonnegative");
    LossBreakdown out;
    out.dice_loss = dice_value;
    out.hd_loss = hd_value;
    out.balance_weight = dice_value / (hd_value + kBalanceGuard);
    out.total = dice_value + out.balance_weight * hd_value;
    return out;
}

}  // namespace aiacr
