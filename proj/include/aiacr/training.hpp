#pragma once

// Online training: initial masks are synthesised by degrading the ground
// truth, a few no-gradient self-revision rounds accumulate simulated clicks,
// and the final forward pass is supervised with the ground truth.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "aiacr/dataset.hpp"
#include "aiacr/losses.hpp"
#include "aiacr/network.hpp"
#include "aiacr/optim.hpp"

namespace aiacr {

/// Perturbation magnitudes for synthetic initial contours. Each draw picks a
/// shift in [-max_shift, max_shift]^2, a morphological radius in
/// [-max_morph, max_morph] (negative erodes) and up to max_notches bites of
/// radius [2, max_notch_radius] centred on boundary pixels.
struct DegradeParams {
    int max_shift = 5;
    int max_morph = 3;
    int max_notches = 2;
    int max_notch_radius = 8;

    void validate() const;
    bool operator==(const DegradeParams&) const = default;
};

/// May return an empty mask.
BinaryMask degrade_mask(const BinaryMask& gt, const DegradeParams& params, Rng& rng);

struct RolloutConfig {
    int max_prior_rounds = 2;
    bool clicks_accumulate = true;
    DegradeParams degrade;

    void validate() const;
    bool operator==(const RolloutConfig&) const = default;
};

constexpr int kMaxPriorRounds = 5;

struct TrainingSample {
    Grid<double> image;
    BinaryMask gt_mask;
    std::string organ;
    BinaryMask initial_mask;
};

struct OnlineSample {
    RevisionInput input;
    BinaryMask supervision;
    std::vector<Click> clicks;
    int prior_rounds = 0;
};

/// Draws r in [0, max_prior_rounds], then r+1 times: sample a click from the
/// current mask's error field; between rounds the model revises the mask
/// without gradients. Returns the input of the final (supervised) pass.
OnlineSample build_online_sample(const TrainingSample& sample, const RevisionNetwork& model,
                                 const RolloutConfig& rollout, const ClickSampling& sampling, Rng& rng);

struct TrainConfig {
    NetworkConfig network;
    OptimizerSchedule schedule;
    RolloutConfig rollout;
    ClickSampling sampling;
    std::int64_t checkpoint_every = 5000;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Declarative `key = value` format, keys named after the config fields
/// (base_features, total_iterations, max_prior_rounds, ...). `#` starts a
/// comment. lr_steps is written as "0:1e-4, 50000:1e-5, 75000:1e-6".
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
TrainConfig load_train_config(const std::filesystem::path& path, TrainConfig base = {});
std::string format_train_config(const TrainConfig& config);

struct IterationLog {
    std::int64_t iteration = 0;
    double lr = 0.0;
    LossBreakdown loss;
};

struct TrainOptions {
    std::filesystem::path resume;  ///< checkpoint to continue from, optional
    std::function<void(const IterationLog&)> on_iteration;
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<IterationLog> log;
};

/// Trains on the manifest's "train" split. Writes checkpoint_<iter>.ckpt every
/// checkpoint_every iterations, model.ckpt at completion and train_log.jsonl.
/// On a non-finite loss, writes nonfinite_dump.json and throws NonFiniteLoss.
TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});

/// Gradient of the balanced loss with respect to the logits, for one sample.
struct SampleGradient {
    LossBreakdown loss;
    Tensor grad_logits;
};
SampleGradient balanced_loss_gradient(const Tensor& logits, const BinaryMask& gt);

}  // namespace aiacr
