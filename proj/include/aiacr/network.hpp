#pragma once

// Click-conditioned U-Net.
//
// Encoder: `depth` stride-2 3x3 conv blocks (conv, instance norm, ReLU) with
// widths doubling from `base_features` and saturating at `max_features`; with
// input_size == 2^depth the last block sees a 1x1 plane, where instance
// normalisation is skipped and a conv bias is used instead. Decoder: nearest
// 2x upsampling, concatenation with the matching encoder output, then a
// stride-1 conv block. The head upsamples to full resolution, concatenates
// the raw input channels and applies a biased 3x3 conv and a sigmoid.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aiacr/click.hpp"
#include "aiacr/geometry.hpp"
#include "aiacr/kernels.hpp"
#include "aiacr/tensor.hpp"

namespace aiacr {

struct NetworkConfig {
    int in_channels = 3;
    int out_channels = 1;
    int base_features = 64;
    int max_features = 512;
    int depth = 8;
    int kernel = 3;
    int input_size = 256;

    std::vector<int> encoder_widths() const;
    /// Throws InvalidArgument unless the configuration is buildable.
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

/// Image, current mask and click map stacked as a 3 x S x S tensor.
struct RevisionInput {
    Tensor channels;

    Shape shape() const { return {channels.height, channels.width}; }
};

/// Validates ranges: image in [0,1], mask binary, clicks in [0,1].
RevisionInput make_revision_input(const Grid<double>& image, const BinaryMask& mask, const ClickMap& clicks);

/// Sigmoid output, values strictly inside (0, 1).
using ProbabilityMap = Grid<double>;

/// 1 where p >= threshold.
BinaryMask to_mask(const ProbabilityMap& p, double threshold = 0.5);

class RevisionNetwork {
public:
    struct Block {
        int in_channels = 0;
        int out_channels = 0;
        int stride = 1;
        bool norm = true;
        bool relu = true;
        std::size_t weights = 0;
        std::optional<std::size_t> bias;
        std::optional<std::size_t> gamma;
        std::optional<std::size_t> beta;
    };

    struct BlockCache {
        Tensor input;
        Tensor output;
        kernels::NormCache norm;
    };

    struct ForwardCache {
        Tensor input;
        std::vector<BlockCache> encoder;
        std::vector<BlockCache> decoder;  ///< decoder[i] restores encoder[i]'s resolution
        BlockCache head;
    };

    /// Fan-in scaled normal initialisation from `seed`.
    RevisionNetwork(const NetworkConfig& config, std::uint64_t seed);
    RevisionNetwork(const NetworkConfig& config, std::vector<float> parameters);

    const NetworkConfig& config() const { return config_; }
    std::size_t parameter_count() const { return params_.size(); }
    std::span<const float> parameters() const { return params_; }
    std::span<float> parameters() { return params_; }

    /// Inference; safe to call concurrently on a shared instance.
    ProbabilityMap forward(const RevisionInput& input) const;
    /// Pre-sigmoid output. Fills `cache` for backward when non-null.
    Tensor forward_logits(const Tensor& input, ForwardCache* cache) const;
    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
    void backward(const ForwardCache& cache, const Tensor& grad_logits, std::span<float> grads) const;

    const std::vector<Block>& encoder_blocks() const { return encoder_; }
    const std::vector<Block>& decoder_blocks() const { return decoder_; }
    const Block& head_block() const { return head_; }

private:
    void build_layout();
    Tensor run_block(const Block& block, const Tensor& x, BlockCache* cache) const;
    Tensor backprop_block(const Block& block, const BlockCache& cache, Tensor grad, std::span<float> grads) const;

    NetworkConfig config_;
    std::vector<Block> encoder_;
    std::vector<Block> decoder_;
    Block head_;
    std::vector<float> params_;
};

/// Parameter count implied by a configuration, without allocating a network.
std::size_t parameter_count(const NetworkConfig& config);

/// Logits -> probabilities; clamps into the open interval.
ProbabilityMap sigmoid_map(const Tensor& logits);

}  // namespace aiacr
