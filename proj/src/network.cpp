#include "aiacr/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace aiacr {

std::vector<int> NetworkConfig::encoder_widths() const {
    std::vector<int> widths;
    long long w = base_features;
    for (int i = 0; i < depth; ++i) {
        widths.push_back(static_cast<int>(std::min<long long>(w, max_features)));
        w *= 2;
    }
    return widths;
}

void NetworkConfig::validate() const {
    if (in_channels != 3) fail(ErrorCode::InvalidArgument, "the revision network takes exactly 3 input channels");
    if (out_channels != 1) fail(ErrorCode::InvalidArgument, "the revision network has exactly 1 output channel");
    if (kernel != 3) fail(ErrorCode::InvalidArgument, "only 3x3 kernels are supported");
    if (base_features < 1 || max_features < base_features) {
        fail(ErrorCode::InvalidArgument, "feature widths must satisfy 1 <= base_features <= max_features");
    }
    if (depth < 1 || depth > 16) fail(ErrorCode::InvalidArgument, "depth must lie in [1, 16]");
    if (input_size != (1 << depth)) {
        fail(ErrorCode::InvalidArgument, "input_size must equal 2^depth so the bottleneck is 1x1");
    }
}

RevisionInput make_revision_input(const Grid<double>& image, const BinaryMask& mask, const ClickMap& clicks) {
    if (image.shape() != mask.shape() || image.shape() != clicks.shape()) {
        fail(ErrorCode::ShapeMismatch, "image, mask and click map must share a shape");
    }
    RevisionInput in{Tensor(3, image.height(), image.width())};
    float* img = in.channels.channel(0);
    float* msk = in.channels.channel(1);
    float* clk = in.channels.channel(2);
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double v = image.values()[i];
        const double c = clicks.values()[i];
        if (!(v >= 0.0 && v <= 1.0)) fail(ErrorCode::OutOfRange, "image intensities must lie in [0, 1]");
        if (!(c >= 0.0 && c <= 1.0)) fail(ErrorCode::OutOfRange, "click map values must lie in [0, 1]");
        img[i] = static_cast<float>(v);
        msk[i] = static_cast<float>(mask.cells().values()[i]);
        clk[i] = static_cast<float>(c);
    }
    return in;
}

BinaryMask to_mask(const ProbabilityMap& p, double threshold) {
    BinaryMask mask(p.shape());
    for (int r = 0; r < p.height(); ++r) {
        for (int c = 0; c < p.width(); ++c) mask.set(r, c, p(r, c) >= threshold);
    }
    return mask;
}

ProbabilityMap sigmoid_map(const Tensor& logits) {
    ProbabilityMap p(Shape{logits.height, logits.width});
    constexpr double kTiny = 1e-12;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double s = 1.0 / (1.0 + std::exp(-static_cast<double>(logits.data[i])));
        p.values()[i] = std::clamp(s, kTiny, 1.0 - kTiny);
    }
    return p;
}

namespace {

struct LayoutBuilder {
    std::size_t next = 0;

    RevisionNetwork::Block conv(int in, int out, int stride, bool norm, bool relu, bool bias) {
        RevisionNetwork::Block b;
        b.in_channels = in;
        b.out_channels = out;
        b.stride = stride;
        b.norm = norm;
        b.relu = relu;
        b.weights = take(static_cast<std::size_t>(out) * in * 9);
        if (bias) b.bias = take(static_cast<std::size_t>(out));
        if (norm) {
            b.gamma = take(static_cast<std::size_t>(out));
            b.beta = take(static_cast<std::size_t>(out));
        }
        return b;
    }

    std::size_t take(std::size_t n) {
        const std::size_t at = next;
        next += n;
        return at;
    }
};

struct Layout {
    std::vector<RevisionNetwork::Block> encoder;
    std::vector<RevisionNetwork::Block> decoder;
    RevisionNetwork::Block head;
    std::size_t size = 0;
};

Layout make_layout(const NetworkConfig& cfg) {
    cfg.validate();
    const auto widths = cfg.encoder_widths();
    LayoutBuilder lb;
    Layout layout;
    int channels = cfg.in_channels;
    int size = cfg.input_size;
    for (int i = 0; i < cfg.depth; ++i) {
        size /= 2;
        const bool norm = size > 1;
        layout.encoder.push_back(lb.conv(channels, widths[i], 2, norm, true, !norm));
        channels = widths[i];
    }
    layout.decoder.resize(static_cast<std::size_t>(cfg.depth - 1));
    for (int i = cfg.depth - 2; i >= 0; --i) {
        layout.decoder[i] = lb.conv(channels + widths[i], widths[i], 1, true, true, false);
        channels = widths[i];
    }
    layout.head = lb.conv(channels + cfg.in_channels, cfg.out_channels, 1, false, false, true);
    layout.size = lb.next;
    return layout;
}

}  // namespace

std::size_t parameter_count(const NetworkConfig& config) { return make_layout(config).size; }

void RevisionNetwork::build_layout() {
    Layout layout = make_layout(config_);
    encoder_ = std::move(layout.encoder);
    decoder_ = std::move(layout.decoder);
    head_ = layout.head;
    if (!params_.empty() && params_.size() != layout.size) {
        fail(ErrorCode::ConfigMismatch, "parameter array does not match the network configuration");
    }
    params_.resize(layout.size, 0.0f);
}

RevisionNetwork::RevisionNetwork(const NetworkConfig& config, std::uint64_t seed) : config_(config) {
    build_layout();
    std::mt19937_64 rng(seed);
    auto init = [&](const Block& b, double gain) {
        const double fan_in = static_cast<double>(b.in_channels) * 9.0;
        std::normal_distribution<double> dist(0.0, std::sqrt(gain / fan_in));
        const std::size_t n = static_cast<std::size_t>(b.out_channels) * b.in_channels * 9;
        for (std::size_t i = 0; i < n; ++i) params_[b.weights + i] = static_cast<float>(dist(rng));
        if (b.gamma) std::fill_n(params_.begin() + static_cast<std::ptrdiff_t>(*b.gamma), b.out_channels, 1.0f);
    };
    for (const Block& b : encoder_) init(b, 2.0);
    for (int i = static_cast<int>(decoder_.size()) - 1; i >= 0; --i) init(decoder_[i], 2.0);
    init(head_, 1.0);
}

RevisionNetwork::RevisionNetwork(const NetworkConfig& config, std::vector<float> parameters)
    : config_(config), params_(std::move(parameters)) {
    if (params_.empty()) fail(ErrorCode::ConfigMismatch, "empty parameter array");
    build_layout();
}

Tensor RevisionNetwork::run_block(const Block& block, const Tensor& x, BlockCache* cache) const {
    const std::span<const float> p(params_);
    const auto weights = p.subspan(block.weights, static_cast<std::size_t>(block.out_channels) * block.in_channels * 9);
    const auto bias = block.bias ? p.subspan(*block.bias, block.out_channels) : std::span<const float>{};
    Tensor y = kernels::conv2d_forward(x, weights, bias, block.out_channels, block.stride);
    if (block.norm) {
        y = kernels::instance_norm_forward(y, p.subspan(*block.gamma, block.out_channels),
                                           p.subspan(*block.beta, block.out_channels),
                                           cache != nullptr ? &cache->norm : nullptr);
    }
    if (block.relu) kernels::relu_inplace(y);
    if (cache != nullptr) {
        cache->input = x;
        cache->output = y;
    }
    return y;
}

Tensor RevisionNetwork::forward_logits(const Tensor& input, ForwardCache* cache) const {
    if (input.channels != config_.in_channels || input.height != config_.input_size ||
        input.width != config_.input_size) {
        fail(ErrorCode::ShapeMismatch, "input must be " + std::to_string(config_.in_channels) + "x" +
                                           std::to_string(config_.input_size) + "x" +
                                           std::to_string(config_.input_size));
    }
    const std::size_t depth = encoder_.size();
    if (cache != nullptr) {
        cache->input = input;
        cache->encoder.assign(depth, {});
        cache->decoder.assign(decoder_.size(), {});
    }

    std::vector<Tensor> skips;
    skips.reserve(depth);
    const Tensor* h = &input;
    for (std::size_t i = 0; i < depth; ++i) {
        skips.push_back(run_block(encoder_[i], *h, cache != nullptr ? &cache->encoder[i] : nullptr));
        h = &skips.back();
    }

    Tensor d = skips.back();
    for (int i = static_cast<int>(decoder_.size()) - 1; i >= 0; --i) {
        Tensor joined = kernels::concat(kernels::upsample2x(d), skips[static_cast<std::size_t>(i)]);
        d = run_block(decoder_[static_cast<std::size_t>(i)], joined,
                      cache != nullptr ? &cache->decoder[static_cast<std::size_t>(i)] : nullptr);
    }
    Tensor joined = kernels::concat(kernels::upsample2x(d), input);
    return run_block(head_, joined, cache != nullptr ? &cache->head : nullptr);
}

ProbabilityMap RevisionNetwork::forward(const RevisionInput& input) const {
    return sigmoid_map(forward_logits(input.channels, nullptr));
}

Tensor RevisionNetwork::backprop_block(const Block& block, const BlockCache& cache, Tensor grad,
                                       std::span<float> grads) const {
    const std::span<const float> p(params_);
    if (block.relu) kernels::relu_backward(cache.output, grad);
    if (block.norm) {
        Tensor pre;
        kernels::instance_norm_backward(cache.norm, p.subspan(*block.gamma, block.out_channels), grad,
                                        grads.subspan(*block.gamma, block.out_channels),
                                        grads.subspan(*block.beta, block.out_channels), pre);
        grad = std::move(pre);
    }
    const std::size_t nw = static_cast<std::size_t>(block.out_channels) * block.in_channels * 9;
    Tensor grad_input;
    kernels::conv2d_backward(cache.input, p.subspan(block.weights, nw), grad, block.stride,
                             grads.subspan(block.weights, nw),
                             block.bias ? grads.subspan(*block.bias, block.out_channels) : std::span<float>{},
                             grad_input);
    return grad_input;
}

void RevisionNetwork::backward(const ForwardCache& cache, const Tensor& grad_logits, std::span<float> grads) const {
    if (grads.size() != params_.size()) fail(ErrorCode::ShapeMismatch, "gradient buffer size mismatch");
    const std::size_t depth = encoder_.size();
    std::vector<Tensor> skip_grads(depth);

    Tensor g = backprop_block(head_, cache.head, grad_logits, grads);
    {
        Tensor up;
        Tensor ignored;
        kernels::split(g, g.channels - config_.in_channels, up, ignored);
        g = kernels::upsample2x_backward(up);
    }
    for (std::size_t i = 0; i < decoder_.size(); ++i) {
        Tensor joined = backprop_block(decoder_[i], cache.decoder[i], std::move(g), grads);
        Tensor up;
        kernels::split(joined, joined.channels - encoder_[i].out_channels, up, skip_grads[i]);
        g = kernels::upsample2x_backward(up);
    }
    for (int i = static_cast<int>(depth) - 1; i >= 0; --i) {
        Tensor& skip = skip_grads[static_cast<std::size_t>(i)];
        if (!skip.data.empty()) {
            for (std::size_t k = 0; k < g.size(); ++k) g.data[k] += skip.data[k];
        }
        g = backprop_block(encoder_[static_cast<std::size_t>(i)], cache.encoder[static_cast<std::size_t>(i)],
                           std::move(g), grads);
    }
}

}  // namespace aiacr
