#include "aiacr/training.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "aiacr/checkpoint.hpp"
#include "aiacr/serialization.hpp"

namespace aiacr {

namespace fs = std::filesystem;
using nlohmann::json;

void DegradeParams::validate() const {
    if (max_shift < 0 || max_morph < 0 || max_notches < 0 || max_notch_radius < 0) {
        fail(ErrorCode::InvalidArgument, "degrade magnitudes must be non-negative");
    }
    if (max_notches > 0 && max_notch_radius < 2) {
        fail(ErrorCode::InvalidArgument, "notches need max_notch_radius >= 2");
    }
}

BinaryMask degrade_mask(const BinaryMask& gt, const DegradeParams& params, Rng& rng) {
    params.validate();
    if (gt.empty()) fail(ErrorCode::EmptyGroundTruth, "cannot degrade an empty mask");
    auto draw = [&rng](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };

    const int dr = draw(-params.max_shift, params.max_shift);
    const int dc = draw(-params.max_shift, params.max_shift);
    BinaryMask out = shift(gt, dr, dc);
    const int morph = draw(-params.max_morph, params.max_morph);
    out = morph >= 0 ? dilate(out, morph) : erode(out, -morph);

    const int notches = params.max_notches > 0 ? draw(0, params.max_notches) : 0;
    for (int k = 0; k < notches; ++k) {
        const ContourPointSet contour = extract_contour(out);
        if (contour.empty()) break;
        const Point centre =
            contour.points()[std::uniform_int_distribution<std::size_t>(0, contour.size() - 1)(rng)];
        const int radius = draw(2, params.max_notch_radius);
        for (int r = std::max(0, centre.row - radius); r <= std::min(out.height() - 1, centre.row + radius); ++r) {
            for (int c = std::max(0, centre.col - radius); c <= std::min(out.width() - 1, centre.col + radius); ++c) {
                const int a = r - centre.row;
                const int b = c - centre.col;
                if (a * a + b * b <= radius * radius) out.set(r, c, false);
            }
        }
    }
    return out;
}

void RolloutConfig::validate() const {
    if (max_prior_rounds < 0 || max_prior_rounds > kMaxPriorRounds) {
        fail(ErrorCode::InvalidArgument, "max_prior_rounds must lie in [0, 5]");
    }
    degrade.validate();
}

OnlineSample build_online_sample(const TrainingSample& sample, const RevisionNetwork& model,
                                 const RolloutConfig& rollout, const ClickSampling& sampling, Rng& rng) {
    rollout.validate();
    const Shape shape = sample.image.shape();
    if (sample.gt_mask.shape() != shape || sample.initial_mask.shape() != shape) {
        fail(ErrorCode::ShapeMismatch, "training sample grids must share a shape");
    }
    const ContourPointSet gt_contour = extract_contour(sample.gt_mask);
    if (gt_contour.empty()) fail(ErrorCode::EmptyGroundTruth, "training sample has an empty ground truth");

    OnlineSample out;
    out.prior_rounds = std::uniform_int_distribution<int>(0, rollout.max_prior_rounds)(rng);
    BinaryMask current = sample.initial_mask;
    std::vector<Click> clicks;
    for (int round = 0; round <= out.prior_rounds; ++round) {
        Click click = training_click(gt_contour, extract_contour(current), sampling, rng);
        click.ordinal = static_cast<int>(clicks.size()) + 1;
        if (!rollout.clicks_accumulate) clicks.clear();
        clicks.push_back(click);
        if (round == out.prior_rounds) break;
        const ProbabilityMap p = model.forward(make_revision_input(sample.image, current, encode_clicks(clicks, shape)));
        current = to_mask(p);
    }
    out.input = make_revision_input(sample.image, current, encode_clicks(clicks, shape));
    out.supervision = sample.gt_mask;
    out.clicks = std::move(clicks);
    return out;
}

void TrainConfig::validate() const {
    network.validate();
    schedule.validate();
    rollout.validate();
    if (!(sampling.temperature > 0.0)) fail(ErrorCode::InvalidArgument, "temperature must be positive");
    if (checkpoint_every < 1) fail(ErrorCode::InvalidArgument, "checkpoint_every must be positive");
    if (schedule.batch_size < 1) fail(ErrorCode::InvalidArgument, "batch_size must be positive");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
    std::istringstream in(value);
    T out{};
    in >> out;
    if (!in || !(in >> std::ws).eof()) fail(ErrorCode::InvalidArgument, "bad value for " + key + ": '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    fail(ErrorCode::InvalidArgument, "bad boolean for " + key + ": '" + value + "'");
}

std::vector<LrStep> parse_steps(const std::string& value) {
    std::vector<LrStep> steps;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) fail(ErrorCode::InvalidArgument, "lr_steps entries look like 'iteration:rate'");
        steps.push_back({parse_number<std::int64_t>("lr_steps", trim(item.substr(0, colon))),
                         parse_number<double>("lr_steps", trim(item.substr(colon + 1)))});
    }
    return steps;
}

json rollout_json(const RolloutConfig& r) {
    return {{"max_prior_rounds", r.max_prior_rounds},
            {"clicks_accumulate", r.clicks_accumulate},
            {"max_shift", r.degrade.max_shift},
            {"max_morph", r.degrade.max_morph},
            {"max_notches", r.degrade.max_notches},
            {"max_notch_radius", r.degrade.max_notch_radius}};
}

std::string run_config_json(const TrainConfig& c) {
    return json{{"network", to_json(c.network)},
                {"schedule", to_json(c.schedule)},
                {"rollout", rollout_json(c.rollout)},
                {"temperature", c.sampling.temperature},
                {"softmax_sign", c.sampling.sign == SoftmaxSign::PreferLargeError ? "large_error" : "small_error"},
                {"checkpoint_every", c.checkpoint_every},
                {"seed", c.seed}}
        .dump();
}

}  // namespace

TrainConfig parse_train_config(std::istream& in, TrainConfig c) {
    using Setter = std::function<void(const std::string&, const std::string&)>;
    auto int_field = [](int& f) -> Setter { return [&f](const auto& k, const auto& v) { f = parse_number<int>(k, v); }; };
    auto real_field = [](double& f) -> Setter {
        return [&f](const auto& k, const auto& v) { f = parse_number<double>(k, v); };
    };
    const std::map<std::string, Setter> setters{
        {"in_channels", int_field(c.network.in_channels)},
        {"out_channels", int_field(c.network.out_channels)},
        {"base_features", int_field(c.network.base_features)},
        {"max_features", int_field(c.network.max_features)},
        {"depth", int_field(c.network.depth)},
        {"kernel", int_field(c.network.kernel)},
        {"input_size", int_field(c.network.input_size)},
        {"beta1", real_field(c.schedule.beta1)},
        {"beta2", real_field(c.schedule.beta2)},
        {"epsilon", real_field(c.schedule.epsilon)},
        {"total_iterations",
         [&](const auto& k, const auto& v) { c.schedule.total_iterations = parse_number<std::int64_t>(k, v); }},
        {"lr_steps", [&](const auto&, const auto& v) { c.schedule.lr_steps = parse_steps(v); }},
        {"batch_size", int_field(c.schedule.batch_size)},
        {"max_prior_rounds", int_field(c.rollout.max_prior_rounds)},
        {"clicks_accumulate", [&](const auto& k, const auto& v) { c.rollout.clicks_accumulate = parse_bool(k, v); }},
        {"max_shift", int_field(c.rollout.degrade.max_shift)},
        {"max_morph", int_field(c.rollout.degrade.max_morph)},
        {"max_notches", int_field(c.rollout.degrade.max_notches)},
        {"max_notch_radius", int_field(c.rollout.degrade.max_notch_radius)},
        {"temperature", real_field(c.sampling.temperature)},
        {"softmax_sign",
         [&](const auto& k, const auto& v) {
             if (v == "large_error") {
                 c.sampling.sign = SoftmaxSign::PreferLargeError;
             } else if (v == "small_error") {
                 c.sampling.sign = SoftmaxSign::PreferSmallError;
             } else {
                 fail(ErrorCode::InvalidArgument, "bad value for " + k + ": '" + v + "'");
             }
         }},
        {"checkpoint_every",
         [&](const auto& k, const auto& v) { c.checkpoint_every = parse_number<std::int64_t>(k, v); }},
        {"seed", [&](const auto& k, const auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
    };

    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        line = trim(line.substr(0, line.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            fail(ErrorCode::InvalidArgument, "line " + std::to_string(number) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const auto it = setters.find(key);
        if (it == setters.end()) fail(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
        it->second(key, trim(line.substr(eq + 1)));
    }
    c.validate();
    return c;
}

TrainConfig load_train_config(const fs::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot open config " + path.string());
    return parse_train_config(in, std::move(base));
}

std::string format_train_config(const TrainConfig& c) {
    std::ostringstream out;
    out.precision(17);
    out << "in_channels = " << c.network.in_channels << '\n'
        << "out_channels = " << c.network.out_channels << '\n'
        << "base_features = " << c.network.base_features << '\n'
        << "max_features = " << c.network.max_features << '\n'
        << "depth = " << c.network.depth << '\n'
        << "kernel = " << c.network.kernel << '\n'
        << "input_size = " << c.network.input_size << '\n'
        << "beta1 = " << c.schedule.beta1 << '\n'
        << "beta2 = " << c.schedule.beta2 << '\n'
        << "epsilon = " << c.schedule.epsilon << '\n'
        << "total_iterations = " << c.schedule.total_iterations << '\n'
        << "lr_steps = ";
    for (std::size_t i = 0; i < c.schedule.lr_steps.size(); ++i) {
        out << (i ? ", " : "") << c.schedule.lr_steps[i].iteration << ':' << c.schedule.lr_steps[i].rate;
    }
    out << '\n'
        << "batch_size = " << c.schedule.batch_size << '\n'
        << "max_prior_rounds = " << c.rollout.max_prior_rounds << '\n'
        << "clicks_accumulate = " << (c.rollout.clicks_accumulate ? "true" : "false") << '\n'
        << "max_shift = " << c.rollout.degrade.max_shift << '\n'
        << "max_morph = " << c.rollout.degrade.max_morph << '\n'
        << "max_notches = " << c.rollout.degrade.max_notches << '\n'
        << "max_notch_radius = " << c.rollout.degrade.max_notch_radius << '\n'
        << "temperature = " << c.sampling.temperature << '\n'
        << "softmax_sign = " << (c.sampling.sign == SoftmaxSign::PreferLargeError ? "large_error" : "small_error")
        << '\n'
        << "checkpoint_every = " << c.checkpoint_every << '\n'
        << "seed = " << c.seed << '\n';
    return out.str();
}

SampleGradient balanced_loss_gradient(const Tensor& logits, const BinaryMask& gt) {
    const ProbabilityMap p = sigmoid_map(logits);
    const LossValue d = dice_loss(p, gt);
    const LossValue h = hd_loss(p, gt);
    SampleGradient out{balanced_total(d.value, h.value), Tensor(1, logits.height, logits.width)};
    const double w = out.loss.balance_weight;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = p.values()[i];
        out.grad_logits.data[i] = static_cast<float>((d.grad.values()[i] + w * h.grad.values()[i]) * q * (1.0 - q));
    }
    return out;
}

namespace {

void dump_nonfinite(const fs::path& out_dir, std::int64_t iteration, const ManifestEntry& entry,
                    const OnlineSample& sample, const Tensor& logits, const LossBreakdown& loss) {
    std::size_t bad = 0;
    float lo = INFINITY;
    float hi = -INFINITY;
    for (float v : logits.data) {
        if (!std::isfinite(v)) {
            ++bad;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    json clicks = json::array();
    for (const Click& c : sample.clicks) clicks.push_back(to_json(c));
    const json dump{{"v", 1},
                    {"iteration", iteration},
                    {"slice", entry.id},
                    {"organ", entry.organ},
                    {"prior_rounds", sample.prior_rounds},
                    {"clicks", clicks},
                    {"dice_loss", std::isfinite(loss.dice_loss) ? json(loss.dice_loss) : json(nullptr)},
                    {"hd_loss", std::isfinite(loss.hd_loss) ? json(loss.hd_loss) : json(nullptr)},
                    {"nonfinite_logits", bad},
                    {"logit_min", std::isfinite(lo) ? json(lo) : json(nullptr)},
                    {"logit_max", std::isfinite(hi) ? json(hi) : json(nullptr)},
                    {"input_mask", to_json(encode_rle(to_mask(ProbabilityMap(
                                       {sample.input.channels.height, sample.input.channels.width},
                                       std::vector<double>(sample.input.channels.channel(1),
                                                           sample.input.channels.channel(1) +
                                                               sample.input.channels.plane())))))}};
    std::ofstream(out_dir / "nonfinite_dump.json") << dump.dump(2) << '\n';
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const TrainConfig& config, const fs::path& out_dir,
                  const TrainOptions& options) {
    config.validate();
    const std::vector<std::size_t> pool = manifest.split_indices("train");
    if (pool.empty()) fail(ErrorCode::InvalidArgument, "manifest has no training entries");
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + out_dir.string() + ": " + ec.message());

    RevisionNetwork net(config.network, config.seed);
    Adam adam(net.parameter_count(), config.schedule.beta1, config.schedule.beta2, config.schedule.epsilon);
    Rng rng = make_rng(config.seed, 1);
    std::int64_t start = 0;
    if (!options.resume.empty()) {
        Checkpoint ck = load_checkpoint(options.resume, &config.network);
        std::copy(ck.parameters.begin(), ck.parameters.end(), net.parameters().begin());
        adam.restore(ck.adam_steps, std::move(ck.adam_m), std::move(ck.adam_v));
        std::istringstream state(ck.rng_state);
        state >> rng;
        if (!state) fail(ErrorCode::CorruptHeader, "checkpoint has no usable rng state");
        start = ck.iteration;
    }

    const fs::path log_path = out_dir / "train_log.jsonl";
    std::ofstream log(log_path, start > 0 ? std::ios::app : std::ios::trunc);
    if (!log) fail(ErrorCode::IoError, "cannot write " + log_path.string());

    auto save = [&](const fs::path& path, std::int64_t iteration) {
        Checkpoint ck;
        ck.network = config.network;
        ck.schedule = config.schedule;
        ck.iteration = iteration;
        ck.seed = config.seed;
        std::ostringstream state;
        state << rng;
        ck.rng_state = state.str();
        ck.run_config = run_config_json(config);
        ck.parameters.assign(net.parameters().begin(), net.parameters().end());
        ck.adam_steps = adam.steps();
        ck.adam_m = adam.first_moment();
        ck.adam_v = adam.second_moment();
        save_checkpoint(path, ck);
    };

    TrainResult result;
    std::vector<float> grads(net.parameter_count());
    const int batch = config.schedule.batch_size;
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    for (std::int64_t it = start; it < config.schedule.total_iterations; ++it) {
        const double lr = lr_at(config.schedule, it);
        std::fill(grads.begin(), grads.end(), 0.0f);
        IterationLog entry_log{it, lr, {}};
        for (int b = 0; b < batch; ++b) {
            const ManifestEntry& entry = manifest.entries[pool[pick(rng)]];
            SliceRecord slice = load_slice(manifest, entry);
            TrainingSample sample{std::move(slice.image), std::move(slice.gt_mask), entry.organ, {}};
            sample.initial_mask = degrade_mask(sample.gt_mask, config.rollout.degrade, rng);
            const OnlineSample online = build_online_sample(sample, net, config.rollout, config.sampling, rng);

            RevisionNetwork::ForwardCache cache;
            const Tensor logits = net.forward_logits(online.input.channels, &cache);
            SampleGradient g = balanced_loss_gradient(logits, online.supervision);
            if (!std::isfinite(g.loss.total)) {
                dump_nonfinite(out_dir, it, entry, online, logits, g.loss);
                fail(ErrorCode::NonFiniteLoss, "non-finite loss at iteration " + std::to_string(it) + " on " +
                                                   entry.id + "; see nonfinite_dump.json");
            }
            if (batch > 1) {
                for (float& v : g.grad_logits.data) v /= static_cast<float>(batch);
            }
            net.backward(cache, g.grad_logits, grads);
            entry_log.loss.dice_loss += g.loss.dice_loss / batch;
            entry_log.loss.hd_loss += g.loss.hd_loss / batch;
            entry_log.loss.balance_weight += g.loss.balance_weight / batch;
            entry_log.loss.total += g.loss.total / batch;
        }
        adam.step(net.parameters(), grads, lr);

        log << json{{"iteration", it},
                    {"lr", lr},
                    {"dice_loss", entry_log.loss.dice_loss},
                    {"hd_loss", entry_log.loss.hd_loss},
                    {"total", entry_log.loss.total}}
                   .dump()
            << '\n';
        log.flush();
        result.log.push_back(entry_log);
        if (options.on_iteration) options.on_iteration(entry_log);

        const std::int64_t done = it + 1;
        if (done % config.checkpoint_every == 0 || done == config.schedule.total_iterations) {
            char name[48];
            std::snprintf(name, sizeof name, "checkpoint_%06lld.ckpt", static_cast<long long>(done));
            save(out_dir / name, done);
        }
    }
    result.checkpoint = out_dir / "model.ckpt";
    save(result.checkpoint, config.schedule.total_iterations);
    return result;
}

}  // namespace aiacr
