#include "aiacr/serialization.hpp"

namespace aiacr {

using nlohmann::json;

RunLengthMask encode_rle(const BinaryMask& mask) {
    RunLengthMask rle{mask.shape(), {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (const std::uint8_t v : mask.cells().values()) {
        if (v != current) {
            rle.counts.push_back(run);
            run = 0;
            current = v;
        }
        ++run;
    }
    rle.counts.push_back(run);
    return rle;
}

BinaryMask decode_rle(const RunLengthMask& rle) {
    if (rle.shape.height <= 0 || rle.shape.width <= 0) fail(ErrorCode::InvalidArgument, "RLE shape must be positive");
    std::vector<std::uint8_t> values;
    values.reserve(rle.shape.area());
    std::uint8_t current = 0;
    for (const std::uint32_t run : rle.counts) {
        if (values.size() + run > rle.shape.area()) fail(ErrorCode::ShapeMismatch, "RLE runs overflow the shape");
        values.insert(values.end(), run, current);
        current ^= 1;
    }
    if (values.size() != rle.shape.area()) fail(ErrorCode::ShapeMismatch, "RLE runs do not cover the shape");
    return BinaryMask::from_values(rle.shape, values);
}

json to_json(const RunLengthMask& rle) {
    return json{{"shape", {rle.shape.height, rle.shape.width}}, {"counts", rle.counts}};
}

RunLengthMask rle_from_json(const json& j) {
    RunLengthMask rle;
    const auto& shape = j.at("shape");
    if (!shape.is_array() || shape.size() != 2) fail(ErrorCode::InvalidArgument, "RLE shape must be [H, W]");
    rle.shape = {shape[0].get<int>(), shape[1].get<int>()};
    rle.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    return rle;
}

json to_json(const Click& click) { return json{{"row", click.row}, {"col", click.col}, {"ordinal", click.ordinal}}; }

Click click_from_json(const json& j) {
    return {j.at("row").get<int>(), j.at("col").get<int>(), j.value("ordinal", 1)};
}

json to_json(const NetworkConfig& c) {
    return json{{"in_channels", c.in_channels},     {"out_channels", c.out_channels}, {"base_features", c.base_features},
                {"max_features", c.max_features},   {"depth", c.depth},               {"kernel", c.kernel},
                {"input_size", c.input_size}};
}

NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.in_channels = j.at("in_channels").get<int>();
    c.out_channels = j.at("out_channels").get<int>();
    c.base_features = j.at("base_features").get<int>();
    c.max_features = j.at("max_features").get<int>();
    c.depth = j.at("depth").get<int>();
    c.kernel = j.at("kernel").get<int>();
    c.input_size = j.at("input_size").get<int>();
    c.validate();
    return c;
}

json to_json(const OptimizerSchedule& s) {
    json steps = json::array();
    for (const auto& step : s.lr_steps) steps.push_back({step.iteration, step.rate});
    return json{{"beta1", s.beta1},
                {"beta2", s.beta2},
                {"epsilon", s.epsilon},
                {"total_iterations", s.total_iterations},
                {"lr_steps", steps},
                {"batch_size", s.batch_size}};
}

OptimizerSchedule schedule_from_json(const json& j) {
    OptimizerSchedule s;
    s.beta1 = j.at("beta1").get<double>();
    s.beta2 = j.at("beta2").get<double>();
    s.epsilon = j.at("epsilon").get<double>();
    s.total_iterations = j.at("total_iterations").get<std::int64_t>();
    s.batch_size = j.at("batch_size").get<int>();
    s.lr_steps.clear();
    for (const auto& step : j.at("lr_steps")) {
        s.lr_steps.push_back({step.at(0).get<std::int64_t>(), step.at(1).get<double>()});
    }
    s.validate();
    return s;
}

json to_json(const MetricReport& m) {
    return json{{"dsc", m.dsc}, {"hd95_mm", m.hd95_mm}, {"max_error_mm", m.max_error_mm}};
}

MetricReport metric_report_from_json(const json& j) {
    return {j.at("dsc").get<double>(), j.at("hd95_mm").get<double>(), j.at("max_error_mm").get<double>()};
}

}  // namespace aiacr
