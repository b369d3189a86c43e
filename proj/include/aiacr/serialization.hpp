#pragma once

// JSON wire forms shared by checkpoints, manifests, reports and the service.
//
// Masks travel as row-major run-length encodings:
//   {"shape": [H, W], "counts": [n0, n1, n2, ...]}
// where runs alternate background/foreground starting with background (a
// mask whose first pixel is foreground starts with a 0 run).

#include <json.hpp>

#include "aiacr/click.hpp"
#include "aiacr/network.hpp"
#include "aiacr/optim.hpp"

namespace aiacr {

struct RunLengthMask {
    Shape shape;
    std::vector<std::uint32_t> counts;
    bool operator==(const RunLengthMask&) const = default;
};

RunLengthMask encode_rle(const BinaryMask& mask);
BinaryMask decode_rle(const RunLengthMask& rle);

nlohmann::json to_json(const RunLengthMask& rle);
RunLengthMask rle_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Click& click);
Click click_from_json(const nlohmann::json& j);

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const OptimizerSchedule& schedule);
OptimizerSchedule schedule_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricReport& m);
MetricReport metric_report_from_json(const nlohmann::json& j);

}  // namespace aiacr
