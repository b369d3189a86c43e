#pragma once

// Checkpoint container.
//
//   bytes 0..7   magic "AIACRCKP"
//   bytes 8..11  format version, uint32 little-endian (currently 1)
//   bytes 12..19 header length N, uint64 little-endian
//   N bytes      UTF-8 JSON header: network config, schedule, iteration,
//                seed, rng state, array lengths, free-form run config
//   then         parameters, Adam first moment, Adam second moment as
//                float32 little-endian arrays, in that order

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aiacr/network.hpp"
#include "aiacr/optim.hpp"

namespace aiacr {

constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    NetworkConfig network;
    OptimizerSchedule schedule;
    std::int64_t iteration = 0;
    std::uint64_t seed = 0;
    std::string rng_state;   ///< textual mt19937_64 state, may be empty
    std::string run_config;  ///< JSON text of the full run configuration, may be empty
    std::vector<float> parameters;
    std::int64_t adam_steps = 0;
    std::vector<float> adam_m;
    std::vector<float> adam_v;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);

/// Rejects bad magic, unknown versions, truncated payloads and, when
/// `expected` is given, a differing network configuration (ConfigMismatch).
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr);

/// Inference-only view: a network rebuilt from a checkpoint file.
RevisionNetwork load_network(const std::filesystem::path& path);

}  // namespace aiacr
