#pragma once

// Simulated-clinician evaluation and benchmark reports.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "aiacr/dataset.hpp"
#include "aiacr/serialization.hpp"
#include "aiacr/training.hpp"

namespace aiacr {

struct RevisionTrace {
    std::string slice_id;
    std::string organ;
    SliceProvenance provenance;
    std::vector<MetricReport> metrics;  ///< index k = after k clicks
    std::vector<Click> clicks;
    std::vector<double> latencies_ms;   ///< forward pass per click
    std::vector<RunLengthMask> masks;   ///< masks[k] scored by metrics[k]

    int max_clicks() const { return static_cast<int>(clicks.size()); }
};

/// Metrics on `initial`, then `max_clicks` rounds of oracle click + forward
/// on the accumulated click map. `rng` only feeds the empty-prediction
/// fallback of the oracle.
RevisionTrace simulate_revision(const RevisionNetwork& model, const SliceRecord& slice, const BinaryMask& initial,
                                int max_clicks, Rng& rng);

/// Recomputes every metrics entry from the stored masks.
std::vector<MetricReport> replay_metrics(const RevisionTrace& trace, const SliceRecord& slice);

struct EvalOptions {
    int max_clicks = 3;
    std::uint64_t seed = 0;
    DegradeParams degrade;
    std::string split = "test";
};

/// Initial masks come from degrade_mask seeded per manifest entry, so every
/// entry is reproducible on its own.
std::vector<RevisionTrace> evaluate_manifest(const RevisionNetwork& model, const DatasetManifest& manifest,
                                             const EvalOptions& options);

struct ClickMean {
    double dsc = 0.0;
    double hd95_mm = 0.0;
    bool operator==(const ClickMean&) const = default;
};

struct OrganSummary {
    std::string organ;
    int traces = 0;
    std::vector<ClickMean> by_click;
    bool operator==(const OrganSummary&) const = default;
};

struct BenchmarkReport {
    std::string dataset;
    std::string checkpoint;
    int max_clicks = 0;
    std::vector<OrganSummary> organs;  ///< sorted by organ name
    std::vector<ClickMean> overall;    ///< per-trace mean, all organs pooled

    int traces() const;
    bool operator==(const BenchmarkReport&) const = default;
};

/// Unweighted means per organ and over all traces. MixedBudget when the
/// traces disagree on the click budget.
BenchmarkReport aggregate(const std::vector<RevisionTrace>& traces, const std::string& dataset = "",
                          const std::string& checkpoint = "");

/// Trace-count weighted combination of organ means, equal to the pooled
/// per-trace mean.
std::vector<ClickMean> overall_from_organs(const std::vector<OrganSummary>& organs, int max_clicks);

/// One row per organ and click count:
/// dataset,checkpoint,organ,clicks,traces,dsc,hd95_mm
std::string report_csv(const BenchmarkReport& report);
BenchmarkReport parse_report_csv(const std::string& text);

/// Rows Initial / Click k, one column per report, cells "DSC/HD95(mm)".
std::string render_table(const std::vector<BenchmarkReport>& reports);

nlohmann::json to_json(const BenchmarkReport& report);
BenchmarkReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RevisionTrace& trace);
RevisionTrace trace_from_json(const nlohmann::json& j);

/// Writes report.csv, report.json, table.txt and traces.jsonl into `dir`.
void emit_report(const std::filesystem::path& dir, const BenchmarkReport& report,
                 const std::vector<RevisionTrace>& traces = {});

}  // namespace aiacr
