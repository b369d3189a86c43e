#include "aiacr/evaluation.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace aiacr {

namespace fs = std::filesystem;
using nlohmann::json;

RevisionTrace simulate_revision(const RevisionNetwork& model, const SliceRecord& slice, const BinaryMask& initial,
                                int max_clicks, Rng& rng) {
    if (max_clicks < 0) fail(ErrorCode::InvalidArgument, "max_clicks must be non-negative");
    if (initial.shape() != slice.gt_mask.shape()) fail(ErrorCode::ShapeMismatch, "initial mask shape differs from the slice");
    const ContourPointSet gt_contour = extract_contour(slice.gt_mask);
    if (gt_contour.empty()) fail(ErrorCode::EmptyGroundTruth, "slice " + slice.id + " has an empty ground truth");

    RevisionTrace t;
    t.slice_id = slice.id;
    t.organ = slice.organ;
    t.provenance = slice.provenance;
    BinaryMask current = initial;
    t.metrics.push_back(evaluate_masks(slice.gt_mask, current, slice.spacing));
    t.masks.push_back(encode_rle(current));
    for (int k = 1; k <= max_clicks; ++k) {
        Click click = oracle_click(gt_contour, extract_contour(current), slice.spacing, rng);
        click.ordinal = k;
        t.clicks.push_back(click);
        const RevisionInput input = make_revision_input(slice.image, current, encode_clicks(t.clicks, slice.image.shape()));
        const auto start = std::chrono::steady_clock::now();
        const ProbabilityMap p = model.forward(input);
        const auto stop = std::chrono::steady_clock::now();
        t.latencies_ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        current = to_mask(p);
        t.metrics.push_back(evaluate_masks(slice.gt_mask, current, slice.spacing));
        t.masks.push_back(encode_rle(current));
    }
    return t;
}

std::vector<MetricReport> replay_metrics(const RevisionTrace& trace, const SliceRecord& slice) {
    std::vector<MetricReport> out;
    for (const auto& m : trace.masks) out.push_back(evaluate_masks(slice.gt_mask, decode_rle(m), slice.spacing));
    return out;
}

std::vector<RevisionTrace> evaluate_manifest(const RevisionNetwork& model, const DatasetManifest& manifest,
                                             const EvalOptions& options) {
    std::vector<RevisionTrace> traces;
    for (std::size_t i : manifest.split_indices(options.split)) {
        const SliceRecord slice = load_slice(manifest, manifest.entries[i]);
        Rng rng = make_rng(options.seed, i);
        const BinaryMask initial = degrade_mask(slice.gt_mask, options.degrade, rng);
        traces.push_back(simulate_revision(model, slice, initial, options.max_clicks, rng));
    }
    return traces;
}

int BenchmarkReport::traces() const {
    int n = 0;
    for (const auto& o : organs) n += o.traces;
    return n;
}

std::vector<ClickMean> overall_from_organs(const std::vector<OrganSummary>& organs, int max_clicks) {
    std::vector<ClickMean> out(static_cast<std::size_t>(max_clicks) + 1);
    int total = 0;
    for (const auto& o : organs) total += o.traces;
    if (total == 0) return out;
    for (std::size_t k = 0; k < out.size(); ++k) {
        double dsc = 0.0;
        double hd = 0.0;
        for (const auto& o : organs) {
            dsc += o.traces * o.by_click.at(k).dsc;
            hd += o.traces * o.by_click.at(k).hd95_mm;
        }
        out[k] = {dsc / total, hd / total};
    }
    return out;
}

BenchmarkReport aggregate(const std::vector<RevisionTrace>& traces, const std::string& dataset,
                          const std::string& checkpoint) {
    if (traces.empty()) fail(ErrorCode::InvalidArgument, "no traces to aggregate");
    BenchmarkReport r;
    r.dataset = dataset;
    r.checkpoint = checkpoint;
    r.max_clicks = traces.front().max_clicks();
    std::map<std::string, std::vector<const RevisionTrace*>> by_organ;
    for (const auto& t : traces) {
        if (t.max_clicks() != r.max_clicks || t.metrics.size() != static_cast<std::size_t>(r.max_clicks) + 1) {
            fail(ErrorCode::MixedBudget, "traces use different click budgets");
        }
        by_organ[t.organ].push_back(&t);
    }
    for (const auto& [organ, list] : by_organ) {
        OrganSummary s{organ, static_cast<int>(list.size()), {}};
        for (int k = 0; k <= r.max_clicks; ++k) {
            double dsc = 0.0;
            double hd = 0.0;
            for (const RevisionTrace* t : list) {
                dsc += t->metrics[k].dsc;
                hd += t->metrics[k].hd95_mm;
            }
            s.by_click.push_back({dsc / list.size(), hd / list.size()});
        }
        r.organs.push_back(std::move(s));
    }
    r.overall = overall_from_organs(r.organs, r.max_clicks);
    return r;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

std::string exact(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

constexpr const char* kCsvHeader = "dataset,checkpoint,organ,clicks,traces,dsc,hd95_mm";

}  // namespace

std::string report_csv(const BenchmarkReport& r) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& o : r.organs) {
        for (int k = 0; k <= r.max_clicks; ++k) {
            out << csv_field(r.dataset) << ',' << csv_field(r.checkpoint) << ',' << csv_field(o.organ) << ',' << k << ','
                << o.traces << ',' << exact(o.by_click[k].dsc) << ',' << exact(o.by_click[k].hd95_mm) << '\n';
        }
    }
    return out.str();
}

BenchmarkReport parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) fail(ErrorCode::CorruptHeader, "unexpected report CSV header");
    BenchmarkReport r;
    r.max_clicks = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = csv_split(line);
        if (f.size() != 7) fail(ErrorCode::CorruptHeader, "report CSV rows have 7 fields");
        try {
            r.dataset = f[0];
            r.checkpoint = f[1];
            const int k = std::stoi(f[3]);
            if (r.organs.empty() || r.organs.back().organ != f[2]) {
                r.organs.push_back({f[2], std::stoi(f[4]), {}});
            }
            auto& o = r.organs.back();
            if (k != static_cast<int>(o.by_click.size())) fail(ErrorCode::CorruptHeader, "click rows out of order");
            o.by_click.push_back({std::stod(f[5]), std::stod(f[6])});
            r.max_clicks = std::max(r.max_clicks, k);
        } catch (const std::logic_error&) {
            fail(ErrorCode::CorruptHeader, "malformed number in report CSV");
        }
    }
    for (const auto& o : r.organs) {
        if (static_cast<int>(o.by_click.size()) != r.max_clicks + 1) {
            fail(ErrorCode::MixedBudget, "organs report different click budgets");
        }
    }
    if (r.organs.empty()) fail(ErrorCode::CorruptHeader, "report CSV has no rows");
    r.overall = overall_from_organs(r.organs, r.max_clicks);
    return r;
}

std::string render_table(const std::vector<BenchmarkReport>& reports) {
    std::ostringstream out;
    out << "DSC/HD95(mm)";
    int rows = 0;
    for (const auto& r : reports) {
        out << '\t' << r.dataset;
        rows = std::max(rows, r.max_clicks + 1);
    }
    out << '\n';
    for (int k = 0; k < rows; ++k) {
        out << (k == 0 ? std::string("Initial") : "Click " + std::to_string(k));
        for (const auto& r : reports) {
            char cell[48] = "-";
            if (k <= r.max_clicks) std::snprintf(cell, sizeof cell, "%.2f/%.1f", r.overall[k].dsc, r.overall[k].hd95_mm);
            out << '\t' << cell;
        }
        out << '\n';
    }
    return out.str();
}

namespace {

json means_json(const std::vector<ClickMean>& v) {
    json a = json::array();
    for (std::size_t k = 0; k < v.size(); ++k) a.push_back({{"clicks", k}, {"dsc", v[k].dsc}, {"hd95_mm", v[k].hd95_mm}});
    return a;
}

std::vector<ClickMean> means_from_json(const json& a) {
    std::vector<ClickMean> v;
    for (const auto& e : a) v.push_back({e.at("dsc").get<double>(), e.at("hd95_mm").get<double>()});
    return v;
}

}  // namespace

json to_json(const BenchmarkReport& r) {
    json organs = json::array();
    for (const auto& o : r.organs) organs.push_back({{"organ", o.organ}, {"traces", o.traces}, {"by_click", means_json(o.by_click)}});
    return {{"v", 1},
            {"dataset", r.dataset},
            {"checkpoint", r.checkpoint},
            {"max_clicks", r.max_clicks},
            {"traces", r.traces()},
            {"overall", means_json(r.overall)},
            {"organs", organs}};
}

BenchmarkReport report_from_json(const json& j) {
    if (j.value("v", 0) != 1) fail(ErrorCode::UnsupportedFormat, "unsupported report version");
    try {
        BenchmarkReport r;
        r.dataset = j.at("dataset").get<std::string>();
        r.checkpoint = j.at("checkpoint").get<std::string>();
        r.max_clicks = j.at("max_clicks").get<int>();
        r.overall = means_from_json(j.at("overall"));
        for (const auto& o : j.at("organs")) {
            r.organs.push_back({o.at("organ").get<std::string>(), o.at("traces").get<int>(), means_from_json(o.at("by_click"))});
        }
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptHeader, std::string("malformed report: ") + e.what());
    }
}

json to_json(const RevisionTrace& t) {
    json metrics = json::array();
    for (const auto& m : t.metrics) metrics.push_back(to_json(m));
    json clicks = json::array();
    for (const auto& c : t.clicks) clicks.push_back(to_json(c));
    json masks = json::array();
    for (const auto& m : t.masks) masks.push_back(to_json(m));
    return {{"v", 1},
            {"slice", t.slice_id},
            {"organ", t.organ},
            {"volume", t.provenance.volume_id},
            {"slice_index", t.provenance.slice_index},
            {"offset", {t.provenance.row_offset, t.provenance.col_offset}},
            {"metrics", metrics},
            {"clicks", clicks},
            {"latencies_ms", t.latencies_ms},
            {"masks", masks}};
}

RevisionTrace trace_from_json(const json& j) {
    if (j.value("v", 0) != 1) fail(ErrorCode::UnsupportedFormat, "unsupported trace version");
    try {
        RevisionTrace t;
        t.slice_id = j.at("slice").get<std::string>();
        t.organ = j.at("organ").get<std::string>();
        t.provenance = {j.at("volume").get<std::string>(), j.at("slice_index").get<int>(), j.at("offset").at(0).get<int>(),
                        j.at("offset").at(1).get<int>()};
        for (const auto& m : j.at("metrics")) t.metrics.push_back(metric_report_from_json(m));
        for (const auto& c : j.at("clicks")) t.clicks.push_back(click_from_json(c));
        t.latencies_ms = j.at("latencies_ms").get<std::vector<double>>();
        for (const auto& m : j.at("masks")) t.masks.push_back(rle_from_json(m));
        return t;
    } catch (const json::exception& e) {
        fail(ErrorCode::CorruptHeader, std::string("malformed trace: ") + e.what());
    }
}

void emit_report(const fs::path& dir, const BenchmarkReport& report, const std::vector<RevisionTrace>& traces) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorCode::IoError, "cannot create " + dir.string());
    auto write = [&](const std::string& name, const std::string& text) {
        std::ofstream out(dir / name);
        out << text;
        if (!out) fail(ErrorCode::IoError, "cannot write " + (dir / name).string());
    };
    write("report.csv", report_csv(report));
    write("report.json", to_json(report).dump(2) + "\n");
    write("table.txt", render_table({report}));
    if (!traces.empty()) {
        std::string lines;
        for (const auto& t : traces) lines += to_json(t).dump() + "\n";
        write("traces.jsonl", lines);
    }
}

}  // namespace aiacr
