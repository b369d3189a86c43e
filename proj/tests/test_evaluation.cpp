#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "aiacr/evaluation.hpp"
#include "oracles.hpp"

using namespace aiacr;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_network() {
    NetworkConfig c;
    c.base_features = 2;
    c.max_features = 8;
    c.depth = 6;
    c.input_size = 64;
    return c;
}

SynthParams small_synth() {
    SynthParams p;
    p.size = 64;
    p.min_area = 150;
    p.max_area = 500;
    p.distractors = 1;
    return p;
}

RevisionTrace fake_trace(const std::string& organ, std::vector<double> dsc, std::vector<double> hd) {
    RevisionTrace t;
    t.organ = organ;
    for (std::size_t k = 0; k < dsc.size(); ++k) {
        t.metrics.push_back({dsc[k], hd[k], hd[k]});
        if (k > 0) t.clicks.push_back({0, 0, static_cast<int>(k)});
    }
    return t;
}

BenchmarkReport table_report(const std::string& name, std::vector<ClickMean> means) {
    BenchmarkReport r;
    r.dataset = name;
    r.max_clicks = 3;
    r.organs.push_back({"all", 1, means});
    r.overall = means;
    return r;
}

}  // namespace

TEST_CASE("simulate_revision bookkeeping and oracle optimality") {
    const RevisionNetwork net(small_network(), 4);
    for (int i = 0; i < 5; ++i) {
        const SliceRecord slice = synth_slice(small_synth(), 2, i);
        Rng rng(i);
        const BinaryMask initial = degrade_mask(slice.gt_mask, {}, rng);
        const RevisionTrace t = simulate_revision(net, slice, initial, 3, rng);
        REQUIRE(t.metrics.size() == 4);
        REQUIRE(t.clicks.size() == 3);
        REQUIRE(t.masks.size() == 4);
        CHECK(t.latencies_ms.size() == 3);
        for (double l : t.latencies_ms) CHECK(l > 0.0);
        for (int k = 0; k < 3; ++k) CHECK(t.clicks[k].ordinal == k + 1);
        CHECK(decode_rle(t.masks[0]) == initial);
        CHECK(replay_metrics(t, slice) == t.metrics);

        const ContourPointSet gt = extract_contour(slice.gt_mask);
        for (int k = 0; k < 3; ++k) {
            const ContourPointSet pred = extract_contour(decode_rle(t.masks[k]));
            if (pred.empty()) {
                CHECK(gt.contains(t.clicks[k].point()));
                continue;
            }
            CHECK(t.clicks[k].point() ==
                  oracle::largest_error(gt.points(), pred.points(), slice.spacing.row_mm, slice.spacing.col_mm));
        }
    }
}

TEST_CASE("simulate_revision identity and guards") {
    const RevisionNetwork net(small_network(), 4);
    const SliceRecord slice = synth_slice(small_synth(), 2, 0);
    Rng rng(1);
    const RevisionTrace t = simulate_revision(net, slice, slice.gt_mask, 3, rng);
    CHECK(t.metrics[0].dsc == 1.0);
    CHECK(t.metrics[0].hd95_mm == 0.0);

    SliceRecord empty = slice;
    empty.gt_mask = BinaryMask(slice.gt_mask.shape());
    try {
        simulate_revision(net, empty, slice.gt_mask, 3, rng);
        FAIL("expected EmptyGroundTruth");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyGroundTruth);
    }
}

TEST_CASE("aggregate") {
    const auto one = fake_trace("liver", {0.7, 0.8, 0.85, 0.9}, {5, 4, 3, 2});
    const BenchmarkReport single = aggregate({one});
    REQUIRE(single.overall.size() == 4);
    for (int k = 0; k < 4; ++k) {
        CHECK(single.overall[k].dsc == one.metrics[k].dsc);
        CHECK(single.overall[k].hd95_mm == one.metrics[k].hd95_mm);
    }
    const auto two = fake_trace("liver", {0.7, 0.9, 0.9, 0.9}, {5, 4, 3, 2});
    CHECK(aggregate({one, two}).overall[1].dsc == doctest::Approx(0.85));
    CHECK(aggregate({one, two}).organs.front().traces == 2);

    try {
        aggregate({one, fake_trace("liver", {0.5, 0.6}, {1, 1})});
        FAIL("expected MixedBudget");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MixedBudget);
    }
}

TEST_CASE("overall means equal the pooled per-trace mean") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RevisionTrace> traces;
    const char* organs[] = {"a", "b", "c"};
    for (int i = 0; i < 37; ++i) {
        traces.push_back(fake_trace(organs[i % 3 == 0 ? 0 : (i % 5 == 0 ? 1 : 2)], {u(rng), u(rng), u(rng), u(rng)},
                                    {10 * u(rng), 10 * u(rng), 10 * u(rng), 10 * u(rng)}));
    }
    const BenchmarkReport r = aggregate(traces, "synthetic", "model.ckpt");
    for (int k = 0; k <= 3; ++k) {
        double dsc = 0.0;
        double hd = 0.0;
        for (const auto& t : traces) {
            dsc += t.metrics[k].dsc;
            hd += t.metrics[k].hd95_mm;
        }
        CHECK(std::abs(r.overall[k].dsc - dsc / traces.size()) < 1e-12);
        CHECK(std::abs(r.overall[k].hd95_mm - hd / traces.size()) < 1e-12);
    }

    const std::string csv = report_csv(r);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 3 * 4);
    CHECK(parse_report_csv(csv) == r);
    CHECK(report_from_json(nlohmann::json::parse(to_json(r).dump())) == r);

    BenchmarkReport odd = r;
    odd.dataset = "with, comma \"quoted\"";
    CHECK(parse_report_csv(report_csv(odd)) == odd);
    CHECK_THROWS_AS(parse_report_csv("nope\n"), Error);
}

TEST_CASE("table renders rows per click and one column per report") {
    const std::vector<BenchmarkReport> reports{
        table_report("Validation", {{0.82, 4.3}, {0.87, 3.0}, {0.89, 2.4}, {0.91, 2.1}}),
        table_report("DeepMind", {{0.73, 5.6}, {0.78, 3.6}, {0.83, 2.8}, {0.86, 2.4}}),
        table_report("UTSW", {{0.67, 11.4}, {0.76, 7.5}, {0.82, 5.7}, {0.86, 4.7}}),
    };
    CHECK(render_table(reports) ==
          "DSC/HD95(mm)\tValidation\tDeepMind\tUTSW\n"
          "Initial\t0.82/4.3\t0.73/5.6\t0.67/11.4\n"
          "Click 1\t0.87/3.0\t0.78/3.6\t0.76/7.5\n"
          "Click 2\t0.89/2.4\t0.83/2.8\t0.82/5.7\n"
          "Click 3\t0.91/2.1\t0.86/2.4\t0.86/4.7\n");
}

TEST_CASE("evaluate_manifest is deterministic and traces round trip") {
    const fs::path dir = fs::temp_directory_path() / "aiacr_eval" / "data";
    fs::remove_all(dir);
    const auto manifest = synth_dataset(20, 3, dir, small_synth());
    const RevisionNetwork net(small_network(), 5);
    EvalOptions opt;
    opt.seed = 21;
    const auto a = evaluate_manifest(net, manifest, opt);
    const auto b = evaluate_manifest(net, manifest, opt);
    REQUIRE(a.size() == 2);
    CHECK(aggregate(a) == aggregate(b));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].masks == b[i].masks);
        const RevisionTrace back = trace_from_json(nlohmann::json::parse(to_json(a[i]).dump()));
        CHECK(back.metrics == a[i].metrics);
        CHECK(back.clicks == a[i].clicks);
        CHECK(back.masks == a[i].masks);
    }

    const fs::path out = fs::temp_directory_path() / "aiacr_eval" / "report";
    fs::remove_all(out);
    emit_report(out, aggregate(a, "synthetic", "x"), a);
    for (const char* f : {"report.csv", "report.json", "table.txt", "traces.jsonl"}) CHECK(fs::exists(out / f));
}
