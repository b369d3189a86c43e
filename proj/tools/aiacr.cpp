// Command line front end: synth, ingest, train, evaluate, table, serve.

#include <CLI11.hpp>
#include <httplib.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "aiacr/checkpoint.hpp"
#include "aiacr/dataset.hpp"
#include "aiacr/evaluation.hpp"
#include "aiacr/service.hpp"
#include "aiacr/training.hpp"
#include "aiacr/volume.hpp"

namespace fs = std::filesystem;
using namespace aiacr;

namespace {

std::string read_text(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
    if (g_server) g_server->stop();
}

int run_synth(int n, std::uint64_t seed, const fs::path& out, double contrast, double noise) {
    SynthParams p;
    p.contrast = contrast;
    p.noise = noise;
    const auto manifest = synth_dataset(n, seed, out, p);
    std::printf("wrote %zu slices to %s\n", manifest.entries.size(), out.string().c_str());
    return 0;
}

int run_ingest(const std::vector<fs::path>& volumes, const fs::path& out, const std::string& split) {
    std::size_t total = 0;
    for (const auto& dir : volumes) {
        const VolumeRecord volume = ingest_volume(dir);
        const auto slices = crop_axial(volume);
        write_dataset(out, slices, std::vector<std::string>(slices.size(), split));
        std::printf("%s: %zu slices\n", volume.id.c_str(), slices.size());
        total += slices.size();
    }
    std::printf("ingested %zu slices into %s\n", total, out.string().c_str());
    return 0;
}

int run_train(const fs::path& manifest_path, const fs::path& config_path, const fs::path& out,
              std::optional<std::uint64_t> seed, const fs::path& resume, int log_every) {
    TrainConfig config = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
    if (seed) config.seed = *seed;
    const DatasetManifest manifest = load_manifest(manifest_path);
    TrainOptions options;
    options.resume = resume;
    options.on_iteration = [&](const IterationLog& log) {
        if (log_every > 0 && (log.iteration % log_every == 0 || log.iteration == config.schedule.total_iterations)) {
            std::printf("iter %lld lr %.3g loss %.5f dice %.5f hd %.5f w %.4g\n",
                        static_cast<long long>(log.iteration), log.lr, log.loss.total, log.loss.dice_loss,
                        log.loss.hd_loss, log.loss.balance_weight);
            std::fflush(stdout);
        }
    };
    const TrainResult result = train(manifest, config, out, options);
    std::printf("checkpoint %s\n", result.checkpoint.string().c_str());
    return 0;
}

int run_evaluate(const fs::path& checkpoint, const fs::path& manifest_path, int clicks, std::uint64_t seed,
                 const fs::path& out, const std::string& split, std::string dataset) {
    const RevisionNetwork model = load_network(checkpoint);
    const DatasetManifest manifest = load_manifest(manifest_path);
    EvalOptions options;
    options.max_clicks = clicks;
    options.seed = seed;
    options.split = split;
    const auto traces = evaluate_manifest(model, manifest, options);
    if (dataset.empty()) dataset = manifest.root.filename().string();
    const BenchmarkReport report = aggregate(traces, dataset, checkpoint.filename().string());
    emit_report(out, report, traces);
    std::fputs(render_table({report}).c_str(), stdout);
    return 0;
}

int run_table(const std::vector<fs::path>& csvs) {
    std::vector<BenchmarkReport> reports;
    for (const auto& p : csvs) reports.push_back(parse_report_csv(read_text(p)));
    std::fputs(render_table(reports).c_str(), stdout);
    return 0;
}

int run_serve(const fs::path& checkpoint, const std::string& host, int port, int ttl, bool watch) {
    ServiceConfig config;
    config.session_ttl = std::chrono::seconds(ttl);
    RevisionService service(std::make_shared<const RevisionNetwork>(load_network(checkpoint)), config);
    httplib::Server server;
    service.mount(server);

    thread_local std::chrono::steady_clock::time_point started;
    server.set_pre_routing_handler([](const httplib::Request&, httplib::Response&) {
        started = std::chrono::steady_clock::now();
        return httplib::Server::HandlerResponse::Unhandled;
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
        std::fprintf(stderr, "%s %s %d %.1fms\n", req.method.c_str(), req.path.c_str(), res.status, ms);
    });

    std::atomic<bool> running{true};
    std::thread watcher;
    if (watch) {
        watcher = std::thread([&] {
            auto stamp = fs::last_write_time(checkpoint);
            while (running) {
                std::this_thread::sleep_for(std::chrono::seconds(2));
                std::error_code ec;
                const auto now = fs::last_write_time(checkpoint, ec);
                if (ec || now == stamp) continue;
                try {
                    service.swap_model(std::make_shared<const RevisionNetwork>(load_network(checkpoint)));
                    stamp = now;
                    std::fprintf(stderr, "reloaded %s\n", checkpoint.string().c_str());
                } catch (const Error& e) {
                    std::fprintf(stderr, "reload failed: %s\n", e.what());
                }
            }
        });
    }

    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::fprintf(stderr, "listening on %s:%d\n", host.c_str(), port);
    const bool ok = server.listen(host, port);
    running = false;
    if (watcher.joinable()) watcher.join();
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive contour revision: data preparation, training, evaluation and serving"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
    int synth_n = 600;
    std::uint64_t synth_seed = 0;
    fs::path synth_out;
    double contrast = SynthParams{}.contrast;
    double noise = SynthParams{}.noise;
    synth->add_option("--n", synth_n, "Number of slices")->check(CLI::PositiveNumber);
    synth->add_option("--seed", synth_seed);
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--contrast", contrast);
    synth->add_option("--noise", noise);

    auto* ingest = app.add_subcommand("ingest", "Crop NIfTI volumes into 256x256 slices");
    std::vector<fs::path> volumes;
    fs::path ingest_out;
    std::string ingest_split = "train";
    ingest->add_option("volumes", volumes, "Volume directories (image.nii[.gz] + masks/)")->required();
    ingest->add_option("--out", ingest_out)->required();
    ingest->add_option("--split", ingest_split)->check(CLI::IsMember({"train", "validation", "test"}));

    auto* tr = app.add_subcommand("train", "Train a revision network");
    fs::path tr_manifest, tr_config, tr_out, tr_resume;
    std::optional<std::uint64_t> tr_seed;
    int log_every = 100;
    tr->add_option("--manifest", tr_manifest)->required();
    tr->add_option("--config", tr_config);
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--seed", tr_seed);
    tr->add_option("--resume", tr_resume, "Checkpoint to continue from");
    tr->add_option("--log-every", log_every);

    auto* ev = app.add_subcommand("evaluate", "Simulated oracle-click evaluation");
    fs::path ev_checkpoint, ev_manifest, ev_out;
    int ev_clicks = 3;
    std::uint64_t ev_seed = 0;
    std::string ev_split = "test", ev_dataset;
    ev->add_option("--checkpoint", ev_checkpoint)->required();
    ev->add_option("--manifest", ev_manifest)->required();
    ev->add_option("--clicks", ev_clicks)->check(CLI::Range(0, 100));
    ev->add_option("--seed", ev_seed);
    ev->add_option("--out", ev_out)->required();
    ev->add_option("--split", ev_split);
    ev->add_option("--dataset", ev_dataset, "Dataset name in the report");

    auto* table = app.add_subcommand("table", "Render report CSVs side by side");
    std::vector<fs::path> csvs;
    table->add_option("reports", csvs)->required();

    auto* serve = app.add_subcommand("serve", "Run the revision HTTP service");
    fs::path sv_checkpoint;
    std::string host = "127.0.0.1";
    int port = 8080, ttl = 3600;
    bool watch = false;
    serve->add_option("--checkpoint", sv_checkpoint)->required();
    serve->add_option("--host", host);
    serve->add_option("--port", port);
    serve->add_option("--ttl", ttl, "Session idle timeout in seconds");
    serve->add_flag("--watch", watch, "Reload the checkpoint when the file changes");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*synth) return run_synth(synth_n, synth_seed, synth_out, contrast, noise);
        if (*ingest) return run_ingest(volumes, ingest_out, ingest_split);
        if (*tr) return run_train(tr_manifest, tr_config, tr_out, tr_seed, tr_resume, log_every);
        if (*ev) return run_evaluate(ev_checkpoint, ev_manifest, ev_clicks, ev_seed, ev_out, ev_split, ev_dataset);
        if (*table) return run_table(csvs);
        if (*serve) return run_serve(sv_checkpoint, host, port, ttl, watch);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
