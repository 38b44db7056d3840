#include <csignal>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "egoseg/analytics.hpp"
#include "egoseg/service.hpp"
#include "egoseg/session.hpp"

namespace fs = std::filesystem;
using namespace egoseg;

namespace {

constexpr int exit_halted = 2;

int parse_band_radius(const std::string& text) {
    if (text == "auto") return 0;
    std::size_t used = 0;
    const int r = std::stoi(text, &used);
    if (used != text.size() || r < 1) throw CLI::ValidationError("--band-radius", "expected 'auto' or a positive integer");
    return r;
}

int cmd_run(const fs::path& frames, const fs::path& seeds, const fs::path& out, session::Config config, bool quiet) {
    auto sequence = FrameSequence::open(frames);
    auto provider = session::ScriptedSeedProvider::from_file(seeds);
    const bool resuming = fs::exists(out / "state.json");
    auto s = resuming ? session::Session::resume(std::move(sequence), out)
                      : session::Session(std::move(sequence), config, out);
    if (resuming && !quiet) std::cerr << "resuming " << out << " at frame " << s.cursor() << '\n';
    if (!quiet) {
        s.set_listener([](const session::Event& e) {
            if (e.kind == session::Event::Kind::mask && e.frame % 50 == 0) std::cerr << "frame " << e.frame << '\n';
            if (e.kind == session::Event::Kind::state && !e.reason.empty())
                std::cerr << "frame " << e.frame << ": " << session::to_string(e.status) << " (" << e.reason << ")\n";
        });
    }
    const auto report = session::run(s, provider);
    const auto stats = analytics::collect_stats(report);
    std::cout << analytics::format_run_stats(std::span(&stats, 1), false);
    if (s.status() != session::Status::finished) {
        const auto req = *s.pending();
        std::cerr << "halted: frame " << req.frame << " needs a seed (" << req.reason << "); add it to " << seeds
                  << " and rerun to resume\n";
        return exit_halted;
    }
    return 0;
}

std::vector<int> mask_numbers(const fs::path& dir) {
    std::vector<int> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.size() == 10 && name.ends_with(".png") &&
            name.find_first_not_of("0123456789") == 6)
            out.push_back(std::stoi(name.substr(0, 6)));
    }
    std::sort(out.begin(), out.end());
    return out;
}

int cmd_eval(const fs::path& pred, const fs::path& truth, bool delimited, const fs::path& heatmap, int total_frames) {
    const fs::path masks = fs::is_directory(pred / "masks") ? pred / "masks" : pred;
    std::vector<analytics::OverlapScores> scores;
    std::vector<double> accuracies;
    for (int n : mask_numbers(truth)) {
        const fs::path p = masks / frame_file_name(n);
        if (!fs::exists(p)) continue;
        const auto a = read_mask_png(p);
        const auto b = read_mask_png(truth / frame_file_name(n));
        scores.push_back(analytics::overlap(a, b));
        accuracies.push_back(analytics::pixel_accuracy(a, b));
    }
    if (scores.empty()) throw Error("no predicted masks match the reference masks in " + truth.string());
    const auto summary = analytics::summarize(scores, accuracies);

    if (fs::exists(pred / "report.json")) {
        auto stats = analytics::collect_stats(SessionReport::load(pred / "report.json"));
        stats.dice = summary.dice_mean;
        stats.pixel_accuracy = summary.pixel_accuracy_mean;
        std::cout << analytics::format_run_stats(std::span(&stats, 1), delimited) << '\n';
    }
    std::cout << analytics::format_agreement(summary, delimited);

    if (!heatmap.empty()) {
        const auto numbers = mask_numbers(masks);
        if (numbers.empty()) throw Error("no masks in " + masks.string());
        const int L = total_frames > 0 ? total_frames : numbers.back();
        const auto [w, h] = png_dimensions(masks / frame_file_name(numbers.front()));
        analytics::Heatmap acc(w, h, L);
        for (int n : numbers) acc.add(read_mask_png(masks / frame_file_name(n)), n);
        write_png(heatmap, analytics::render_heatmap(acc));
        fs::path raw = heatmap;
        raw.replace_extension(".txt");
        analytics::write_heatmap_raw(raw, acc);
        std::cerr << "heatmap written to " << heatmap << " and " << raw << '\n';
    }
    return 0;
}

service::Server* active_server = nullptr;

void on_signal(int) {
    if (active_server) active_server->stop();
}

int cmd_serve(const fs::path& root, const fs::path& runs, const std::string& host, int port,
              const session::Config& config) {
    service::Server server(root, runs, config);
    server.bind(host, port);
    active_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving " << root << " on http://" << host << ':' << port << '\n';
    server.serve();
    active_server = nullptr;
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-automatic object segmentation for egocentric video"};
    app.require_subcommand(1);

    session::Config config;
    std::string band_radius = "auto";
    const auto add_config_options = [&](CLI::App* sub) {
        sub->add_option("--reseed-interval", config.reseed_interval, "Frames between forced seeds")
            ->check(CLI::PositiveNumber);
        sub->add_option("--size-fraction", config.size_fraction, "Allowed relative change of mask area")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_option("--gmm-modes", config.segment.fit.modes, "Gaussian modes per colour model")
            ->check(CLI::PositiveNumber);
        sub->add_option("--lambda", config.segment.lambda, "Smoothness weight")->check(CLI::PositiveNumber);
        sub->add_option("--band-radius", band_radius, "Uncertainty band radius in pixels, or 'auto'");
    };

    fs::path frames, seeds, out;
    bool quiet = false;
    auto* run = app.add_subcommand("run", "Segment one object through a frame sequence");
    run->add_option("--frames", frames, "Directory of 000001.png, 000002.png, ...")->required();
    run->add_option("--seeds", seeds, "JSON seed polygons keyed by frame")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out, "Run directory (resumed if it already holds a session)")->required();
    run->add_flag("-q,--quiet", quiet, "Only print the summary");
    add_config_options(run);

    fs::path frames_root, runs = "runs";
    int port = 8080;
    std::string host = "127.0.0.1";
    auto* serve = app.add_subcommand("serve", "Serve the annotation HTTP API");
    serve->add_option("--frames-root", frames_root, "Directory with one subdirectory per video")
        ->required()
        ->check(CLI::ExistingDirectory);
    serve->add_option("--port", port, "TCP port")->required()->check(CLI::Range(1, 65535));
    serve->add_option("--host", host, "Address to bind");
    serve->add_option("--runs", runs, "Where session state is kept");
    add_config_options(serve);

    fs::path pred, truth, heatmap;
    bool csv = false;
    int total_frames = 0;
    auto* eval = app.add_subcommand("eval", "Compare predicted masks with reference masks");
    eval->add_option("--pred", pred, "Run directory or mask directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--truth", truth, "Reference mask directory")->required()->check(CLI::ExistingDirectory);
    eval->add_flag("--csv", csv, "Comma-separated output");
    eval->add_option("--heatmap", heatmap, "Write the recency-weighted heatmap PNG (raw values beside it as .txt)");
    eval->add_option("--total-frames", total_frames, "L for heatmap weights (default: last mask number)");

    CLI11_PARSE(app, argc, argv);

    try {
        config.band_radius = parse_band_radius(band_radius);
        if (*run) return cmd_run(frames, seeds, out, config, quiet);
        if (*serve) return cmd_serve(frames_root, runs, host, port, config);
        if (*eval) return cmd_eval(pred, truth, csv, heatmap, total_frames);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
