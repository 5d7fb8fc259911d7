#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rtrack/io.hpp"

namespace fs = std::filesystem;
using namespace rtrack;

namespace {

enum Exit { Ok = 0, ConfigFail = 2, RuntimeFail = 3, IoFail = 4 };

struct Common {
    std::string config;
    std::string preset;
    std::string mode;
};

void add_common(CLI::App* app, Common& c) {
    auto* cfg = app->add_option("--config", c.config, "flat key = value configuration file");
    app->add_option("--preset", c.preset, "named scenario (see preset-list)")->excludes(cfg);
    app->add_option("--mode", c.mode, "planner mode")->check(CLI::IsMember({"adaptive", "vanilla"}));
}

ScenarioConfig load(const Common& c) {
    ScenarioConfig cfg;
    if (!c.config.empty())
        cfg = parse_config(read_file(c.config));
    else
        cfg = c.preset.empty() ? parse_config("") : preset(c.preset);
    if (!c.mode.empty()) cfg.mode = c.mode == "vanilla" ? PlannerMode::Vanilla : PlannerMode::Adaptive;
    return cfg;
}

void print_manifest(const RunManifest& m) { std::cout << to_json(m).dump(2) << '\n'; }

int run_export(const std::string& in, const std::string& kind_name, const std::string& out,
               std::optional<std::uint64_t> seed) {
    const auto kind = parse_export_kind(kind_name);
    std::ostringstream os;
    if (kind == ExportKind::Boxplot) {
        std::vector<fs::path> dirs;
        for (const auto& e : fs::directory_iterator(in))
            if (e.is_directory() && fs::exists(e.path() / "summary.json")) dirs.push_back(e.path());
        if (dirs.empty()) throw IoError("no summary.json below " + in);
        std::vector<Summary> summaries;
        for (const auto& d : dirs) summaries.push_back(load_summary(d / "summary.json"));
        std::sort(summaries.begin(), summaries.end(),
                  [](const Summary& a, const Summary& b) { return std::tie(a.robots, a.targets) < std::tie(b.robots, b.targets); });
        export_boxplot(os, summaries);
    } else if (kind == ExportKind::Trajectories) {
        const auto summary = load_summary(fs::path(in) / "summary.json");
        if (summary.trials.empty()) throw IoError("summary has no trials");
        const auto tag = std::to_string(seed.value_or(summary.trials.front().seed));
        export_trajectories(os, read_file(fs::path(in) / ("steps_" + tag + ".csv")),
                            read_file(fs::path(in) / ("events_" + tag + ".csv")));
    } else {
        export_series(os, load_summary(fs::path(in) / "summary.json"), kind);
    }
    if (out.empty() || out == "-")
        std::cout << os.str();
    else
        write_file(out, os.str());
    return Ok;
}

}  // namespace

int main(int argc, char** argv) {
    init_logging();
    CLI::App app{"Multi-robot target tracking under sensing and communication hazards"};
    app.require_subcommand(1);

    Common sim_opts, batch_opts;
    std::uint64_t seed = 1;
    std::string sim_out = "out", batch_out = "out", seeds_text = "1-10";
    int parallel = 1;

    auto* sim = app.add_subcommand("simulate", "run one trial");
    add_common(sim, sim_opts);
    sim->add_option("--seed", seed, "master seed");
    sim->add_option("--out", sim_out, "output directory");

    auto* batch = app.add_subcommand("batch", "run a seed sweep; --preset vary-team runs the whole team-size sweep");
    add_common(batch, batch_opts);
    batch->add_option("--seeds", seeds_text, "seed list such as 1-10 or 1,4,9");
    batch->add_option("--out", batch_out, "output directory");
    batch->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

    auto* list = app.add_subcommand("preset-list", "print the preset names");

    std::string ex_in = "out", ex_kind, ex_out;
    std::optional<std::uint64_t> ex_seed;
    auto* exp = app.add_subcommand("export", "write plot data from a batch directory");
    exp->add_option("--in", ex_in, "batch output directory (the sweep root for boxplot)");
    exp->add_option("--kind", ex_kind, "mse, trace, effort, trajectories or boxplot")->required();
    exp->add_option("--out", ex_out, "CSV file (default stdout)");
    exp->add_option("--seed", ex_seed, "trial for trajectories (default: first seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Ok : ConfigFail;
    }

    try {
        if (list->parsed()) {
            for (const auto& n : preset_names()) std::cout << n << '\n';
            return Ok;
        }
        if (sim->parsed()) {
            print_manifest(run_batch(load(sim_opts), {seed}, sim_out));
            return Ok;
        }
        if (batch->parsed()) {
            const auto seeds = parse_seed_list(seeds_text);
            if (batch_opts.preset == "vary-team") {
                for (const auto& [m, n] : vary_team_sweep()) {
                    Common c = batch_opts;
                    c.preset = "vary-team(" + std::to_string(m) + "," + std::to_string(n) + ")";
                    run_batch(load(c), seeds, fs::path(batch_out) / c.preset, parallel);
                }
                std::cout << batch_out << '\n';
            } else {
                print_manifest(run_batch(load(batch_opts), seeds, batch_out, parallel));
            }
            return Ok;
        }
        if (exp->parsed()) return run_export(ex_in, ex_kind, ex_out, ex_seed);
    } catch (const ConfigError& e) {
        spdlog::error("configuration: {}", e.what());
        return ConfigFail;
    } catch (const IoError& e) {
        spdlog::error("io: {}", e.what());
        return IoFail;
    } catch (const fs::filesystem_error& e) {
        spdlog::error("io: {}", e.what());
        return IoFail;
    } catch (const std::exception& e) {
        spdlog::error("simulation: {}", e.what());
        return RuntimeFail;
    }
    return Ok;
}
