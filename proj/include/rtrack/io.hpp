#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rtrack/config.hpp"
#include "rtrack/simulator.hpp"

namespace rtrack {

inline constexpr const char* kToolVersion = "0.1.0";

class IoError : public Error {
public:
    using Error::Error;
};

/// Reads RESILIENT_TRACK_LOG (error, info, debug) into the default logger.
/// Unset or unrecognized values mean info.
inline void init_logging() {
    const char* env = std::getenv("RESILIENT_TRACK_LOG");
    const std::string v = env ? env : "";
    auto level = spdlog::level::info;
    if (v == "error") level = spdlog::level::err;
    if (v == "debug") level = spdlog::level::debug;
    // Logs go to stderr so that stdout carries only the command's output.
    if (!spdlog::get("rtrack")) spdlog::set_default_logger(spdlog::stderr_color_mt("rtrack"));
    spdlog::set_level(level);
}

// ---- per-trial CSVs ----

inline constexpr std::string_view kStepsHeader = "step,entity,id,x,y,est_x,est_y,sensing,comm,mode,control_norm,mse,trace";
inline constexpr std::string_view kEventsHeader = "step,robot,kind,zone,transition";

inline void write_steps_csv(std::ostream& os, std::span<const StepRecord> records) {
    os << kStepsHeader << '\n';
    for (const auto& r : records) {
        const auto tail = "," + format_number(r.mse) + "," + format_number(r.trace) + "\n";
        for (const auto& rb : r.robots)
            os << r.t << ",robot," << rb.id << ',' << format_number(rb.position.x()) << ','
               << format_number(rb.position.y()) << ",,," << to_string(rb.status.sensing) << ','
               << to_string(rb.status.comm) << ',' << to_string(rb.mode) << ',' << format_number(rb.control.norm())
               << tail;
        for (const auto& tg : r.targets)
            os << r.t << ",target," << tg.id << ',' << format_number(tg.truth[0]) << ',' << format_number(tg.truth[1])
               << ',' << format_number(tg.estimate[0]) << ',' << format_number(tg.estimate[1]) << ",,,,"
               << tail;
    }
}

inline void write_events_csv(std::ostream& os, std::span<const StepRecord> records) {
    os << kEventsHeader << '\n';
    for (const auto& r : records)
        for (const auto& e : r.events)
            os << e.step << ',' << e.robot << ',' << to_string(e.kind) << ',' << e.zone << ','
               << to_string(e.transition) << '\n';
}

// ---- summaries ----

struct Series {
    std::vector<double> mean;
    std::vector<double> std;  // population standard deviation across trials
};

struct TrialSummary {
    std::uint64_t seed = 0;
    double mean_mse = 0.0;
    double mean_trace = 0.0;
    double mean_effort = 0.0;
    std::optional<int> all_sensing_lost;
};

struct Summary {
    std::string scenario;
    std::string mode;
    std::string config_hash;
    int robots = 0;
    int targets = 0;
    int steps = 0;
    Series mse, trace, effort;
    std::vector<TrialSummary> trials;  // sorted by seed
};

inline Series aggregate(const std::vector<std::vector<double>>& runs) {
    Series s;
    if (runs.empty()) return s;
    const std::size_t n = runs.front().size();
    s.mean.assign(n, 0.0);
    s.std.assign(n, 0.0);
    const double k = static_cast<double>(runs.size());
    for (std::size_t t = 0; t < n; ++t) {
        double sum = 0.0;
        for (const auto& r : runs) sum += r.at(t);
        const double m = sum / k;
        double ss = 0.0;
        for (const auto& r : runs) ss += (r[t] - m) * (r[t] - m);
        s.mean[t] = m;
        s.std[t] = std::sqrt(ss / k);
    }
    return s;
}

struct TrialResult {
    std::uint64_t seed = 0;
    std::vector<StepRecord> records;
    double wall_seconds = 0.0;
};

/// Aggregates trials of one configuration; input order does not matter.
inline Summary summarize(const ScenarioConfig& cfg, std::vector<const TrialResult*> trials) {
    std::sort(trials.begin(), trials.end(), [](auto* a, auto* b) { return a->seed < b->seed; });
    Summary s;
    s.scenario = cfg.name;
    s.mode = to_string(cfg.mode);
    s.config_hash = config_hash(cfg);
    s.robots = cfg.robot_count();
    s.targets = cfg.target_count();
    s.steps = cfg.steps;
    std::vector<std::vector<double>> mse, trace, effort;
    for (const auto* tr : trials) {
        auto& m = mse.emplace_back();
        auto& c = trace.emplace_back();
        auto& e = effort.emplace_back();
        for (const auto& r : tr->records) {
            m.push_back(r.mse);
            c.push_back(r.trace);
            e.push_back(r.effort);
        }
        TrialSummary ts;
        ts.seed = tr->seed;
        const int n = static_cast<int>(tr->records.size());
        ts.mean_trace = mean_trace(tr->records, 0, n);
        for (const auto& r : tr->records) {
            ts.mean_mse += r.mse / n;
            ts.mean_effort += r.effort / n;
        }
        ts.all_sensing_lost = first_all_sensing_lost(tr->records);
        s.trials.push_back(ts);
    }
    s.mse = aggregate(mse);
    s.trace = aggregate(trace);
    s.effort = aggregate(effort);
    return s;
}

inline nlohmann::json to_json(const Series& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline nlohmann::json to_json(const Summary& s) {
    nlohmann::json trials = nlohmann::json::array();
    for (const auto& t : s.trials) {
        nlohmann::json j = {{"seed", t.seed}, {"mean_mse", t.mean_mse}, {"mean_trace", t.mean_trace},
                            {"mean_effort", t.mean_effort}};
        j["all_sensing_lost"] = t.all_sensing_lost ? nlohmann::json(*t.all_sensing_lost) : nlohmann::json(nullptr);
        trials.push_back(std::move(j));
    }
    return {{"scenario", s.scenario}, {"mode", s.mode},     {"config_hash", s.config_hash},
            {"robots", s.robots},     {"targets", s.targets}, {"steps", s.steps},
            {"mse", to_json(s.mse)},  {"trace", to_json(s.trace)}, {"effort", to_json(s.effort)},
            {"trials", trials}};
}

inline Summary summary_from_json(const nlohmann::json& j) {
    Summary s;
    try {
        s.scenario = j.at("scenario").get<std::string>();
        s.mode = j.at("mode").get<std::string>();
        s.config_hash = j.at("config_hash").get<std::string>();
        s.robots = j.at("robots").get<int>();
        s.targets = j.at("targets").get<int>();
        s.steps = j.at("steps").get<int>();
        auto series = [&](const char* k) {
            return Series{j.at(k).at("mean").get<std::vector<double>>(), j.at(k).at("std").get<std::vector<double>>()};
        };
        s.mse = series("mse");
        s.trace = series("trace");
        s.effort = series("effort");
        for (const auto& t : j.at("trials")) {
            TrialSummary ts;
            ts.seed = t.at("seed").get<std::uint64_t>();
            ts.mean_mse = t.at("mean_mse").get<double>();
            ts.mean_trace = t.at("mean_trace").get<double>();
            ts.mean_effort = t.at("mean_effort").get<double>();
            if (!t.at("all_sensing_lost").is_null()) ts.all_sensing_lost = t.at("all_sensing_lost").get<int>();
            s.trials.push_back(ts);
        }
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("malformed summary: ") + e.what());
    }
    return s;
}

// ---- files ----

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << content;
    f.close();
    if (!f) throw IoError("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

inline Summary load_summary(const std::filesystem::path& path) {
    try {
        return summary_from_json(nlohmann::json::parse(read_file(path)));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path.string() + ": " + e.what());
    }
}

// ---- batch ----

/// "1-10", "3,5,8" or a mix such as "1-3,7".
inline std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
    std::vector<std::uint64_t> out;
    try {
        for (auto part : config_detail::split(text, ',')) {
            if (const auto dash = part.find('-'); dash != std::string_view::npos) {
                const auto lo = config_detail::parse_number<std::uint64_t>(part.substr(0, dash));
                const auto hi = config_detail::parse_number<std::uint64_t>(part.substr(dash + 1));
                if (hi < lo) throw config_detail::BadValue{"empty range"};
                for (auto s = lo; s <= hi; ++s) out.push_back(s);
            } else {
                out.push_back(config_detail::parse_number<std::uint64_t>(part));
            }
        }
    } catch (const config_detail::BadValue& b) {
        throw ConfigError("seeds: " + b.message, 0, "seeds");
    }
    return out;
}

struct RunManifest {
    std::string scenario;
    std::string config_hash;
    std::vector<std::uint64_t> seeds;
    std::string out_dir;
    std::string tool_version = kToolVersion;
    std::map<std::uint64_t, double> wall_seconds;
};

inline nlohmann::json to_json(const RunManifest& m) {
    nlohmann::json wall = nlohmann::json::object();
    for (const auto& [seed, s] : m.wall_seconds) wall[std::to_string(seed)] = s;
    return {{"scenario", m.scenario}, {"config_hash", m.config_hash}, {"seeds", m.seeds},
            {"out_dir", m.out_dir},   {"tool_version", m.tool_version}, {"wall_seconds", wall}};
}

inline TrialResult run_trial(ScenarioConfig cfg, std::uint64_t seed) {
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    TrialResult r;
    r.seed = seed;
    r.records = run(cfg);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

/// Runs one trial per seed on up to `parallel` threads and writes
/// steps_<seed>.csv and events_<seed>.csv as each trial finishes, then
/// config.txt, summary.json and manifest.json. The first failure stops the
/// dispatch of new trials; files already written stay in place.
inline RunManifest run_batch(const ScenarioConfig& cfg, std::vector<std::uint64_t> seeds,
                             const std::filesystem::path& out_dir, int parallel = 1,
                             Summary* summary_out = nullptr) {
    if (seeds.empty()) throw ConfigError("no seeds given", 0, "seeds");
    {
        auto sorted = seeds;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ConfigError("duplicate seed", 0, "seeds");
    }
    if (const auto issues = validate_scenario(cfg); !issues.empty())
        throw ConfigError(issues.front().key + ": " + issues.front().message, 0, issues.front().key);
    ensure_dir(out_dir);

    std::vector<TrialResult> results(seeds.size());
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;

    auto worker = [&] {
        while (!failed) {
            const std::size_t k = next++;
            if (k >= seeds.size()) return;
            try {
                results[k] = run_trial(cfg, seeds[k]);
                std::ostringstream steps, events;
                write_steps_csv(steps, results[k].records);
                write_events_csv(events, results[k].records);
                const auto tag = std::to_string(seeds[k]);
                write_file(out_dir / ("steps_" + tag + ".csv"), steps.str());
                write_file(out_dir / ("events_" + tag + ".csv"), events.str());
                spdlog::debug("{} seed {} done in {:.3f} s", cfg.name, seeds[k], results[k].wall_seconds);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    const int n_threads = std::clamp(parallel, 1, static_cast<int>(seeds.size()));
    {
        std::vector<std::jthread> pool;
        for (int i = 1; i < n_threads; ++i) pool.emplace_back(worker);
        worker();
    }
    if (error) std::rethrow_exception(error);

    std::vector<const TrialResult*> ptrs;
    for (const auto& r : results) ptrs.push_back(&r);
    const Summary summary = summarize(cfg, ptrs);

    RunManifest m;
    m.scenario = cfg.name;
    m.config_hash = summary.config_hash;
    m.seeds = seeds;
    m.out_dir = out_dir.string();
    for (const auto& r : results) m.wall_seconds[r.seed] = r.wall_seconds;

    write_file(out_dir / "config.txt", serialize_config(cfg));
    write_file(out_dir / "summary.json", to_json(summary).dump(2) + "\n");
    write_file(out_dir / "manifest.json", to_json(m).dump(2) + "\n");
    spdlog::info("{}: {} trial(s) written to {}", cfg.name, seeds.size(), out_dir.string());
    if (summary_out) *summary_out = summary;
    return m;
}

// ---- plot data ----

enum class ExportKind { Mse, Trace, Effort, Trajectories, Boxplot };

inline ExportKind parse_export_kind(std::string_view s) {
    if (s == "mse") return ExportKind::Mse;
    if (s == "trace") return ExportKind::Trace;
    if (s == "effort") return ExportKind::Effort;
    if (s == "trajectories") return ExportKind::Trajectories;
    if (s == "boxplot") return ExportKind::Boxplot;
    throw ConfigError("unknown export kind '" + std::string(s) + "'", 0, "kind");
}

/// step,mean,std for one metric.
inline void export_series(std::ostream& os, const Summary& s, ExportKind kind) {
    const Series* series = kind == ExportKind::Mse     ? &s.mse
                           : kind == ExportKind::Trace ? &s.trace
                           : kind == ExportKind::Effort ? &s.effort
                                                        : nullptr;
    if (!series) throw DomainError("export_series: not a per-step metric");
    os << "step,mean,std\n";
    for (std::size_t t = 0; t < series->mean.size(); ++t)
        os << t << ',' << format_number(series->mean[t]) << ',' << format_number(series->std[t]) << '\n';
}

/// M,N,trial,mean_trace over a set of summaries (one per team size).
inline void export_boxplot(std::ostream& os, std::span<const Summary> summaries) {
    os << "M,N,trial,mean_trace\n";
    for (const auto& s : summaries)
        for (const auto& t : s.trials)
            os << s.robots << ',' << s.targets << ',' << t.seed << ',' << format_number(t.mean_trace) << '\n';
}

namespace io_detail {

inline std::vector<std::vector<std::string>> read_csv_rows(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        auto& row = rows.emplace_back();
        std::size_t s = 0;
        while (true) {
            const auto c = line.find(',', s);
            row.emplace_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
            if (c == std::string_view::npos) break;
            s = c + 1;
        }
    }
    return rows;
}

}  // namespace io_detail

/// step,entity,id,x,y,status,transition from one trial's steps and events
/// CSVs. Robot status is "<sensing>/<comm>"; transition lists the attack
/// events of that robot at that step ("sensing:attacked", ...).
inline void export_trajectories(std::ostream& os, std::string_view steps_csv, std::string_view events_csv) {
    const auto steps = io_detail::read_csv_rows(steps_csv);
    const auto events = io_detail::read_csv_rows(events_csv);
    if (steps.empty() || steps.front().size() != 13) throw IoError("steps CSV has an unexpected header");
    if (events.empty() || events.front().size() != 5) throw IoError("events CSV has an unexpected header");
    std::map<std::pair<std::string, std::string>, std::string> marks;
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& e = events[i];
        auto& m = marks[{e[0], e[1]}];
        if (!m.empty()) m += ';';
        m += e[2] + ":" + e[4];
    }
    os << "step,entity,id,x,y,status,transition\n";
    for (std::size_t i = 1; i < steps.size(); ++i) {
        const auto& r = steps[i];
        if (r.size() != 13) throw IoError("steps CSV row " + std::to_string(i) + " is malformed");
        const bool robot = r[1] == "robot";
        const std::string status = robot ? r[7] + "/" + r[8] : "";
        std::string mark;
        if (robot)
            if (auto it = marks.find({r[0], r[2]}); it != marks.end()) mark = it->second;
        os << r[0] << ',' << r[1] << ',' << r[2] << ',' << r[3] << ',' << r[4] << ',' << status << ',' << mark << '\n';
    }
}

}  // namespace rtrack
