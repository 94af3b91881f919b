// looplens: self-loop trajectory analytics for shared-bike event streams.
//
// Subcommands:
//   synth    generate a synthetic city (events, geometry, covariates, truth)
//   detect   ingest events and write loop events + intensity tables
//   analyze  join intensity with covariates and fit the statistical models
//   run      detect followed by analyze
//
// Exit codes: 0 success, 1 internal error, 2 input or usage error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "looplens/config.hpp"
#include "looplens/pipeline.hpp"
#include "looplens/synthlab.hpp"

namespace {

using looplens::config::RunConfig;

struct Overrides {
    std::optional<std::string> config_path;
    std::optional<std::string> events, stations, streets, covariates, out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<double> cell_size, window_days;
    std::optional<int> n_perm;
    bool strict = false;
};

void add_override_flags(CLI::App* cmd, Overrides& ov) {
    cmd->add_option("-c,--config", ov.config_path, "JSON config file");
    cmd->add_option("--events", ov.events, "events CSV (.csv or .csv.gz)");
    cmd->add_option("--stations", ov.stations, "stations CSV");
    cmd->add_option("--streets", ov.streets, "streets GeoJSON");
    cmd->add_option("--covariates", ov.covariates, "covariates CSV");
    cmd->add_option("-o,--out", ov.out, "output directory");
    cmd->add_option("--seed", ov.seed, "master seed");
    cmd->add_option("--threads", ov.threads, "worker threads (0 = hardware)");
    cmd->add_option("--cell", ov.cell_size, "grid cell size in meters");
    cmd->add_option("--window-days", ov.window_days, "observation window in days");
    cmd->add_option("--n-perm", ov.n_perm, "Moran permutation count");
    cmd->add_flag("--strict", ov.strict, "abort on malformed rows and skipped groups");
}

// flags win over the config file; the env var is a fallback for --threads
RunConfig effective_config(const Overrides& ov) {
    RunConfig cfg = ov.config_path ? looplens::config::load_config(*ov.config_path)
                                   : looplens::config::default_config();
    if (ov.events) cfg.events = *ov.events;
    if (ov.stations) cfg.stations = *ov.stations;
    if (ov.streets) cfg.streets = *ov.streets;
    if (ov.covariates) cfg.covariates = *ov.covariates;
    if (ov.out) cfg.output_dir = *ov.out;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.cell_size) cfg.cell_size = *ov.cell_size;
    if (ov.window_days) cfg.window_days = *ov.window_days;
    if (ov.n_perm) cfg.n_perm = *ov.n_perm;
    if (ov.strict) cfg.strict = true;
    if (ov.threads) {
        cfg.threads = *ov.threads;
    } else if (const char* env = std::getenv("LOOPLENS_THREADS")) {
        try {
            std::size_t pos = 0;
            int t = std::stoi(env, &pos);
            if (pos != std::string(env).size() || t < 0) throw std::invalid_argument(env);
            cfg.threads = t;
        } catch (const std::exception&) {
            throw looplens::input_error("LOOPLENS_THREADS must be a non-negative integer");
        }
    }
    cfg.validate();
    return cfg;
}

void print_detect_summary(const looplens::pipeline::DetectSummary& s, const RunConfig& cfg) {
    std::cout << "parsed=" << s.parsed << " rejected=" << s.rejected
              << " bikes=" << s.stats.bikes << " trips=" << s.stats.trips
              << " repositionings=" << s.stats.repositionings << " loops=" << s.loops
              << " proportion=" << s.proportion << "\n";
    std::cout << "reports in " << cfg.output_dir << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"self-loop trajectory analytics for shared-bike event streams"};
    app.require_subcommand(1);

    auto* synth = app.add_subcommand("synth", "generate a synthetic city with planted truth");
    looplens::synth::Scenario scenario;
    std::string synth_out = "city";
    synth->add_option("-o,--out", synth_out, "output directory");
    synth->add_option("--seed", scenario.seed, "scenario seed");
    synth->add_option("--bikes", scenario.n_bikes, "number of bikes");
    synth->add_option("--days", scenario.days, "number of days");
    synth->add_option("--trips", scenario.trips_per_bike_day, "trips per bike per day");
    synth->add_option("--loop-propensity", scenario.loop_propensity,
                      "probability a trip returns to its cell");
    synth->add_option("--reposition-rate", scenario.reposition_rate,
                      "probability a parked bike is relocated");
    synth->add_option("--extent", scenario.extent_m, "square city extent in meters");
    synth->add_option("--cell", scenario.cell_size, "grid cell size in meters");
    synth->add_option("--stations", scenario.n_stations, "number of metro stations");
    synth->add_option("--street-rows", scenario.street_rows, "street grid rows");
    synth->add_option("--street-cols", scenario.street_cols, "street grid columns");
    synth->add_flag("--gzip", scenario.gzip_events, "write events.csv.gz");

    Overrides ov_detect, ov_analyze, ov_run;
    auto* detect = app.add_subcommand("detect", "detect self-loops and write intensity tables");
    add_override_flags(detect, ov_detect);
    auto* analyze = app.add_subcommand("analyze", "fit spatial and causal models");
    add_override_flags(analyze, ov_analyze);
    auto* run = app.add_subcommand("run", "detect followed by analyze");
    add_override_flags(run, ov_run);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            auto paths = looplens::synth::write_city(scenario, synth_out);
            std::cout << "events:     " << paths.events.string() << "\n"
                      << "stations:   " << paths.stations.string() << "\n"
                      << "streets:    " << paths.streets.string() << "\n"
                      << "covariates: " << paths.covariates.string() << "\n"
                      << "config:     " << paths.config.string() << "\n"
                      << "truth:      " << paths.truth.string() << "\n";
        } else if (detect->parsed()) {
            RunConfig cfg = effective_config(ov_detect);
            print_detect_summary(looplens::pipeline::cmd_detect(cfg), cfg);
        } else if (analyze->parsed()) {
            RunConfig cfg = effective_config(ov_analyze);
            looplens::pipeline::cmd_analyze(cfg);
            std::cout << "reports in " << cfg.output_dir << "\n";
        } else if (run->parsed()) {
            RunConfig cfg = effective_config(ov_run);
            print_detect_summary(looplens::pipeline::cmd_run(cfg), cfg);
        }
    } catch (const looplens::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
