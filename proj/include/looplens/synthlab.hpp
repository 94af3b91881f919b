#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "looplens/frame.hpp"
#include "looplens/gridmap.hpp"
#include "looplens/sarmodel.hpp"

namespace looplens::synth {

// Seeded city + trajectory scenario. All randomness flows through streams
// derived from `seed`, so every artifact is reproducible byte for byte.
struct Scenario {
    std::uint64_t seed = 42;
    int n_bikes = 100;
    int days = 2;
    int trips_per_bike_day = 10;
    double loop_propensity = 0.35;  // chance the next stay repeats the current cell
    double reposition_rate = 0.02;  // chance a stay ends with an operator move
    double extent_m = 8000.0;       // square city side
    double cell_size = 500.0;
    int n_stations = 60;
    int street_rows = 8;
    int street_cols = 8;
    grid::LonLat anchor{121.40, 31.20}; // grid origin (lower-left)
    unix_time window_start = 1690848000; // 2023-08-01T00:00:00Z
    bool gzip_events = false;

    void validate() const;
    grid::GridSpec grid_spec() const { return grid::GridSpec(anchor, cell_size); }
};

// Planted ground truth for a trajectory scenario at its generation grid.
struct TrajTruth {
    std::uint64_t total_trips = 0;
    std::uint64_t total_loops = 0;
    std::uint64_t total_stays = 0;
    std::uint64_t total_segments = 0;
    std::uint64_t repositionings = 0;
    std::map<grid::CellId, std::uint64_t> loops_per_cell;

    nlohmann::json to_json(const Scenario& sc) const;
};

// Emits the event stream in wire format (header included) and returns the
// planted truth. Stay positions keep >= s_stay clearance from one another
// and from cell borders, so chain building recovers the plant exactly with
// the default thresholds.
TrajTruth gen_trajectories(const Scenario& sc, std::string& events_csv_out);

std::vector<grid::Station> gen_stations(const Scenario& sc);
std::vector<grid::Street> gen_streets(const Scenario& sc);
// One row per station and street unit, columns matching the covariates
// schema; streets carry a zero metro_ridership placeholder.
std::string gen_covariates_csv(const Scenario& sc,
                               const std::vector<grid::Station>& stations,
                               const std::vector<grid::Street>& streets);

struct CityPaths {
    std::filesystem::path events;
    std::filesystem::path stations;
    std::filesystem::path streets;
    std::filesystem::path covariates;
    std::filesystem::path config;
    std::filesystem::path truth;
};

// Writes the full bundle (events, geometry, covariates, a ready-to-run
// config, and the truth sidecar <events>.truth.json) into `outdir`.
CityPaths write_city(const Scenario& sc, const std::filesystem::path& outdir);

// y = (I - rho W)^-1 (X beta + eps), X = [x1..x{p-1}, constant], eps iid
// N(0, sigma^2). `beta` is ordered like X. Throws input_error when rho lies
// outside the admissible interval of W.
sar::ModelMatrix gen_sar_data(const stats::WeightsMatrix& w, double rho,
                              const std::vector<double>& beta, double sigma,
                              std::uint64_t seed);

enum class FuncForm { linear, quadratic, sine, step };

FuncForm parse_func_form(const std::string& name);
const char* func_form_name(FuncForm f);
double eval_func_form(FuncForm f, double x);

// Columns y, d, x1..x4 with D = m(x1) + nu and Y = theta D + g(x1) + eps,
// nu and eps iid N(0, noise^2). The confounder x1 is N(1, 1) so that even
// and odd form pairs stay correlated; x2..x4 are N(0, 1) distractors.
DataFrame gen_dml_data(std::size_t n, double theta, FuncForm g_form, FuncForm m_form,
                       double noise, std::uint64_t seed);

// Raises input_error unless the truth document carries the keys written by
// the generator of `kind` ("trajectories", "sar", "dml").
void validate_truth(const nlohmann::json& truth, const std::string& kind);

} // namespace looplens::synth
