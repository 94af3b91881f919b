#include "looplens/synthlab.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <Eigen/LU>
#include <zlib.h>

#include "looplens/rng.hpp"
#include "looplens/timeparse.hpp"

namespace looplens::synth {

namespace fs = std::filesystem;

void Scenario::validate() const {
    if (n_bikes < 1) throw input_error("synth: n_bikes must be >= 1");
    if (days < 1) throw input_error("synth: days must be >= 1");
    if (trips_per_bike_day < 1) throw input_error("synth: trips_per_bike_day must be >= 1");
    if (loop_propensity < 0.0 || loop_propensity > 1.0)
        throw input_error("synth: loop_propensity must be in [0, 1]");
    if (reposition_rate < 0.0 || reposition_rate > 1.0)
        throw input_error("synth: reposition_rate must be in [0, 1]");
    if (!(cell_size > 0.0)) throw input_error("synth: cell_size must be positive");
    if (extent_m < 4.0 * cell_size)
        throw input_error("synth: extent must cover at least 4x4 cells");
    if (n_stations < 6) throw input_error("synth: need at least 6 stations");
    if (street_rows < 2 || street_cols < 2) throw input_error("synth: need at least a 2x2 street grid");
    std::int64_t cells = std::int64_t(extent_m / cell_size);
    if (std::int64_t(n_stations) > cells * cells)
        throw input_error("synth: more stations than grid cells");
}

namespace {

void append_event(std::string& out, const std::string& bike, unix_time t, grid::LonLat p,
                  const char* kind) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%s,%.10g,%.10g,%s\n", bike.c_str(),
                  timeparse::format_iso8601(t).c_str(), p.lon, p.lat, kind);
    out += buf;
}

// Two stay anchors per cell, cell_size/2 apart diagonally and cell_size/4
// clear of every border: far enough apart not to merge, far enough inside
// not to straddle a boundary after the lon/lat round trip.
grid::LonLat cell_spot(const grid::GridSpec& spec, grid::CellId cell, bool alt) {
    double cs = spec.cell_size;
    double off = alt ? 0.75 : 0.25;
    grid::XY q{(double(cell.col) + off) * cs, (double(cell.row) + off) * cs};
    return grid::unproject(q, spec);
}

} // namespace

nlohmann::json TrajTruth::to_json(const Scenario& sc) const {
    nlohmann::json per_cell = nlohmann::json::array();
    for (const auto& [cell, count] : loops_per_cell)
        per_cell.push_back({cell.row, cell.col, count});
    return nlohmann::json{
        {"kind", "trajectories"},
        {"seed", sc.seed},
        {"params",
         {{"n_bikes", sc.n_bikes},
          {"days", sc.days},
          {"trips_per_bike_day", sc.trips_per_bike_day},
          {"loop_propensity", sc.loop_propensity},
          {"reposition_rate", sc.reposition_rate},
          {"extent_m", sc.extent_m},
          {"cell_size", sc.cell_size},
          {"origin", {sc.anchor.lon, sc.anchor.lat}}}},
        {"totals",
         {{"trips", total_trips},
          {"loops", total_loops},
          {"stays", total_stays},
          {"segments", total_segments},
          {"repositionings", repositionings}}},
        {"loop_proportion", total_trips ? double(total_loops) / double(total_trips) : 0.0},
        {"per_cell", per_cell}};
}

TrajTruth gen_trajectories(const Scenario& sc, std::string& events_csv_out) {
    sc.validate();
    grid::GridSpec spec = sc.grid_spec();
    std::int64_t n_cells = std::int64_t(sc.extent_m / sc.cell_size);
    int trips_total = sc.trips_per_bike_day * sc.days;

    TrajTruth truth;
    events_csv_out.clear();
    events_csv_out += "bike_id,timestamp,lon,lat,kind\n";

    auto random_cell = [&](rng::Stream& st) {
        return grid::CellId{std::int64_t(st.next_below(std::uint64_t(n_cells))),
                            std::int64_t(st.next_below(std::uint64_t(n_cells)))};
    };

    std::vector<grid::CellId> segment; // planted stay cells of the open segment
    auto settle_segment = [&]() {
        if (segment.empty()) return;
        // dictionary rule: every visit beyond the first per cell is one loop
        std::map<grid::CellId, std::uint64_t> visits;
        for (grid::CellId c : segment) ++visits[c];
        for (const auto& [c, k] : visits)
            if (k > 1) {
                truth.loops_per_cell[c] += k - 1;
                truth.total_loops += k - 1;
            }
        truth.total_stays += segment.size();
        truth.total_segments += 1;
        segment.clear();
    };

    char bike_buf[16];
    for (int b = 0; b < sc.n_bikes; ++b) {
        std::snprintf(bike_buf, sizeof(bike_buf), "b%05d", b);
        std::string bike = bike_buf;
        rng::Stream st(rng::derive_seed(sc.seed, "bike", std::uint64_t(b)));

        grid::CellId cell = random_cell(st);
        bool alt = false;
        unix_time t = sc.window_start + unix_time(st.next_below(3600));

        // the bike starts parked: the leading lock is its first stay
        append_event(events_csv_out, bike, t, cell_spot(spec, cell, alt), "lock");
        segment.push_back(cell);

        for (int k = 0; k < trips_total; ++k) {
            unix_time dwell = 120 + unix_time(st.next_below(600));
            unix_time t_unlock = t + dwell;
            bool reposition = st.next_double() < sc.reposition_rate;
            if (reposition) {
                // the operator moved the locked bike at least two cells away,
                // comfortably beyond the scheduling threshold
                grid::CellId target = random_cell(st);
                while (std::max(std::llabs(target.row - cell.row),
                                std::llabs(target.col - cell.col)) < 2)
                    target = random_cell(st);
                cell = target;
                alt = false;
                append_event(events_csv_out, bike, t_unlock, cell_spot(spec, cell, alt), "unlock");
                settle_segment();
                truth.repositionings += 1;
            } else {
                append_event(events_csv_out, bike, t_unlock, cell_spot(spec, cell, alt), "unlock");
            }

            // ride somewhere: repeat the cell with the planted propensity
            bool repeat = st.next_double() < sc.loop_propensity;
            if (repeat) {
                alt = !alt;
            } else {
                grid::CellId next = random_cell(st);
                while (next == cell) next = random_cell(st);
                cell = next;
                alt = false;
            }
            unix_time trip = 180 + unix_time(st.next_below(600));
            t = t_unlock + trip;
            append_event(events_csv_out, bike, t, cell_spot(spec, cell, alt), "lock");
            segment.push_back(cell);
            truth.total_trips += 1;
        }
        settle_segment();
    }
    return truth;
}

std::vector<grid::Station> gen_stations(const Scenario& sc) {
    grid::GridSpec spec = sc.grid_spec();
    std::int64_t n_cells = std::int64_t(sc.extent_m / sc.cell_size);
    rng::Stream st(rng::derive_seed(sc.seed, "stations"));

    std::unordered_set<std::uint64_t> used;
    std::vector<grid::Station> out;
    char buf[16];
    while (int(out.size()) < sc.n_stations) {
        grid::CellId cell{std::int64_t(st.next_below(std::uint64_t(n_cells))),
                          std::int64_t(st.next_below(std::uint64_t(n_cells)))};
        if (!used.insert(grid::cell_key(cell)).second) continue;
        std::snprintf(buf, sizeof(buf), "ms%04d", int(out.size()));
        grid::Station s;
        s.id = buf;
        double jx = (st.next_double() - 0.5) * sc.cell_size * 0.25;
        double jy = (st.next_double() - 0.5) * sc.cell_size * 0.25;
        grid::XY q{(double(cell.col) + 0.5) * sc.cell_size + jx,
                   (double(cell.row) + 0.5) * sc.cell_size + jy};
        s.pos = grid::unproject(q, spec);
        s.ridership = std::floor(std::exp(st.next_normal() * 0.6 + 9.5));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<grid::Street> gen_streets(const Scenario& sc) {
    grid::GridSpec spec = sc.grid_spec();
    double w = sc.extent_m / sc.street_cols;
    double h = sc.extent_m / sc.street_rows;
    std::vector<grid::Street> out;
    char buf[24];
    for (int r = 0; r < sc.street_rows; ++r) {
        for (int c = 0; c < sc.street_cols; ++c) {
            std::snprintf(buf, sizeof(buf), "st%02d%02d", r, c);
            grid::Street s;
            s.id = buf;
            // corner coordinates are exact multiples, so adjacent tiles share
            // vertices and queen contiguity sees them
            std::vector<grid::LonLat> ring{
                grid::unproject(grid::XY{c * w, r * h}, spec),
                grid::unproject(grid::XY{(c + 1) * w, r * h}, spec),
                grid::unproject(grid::XY{(c + 1) * w, (r + 1) * h}, spec),
                grid::unproject(grid::XY{c * w, (r + 1) * h}, spec)};
            s.rings.push_back(std::move(ring));
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

void append_covariate_row(std::string& out, const std::string& id, rng::Stream& st,
                          double metro_ridership) {
    double average_age = 35.0 + 20.0 * st.next_double();
    double fixed_occ = 10.0 + 60.0 * st.next_double();
    double nonres = 5.0 + 70.0 * st.next_double();
    double car = 0.2 + 2.5 * st.next_double();
    double work = std::floor(std::exp(st.next_normal() * 1.0 + 3.0));
    double resi = std::floor(std::exp(st.next_normal() * 1.0 + 3.5));
    double comm = std::floor(std::exp(st.next_normal() * 1.0 + 2.5));
    int central = st.next_double() < 0.30;
    int university = st.next_double() < 0.20;
    int cbd = st.next_double() < 0.15;
    int hub = st.next_double() < 0.20;
    double bus = std::floor(30.0 * st.next_double());
    char buf[320];
    std::snprintf(buf, sizeof(buf),
                  "%s,%.6g,%.6g,%.6g,%.6g,%g,%g,%g,%d,%d,%d,%d,%g,%g\n",
                  id.c_str(), average_age, fixed_occ, nonres, car, work, resi, comm,
                  central, university, cbd, hub, bus, metro_ridership);
    out += buf;
}

} // namespace

std::string gen_covariates_csv(const Scenario& sc,
                               const std::vector<grid::Station>& stations,
                               const std::vector<grid::Street>& streets) {
    std::string out =
        "unit_id,average_age,fixed_occ_pct,nonresident_pct,car_ownership,work_poi,"
        "residential_poi,commercial_poi,central,university,cbd,hub,bus_stations,metro_ridership\n";
    rng::Stream st(rng::derive_seed(sc.seed, "covariates"));
    for (const auto& s : stations) append_covariate_row(out, s.id, st, s.ridership);
    for (const auto& s : streets) append_covariate_row(out, s.id, st, 0.0);
    return out;
}

namespace {

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path.string());
    out << content;
    if (!out) throw input_error("write failed: " + path.string());
}

void write_gz_file(const fs::path& path, const std::string& content) {
    gzFile gz = gzopen(path.c_str(), "wb");
    if (!gz) throw input_error("cannot write file: " + path.string());
    int written = gzwrite(gz, content.data(), unsigned(content.size()));
    gzclose(gz);
    if (written != int(content.size())) throw input_error("gzip write failed: " + path.string());
}

nlohmann::json default_config(const Scenario& sc, const CityPaths& paths) {
    return nlohmann::json{
        {"seed", sc.seed},
        {"window_days", sc.days},
        {"paths",
         {{"events", paths.events.filename().string()},
          {"stations", paths.stations.filename().string()},
          {"streets", paths.streets.filename().string()},
          {"covariates", paths.covariates.filename().string()},
          {"output_dir", "out"}}},
        {"grid", {{"origin", {sc.anchor.lon, sc.anchor.lat}}, {"cell_size", sc.cell_size}}},
        {"thresholds", {{"s_sched", 500.0}, {"s_stay", 100.0}}},
        {"scales", {"station", "street"}},
        {"cate",
         {{{"scale", "station"},
           {"treatment", "residential_poi"},
           {"transform", "log1p"},
           {"group_by", "metro_ridership"},
           {"quantiles", 3}}}}};
}

} // namespace

CityPaths write_city(const Scenario& sc, const fs::path& outdir) {
    sc.validate();
    fs::create_directories(outdir);
    CityPaths paths;
    paths.events = outdir / (sc.gzip_events ? "events.csv.gz" : "events.csv");
    paths.stations = outdir / "stations.csv";
    paths.streets = outdir / "streets.geojson";
    paths.covariates = outdir / "covariates.csv";
    paths.config = outdir / "config.json";
    paths.truth = outdir / (sc.gzip_events ? "events.csv.gz.truth.json" : "events.csv.truth.json");

    std::string events;
    TrajTruth truth = gen_trajectories(sc, events);
    if (sc.gzip_events) write_gz_file(paths.events, events);
    else write_text_file(paths.events, events);

    auto stations = gen_stations(sc);
    std::string stations_csv = "station_id,lon,lat,ridership\n";
    {
        char buf[160];
        for (const auto& s : stations) {
            std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%g\n", s.id.c_str(), s.pos.lon,
                          s.pos.lat, s.ridership);
            stations_csv += buf;
        }
    }
    write_text_file(paths.stations, stations_csv);

    auto streets = gen_streets(sc);
    nlohmann::json features = nlohmann::json::array();
    for (const auto& s : streets) {
        nlohmann::json ring = nlohmann::json::array();
        for (const auto& v : s.rings.front()) ring.push_back({v.lon, v.lat});
        ring.push_back({s.rings.front().front().lon, s.rings.front().front().lat});
        features.push_back({{"type", "Feature"},
                            {"properties", {{"street_id", s.id}}},
                            {"geometry", {{"type", "Polygon"}, {"coordinates", {ring}}}}});
    }
    nlohmann::json geojson{{"type", "FeatureCollection"}, {"features", features}};
    write_text_file(paths.streets, geojson.dump(2) + "\n");

    write_text_file(paths.covariates, gen_covariates_csv(sc, stations, streets));
    write_text_file(paths.config, default_config(sc, paths).dump(2) + "\n");
    write_text_file(paths.truth, truth.to_json(sc).dump(2) + "\n");
    return paths;
}

sar::ModelMatrix gen_sar_data(const stats::WeightsMatrix& w, double rho,
                              const std::vector<double>& beta, double sigma,
                              std::uint64_t seed) {
    std::size_t n = w.n;
    std::size_t p = beta.size();
    if (p < 1) throw input_error("synth: sar beta must have at least the constant term");
    if (n < p + 2) throw input_error("synth: sar needs more units than parameters");
    if (!(sigma >= 0.0)) throw input_error("synth: sar sigma must be non-negative");

    auto spectrum = sar::weights_spectrum(w);
    double lam_min = 0.0, lam_max = 0.0;
    for (const auto& lam : spectrum) {
        if (std::abs(lam.imag()) > 1e-9) continue;
        lam_min = std::min(lam_min, lam.real());
        lam_max = std::max(lam_max, lam.real());
    }
    if (lam_min < -1e-12 && lam_max > 1e-12) {
        double lo = 1.0 / lam_min, hi = w.row_standardized ? 1.0 : 1.0 / lam_max;
        if (!(rho > lo && rho < hi))
            throw input_error("synth: rho outside the admissible interval of W");
    }

    sar::ModelMatrix model;
    model.X.resize(Eigen::Index(n), Eigen::Index(p));
    rng::Stream xs(rng::derive_seed(seed, "sar-x"));
    for (std::size_t j = 0; j + 1 < p; ++j) {
        model.names.push_back("x" + std::to_string(j + 1));
        for (std::size_t i = 0; i < n; ++i)
            model.X(Eigen::Index(i), Eigen::Index(j)) = xs.next_normal();
    }
    model.names.push_back("Constant");
    model.X.col(Eigen::Index(p - 1)).setOnes();

    Eigen::VectorXd bv = Eigen::VectorXd::Zero(Eigen::Index(p));
    for (std::size_t j = 0; j < p; ++j) bv[Eigen::Index(j)] = beta[j];

    rng::Stream es(rng::derive_seed(seed, "sar-eps"));
    Eigen::VectorXd u = model.X * bv;
    for (std::size_t i = 0; i < n; ++i) u[Eigen::Index(i)] += sigma * es.next_normal();

    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(Eigen::Index(n), Eigen::Index(n)) -
                        rho * sar::to_dense(w);
    model.y = Eigen::PartialPivLU<Eigen::MatrixXd>(a).solve(u);
    return model;
}

FuncForm parse_func_form(const std::string& name) {
    if (name == "linear") return FuncForm::linear;
    if (name == "quadratic") return FuncForm::quadratic;
    if (name == "sine") return FuncForm::sine;
    if (name == "step") return FuncForm::step;
    throw input_error("synth: unknown functional form '" + name + "'");
}

const char* func_form_name(FuncForm f) {
    switch (f) {
        case FuncForm::linear: return "linear";
        case FuncForm::quadratic: return "quadratic";
        case FuncForm::sine: return "sine";
        case FuncForm::step: return "step";
    }
    return "?";
}

double eval_func_form(FuncForm f, double x) {
    switch (f) {
        case FuncForm::linear: return x;
        case FuncForm::quadratic: return x * x;
        case FuncForm::sine: return std::sin(2.0 * x);
        case FuncForm::step: return x >= 0.0 ? 1.0 : 0.0;
    }
    return 0.0;
}

DataFrame gen_dml_data(std::size_t n, double theta, FuncForm g_form, FuncForm m_form,
                       double noise, std::uint64_t seed) {
    if (n < 10) throw input_error("synth: dml data needs n >= 10");
    if (!(noise >= 0.0)) throw input_error("synth: noise must be non-negative");

    DataFrame df;
    std::vector<double> y(n), d(n), x1(n), x2(n), x3(n), x4(n);
    rng::Stream st(rng::derive_seed(seed, "dml"));
    for (std::size_t i = 0; i < n; ++i) {
        // x1 sits off center: even and odd forms of a centered normal are
        // uncorrelated, which would leave the naive regression of Y on D
        // unconfounded and the planted bias empty
        x1[i] = 1.0 + st.next_normal();
        x2[i] = st.next_normal();
        x3[i] = st.next_normal();
        x4[i] = st.next_normal();
        double nu = noise * st.next_normal();
        double eps = noise * st.next_normal();
        d[i] = eval_func_form(m_form, x1[i]) + nu;
        y[i] = theta * d[i] + eval_func_form(g_form, x1[i]) + eps;
    }
    df.add("y", std::move(y));
    df.add("d", std::move(d));
    df.add("x1", std::move(x1));
    df.add("x2", std::move(x2));
    df.add("x3", std::move(x3));
    df.add("x4", std::move(x4));
    return df;
}

void validate_truth(const nlohmann::json& truth, const std::string& kind) {
    auto need = [&](const char* key) {
        if (!truth.contains(key))
            throw input_error("truth document missing key '" + std::string(key) + "'");
    };
    need("kind");
    if (truth["kind"] != kind)
        throw input_error("truth document kind mismatch: expected " + kind);
    need("seed");
    if (kind == "trajectories") {
        need("params");
        need("totals");
        need("per_cell");
        need("loop_proportion");
        for (const char* k : {"trips", "loops", "stays", "segments", "repositionings"})
            if (!truth["totals"].contains(k))
                throw input_error("truth totals missing key '" + std::string(k) + "'");
    } else if (kind == "sar") {
        need("rho");
        need("beta");
        need("sigma");
    } else if (kind == "dml") {
        need("theta");
        need("g_form");
        need("m_form");
        need("noise");
    } else {
        throw input_error("unknown truth kind: " + kind);
    }
}

} // namespace looplens::synth
