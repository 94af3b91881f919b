#include "looplens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "looplens/csv.hpp"
#include "looplens/dml.hpp"
#include "looplens/loopdetect.hpp"
#include "looplens/rng.hpp"
#include "looplens/sarmodel.hpp"
#include "looplens/spatialstats.hpp"
#include "looplens/timeparse.hpp"

namespace looplens::pipeline {

namespace fs = std::filesystem;

namespace {

// failures keep their class (input_error stays exit code 2) but gain a
// stage tag so the user knows which phase to look at
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const input_error& e) {
        throw input_error(std::string("[") + name + "] " + e.what());
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("[") + name + "] " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(std::string("[") + name + "] " + e.what());
    }
}

int effective_threads(const config::RunConfig& cfg) {
    if (cfg.threads > 0) return cfg.threads;
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? int(hw) : 1;
}

std::string header_comment(const config::RunConfig& cfg) {
    return "# config_hash=" + cfg.hash_hex() + " seed=" + std::to_string(cfg.seed) + "\n";
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw input_error("write failed: " + path.string());
}

struct Geometry {
    std::vector<grid::Station> stations;
    std::vector<grid::Street> streets;
    grid::GridSpec spec;
    grid::BBox bbox;
};

Geometry load_geometry(const config::RunConfig& cfg) {
    Geometry g;
    if (cfg.stations.empty()) throw input_error("no stations path configured");
    if (cfg.streets.empty()) throw input_error("no streets path configured");
    g.stations = grid::read_stations_csv(cfg.stations);
    g.streets = grid::read_streets_geojson(cfg.streets);
    for (const auto& s : g.stations) g.bbox.expand(s.pos);
    for (const auto& st : g.streets)
        for (const auto& ring : st.rings)
            for (const auto& v : ring) g.bbox.expand(v);
    grid::LonLat origin = cfg.origin ? *cfg.origin
                                     : grid::LonLat{g.bbox.lon_min, g.bbox.lat_min};
    g.spec = grid::GridSpec(origin, cfg.cell_size);
    return g;
}

std::string fmt(double v) { return csv::format_double(v); }

double apply_transform(double v, bool log1p_on, const std::string& what) {
    if (!log1p_on) return v;
    if (!(v > -1.0))
        throw input_error("log1p transform of " + what + " undefined at value " + fmt(v));
    return std::log1p(v);
}

std::vector<double> transform_column(std::vector<double> col, bool log1p_on,
                                     const std::string& name) {
    if (!log1p_on) return col;
    for (auto& v : col) v = apply_transform(v, true, "column " + name);
    return col;
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0.0;
    double pos = q * double(sorted.size() - 1);
    std::size_t lo = std::size_t(std::floor(pos));
    std::size_t hi = std::size_t(std::ceil(pos));
    double frac = pos - double(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace

DetectSummary cmd_detect(const config::RunConfig& cfg) {
    cfg.validate();
    int threads = effective_threads(cfg);

    auto parsed = stage("ingest", [&] {
        if (cfg.events.empty()) throw input_error("no events path configured");
        ingest::ParseOptions opts;
        opts.strict = cfg.strict;
        auto result = ingest::parse_events_file(cfg.events, opts);
        if (result.events.empty())
            throw input_error("no valid events in " + cfg.events);
        return result;
    });

    auto geo = stage("gridmap", [&] { return load_geometry(cfg); });
    auto units = stage("gridmap", [&] {
        return grid::build_unit_map(geo.stations, geo.streets, geo.spec, geo.bbox);
    });

    auto chains = stage("loopdetect", [&] {
        return ingest::build_chains(std::move(parsed.events), cfg.s_sched, cfg.s_stay, threads);
    });
    auto loop_events = stage("loopdetect", [&] {
        return loops::detect_all(chains.chains, geo.spec, threads);
    });

    std::vector<loops::IntensityTable> tables;
    stage("aggregate", [&] {
        for (auto scale : {loops::Scale::grid, loops::Scale::station, loops::Scale::street})
            tables.push_back(
                loops::aggregate_intensity(loop_events, units, scale, cfg.window_days));
        return 0;
    });

    DetectSummary summary;
    summary.parsed = parsed.parsed;
    summary.rejected = parsed.rejected;
    summary.stats = chains.stats;
    summary.loops = loop_events.size();
    summary.proportion = chains.stats.trips
                             ? double(summary.loops) / double(chains.stats.trips)
                             : 0.0;
    summary.origin = geo.spec.origin;

    stage("report", [&] {
        fs::create_directories(cfg.output_dir);
        std::string head = header_comment(cfg);

        std::string loops_csv = head + "bike_id,row,col,start,end\n";
        loops_csv.reserve(loops_csv.size() + loop_events.size() * 64);
        for (const auto& ev : loop_events) {
            loops_csv += ev.bike_id;
            loops_csv += ',';
            loops_csv += std::to_string(ev.cell.row);
            loops_csv += ',';
            loops_csv += std::to_string(ev.cell.col);
            loops_csv += ',';
            loops_csv += timeparse::format_iso8601(ev.start);
            loops_csv += ',';
            loops_csv += timeparse::format_iso8601(ev.end);
            loops_csv += '\n';
        }
        write_file(fs::path(cfg.output_dir) / "loops.csv", loops_csv);

        for (const auto& table : tables) {
            std::string body = head + "unit_id,intensity\n";
            for (const auto& [id, value] : table.rows)
                body += csv::escape(id) + "," + fmt(value) + "\n";
            write_file(fs::path(cfg.output_dir) /
                           ("intensity_" + std::string(loops::scale_name(table.scale)) + ".csv"),
                       body);
        }

        nlohmann::json manifest{
            {"config_hash", cfg.hash_hex()},
            {"seed", cfg.seed},
            {"events", {{"parsed", summary.parsed}, {"rejected", summary.rejected}}},
            {"chains",
             {{"bikes", chains.stats.bikes},
              {"segments", chains.stats.segments},
              {"stays", chains.stats.stays},
              {"merged_away", chains.stats.merged_away},
              {"orphan_locks", chains.stats.orphan_locks},
              {"orphan_unlocks", chains.stats.orphan_unlocks}}},
            {"trips", chains.stats.trips},
            {"repositionings", chains.stats.repositionings},
            {"loops", summary.loops},
            {"proportion", summary.proportion},
            {"window_days", cfg.window_days},
            {"grid",
             {{"origin", {geo.spec.origin.lon, geo.spec.origin.lat}},
              {"cell_size", geo.spec.cell_size}}},
            {"intensity_rows",
             {{"grid", tables[0].rows.size()},
              {"station", tables[1].rows.size()},
              {"street", tables[2].rows.size()}}}};
        write_file(fs::path(cfg.output_dir) / "manifest.json", manifest.dump(2) + "\n");
        return 0;
    });

    return summary;
}

namespace {

// covariates table indexed by unit id; columns parse to double on demand
struct Covariates {
    csv::Document doc;
    std::unordered_map<std::string, std::size_t> row_of;

    std::vector<double> column(const std::string& name,
                               const std::vector<std::string>& unit_ids) const {
        int c = doc.column(name);
        if (c < 0) throw input_error("covariates file missing column: " + name);
        std::vector<double> out;
        out.reserve(unit_ids.size());
        for (const auto& id : unit_ids) {
            const auto& cell = doc.rows[row_of.at(id)][std::size_t(c)];
            try {
                std::size_t pos = 0;
                double v = std::stod(cell, &pos);
                if (pos != cell.size()) throw std::invalid_argument(cell);
                out.push_back(v);
            } catch (const std::exception&) {
                throw input_error("covariates column " + name + " has non-numeric value '" +
                                  cell + "' for unit " + id);
            }
        }
        return out;
    }
};

Covariates load_covariates(const config::RunConfig& cfg) {
    if (cfg.covariates.empty()) throw input_error("no covariates path configured");
    Covariates cov;
    cov.doc = csv::read_file(cfg.covariates);
    int idc = cov.doc.column("unit_id");
    if (idc < 0) throw input_error("covariates file missing column: unit_id");
    for (std::size_t r = 0; r < cov.doc.rows.size(); ++r) {
        const auto& id = cov.doc.rows[r][std::size_t(idc)];
        if (!cov.row_of.emplace(id, r).second)
            throw input_error("covariates file repeats unit_id " + id);
    }
    return cov;
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ", ";
        out += ids[i];
    }
    return out;
}

struct ScaleData {
    std::vector<std::string> ids; // roster file order
    std::vector<double> intensity;
    stats::WeightsMatrix w;
};

ScaleData load_scale(const config::RunConfig& cfg, const Geometry& geo,
                     const std::string& scale, const Covariates& cov) {
    ScaleData sd;
    if (scale == "station") {
        for (const auto& s : geo.stations) sd.ids.push_back(s.id);
    } else {
        for (const auto& s : geo.streets) sd.ids.push_back(s.id);
    }

    fs::path path = fs::path(cfg.output_dir) / ("intensity_" + scale + ".csv");
    csv::Document doc = csv::read_file(path.string());
    int idc = doc.column("unit_id");
    int vc = doc.column("intensity");
    if (idc < 0 || vc < 0)
        throw input_error(path.string() + ": expected columns unit_id,intensity");

    std::unordered_map<std::string, double> values;
    std::set<std::string> roster(sd.ids.begin(), sd.ids.end());
    std::vector<std::string> orphans;
    for (const auto& row : doc.rows) {
        const auto& id = row[std::size_t(idc)];
        if (!roster.count(id)) {
            orphans.push_back(id);
            continue;
        }
        try {
            values[id] = std::stod(row[std::size_t(vc)]);
        } catch (const std::exception&) {
            throw input_error(path.string() + ": non-numeric intensity for unit " + id);
        }
    }
    if (!orphans.empty())
        throw input_error("intensity file " + path.string() +
                          " has unit ids absent from the " + scale +
                          " roster: " + join_ids(orphans));

    std::vector<std::string> missing;
    for (const auto& id : sd.ids)
        if (!values.count(id)) missing.push_back(id);
    if (!missing.empty())
        throw input_error("intensity file " + path.string() + " is missing " + scale +
                          " units: " + join_ids(missing) + " (rerun detect)");

    std::vector<std::string> no_covariates;
    for (const auto& id : sd.ids)
        if (!cov.row_of.count(id)) no_covariates.push_back(id);
    if (!no_covariates.empty())
        throw input_error("covariates file is missing unit ids: " + join_ids(no_covariates));

    sd.intensity.reserve(sd.ids.size());
    for (const auto& id : sd.ids) sd.intensity.push_back(values[id]);

    // spatial weights from the scale's geometry
    if (scale == "station") {
        std::vector<grid::XY> pts(geo.stations.size());
        for (std::size_t i = 0; i < geo.stations.size(); ++i)
            pts[i] = grid::project(geo.stations[i].pos, geo.spec);
        if (cfg.station_weights == "knn") sd.w = stats::build_weights_knn(pts, cfg.station_k);
        else sd.w = stats::build_weights_distance_band(pts, cfg.distance_band_m);
    } else {
        if (cfg.street_weights == "queen") {
            sd.w = stats::build_weights_queen(geo.streets);
        } else {
            std::vector<grid::XY> pts(geo.streets.size());
            for (std::size_t i = 0; i < geo.streets.size(); ++i) {
                grid::XY c{0.0, 0.0};
                const auto& ring = geo.streets[i].rings.front();
                for (const auto& v : ring) {
                    grid::XY q = grid::project(v, geo.spec);
                    c.x += q.x;
                    c.y += q.y;
                }
                c.x /= double(ring.size());
                c.y /= double(ring.size());
                pts[i] = c;
            }
            sd.w = stats::build_weights_distance_band(pts, cfg.distance_band_m);
        }
    }
    return sd;
}

nlohmann::json intensity_summary(std::vector<double> values) {
    std::size_t nonzero = 0;
    double mean = 0.0;
    for (double v : values) {
        if (v != 0.0) ++nonzero;
        mean += v;
    }
    mean /= values.empty() ? 1.0 : double(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    double sd = values.size() > 1 ? std::sqrt(ss / double(values.size() - 1)) : 0.0;
    std::sort(values.begin(), values.end());
    return nlohmann::json{{"mean", mean},
                          {"sd", sd},
                          {"min", values.empty() ? 0.0 : values.front()},
                          {"q25", quantile_sorted(values, 0.25)},
                          {"median", quantile_sorted(values, 0.5)},
                          {"q75", quantile_sorted(values, 0.75)},
                          {"max", values.empty() ? 0.0 : values.back()},
                          {"nonzero", nonzero}};
}

} // namespace

void cmd_analyze(const config::RunConfig& cfg) {
    cfg.validate();
    int threads = effective_threads(cfg);
    std::string head = header_comment(cfg);

    auto cov = stage("analyze", [&] { return load_covariates(cfg); });
    auto geo = stage("gridmap", [&] { return load_geometry(cfg); });

    fs::create_directories(cfg.output_dir);

    std::string moran_csv = head + "Scale,MoranI,Expected,PValue,NPerm,N\n";
    nlohmann::json summary{{"config_hash", cfg.hash_hex()},
                           {"seed", cfg.seed},
                           {"scales", nlohmann::json::object()}};

    for (const auto& scale : cfg.scales) {
        auto sd = stage("analyze", [&] { return load_scale(cfg, geo, scale, cov); });
        std::size_t n = sd.ids.size();
        nlohmann::json scale_json{{"n", n}};
        scale_json["intensity"] = intensity_summary(sd.intensity);

        // weights export: one row per stored neighbor pair
        {
            std::string body = head + "from_id,to_id,weight\n";
            for (std::size_t i = 0; i < sd.w.n; ++i)
                for (std::size_t k = sd.w.indptr[i]; k < sd.w.indptr[i + 1]; ++k)
                    body += csv::escape(sd.ids[i]) + "," +
                            csv::escape(sd.ids[std::size_t(sd.w.indices[k])]) + "," +
                            fmt(sd.w.weights[k]) + "\n";
            write_file(fs::path(cfg.output_dir) / ("weights_" + scale + ".csv"), body);
        }

        // spatial autocorrelation of the raw intensity
        auto moran = stage("moran", [&] {
            return stats::morans_permutation_test(sd.intensity, sd.w, cfg.n_perm,
                                                  rng::derive_seed(cfg.seed, "moran-" + scale),
                                                  threads);
        });
        moran_csv += scale + "," + fmt(moran.I) + "," + fmt(moran.expected) + "," +
                     fmt(moran.p_value) + "," + std::to_string(moran.n_perm) + "," +
                     std::to_string(n) + "\n";
        scale_json["moran"] = {{"i", moran.I},
                               {"expected", moran.expected},
                               {"p_value", moran.p_value},
                               {"n_perm", moran.n_perm}};

        const auto& sar_vars = cfg.sar_variables(scale);
        if (!sar_vars.empty()) {
            // collinearity screen on the raw regressors
            auto vres = stage("vif", [&] {
                std::vector<std::vector<double>> cols;
                std::vector<std::string> names;
                for (const auto& v : sar_vars) {
                    cols.push_back(cov.column(v.name, sd.ids));
                    names.push_back(v.name);
                }
                return stats::vif(cols, names);
            });
            std::string body = head + "Variable,VIF,InvVIF\n";
            nlohmann::json vif_values = nlohmann::json::object();
            for (const auto& e : vres.entries) {
                body += csv::escape(e.name) + "," + fmt(e.vif) + "," + fmt(1.0 / e.vif) + "\n";
                vif_values[e.name] = e.vif;
            }
            body += "MeanVIF," + fmt(vres.mean_vif) + ",\n";
            write_file(fs::path(cfg.output_dir) / ("vif_" + scale + ".csv"), body);
            scale_json["vif"] = {{"mean", vres.mean_vif}, {"values", vif_values}};

            auto fit = stage("sar", [&] {
                sar::ModelMatrix model;
                model.y.resize(Eigen::Index(n));
                std::vector<double> y = transform_column(
                    sd.intensity, cfg.outcome_transform == "log1p", "intensity");
                for (std::size_t i = 0; i < n; ++i) model.y[Eigen::Index(i)] = y[i];
                model.X.resize(Eigen::Index(n), Eigen::Index(sar_vars.size() + 1));
                for (std::size_t j = 0; j < sar_vars.size(); ++j) {
                    auto col = transform_column(cov.column(sar_vars[j].name, sd.ids),
                                                sar_vars[j].log1p, sar_vars[j].name);
                    for (std::size_t i = 0; i < n; ++i)
                        model.X(Eigen::Index(i), Eigen::Index(j)) = col[i];
                    model.names.push_back(sar_vars[j].name);
                }
                model.X.col(Eigen::Index(sar_vars.size())).setOnes();
                model.names.push_back("Constant");
                return sar::fit_sar(model, sd.w);
            });
            std::string sar_csv = head + "Variable,Coef,StdErr,z,p\n";
            nlohmann::json coeffs = nlohmann::json::array();
            for (std::size_t j = 0; j <= sar_vars.size(); ++j) {
                std::string name = j < sar_vars.size() ? sar_vars[j].name : "Constant";
                auto idx = Eigen::Index(j);
                sar_csv += csv::escape(name) + "," + fmt(fit.beta[idx]) + "," + fmt(fit.se[idx]) +
                           "," + fmt(fit.z[idx]) + "," + fmt(fit.p_values[idx]) + "\n";
                coeffs.push_back({{"name", name},
                                  {"coef", fit.beta[idx]},
                                  {"std_err", fit.se[idx]},
                                  {"z", fit.z[idx]},
                                  {"p", fit.p_values[idx]}});
            }
            auto rhoi = Eigen::Index(sar_vars.size() + 1);
            sar_csv += "SpatialLag," + fmt(fit.rho) + "," + fmt(fit.se[rhoi]) + "," +
                       fmt(fit.z[rhoi]) + "," + fmt(fit.p_values[rhoi]) + "\n";
            sar_csv += "PseudoR2," + fmt(fit.pseudo_r2) + ",,,\n";
            sar_csv += "LogLik," + fmt(fit.log_likelihood) + ",,,\n";
            sar_csv += "N," + std::to_string(fit.n) + ",,,\n";
            write_file(fs::path(cfg.output_dir) / ("sar_" + scale + ".csv"), sar_csv);
            scale_json["sar"] = {{"rho", fit.rho},
                                 {"rho_se", fit.se[rhoi]},
                                 {"rho_z", fit.z[rhoi]},
                                 {"rho_p", fit.p_values[rhoi]},
                                 {"sigma2", fit.sigma2},
                                 {"pseudo_r2", fit.pseudo_r2},
                                 {"log_likelihood", fit.log_likelihood},
                                 {"coefficients", coeffs}};
        }

        const auto& treatments = cfg.dml_treatments(scale);
        if (!treatments.empty()) {
            std::vector<double> y = transform_column(
                sd.intensity, cfg.outcome_transform == "log1p", "intensity");
            std::string dml_csv = head + "Treatment,EffectKind,Coef,StdErr,t,p,N\n";
            nlohmann::json dml_json = nlohmann::json::array();
            for (const auto& t : treatments) {
                auto fit = stage("dml", [&] {
                    for (const auto& c : cfg.dml_covariates)
                        if (c == t.name)
                            throw input_error("treatment " + t.name +
                                              " cannot also be a covariate");
                    DataFrame df;
                    df.add("y", y);
                    df.add(t.name,
                           transform_column(cov.column(t.name, sd.ids), t.log1p, t.name));
                    for (const auto& c : cfg.dml_covariates) df.add(c, cov.column(c, sd.ids));
                    dml::DmlSpec spec;
                    spec.outcome = "y";
                    spec.treatment = t.name;
                    spec.covariates = cfg.dml_covariates;
                    spec.folds = cfg.folds;
                    spec.gbt = cfg.gbt;
                    spec.seed = rng::derive_seed(cfg.seed, "dml-" + scale + "-" + t.name);
                    return dml::run_dml(df, spec);
                });
                dml_csv += csv::escape(t.name) + "," + dml::effect_kind_name(fit.kind) + "," +
                           fmt(fit.theta) + "," + fmt(fit.se) + "," + fmt(fit.t) + "," +
                           fmt(fit.p) + "," + std::to_string(fit.n) + "\n";
                dml_json.push_back({{"treatment", t.name},
                                    {"effect_kind", dml::effect_kind_name(fit.kind)},
                                    {"coef", fit.theta},
                                    {"std_err", fit.se},
                                    {"t", fit.t},
                                    {"p", fit.p},
                                    {"n", fit.n},
                                    {"r2_outcome", fit.r2_outcome},
                                    {"r2_treatment", fit.r2_treatment}});
            }
            write_file(fs::path(cfg.output_dir) / ("dml_" + scale + ".csv"), dml_csv);
            scale_json["dml"] = dml_json;
        }

        nlohmann::json cate_json = nlohmann::json::array();
        for (const auto& spec : cfg.cate) {
            if (spec.scale != scale) continue;
            auto groups = stage("cate", [&] {
                if (spec.group_by == spec.treatment)
                    throw input_error("cate group_by must differ from the treatment");
                for (const auto& c : cfg.dml_covariates)
                    if (c == spec.treatment)
                        throw input_error("treatment " + spec.treatment +
                                          " cannot also be a covariate");
                DataFrame df;
                df.add("y", transform_column(sd.intensity, cfg.outcome_transform == "log1p",
                                             "intensity"));
                df.add(spec.treatment, transform_column(cov.column(spec.treatment, sd.ids),
                                                        spec.treatment_log1p, spec.treatment));
                bool group_is_covariate = false;
                for (const auto& c : cfg.dml_covariates) {
                    df.add(c, cov.column(c, sd.ids));
                    if (c == spec.group_by) group_is_covariate = true;
                }
                if (!group_is_covariate && spec.group_by != "y")
                    df.add(spec.group_by, cov.column(spec.group_by, sd.ids));
                dml::DmlSpec dspec;
                dspec.outcome = "y";
                dspec.treatment = spec.treatment;
                dspec.covariates = cfg.dml_covariates;
                dspec.folds = cfg.folds;
                dspec.gbt = cfg.gbt;
                dspec.seed = rng::derive_seed(cfg.seed, "cate-" + scale + "-" + spec.treatment +
                                                            "-" + spec.group_by);
                dml::Grouping grouping;
                grouping.by = spec.group_by;
                grouping.edges = spec.edges;
                grouping.quantiles = spec.quantiles;
                return dml::cate_by_groups(df, dspec, grouping);
            });

            std::string body = head + "Group,Lower,Upper,N,Coef,StdErr\n";
            nlohmann::json rows = nlohmann::json::array();
            for (const auto& g : groups) {
                if (g.skipped && cfg.strict)
                    throw input_error("[cate] group " + g.label + " of " + spec.treatment +
                                      " by " + spec.group_by + " is too small to cross-fit");
                body += csv::escape(g.label) + "," + fmt(g.lower) + "," + fmt(g.upper) + "," +
                        std::to_string(g.n) + ",";
                if (g.skipped) body += ",";
                else body += fmt(g.fit.theta) + "," + fmt(g.fit.se);
                body += "\n";
                nlohmann::json row{{"label", g.label},
                                   {"lower", g.lower},
                                   {"upper", g.upper},
                                   {"n", g.n},
                                   {"skipped", g.skipped}};
                if (!g.skipped) {
                    row["coef"] = g.fit.theta;
                    row["std_err"] = g.fit.se;
                }
                rows.push_back(row);
            }
            write_file(fs::path(cfg.output_dir) /
                           ("cate_" + scale + "_" + spec.treatment + "_by_" + spec.group_by +
                            ".csv"),
                       body);
            cate_json.push_back({{"treatment", spec.treatment},
                                 {"group_by", spec.group_by},
                                 {"groups", rows}});
        }
        if (!cate_json.empty()) scale_json["cate"] = cate_json;

        summary["scales"][scale] = scale_json;
    }

    write_file(fs::path(cfg.output_dir) / "moran.csv", moran_csv);
    write_file(fs::path(cfg.output_dir) / "summary.json", summary.dump(2) + "\n");
}

DetectSummary cmd_run(const config::RunConfig& cfg) {
    DetectSummary summary = cmd_detect(cfg);
    cmd_analyze(cfg);
    return summary;
}

} // namespace looplens::pipeline
