#include "looplens/config.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>

#include "looplens/rng.hpp"

namespace looplens::config {

namespace {

const std::set<std::string> kScaleNames = {"station", "street"};

std::vector<Variable> catalog_variables(bool with_metro) {
    std::vector<Variable> v = {
        {"average_age", false},   {"fixed_occ_pct", false}, {"nonresident_pct", false},
        {"car_ownership", false}, {"work_poi", true},       {"residential_poi", true},
        {"commercial_poi", true}, {"central", false},       {"university", false},
        {"cbd", false},           {"hub", false},           {"bus_stations", true},
    };
    if (with_metro) v.push_back({"metro_ridership", true});
    return v;
}

std::vector<Variable> catalog_treatments(bool with_metro) {
    std::vector<Variable> v = {
        {"work_poi", true}, {"residential_poi", true}, {"commercial_poi", true},
        {"central", false}, {"university", false},     {"cbd", false},
        {"hub", false},     {"bus_stations", true},
    };
    if (with_metro) v.push_back({"metro_ridership", true});
    return v;
}

void require_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                  const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (!allowed.count(key))
            throw input_error("config: unknown key '" + key + "' in " + where);
    }
}

std::string resolve(const std::string& p, const std::filesystem::path& base) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return fp.string();
    return (base / fp).lexically_normal().string();
}

Variable parse_variable(const nlohmann::json& item, const std::string& where) {
    if (item.is_string()) return Variable{item.get<std::string>(), false};
    if (!item.is_object())
        throw input_error("config: entries of " + where + " must be names or objects");
    require_keys(item, {"name", "transform"}, where);
    Variable v;
    v.name = item.at("name").get<std::string>();
    if (item.contains("transform")) {
        std::string t = item["transform"].get<std::string>();
        if (t == "log1p") v.log1p = true;
        else if (t == "none") v.log1p = false;
        else throw input_error("config: unknown transform '" + t + "' in " + where);
    }
    return v;
}

nlohmann::json variable_json(const Variable& v) {
    return nlohmann::json{{"name", v.name}, {"transform", v.log1p ? "log1p" : "none"}};
}

} // namespace

RunConfig default_config() {
    RunConfig cfg;
    cfg.sar_station = catalog_variables(true);
    cfg.sar_street = catalog_variables(false);
    cfg.dml_covariates = {"average_age", "fixed_occ_pct", "nonresident_pct", "car_ownership"};
    cfg.dml_station = catalog_treatments(true);
    cfg.dml_street = catalog_treatments(false);
    return cfg;
}

void RunConfig::validate() const {
    if (!(cell_size > 0.0)) throw input_error("config: grid.cell_size must be positive");
    if (!(s_sched > 0.0)) throw input_error("config: thresholds.s_sched must be positive");
    if (!(s_stay >= 0.0)) throw input_error("config: thresholds.s_stay must be non-negative");
    if (s_stay > s_sched)
        throw input_error("config: s_stay must not exceed s_sched");
    if (!(window_days > 0.0)) throw input_error("config: window_days must be positive");
    if (origin && !grid::valid(*origin)) throw input_error("config: grid.origin out of range");
    if (station_weights != "knn" && station_weights != "distance_band")
        throw input_error("config: weights.station_mode must be knn or distance_band");
    if (street_weights != "queen" && street_weights != "distance_band")
        throw input_error("config: weights.street_mode must be queen or distance_band");
    if (station_k < 1) throw input_error("config: weights.station_k must be >= 1");
    if (!(distance_band_m > 0.0))
        throw input_error("config: weights.distance_band_m must be positive");
    if (n_perm < 1) throw input_error("config: moran.n_perm must be >= 1");
    if (outcome_transform != "log1p" && outcome_transform != "none")
        throw input_error("config: models.outcome_transform must be log1p or none");
    if (folds < 2) throw input_error("config: models.folds must be >= 2");
    gbt.validate();
    if (scales.empty()) throw input_error("config: scales must not be empty");
    for (const auto& s : scales)
        if (!kScaleNames.count(s))
            throw input_error("config: unknown scale '" + s + "' (expected station or street)");
    if (threads < 0) throw input_error("config: threads must be >= 0");
    for (const auto& c : cate) {
        if (!kScaleNames.count(c.scale))
            throw input_error("config: cate scale '" + c.scale + "' is not analyzable");
        if (c.treatment.empty() || c.group_by.empty())
            throw input_error("config: cate entries need treatment and group_by");
        if (c.quantiles == 0 && c.edges.size() < 2)
            throw input_error("config: cate entries need quantiles >= 2 or explicit edges");
        if (c.quantiles != 0 && c.quantiles < 2)
            throw input_error("config: cate quantiles must be >= 2");
        if (!c.edges.empty() && !std::is_sorted(c.edges.begin(), c.edges.end()))
            throw input_error("config: cate edges must be ascending");
    }
}

nlohmann::json RunConfig::to_json() const {
    auto vars = [](const std::vector<Variable>& vs) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& v : vs) arr.push_back(variable_json(v));
        return arr;
    };
    nlohmann::json cate_arr = nlohmann::json::array();
    for (const auto& c : cate) {
        nlohmann::json item{{"scale", c.scale},
                            {"treatment", c.treatment},
                            {"transform", c.treatment_log1p ? "log1p" : "none"},
                            {"group_by", c.group_by}};
        if (c.quantiles != 0) item["quantiles"] = c.quantiles;
        else item["edges"] = c.edges;
        cate_arr.push_back(item);
    }
    nlohmann::json doc{
        {"seed", seed},
        {"strict", strict},
        {"threads", threads},
        {"window_days", window_days},
        {"paths",
         {{"events", events},
          {"stations", stations},
          {"streets", streets},
          {"covariates", covariates},
          {"output_dir", output_dir}}},
        {"grid", {{"cell_size", cell_size}}},
        {"thresholds", {{"s_sched", s_sched}, {"s_stay", s_stay}}},
        {"weights",
         {{"station_mode", station_weights},
          {"station_k", station_k},
          {"street_mode", street_weights},
          {"distance_band_m", distance_band_m}}},
        {"moran", {{"n_perm", n_perm}}},
        {"gbt",
         {{"n_trees", gbt.n_trees},
          {"max_depth", gbt.max_depth},
          {"learning_rate", gbt.learning_rate},
          {"min_samples_leaf", gbt.min_samples_leaf},
          {"subsample", gbt.subsample}}},
        {"models",
         {{"outcome_transform", outcome_transform},
          {"sar_variables", {{"station", vars(sar_station)}, {"street", vars(sar_street)}}},
          {"dml_covariates", dml_covariates},
          {"dml_treatments", {{"station", vars(dml_station)}, {"street", vars(dml_street)}}},
          {"folds", folds}}},
        {"cate", cate_arr},
        {"scales", scales}};
    if (origin) doc["grid"]["origin"] = {origin->lon, origin->lat};
    return doc;
}

std::uint64_t RunConfig::hash() const {
    // threads and strict steer execution, not results; reports must hash the
    // same whatever hardware or leniency produced them
    nlohmann::json doc = to_json();
    doc.erase("threads");
    doc.erase("strict");
    return rng::fnv1a64(doc.dump());
}

std::string RunConfig::hash_hex() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, hash());
    return buf;
}

const std::vector<Variable>& RunConfig::sar_variables(const std::string& scale) const {
    if (scale == "station") return sar_station;
    if (scale == "street") return sar_street;
    throw input_error("config: no variable list for scale '" + scale + "'");
}

const std::vector<Variable>& RunConfig::dml_treatments(const std::string& scale) const {
    if (scale == "station") return dml_station;
    if (scale == "street") return dml_street;
    throw input_error("config: no treatment list for scale '" + scale + "'");
}

RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object()) throw input_error("config: document root must be an object");
    require_keys(doc,
                 {"seed", "strict", "threads", "window_days", "paths", "grid", "thresholds",
                  "weights", "moran", "gbt", "models", "cate", "scales"},
                 "the top level");

    RunConfig cfg = default_config();
    if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("strict")) cfg.strict = doc["strict"].get<bool>();
    if (doc.contains("threads")) cfg.threads = doc["threads"].get<int>();
    if (doc.contains("window_days")) cfg.window_days = doc["window_days"].get<double>();

    if (doc.contains("paths")) {
        const auto& p = doc["paths"];
        require_keys(p, {"events", "stations", "streets", "covariates", "output_dir"}, "paths");
        if (p.contains("events")) cfg.events = resolve(p["events"].get<std::string>(), base_dir);
        if (p.contains("stations"))
            cfg.stations = resolve(p["stations"].get<std::string>(), base_dir);
        if (p.contains("streets")) cfg.streets = resolve(p["streets"].get<std::string>(), base_dir);
        if (p.contains("covariates"))
            cfg.covariates = resolve(p["covariates"].get<std::string>(), base_dir);
        if (p.contains("output_dir"))
            cfg.output_dir = resolve(p["output_dir"].get<std::string>(), base_dir);
    }

    if (doc.contains("grid")) {
        const auto& g = doc["grid"];
        require_keys(g, {"origin", "cell_size"}, "grid");
        if (g.contains("origin") && !g["origin"].is_null()) {
            const auto& o = g["origin"];
            if (!o.is_array() || o.size() != 2)
                throw input_error("config: grid.origin must be [lon, lat]");
            cfg.origin = grid::LonLat{o[0].get<double>(), o[1].get<double>()};
        }
        if (g.contains("cell_size")) cfg.cell_size = g["cell_size"].get<double>();
    }

    if (doc.contains("thresholds")) {
        const auto& t = doc["thresholds"];
        require_keys(t, {"s_sched", "s_stay"}, "thresholds");
        if (t.contains("s_sched")) cfg.s_sched = t["s_sched"].get<double>();
        if (t.contains("s_stay")) cfg.s_stay = t["s_stay"].get<double>();
    }

    if (doc.contains("weights")) {
        const auto& w = doc["weights"];
        require_keys(w, {"station_mode", "station_k", "street_mode", "distance_band_m"},
                     "weights");
        if (w.contains("station_mode"))
            cfg.station_weights = w["station_mode"].get<std::string>();
        if (w.contains("station_k")) cfg.station_k = w["station_k"].get<int>();
        if (w.contains("street_mode")) cfg.street_weights = w["street_mode"].get<std::string>();
        if (w.contains("distance_band_m"))
            cfg.distance_band_m = w["distance_band_m"].get<double>();
    }

    if (doc.contains("moran")) {
        require_keys(doc["moran"], {"n_perm"}, "moran");
        if (doc["moran"].contains("n_perm")) cfg.n_perm = doc["moran"]["n_perm"].get<int>();
    }

    if (doc.contains("gbt")) {
        const auto& g = doc["gbt"];
        require_keys(g, {"n_trees", "max_depth", "learning_rate", "min_samples_leaf", "subsample"},
                     "gbt");
        if (g.contains("n_trees")) cfg.gbt.n_trees = g["n_trees"].get<int>();
        if (g.contains("max_depth")) cfg.gbt.max_depth = g["max_depth"].get<int>();
        if (g.contains("learning_rate")) cfg.gbt.learning_rate = g["learning_rate"].get<double>();
        if (g.contains("min_samples_leaf"))
            cfg.gbt.min_samples_leaf = g["min_samples_leaf"].get<int>();
        if (g.contains("subsample")) cfg.gbt.subsample = g["subsample"].get<double>();
    }

    if (doc.contains("models")) {
        const auto& m = doc["models"];
        require_keys(
            m, {"outcome_transform", "sar_variables", "dml_covariates", "dml_treatments", "folds"},
            "models");
        if (m.contains("outcome_transform"))
            cfg.outcome_transform = m["outcome_transform"].get<std::string>();
        if (m.contains("folds")) cfg.folds = m["folds"].get<int>();
        auto read_per_scale = [&](const char* key, std::vector<Variable>& station,
                                  std::vector<Variable>& street) {
            if (!m.contains(key)) return;
            const auto& s = m[key];
            require_keys(s, {"station", "street"}, std::string("models.") + key);
            auto read_list = [&](const char* scale, std::vector<Variable>& out) {
                if (!s.contains(scale)) return;
                out.clear();
                for (const auto& item : s[scale])
                    out.push_back(parse_variable(item, std::string("models.") + key));
            };
            read_list("station", station);
            read_list("street", street);
        };
        read_per_scale("sar_variables", cfg.sar_station, cfg.sar_street);
        read_per_scale("dml_treatments", cfg.dml_station, cfg.dml_street);
        if (m.contains("dml_covariates")) {
            cfg.dml_covariates.clear();
            for (const auto& item : m["dml_covariates"])
                cfg.dml_covariates.push_back(item.get<std::string>());
        }
    }

    if (doc.contains("cate")) {
        cfg.cate.clear();
        for (const auto& item : doc["cate"]) {
            require_keys(item, {"scale", "treatment", "transform", "group_by", "quantiles", "edges"},
                         "cate");
            CateSpec c;
            c.scale = item.at("scale").get<std::string>();
            c.treatment = item.at("treatment").get<std::string>();
            if (item.contains("transform")) {
                std::string t = item["transform"].get<std::string>();
                if (t == "log1p") c.treatment_log1p = true;
                else if (t != "none")
                    throw input_error("config: unknown transform '" + t + "' in cate");
            }
            c.group_by = item.at("group_by").get<std::string>();
            if (item.contains("quantiles")) c.quantiles = item["quantiles"].get<int>();
            if (item.contains("edges"))
                c.edges = item["edges"].get<std::vector<double>>();
            cfg.cate.push_back(std::move(c));
        }
    }

    if (doc.contains("scales")) {
        cfg.scales.clear();
        for (const auto& item : doc["scales"]) cfg.scales.push_back(item.get<std::string>());
    }

    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open config file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config: invalid JSON in " + path.string() + ": " + e.what());
    }
    try {
        return parse_config(doc, path.parent_path());
    } catch (const nlohmann::json::exception& e) {
        throw input_error("config: " + path.string() + ": " + e.what());
    }
}

} // namespace looplens::config
