#pragma once

// Run configuration: a single JSON document, strict about unknown keys,
// overridable by CLI flags after loading. The fnv1a hash of the canonical
// dump stamps every report so outputs are traceable to their settings.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "looplens/common.hpp"
#include "looplens/gbt.hpp"
#include "looplens/gridmap.hpp"

namespace looplens::config {

// a model variable: column name plus whether log1p is applied
struct Variable {
    std::string name;
    bool log1p = false;
};

// one grouped-effect request: quantile bins (when quantiles >= 2) or
// explicit ascending edges over the grouping column
struct CateSpec {
    std::string scale;
    std::string treatment;
    bool treatment_log1p = false;
    std::string group_by;
    int quantiles = 0;
    std::vector<double> edges;
};

struct RunConfig {
    // input and output locations, resolved relative to the config file
    std::string events;
    std::string stations;
    std::string streets;
    std::string covariates;
    std::string output_dir = "out";

    std::optional<grid::LonLat> origin; // default: bbox lower-left of the geometry
    double cell_size = 500.0;
    double s_sched = 500.0;
    double s_stay = 100.0;
    double window_days = 7.0;

    std::string station_weights = "knn"; // knn | distance_band
    int station_k = 5;
    std::string street_weights = "queen"; // queen | distance_band
    double distance_band_m = 1000.0;

    int n_perm = 999;

    std::string outcome_transform = "log1p"; // log1p | none
    std::vector<Variable> sar_station;
    std::vector<Variable> sar_street;
    std::vector<std::string> dml_covariates;
    std::vector<Variable> dml_station;
    std::vector<Variable> dml_street;
    int folds = 5;
    dml::GbtParams gbt;
    std::vector<CateSpec> cate;

    std::vector<std::string> scales = {"station", "street"};
    std::uint64_t seed = 42;
    bool strict = false;
    int threads = 0; // 0 = hardware concurrency

    void validate() const;
    nlohmann::json to_json() const;    // canonical form, alphabetical keys
    std::uint64_t hash() const;        // fnv1a64 of the canonical dump
    std::string hash_hex() const;      // 16 lowercase hex digits

    const std::vector<Variable>& sar_variables(const std::string& scale) const;
    const std::vector<Variable>& dml_treatments(const std::string& scale) const;
};

// defaults carry the full variable catalog; the street scale has no
// metro_ridership column
RunConfig default_config();

// parse from JSON, rejecting unknown keys anywhere in the tree; relative
// paths are resolved against base_dir
RunConfig parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);

} // namespace looplens::config
