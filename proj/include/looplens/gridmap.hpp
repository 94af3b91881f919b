#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "looplens/common.hpp"

namespace looplens::grid {

inline constexpr double kEarthRadiusM = 6371000.0;
inline constexpr double kDegToRad = 0.017453292519943295;

struct LonLat {
    double lon = 0.0;
    double lat = 0.0;
};

inline bool valid(LonLat p) {
    return std::isfinite(p.lon) && std::isfinite(p.lat) &&
           p.lon >= -180.0 && p.lon <= 180.0 && p.lat >= -90.0 && p.lat <= 90.0;
}

// great-circle distance in meters
double haversine_m(LonLat a, LonLat b);

struct XY {
    double x = 0.0;
    double y = 0.0;
};

// Equirectangular local projection around `origin`:
//   x = R * (lon - lon0) * cos(lat0), y = R * (lat - lat0), angles in radians.
// Adequate at city scale and exactly invertible, which the grid math relies on.
struct GridSpec {
    LonLat origin{};
    double cell_size = 500.0; // meters

    GridSpec() = default;
    GridSpec(LonLat o, double cell) : origin(o), cell_size(cell) {
        if (!valid(o) || std::abs(o.lat) >= 90.0)
            throw input_error("grid origin out of range");
        if (!(cell > 0.0) || !std::isfinite(cell))
            throw input_error("cell size must be positive");
    }
};

XY project(LonLat p, const GridSpec& spec);
LonLat unproject(XY q, const GridSpec& spec);

// Projects a batch through the SIMD kernels; lon/lat/x/y are parallel arrays.
void project_batch(const double* lon, const double* lat, std::size_t n,
                   const GridSpec& spec, double* x, double* y);

struct CellId {
    std::int64_t row = 0;
    std::int64_t col = 0;
    friend bool operator==(const CellId&, const CellId&) = default;
    friend auto operator<=>(const CellId&, const CellId&) = default;
};

// rows/cols are bounded well inside 32 bits for any city-scale grid
inline std::uint64_t cell_key(CellId c) {
    return (std::uint64_t(std::uint32_t(c.row)) << 32) | std::uint64_t(std::uint32_t(c.col));
}

inline CellId cell_from_key(std::uint64_t k) {
    return CellId{std::int64_t(std::int32_t(k >> 32)), std::int64_t(std::int32_t(k & 0xffffffffULL))};
}

CellId to_cell(LonLat p, const GridSpec& spec);
inline CellId to_cell_xy(XY q, double cell_size) {
    return CellId{std::int64_t(std::floor(q.y / cell_size)), std::int64_t(std::floor(q.x / cell_size))};
}

LonLat cell_centroid(CellId c, const GridSpec& spec);

struct BBox {
    double lon_min = std::numeric_limits<double>::max();
    double lat_min = std::numeric_limits<double>::max();
    double lon_max = std::numeric_limits<double>::lowest();
    double lat_max = std::numeric_limits<double>::lowest();

    bool empty() const { return lon_min > lon_max; }
    void expand(LonLat p);
    bool contains(LonLat p) const {
        return p.lon >= lon_min && p.lon <= lon_max && p.lat >= lat_min && p.lat <= lat_max;
    }
};

struct Station {
    std::string id;
    LonLat pos;
    double ridership = std::numeric_limits<double>::quiet_NaN();
};

struct Street {
    std::string id;
    // ring 0 is the outer boundary; later rings are holes (even-odd rule)
    std::vector<std::vector<LonLat>> rings;
};

// Even-odd ray casting over all rings.
bool point_in_rings(LonLat p, const std::vector<std::vector<LonLat>>& rings);

// Station -> its cell plus the 8 surrounding cells; cell -> street that
// contains the cell centroid (first street in file order wins on overlap).
struct UnitMap {
    GridSpec spec;
    std::vector<Station> stations;
    std::vector<Street> streets;
    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> cell_stations;
    std::unordered_map<std::uint64_t, std::int32_t> cell_street;
};

UnitMap build_unit_map(std::vector<Station> stations, std::vector<Street> streets,
                       const GridSpec& spec, const BBox& bbox);

// CSV header: station_id,lon,lat[,ridership]
std::vector<Station> read_stations_csv(const std::string& path);
// GeoJSON FeatureCollection of Polygons carrying a street_id property.
std::vector<Street> read_streets_geojson(const std::string& path);

} // namespace looplens::grid
