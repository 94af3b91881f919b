#include "looplens/gridmap.hpp"

#include <charconv>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "looplens/csv.hpp"
#include "looplens/kernels.hpp"

namespace looplens::grid {

double haversine_m(LonLat a, LonLat b) {
    double phi1 = a.lat * kDegToRad;
    double phi2 = b.lat * kDegToRad;
    double dphi = (b.lat - a.lat) * kDegToRad;
    double dlam = (b.lon - a.lon) * kDegToRad;
    double s1 = std::sin(dphi * 0.5);
    double s2 = std::sin(dlam * 0.5);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

XY project(LonLat p, const GridSpec& spec) {
    if (!valid(p)) throw input_error("coordinate out of range");
    double kx = kEarthRadiusM * kDegToRad * std::cos(spec.origin.lat * kDegToRad);
    double ky = kEarthRadiusM * kDegToRad;
    return XY{(p.lon - spec.origin.lon) * kx, (p.lat - spec.origin.lat) * ky};
}

LonLat unproject(XY q, const GridSpec& spec) {
    double kx = kEarthRadiusM * kDegToRad * std::cos(spec.origin.lat * kDegToRad);
    double ky = kEarthRadiusM * kDegToRad;
    return LonLat{spec.origin.lon + q.x / kx, spec.origin.lat + q.y / ky};
}

void project_batch(const double* lon, const double* lat, std::size_t n,
                   const GridSpec& spec, double* x, double* y) {
    double kx = kEarthRadiusM * kDegToRad * std::cos(spec.origin.lat * kDegToRad);
    double ky = kEarthRadiusM * kDegToRad;
    kernels::scale_shift(lon, n, spec.origin.lon, kx, x);
    kernels::scale_shift(lat, n, spec.origin.lat, ky, y);
}

CellId to_cell(LonLat p, const GridSpec& spec) {
    return to_cell_xy(project(p, spec), spec.cell_size);
}

LonLat cell_centroid(CellId c, const GridSpec& spec) {
    XY center{(double(c.col) + 0.5) * spec.cell_size, (double(c.row) + 0.5) * spec.cell_size};
    return unproject(center, spec);
}

void BBox::expand(LonLat p) {
    lon_min = std::min(lon_min, p.lon);
    lat_min = std::min(lat_min, p.lat);
    lon_max = std::max(lon_max, p.lon);
    lat_max = std::max(lat_max, p.lat);
}

bool point_in_rings(LonLat p, const std::vector<std::vector<LonLat>>& rings) {
    bool inside = false;
    for (const auto& ring : rings) {
        std::size_t m = ring.size();
        if (m < 3) continue;
        for (std::size_t i = 0, j = m - 1; i < m; j = i++) {
            const LonLat& a = ring[i];
            const LonLat& b = ring[j];
            if ((a.lat > p.lat) != (b.lat > p.lat)) {
                double xint = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
                if (p.lon < xint) inside = !inside;
            }
        }
    }
    return inside;
}

UnitMap build_unit_map(std::vector<Station> stations, std::vector<Street> streets,
                       const GridSpec& spec, const BBox& bbox) {
    UnitMap map;
    map.spec = spec;

    for (std::size_t s = 0; s < streets.size(); ++s) {
        if (streets[s].rings.empty() || streets[s].rings.front().size() < 3)
            throw input_error("degenerate polygon for street " + streets[s].id);
    }

    for (std::size_t i = 0; i < stations.size(); ++i) {
        if (!valid(stations[i].pos))
            throw input_error("station " + stations[i].id + " has out-of-range coordinates");
        CellId c = to_cell(stations[i].pos, spec);
        for (std::int64_t dr = -1; dr <= 1; ++dr)
            for (std::int64_t dc = -1; dc <= 1; ++dc)
                map.cell_stations[cell_key(CellId{c.row + dr, c.col + dc})].push_back(std::int32_t(i));
    }

    if (!streets.empty()) {
        if (bbox.empty()) throw input_error("street assignment requires a non-empty bounding box");
        CellId lo = to_cell(LonLat{bbox.lon_min, bbox.lat_min}, spec);
        CellId hi = to_cell(LonLat{bbox.lon_max, bbox.lat_max}, spec);
        for (std::int64_t r = lo.row; r <= hi.row; ++r) {
            for (std::int64_t c = lo.col; c <= hi.col; ++c) {
                LonLat center = cell_centroid(CellId{r, c}, spec);
                for (std::size_t s = 0; s < streets.size(); ++s) {
                    if (point_in_rings(center, streets[s].rings)) {
                        map.cell_street.emplace(cell_key(CellId{r, c}), std::int32_t(s));
                        break;
                    }
                }
            }
        }
    }

    map.stations = std::move(stations);
    map.streets = std::move(streets);
    return map;
}

namespace {

double parse_double_field(const std::string& s, const std::string& what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
        throw input_error("bad numeric value '" + s + "' for " + what);
    return v;
}

} // namespace

std::vector<Station> read_stations_csv(const std::string& path) {
    csv::Document doc = csv::read_file(path);
    int id_col = doc.column("station_id");
    int lon_col = doc.column("lon");
    int lat_col = doc.column("lat");
    int rid_col = doc.column("ridership");
    if (id_col < 0 || lon_col < 0 || lat_col < 0)
        throw input_error(path + ": stations csv needs station_id,lon,lat columns");
    std::vector<Station> out;
    out.reserve(doc.rows.size());
    std::unordered_map<std::string, int> seen;
    for (const auto& row : doc.rows) {
        Station st;
        st.id = row[id_col];
        if (st.id.empty()) throw input_error(path + ": empty station_id");
        if (++seen[st.id] > 1) throw input_error(path + ": duplicate station_id " + st.id);
        st.pos.lon = parse_double_field(row[lon_col], "station lon");
        st.pos.lat = parse_double_field(row[lat_col], "station lat");
        if (rid_col >= 0 && !row[rid_col].empty())
            st.ridership = parse_double_field(row[rid_col], "station ridership");
        if (!valid(st.pos))
            throw input_error(path + ": station " + st.id + " has out-of-range coordinates");
        out.push_back(std::move(st));
    }
    return out;
}

std::vector<Street> read_streets_geojson(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open geojson file: " + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw input_error(path + ": invalid json: " + e.what());
    }
    if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
        throw input_error(path + ": expected a GeoJSON FeatureCollection");

    std::vector<Street> out;
    std::unordered_set<std::string> seen_ids;
    for (const auto& feat : doc["features"]) {
        if (!feat.contains("geometry") || feat["geometry"].is_null()) continue;
        const auto& geom = feat["geometry"];
        if (geom.value("type", "") != "Polygon")
            throw input_error(path + ": only Polygon geometries are supported");
        Street st;
        if (feat.contains("properties") && feat["properties"].contains("street_id")) {
            const auto& sid = feat["properties"]["street_id"];
            st.id = sid.is_string() ? sid.get<std::string>() : sid.dump();
        } else {
            throw input_error(path + ": feature missing street_id property");
        }
        for (const auto& ring : geom["coordinates"]) {
            std::vector<LonLat> pts;
            for (const auto& pt : ring) {
                if (!pt.is_array() || pt.size() < 2)
                    throw input_error(path + ": malformed coordinate in street " + st.id);
                pts.push_back(LonLat{pt[0].get<double>(), pt[1].get<double>()});
            }
            // GeoJSON rings repeat the first vertex; drop the duplicate
            if (pts.size() > 1 && pts.front().lon == pts.back().lon && pts.front().lat == pts.back().lat)
                pts.pop_back();
            st.rings.push_back(std::move(pts));
        }
        if (st.rings.empty() || st.rings.front().size() < 3)
            throw input_error(path + ": degenerate polygon for street " + st.id);
        if (!seen_ids.insert(st.id).second)
            throw input_error(path + ": duplicate street_id " + st.id);
        out.push_back(std::move(st));
    }
    return out;
}

} // namespace looplens::grid
