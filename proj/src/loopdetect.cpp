#include "looplens/loopdetect.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "looplens/parallel.hpp"

namespace looplens::loops {

std::vector<SelfLoopEvent> detect_self_loops(const ingest::BikeChain& chain,
                                             const grid::GridSpec& spec) {
    std::vector<SelfLoopEvent> out;
    std::unordered_map<std::uint64_t, unix_time> last_visit;
    std::vector<double> lon, lat, px, py;
    for (const auto& segment : chain.segments) {
        lon.clear();
        lat.clear();
        for (const auto& stay : segment) {
            lon.push_back(stay.pos.lon);
            lat.push_back(stay.pos.lat);
        }
        px.resize(lon.size());
        py.resize(lon.size());
        grid::project_batch(lon.data(), lat.data(), lon.size(), spec, px.data(), py.data());

        last_visit.clear();
        for (std::size_t i = 0; i < segment.size(); ++i) {
            grid::CellId cell = grid::to_cell_xy(grid::XY{px[i], py[i]}, spec.cell_size);
            auto key = grid::cell_key(cell);
            auto [it, inserted] = last_visit.try_emplace(key, segment[i].arrive);
            if (!inserted) {
                out.push_back(SelfLoopEvent{chain.bike_id, cell, it->second, segment[i].arrive});
                it->second = segment[i].arrive;
            }
        }
    }
    return out;
}

std::vector<SelfLoopEvent> detect_all(const std::vector<ingest::BikeChain>& chains,
                                      const grid::GridSpec& spec, int threads) {
    std::vector<std::vector<SelfLoopEvent>> per_chain(chains.size());
    parallel_chunks(chains.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            per_chain[i] = detect_self_loops(chains[i], spec);
    });
    std::vector<SelfLoopEvent> out;
    std::size_t total = 0;
    for (const auto& v : per_chain) total += v.size();
    out.reserve(total);
    for (auto& v : per_chain)
        out.insert(out.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
    return out;
}

const char* scale_name(Scale s) {
    switch (s) {
        case Scale::grid: return "grid";
        case Scale::station: return "station";
        case Scale::street: return "street";
    }
    return "?";
}

IntensityTable aggregate_intensity(const std::vector<SelfLoopEvent>& events,
                                   const grid::UnitMap& units, Scale scale,
                                   double observation_days) {
    if (!(observation_days > 0.0))
        throw input_error("observation window must be a positive number of days");

    IntensityTable table;
    table.scale = scale;
    table.observation_days = observation_days;

    // cell totals first; all scales are rollups of these
    std::map<grid::CellId, std::uint64_t> cell_counts;
    for (const auto& ev : events) ++cell_counts[ev.cell];

    if (scale == Scale::grid) {
        for (const auto& [cell, count] : cell_counts) {
            std::string id = "g_" + std::to_string(cell.row) + "_" + std::to_string(cell.col);
            table.rows.emplace_back(std::move(id), double(count) / observation_days);
        }
        return table; // already sorted: map iterates in CellId order
    }

    if (scale == Scale::station) {
        std::vector<std::uint64_t> per_station(units.stations.size(), 0);
        for (const auto& [cell, count] : cell_counts) {
            auto it = units.cell_stations.find(grid::cell_key(cell));
            if (it == units.cell_stations.end()) continue;
            for (std::int32_t s : it->second) per_station[std::size_t(s)] += count;
        }
        for (std::size_t s = 0; s < per_station.size(); ++s)
            table.rows.emplace_back(units.stations[s].id, double(per_station[s]) / observation_days);
    } else {
        std::vector<std::uint64_t> per_street(units.streets.size(), 0);
        for (const auto& [cell, count] : cell_counts) {
            auto it = units.cell_street.find(grid::cell_key(cell));
            if (it == units.cell_street.end()) continue;
            per_street[std::size_t(it->second)] += count;
        }
        for (std::size_t s = 0; s < per_street.size(); ++s)
            table.rows.emplace_back(units.streets[s].id, double(per_street[s]) / observation_days);
    }
    std::sort(table.rows.begin(), table.rows.end());
    return table;
}

double self_loop_proportion(const std::vector<SelfLoopEvent>& events,
                            const ingest::ChainStats& stats) {
    if (stats.trips == 0) throw input_error("cannot compute loop proportion: no trips observed");
    return double(events.size()) / double(stats.trips);
}

} // namespace looplens::loops
