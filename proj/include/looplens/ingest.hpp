#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <vector>

#include "looplens/common.hpp"
#include "looplens/gridmap.hpp"

namespace looplens::ingest {

enum class EventKind : std::uint8_t { unlock = 0, lock = 1 }; // unlock sorts first at equal times

struct RawEvent {
    std::string bike_id;
    unix_time t = 0;
    grid::LonLat pos;
    EventKind kind = EventKind::unlock;
};

struct ParseOptions {
    // When true any malformed data row aborts with input_error instead of
    // being counted and skipped. A malformed header is always fatal.
    bool strict = false;
};

struct ParseResult {
    std::vector<RawEvent> events;
    std::uint64_t parsed = 0;
    std::uint64_t rejected = 0;
};

// Wire format: bike_id,timestamp,lon,lat,kind with kind in {lock, unlock} and
// timestamps either ISO-8601 UTC or integer epoch seconds.
ParseResult parse_events(std::istream& in, const ParseOptions& opts = {});
// Dispatches on extension: ".gz" streams through zlib.
ParseResult parse_events_file(const std::string& path, const ParseOptions& opts = {});

// depart value for a stay still open when the data ends
inline constexpr unix_time kOpenEnded = INT64_MAX;

struct StayPoint {
    grid::LonLat pos;
    unix_time arrive = 0;
    unix_time depart = kOpenEnded;
    std::uint32_t n_merged = 1; // candidate stays folded into this point
};

// Segments are mobility sub-chains separated by operator repositioning
// (lock->unlock displacement above s_sched). Stays never span a boundary.
struct BikeChain {
    std::string bike_id;
    std::vector<std::vector<StayPoint>> segments;
};

struct ChainStats {
    std::uint64_t bikes = 0;
    std::uint64_t segments = 0;
    std::uint64_t stays = 0;
    std::uint64_t merged_away = 0;
    std::uint64_t orphan_locks = 0;
    std::uint64_t orphan_unlocks = 0;
    std::uint64_t trips = 0;
    std::uint64_t repositionings = 0;
};

struct ChainResult {
    std::vector<BikeChain> chains;
    ChainStats stats;
};

// Sorts events into the total order (bike_id, t, kind, lon, lat) and walks
// them per bike:
//   - a lock opens a candidate stay (also at stream start: the bike is
//     already parked, no trip is counted for it);
//   - the next unlock closes it; displacement above s_sched marks operator
//     repositioning and splits the chain after the stay;
//   - otherwise an unlock fix within s_stay of the lock fix is averaged in;
//   - consecutive stays within s_stay merge into one point at their
//     duration-weighted centroid;
//   - a repeated event kind drops the incoming event as an orphan.
// Every lock event ends up as exactly one of: a stay, a merged-away stay, or
// a dropped orphan.
ChainResult build_chains(std::vector<RawEvent> events, double s_sched, double s_stay,
                         int threads = 1);

} // namespace looplens::ingest
