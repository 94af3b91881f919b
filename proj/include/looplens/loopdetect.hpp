#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "looplens/gridmap.hpp"
#include "looplens/ingest.hpp"

namespace looplens::loops {

struct SelfLoopEvent {
    std::string bike_id;
    grid::CellId cell;
    unix_time start = 0; // arrival at the cell's previous visit
    unix_time end = 0;   // arrival at the revisit; always > start
};

// Single pass per segment with a cell -> last-visit-time dictionary: the
// first visit inserts the cell, a revisit emits an event and refreshes the
// timestamp. Per segment the loop count therefore equals
// (stay points) - (distinct cells).
std::vector<SelfLoopEvent> detect_self_loops(const ingest::BikeChain& chain,
                                             const grid::GridSpec& spec);

// All chains, optionally in parallel; events are concatenated in chain order
// so the result does not depend on the thread count.
std::vector<SelfLoopEvent> detect_all(const std::vector<ingest::BikeChain>& chains,
                                      const grid::GridSpec& spec, int threads = 1);

enum class Scale { grid, station, street };

const char* scale_name(Scale s);

// Rows sorted by unit_id. Intensity is loops per day over the observation
// window. At station scale a loop cell credits every station whose 3x3
// neighborhood covers it, so overlapping stations double-count by design; at
// street scale loops in cells with no street are dropped.
struct IntensityTable {
    Scale scale = Scale::grid;
    double observation_days = 0.0;
    std::vector<std::pair<std::string, double>> rows;
};

IntensityTable aggregate_intensity(const std::vector<SelfLoopEvent>& events,
                                   const grid::UnitMap& units, Scale scale,
                                   double observation_days);

// total loops / total trips; throws input_error when no trips were observed
double self_loop_proportion(const std::vector<SelfLoopEvent>& events,
                            const ingest::ChainStats& stats);

} // namespace looplens::loops
