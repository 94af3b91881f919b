#pragma once

// Pipeline stages behind the CLI subcommands. Each stage reads and writes
// only through the configured paths, so `run` is literally detect followed
// by analyze and two runs of the same config produce identical bytes.

#include <cstdint>
#include <string>

#include "looplens/config.hpp"
#include "looplens/ingest.hpp"

namespace looplens::pipeline {

struct DetectSummary {
    std::size_t parsed = 0;
    std::size_t rejected = 0;
    ingest::ChainStats stats;
    std::uint64_t loops = 0;
    double proportion = 0.0; // 0 when no trips were observed
    grid::LonLat origin;     // resolved grid origin
};

// ingest -> chains -> loop detection -> intensity rollups; writes loops.csv,
// intensity_{grid,station,street}.csv and manifest.json into output_dir
DetectSummary cmd_detect(const config::RunConfig& cfg);

// joins intensity with covariates per scale and writes weights, Moran, VIF,
// SAR, DML and grouped-effect reports plus summary.json
void cmd_analyze(const config::RunConfig& cfg);

// detect followed by analyze
DetectSummary cmd_run(const config::RunConfig& cfg);

} // namespace looplens::pipeline
