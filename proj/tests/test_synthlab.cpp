#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "looplens/ingest.hpp"
#include "looplens/loopdetect.hpp"
#include "looplens/synthlab.hpp"
#include "testutil.hpp"

using namespace looplens;

namespace {

synth::Scenario small_scenario(std::uint64_t seed) {
    synth::Scenario sc;
    sc.seed = seed;
    sc.n_bikes = 20;
    sc.days = 2;
    sc.trips_per_bike_day = 8;
    sc.extent_m = 4000.0;
    sc.n_stations = 12;
    sc.street_rows = 4;
    sc.street_cols = 4;
    return sc;
}

ingest::ParseResult parse_string(const std::string& csv) {
    std::istringstream in(csv);
    return ingest::parse_events(in);
}

} // namespace

TEST_CASE("generation is deterministic byte for byte") {
    auto sc = small_scenario(7);
    std::string a, b;
    auto ta = synth::gen_trajectories(sc, a);
    auto tb = synth::gen_trajectories(sc, b);
    CHECK(a == b);
    CHECK(ta.total_loops == tb.total_loops);
    CHECK(ta.loops_per_cell == tb.loops_per_cell);

    sc.seed = 8;
    std::string c;
    synth::gen_trajectories(sc, c);
    CHECK(c != a);
}

TEST_CASE("the detector recovers the planted truth exactly") {
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto sc = small_scenario(seed);
        sc.reposition_rate = 0.05; // exercise segment splits too
        std::string csv;
        auto truth = synth::gen_trajectories(sc, csv);

        auto parsed = parse_string(csv);
        CHECK(parsed.rejected == 0);
        auto chains = ingest::build_chains(parsed.events, 500.0, 100.0);
        CHECK(chains.stats.trips == truth.total_trips);
        CHECK(chains.stats.stays == truth.total_stays);
        CHECK(chains.stats.segments == truth.total_segments);
        CHECK(chains.stats.repositionings == truth.repositionings);
        CHECK(chains.stats.merged_away == 0); // plants keep stays apart

        auto events = loops::detect_all(chains.chains, sc.grid_spec(), 2);
        CHECK(events.size() == truth.total_loops);
        std::map<grid::CellId, std::uint64_t> per_cell;
        for (const auto& ev : events) ++per_cell[ev.cell];
        CHECK(per_cell == truth.loops_per_cell);
    }
}

TEST_CASE("loop propensity at the extremes pins the loop count") {
    auto sc = small_scenario(11);
    sc.reposition_rate = 0.0;

    // propensity 0 forbids immediate returns; incidental revisits of older
    // cells remain possible, so only adjacency and the ceiling are pinned
    sc.loop_propensity = 0.0;
    std::string csv0;
    auto t0 = synth::gen_trajectories(sc, csv0);
    {
        auto parsed = parse_string(csv0);
        auto chains = ingest::build_chains(parsed.events, 500.0, 100.0);
        for (const auto& chain : chains.chains)
            for (const auto& seg : chain.segments)
                for (std::size_t i = 1; i < seg.size(); ++i)
                    CHECK(grid::to_cell(seg[i].pos, sc.grid_spec()) !=
                          grid::to_cell(seg[i - 1].pos, sc.grid_spec()));
        auto events = loops::detect_all(chains.chains, sc.grid_spec(), 1);
        CHECK(events.size() == t0.total_loops);
    }

    sc.loop_propensity = 1.0;
    std::string csv1;
    auto t1 = synth::gen_trajectories(sc, csv1);
    // every trip returns to its cell, so every trip is a loop
    CHECK(t1.total_loops == t1.total_trips);
    CHECK(t0.total_loops < t1.total_loops);

    auto parsed = parse_string(csv1);
    auto chains = ingest::build_chains(parsed.events, 500.0, 100.0);
    auto events = loops::detect_all(chains.chains, sc.grid_spec(), 1);
    CHECK(events.size() == t1.total_loops);
}

TEST_CASE("scenario validation rejects out-of-range settings") {
    auto ok = small_scenario(1);
    CHECK_NOTHROW(ok.validate());

    auto sc = ok;
    sc.n_bikes = 0;
    CHECK_THROWS_AS(sc.validate(), input_error);
    sc = ok;
    sc.loop_propensity = 1.5;
    CHECK_THROWS_AS(sc.validate(), input_error);
    sc = ok;
    sc.reposition_rate = -0.1;
    CHECK_THROWS_AS(sc.validate(), input_error);
    sc = ok;
    sc.extent_m = 3.0 * sc.cell_size; // too small for distinct anchors
    CHECK_THROWS_AS(sc.validate(), input_error);
    sc = ok;
    sc.n_stations = 2;
    CHECK_THROWS_AS(sc.validate(), input_error);
    sc = ok;
    sc.street_rows = 1;
    CHECK_THROWS_AS(sc.validate(), input_error);
}

TEST_CASE("stations live on distinct cells inside the extent") {
    auto sc = small_scenario(19);
    auto stations = synth::gen_stations(sc);
    REQUIRE(stations.size() == 12);
    auto spec = sc.grid_spec();
    std::set<std::pair<std::int64_t, std::int64_t>> cells;
    for (const auto& s : stations) {
        auto xy = grid::project(s.pos, spec);
        CHECK(xy.x >= 0.0);
        CHECK(xy.x <= sc.extent_m);
        CHECK(xy.y >= 0.0);
        CHECK(xy.y <= sc.extent_m);
        auto c = grid::to_cell(s.pos, spec);
        cells.insert({c.row, c.col});
        CHECK(s.ridership > 0.0);
    }
    CHECK(cells.size() == stations.size());
}

TEST_CASE("street tiles cover the extent and share snapped corners") {
    auto sc = small_scenario(23);
    auto streets = synth::gen_streets(sc);
    REQUIRE(streets.size() == 16);
    auto w = stats::build_weights_queen(streets);
    // interior tiles touch 8 neighbors in a 4x4 tiling
    std::size_t max_deg = 0;
    for (std::size_t i = 0; i < w.n; ++i) max_deg = std::max(max_deg, w.row_size(i));
    CHECK(max_deg == 8);
    CHECK(w.islands.empty());
}

TEST_CASE("write_city emits a bundle the pipeline can consume directly") {
    testutil::TempDir td("city");
    auto sc = small_scenario(29);
    auto paths = synth::write_city(sc, td.path());
    for (const auto& p : {paths.events, paths.stations, paths.streets, paths.covariates,
                          paths.config, paths.truth})
        CHECK(std::filesystem::exists(p));

    auto truth = nlohmann::json::parse(std::ifstream(paths.truth));
    CHECK_NOTHROW(synth::validate_truth(truth, "trajectories"));
    CHECK_THROWS_AS(synth::validate_truth(truth, "sar"), input_error);
    CHECK(truth.at("kind") == "trajectories");

    // covariates carry one row per station and street
    auto cov = testutil::read_file(paths.covariates.string());
    std::size_t rows = std::count(cov.begin(), cov.end(), '\n');
    CHECK(rows == 1 + 12 + 16);
}

TEST_CASE("gzip output parses identically to plain output") {
    testutil::TempDir td("cityz");
    auto sc = small_scenario(31);
    auto plain_paths = synth::write_city(sc, td.path() / "plain");
    sc.gzip_events = true;
    auto gz_paths = synth::write_city(sc, td.path() / "gz");
    CHECK(gz_paths.events.extension() == ".gz");

    auto a = ingest::parse_events_file(plain_paths.events.string());
    auto b = ingest::parse_events_file(gz_paths.events.string());
    REQUIRE(a.events.size() == b.events.size());
    for (std::size_t i = 0; i < a.events.size(); i += 97) {
        CHECK(a.events[i].bike_id == b.events[i].bike_id);
        CHECK(a.events[i].t == b.events[i].t);
        CHECK(a.events[i].pos.lon == b.events[i].pos.lon);
    }
}

TEST_CASE("planted SAR data reproduces the structural equation") {
    std::vector<std::vector<std::int32_t>> nbrs(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
            if (r > 0) nbrs[std::size_t(r * 3 + c)].push_back(std::int32_t((r - 1) * 3 + c));
            if (r < 2) nbrs[std::size_t(r * 3 + c)].push_back(std::int32_t((r + 1) * 3 + c));
            if (c > 0) nbrs[std::size_t(r * 3 + c)].push_back(std::int32_t(r * 3 + c - 1));
            if (c < 2) nbrs[std::size_t(r * 3 + c)].push_back(std::int32_t(r * 3 + c + 1));
        }
    auto w = stats::WeightsMatrix::from_neighbor_lists(nbrs);
    w.row_standardize();

    auto data = synth::gen_sar_data(w, 0.5, {1.0, -2.0, 0.3}, 0.0, 5);
    REQUIRE(data.y.size() == 9);
    REQUIRE(data.names.size() == 3);
    CHECK(data.names.back() == "Constant");
    CHECK((data.X.col(2).array() == 1.0).all());

    // sigma = 0: y must satisfy y = rho W y + X beta exactly
    auto dense = sar::to_dense(w);
    Eigen::VectorXd rhs = 0.5 * dense * data.y + data.X * Eigen::Vector3d(1.0, -2.0, 0.3);
    CHECK((data.y - rhs).lpNorm<Eigen::Infinity>() < 1e-10);

    CHECK_THROWS_AS(synth::gen_sar_data(w, 1.0, {1.0, 0.0, 0.0}, 0.1, 1), input_error);
    CHECK_THROWS_AS(synth::gen_sar_data(w, 0.5, {}, 0.1, 1), input_error);
}

TEST_CASE("planted DML data obeys its functional forms") {
    auto data = synth::gen_dml_data(300, 0.7, synth::FuncForm::sine,
                                    synth::FuncForm::quadratic, 0.0, 9);
    CHECK(data.n_rows() == 300);
    const auto& y = data.col("y");
    const auto& d = data.col("d");
    const auto& x1 = data.col("x1");
    for (std::size_t i = 0; i < 300; i += 13) {
        // noise = 0: D = m(x1), Y = theta D + g(x1) exactly
        CHECK(d[i] == doctest::Approx(x1[i] * x1[i]).epsilon(1e-12));
        CHECK(y[i] == doctest::Approx(0.7 * d[i] + std::sin(2.0 * x1[i])).epsilon(1e-12));
    }
    CHECK_THROWS_AS(synth::gen_dml_data(5, 0.5, synth::FuncForm::linear,
                                        synth::FuncForm::linear, 1.0, 1),
                    input_error);
}

TEST_CASE("functional forms parse round-trip") {
    for (const char* name : {"linear", "quadratic", "sine", "step"}) {
        auto f = synth::parse_func_form(name);
        CHECK(std::string(synth::func_form_name(f)) == name);
    }
    CHECK_THROWS_AS(synth::parse_func_form("cubic"), input_error);
    CHECK(synth::eval_func_form(synth::FuncForm::linear, 1.5) == 1.5);
    CHECK(synth::eval_func_form(synth::FuncForm::step, -0.2) == 0.0);
    CHECK(synth::eval_func_form(synth::FuncForm::step, 0.2) == 1.0);
}
