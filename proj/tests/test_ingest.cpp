#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <zlib.h>

#include <algorithm>
#include <sstream>

#include "looplens/ingest.hpp"
#include "looplens/rng.hpp"
#include "testutil.hpp"

using namespace looplens;
using ingest::EventKind;
using ingest::RawEvent;

namespace {

const grid::GridSpec kSpec(grid::LonLat{0.0, 0.0}, 500.0);

grid::LonLat at_m(double x, double y) { return grid::unproject(grid::XY{x, y}, kSpec); }

RawEvent ev(const char* bike, unix_time t, grid::LonLat p, EventKind k) {
    RawEvent e;
    e.bike_id = bike;
    e.t = t;
    e.pos = p;
    e.kind = k;
    return e;
}

RawEvent lock(const char* bike, unix_time t, grid::LonLat p) {
    return ev(bike, t, p, EventKind::lock);
}
RawEvent unlock(const char* bike, unix_time t, grid::LonLat p) {
    return ev(bike, t, p, EventKind::unlock);
}

// Independent re-derivation of the chain contract, written over the
// collapsed alternating sequence instead of a state machine:
//   - consecutive same-kind events keep the first one, the rest are orphans
//   - every kept lock opens a stay; a kept lock after a kept unlock is a trip
//   - unlock displacement > s_sched splits the segment (repositioning),
//     <= s_stay folds the unlock fix in as a midpoint
//   - consecutive stays within s_stay merge at the duration-weighted centroid
struct OracleOut {
    ingest::ChainStats stats;
    std::vector<ingest::BikeChain> chains;
};

OracleOut oracle_chains(std::vector<RawEvent> events, double s_sched, double s_stay) {
    std::sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        return std::tie(a.bike_id, a.t, a.kind, a.pos.lon, a.pos.lat) <
               std::tie(b.bike_id, b.t, b.kind, b.pos.lon, b.pos.lat);
    });
    OracleOut out;
    std::size_t i = 0;
    while (i < events.size()) {
        std::size_t j = i;
        while (j < events.size() && events[j].bike_id == events[i].bike_id) ++j;

        std::vector<RawEvent> eff;
        for (std::size_t k = i; k < j; ++k) {
            if (!eff.empty() && eff.back().kind == events[k].kind) {
                if (events[k].kind == EventKind::lock) ++out.stats.orphan_locks;
                else ++out.stats.orphan_unlocks;
                continue;
            }
            eff.push_back(events[k]);
        }

        ingest::BikeChain chain;
        chain.bike_id = events[i].bike_id;
        std::vector<ingest::StayPoint> seg;
        std::vector<double> weights;
        auto weight_of = [](const ingest::StayPoint& s) {
            return s.depart == ingest::kOpenEnded ? 1.0
                                                  : double(std::max<unix_time>(1, s.depart - s.arrive));
        };
        auto push = [&](ingest::StayPoint s) {
            if (!seg.empty() && grid::haversine_m(seg.back().pos, s.pos) <= s_stay) {
                double wp = weights.back(), wn = weight_of(s);
                auto& prev = seg.back();
                prev.pos.lon = (prev.pos.lon * wp + s.pos.lon * wn) / (wp + wn);
                prev.pos.lat = (prev.pos.lat * wp + s.pos.lat * wn) / (wp + wn);
                prev.depart = s.depart;
                prev.n_merged += 1;
                weights.back() = wp + wn;
                ++out.stats.merged_away;
                return;
            }
            weights.push_back(weight_of(s));
            seg.push_back(s);
        };
        auto flush = [&] {
            if (!seg.empty()) chain.segments.push_back(seg);
            seg.clear();
            weights.clear();
        };

        for (std::size_t k = 0; k < eff.size(); ++k) {
            if (eff[k].kind != EventKind::lock) continue;
            if (k > 0) ++out.stats.trips;
            if (k + 1 < eff.size()) {
                const RawEvent& ul = eff[k + 1];
                double disp = grid::haversine_m(eff[k].pos, ul.pos);
                grid::LonLat pos = eff[k].pos;
                if (disp > s_sched) {
                    ++out.stats.repositionings;
                    push(ingest::StayPoint{pos, eff[k].t, ul.t, 1});
                    flush();
                    continue;
                }
                if (disp <= s_stay) {
                    pos.lon = 0.5 * (pos.lon + ul.pos.lon);
                    pos.lat = 0.5 * (pos.lat + ul.pos.lat);
                }
                push(ingest::StayPoint{pos, eff[k].t, ul.t, 1});
            } else {
                push(ingest::StayPoint{eff[k].pos, eff[k].t, ingest::kOpenEnded, 1});
            }
        }
        flush();
        for (const auto& s : chain.segments) out.stats.stays += s.size();
        out.stats.segments += chain.segments.size();
        ++out.stats.bikes;
        out.chains.push_back(std::move(chain));
        i = j;
    }
    return out;
}

bool chains_equal(const std::vector<ingest::BikeChain>& a,
                  const std::vector<ingest::BikeChain>& b, double tol) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].bike_id != b[i].bike_id) return false;
        if (a[i].segments.size() != b[i].segments.size()) return false;
        for (std::size_t s = 0; s < a[i].segments.size(); ++s) {
            const auto& sa = a[i].segments[s];
            const auto& sb = b[i].segments[s];
            if (sa.size() != sb.size()) return false;
            for (std::size_t k = 0; k < sa.size(); ++k) {
                if (sa[k].arrive != sb[k].arrive || sa[k].depart != sb[k].depart) return false;
                if (sa[k].n_merged != sb[k].n_merged) return false;
                if (std::abs(sa[k].pos.lon - sb[k].pos.lon) > tol) return false;
                if (std::abs(sa[k].pos.lat - sb[k].pos.lat) > tol) return false;
            }
        }
    }
    return true;
}

bool stats_equal(const ingest::ChainStats& a, const ingest::ChainStats& b) {
    return a.bikes == b.bikes && a.segments == b.segments && a.stays == b.stays &&
           a.merged_away == b.merged_away && a.orphan_locks == b.orphan_locks &&
           a.orphan_unlocks == b.orphan_unlocks && a.trips == b.trips &&
           a.repositionings == b.repositionings;
}

} // namespace

TEST_CASE("event parsing accepts both timestamp forms and validates fields") {
    std::istringstream in(
        "bike_id,timestamp,lon,lat,kind\n"
        "b1,2023-08-01T00:00:00Z,121.4,31.2,lock\n"
        "b1,1690848600,121.41,31.21,unlock\n");
    auto r = ingest::parse_events(in);
    REQUIRE(r.events.size() == 2);
    CHECK(r.parsed == 2);
    CHECK(r.rejected == 0);
    CHECK(r.events[0].t == 1690848000);
    CHECK(r.events[1].t == 1690848600);
    CHECK(r.events[0].kind == EventKind::lock);
    CHECK(r.events[1].kind == EventKind::unlock);
}

TEST_CASE("malformed rows are counted, or fatal in strict mode") {
    std::string text =
        "bike_id,timestamp,lon,lat,kind\n"
        "b1,2023-08-01T00:00:00Z,121.4,31.2,lock\n"
        "b1,not-a-time,121.4,31.2,lock\n"
        "b1,1690848600,181.0,31.2,lock\n"     // lon out of range
        "b1,1690848600,121.4,91.0,lock\n"     // lat out of range
        "b1,1690848600,121.4,31.2,parked\n"   // unknown kind
        ",1690848600,121.4,31.2,lock\n"       // empty bike id
        "b1,1690848600,121.4,31.2\n"          // missing field
        "b1,1690849000,121.4,31.2,unlock\n";
    {
        std::istringstream in(text);
        auto r = ingest::parse_events(in);
        CHECK(r.parsed == 2);
        CHECK(r.rejected == 6);
    }
    {
        std::istringstream in(text);
        ingest::ParseOptions strict;
        strict.strict = true;
        CHECK_THROWS_WITH_AS(ingest::parse_events(in, strict),
                             doctest::Contains("line 3"), input_error);
    }
}

TEST_CASE("a wrong header is always fatal") {
    std::istringstream in("bike,time,lon,lat,kind\n");
    CHECK_THROWS_AS(ingest::parse_events(in), input_error);
    std::istringstream empty("");
    CHECK_THROWS_AS(ingest::parse_events(empty), input_error);
}

TEST_CASE("gzip event files parse identically") {
    testutil::TempDir td("ingest");
    std::string text =
        "bike_id,timestamp,lon,lat,kind\n"
        "b1,1690848000,121.4,31.2,lock\n"
        "b1,1690848600,121.4,31.2,unlock\n";
    testutil::write_file(td.file("e.csv"), text);
    // write a real gzip file through the same zlib the reader uses
    {
        gzFile gz = gzopen(td.file("e.csv.gz").c_str(), "wb");
        REQUIRE(gz != nullptr);
        gzwrite(gz, text.data(), unsigned(text.size()));
        gzclose(gz);
    }
    auto plain = ingest::parse_events_file(td.file("e.csv"));
    auto zipped = ingest::parse_events_file(td.file("e.csv.gz"));
    REQUIRE(plain.events.size() == zipped.events.size());
    CHECK(plain.events[1].t == zipped.events[1].t);
    CHECK_THROWS_AS(ingest::parse_events_file(td.file("absent.csv")), input_error);
}

TEST_CASE("a leading lock opens the first stay without counting a trip") {
    auto p = at_m(100, 100);
    std::vector<RawEvent> events{lock("b", 0, p), unlock("b", 600, p), lock("b", 1200, at_m(900, 100))};
    auto r = ingest::build_chains(events, 500.0, 100.0);
    CHECK(r.stats.trips == 1);
    CHECK(r.stats.stays == 2);
    CHECK(r.stats.segments == 1);
    REQUIRE(r.chains.size() == 1);
    REQUIRE(r.chains[0].segments.size() == 1);
    CHECK(r.chains[0].segments[0].size() == 2);
    // the trailing stay is open ended
    CHECK(r.chains[0].segments[0][1].depart == ingest::kOpenEnded);
}

TEST_CASE("a leading unlock means the origin stay was never observed") {
    std::vector<RawEvent> events{unlock("b", 0, at_m(0, 0)), lock("b", 600, at_m(900, 0))};
    auto r = ingest::build_chains(events, 500.0, 100.0);
    CHECK(r.stats.trips == 1); // the ride still happened
    CHECK(r.stats.stays == 1);
}

TEST_CASE("duplicate kinds drop the incoming event as an orphan") {
    auto p = at_m(0, 0);
    std::vector<RawEvent> events{
        lock("b", 0, p), lock("b", 10, at_m(900, 0)), // second lock is an orphan
        unlock("b", 600, p), unlock("b", 700, p),     // second unlock is an orphan
        lock("b", 1200, at_m(900, 0)),
    };
    auto r = ingest::build_chains(events, 500.0, 100.0);
    CHECK(r.stats.orphan_locks == 1);
    CHECK(r.stats.orphan_unlocks == 1);
    CHECK(r.stats.trips == 1);
    CHECK(r.stats.stays == 2);
    // every lock is exactly one of: kept stay, merged-away stay, orphan
    CHECK(3 == r.stats.stays + r.stats.merged_away + r.stats.orphan_locks);
}

TEST_CASE("unlock within the stay radius folds in as a midpoint") {
    auto lk = at_m(0, 0);
    auto ul = at_m(80, 0); // 80 m <= s_stay
    std::vector<RawEvent> events{lock("b", 0, lk), unlock("b", 600, ul)};
    auto r = ingest::build_chains(events, 500.0, 100.0);
    REQUIRE(r.stats.stays == 1);
    const auto& stay = r.chains[0].segments[0][0];
    CHECK(stay.pos.lon == doctest::Approx(0.5 * (lk.lon + ul.lon)).epsilon(1e-15));
    CHECK(stay.pos.lat == doctest::Approx(0.5 * (lk.lat + ul.lat)).epsilon(1e-15));
    CHECK(stay.depart == 600);
}

TEST_CASE("unlock drift between s_stay and s_sched keeps the lock fix") {
    auto lk = at_m(0, 0);
    auto ul = at_m(300, 0); // between thresholds
    std::vector<RawEvent> events{lock("b", 0, lk), unlock("b", 600, ul)};
    auto r = ingest::build_chains(events, 500.0, 100.0);
    REQUIRE(r.stats.stays == 1);
    CHECK(r.stats.repositionings == 0);
    CHECK(r.chains[0].segments[0][0].pos.lon == lk.lon);
}

TEST_CASE("displacement beyond s_sched is a repositioning that splits the segment") {
    std::vector<RawEvent> events{
        lock("b", 0, at_m(0, 0)),
        unlock("b", 600, at_m(900, 0)), // moved 900 m while locked
        lock("b", 1200, at_m(1800, 0)),
        unlock("b", 1800, at_m(1800, 0)),
        lock("b", 2400, at_m(2700, 0)),
    };
    auto r = ingest::build_chains(events, 500.0, 100.0);
    CHECK(r.stats.repositionings == 1);
    CHECK(r.stats.segments == 2);
    CHECK(r.stats.trips == 2); // rides after the repositioning still count
    REQUIRE(r.chains[0].segments.size() == 2);
    // the far unlock fix was not folded into the stay
    CHECK(r.chains[0].segments[0].back().pos.lon == at_m(0, 0).lon);
    CHECK(r.chains[0].segments[1].size() == 2);
}

TEST_CASE("consecutive nearby stays merge at the duration-weighted centroid") {
    auto a = at_m(0, 0);
    auto b = at_m(60, 0);
    std::vector<RawEvent> events{
        lock("x", 0, a), unlock("x", 100, a),    // stay 1: weight 100 at a
        lock("x", 400, b), unlock("x", 700, b),  // stay 2: weight 300 at b, 60 m away
    };
    auto r = ingest::build_chains(events, 500.0, 10.0); // s_stay 10: no midpoint folding
    CHECK(r.stats.merged_away == 0);
    CHECK(r.stats.stays == 2);

    auto merged = ingest::build_chains(events, 500.0, 100.0); // 60 m now merges
    CHECK(merged.stats.merged_away == 1);
    CHECK(merged.stats.stays == 1);
    const auto& stay = merged.chains[0].segments[0][0];
    CHECK(stay.n_merged == 2);
    CHECK(stay.arrive == 0);
    CHECK(stay.depart == 700);
    // weights are the stay durations: 100 s and 300 s
    CHECK(stay.pos.lon == doctest::Approx((a.lon * 100 + b.lon * 300) / 400.0).epsilon(1e-15));
}

TEST_CASE("equal timestamps order unlock before lock") {
    auto p = at_m(0, 0);
    std::vector<RawEvent> events{
        lock("b", 0, p),
        lock("b", 600, at_m(900, 0)), // same t as the unlock below
        unlock("b", 600, p),
    };
    auto r = ingest::build_chains(events, 500.0, 100.0);
    // unlock is processed first, so the lock at 600 is a trip arrival, not an orphan
    CHECK(r.stats.orphan_locks == 0);
    CHECK(r.stats.trips == 1);
    CHECK(r.stats.stays == 2);
}

TEST_CASE("thresholds are validated") {
    std::vector<RawEvent> events{lock("b", 0, at_m(0, 0))};
    CHECK_THROWS_AS(ingest::build_chains(events, 0.0, 0.0), input_error);
    CHECK_THROWS_AS(ingest::build_chains(events, 500.0, -1.0), input_error);
}

TEST_CASE("random streams: oracle equality, shuffle and thread invariance") {
    rng::Stream gen(2024);
    // spot lattice: offsets 0 / 60 m (merge range) / 300 m (same cell, apart)
    // / 900 m (reposition range)
    std::vector<grid::LonLat> spots;
    for (double x : {0.0, 60.0, 300.0, 900.0, 5000.0})
        for (double y : {0.0, 60.0, 2000.0}) spots.push_back(at_m(x, y));
    const char* bikes[] = {"b1", "b2", "b3"};

    for (int trial = 0; trial < 200; ++trial) {
        std::vector<RawEvent> events;
        int n = 5 + int(gen.next_below(60));
        for (int k = 0; k < n; ++k) {
            const char* bike = bikes[gen.next_below(3)];
            unix_time t = unix_time(gen.next_below(50)) * 60;
            auto p = spots[gen.next_below(spots.size())];
            events.push_back(gen.next_double() < 0.5 ? lock(bike, t, p) : unlock(bike, t, p));
        }

        auto got = ingest::build_chains(events, 500.0, 100.0);
        auto want = oracle_chains(events, 500.0, 100.0);
        CHECK(stats_equal(got.stats, want.stats));
        CHECK(chains_equal(got.chains, want.chains, 1e-12));

        // input order must not matter
        auto shuffled = events;
        gen.shuffle(shuffled);
        auto again = ingest::build_chains(shuffled, 500.0, 100.0, 4);
        CHECK(stats_equal(got.stats, again.stats));
        CHECK(chains_equal(got.chains, again.chains, 0.0));
    }
}
