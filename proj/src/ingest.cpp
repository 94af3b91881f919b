#include "looplens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <tuple>

#include <zlib.h>

#include "looplens/csv.hpp"
#include "looplens/parallel.hpp"
#include "looplens/timeparse.hpp"

namespace looplens::ingest {

namespace {

constexpr std::string_view kHeader = "bike_id,timestamp,lon,lat,kind";

bool parse_coord(std::string_view s, double lo, double hi, double& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out) &&
           out >= lo && out <= hi;
}

// Feeds lines to a callback; the parse core is shared by the plain and gzip
// readers.
class LineSink {
public:
    LineSink(ParseResult& result, const ParseOptions& opts) : result_(result), opts_(opts) {}

    void line(std::string_view text) {
        ++lineno_;
        if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
        if (lineno_ == 1) {
            std::string_view hdr = text;
            if (hdr.size() >= 3 && (unsigned char)hdr[0] == 0xEF && (unsigned char)hdr[1] == 0xBB &&
                (unsigned char)hdr[2] == 0xBF)
                hdr.remove_prefix(3);
            if (hdr != kHeader)
                throw input_error("bad events header, expected '" + std::string(kHeader) + "'");
            return;
        }
        if (text.empty()) return;
        std::string_view fields[6];
        std::size_t nf = csv::split_simple(text, fields, 6);
        RawEvent ev;
        if (nf == 5 && parse_row(fields, ev)) {
            ++result_.parsed;
            result_.events.push_back(std::move(ev));
        } else {
            if (opts_.strict)
                throw input_error("malformed event row at line " + std::to_string(lineno_));
            ++result_.rejected;
        }
    }

    bool saw_header() const { return lineno_ >= 1; }

private:
    bool parse_row(const std::string_view* f, RawEvent& ev) {
        if (f[0].empty()) return false;
        auto t = timeparse::parse_timestamp(f[1]);
        if (!t) return false;
        if (!parse_coord(f[2], -180.0, 180.0, ev.pos.lon)) return false;
        if (!parse_coord(f[3], -90.0, 90.0, ev.pos.lat)) return false;
        if (f[4] == "lock") ev.kind = EventKind::lock;
        else if (f[4] == "unlock") ev.kind = EventKind::unlock;
        else return false;
        ev.bike_id.assign(f[0]);
        ev.t = *t;
        return true;
    }

    ParseResult& result_;
    const ParseOptions& opts_;
    std::size_t lineno_ = 0;
};

} // namespace

ParseResult parse_events(std::istream& in, const ParseOptions& opts) {
    ParseResult result;
    LineSink sink(result, opts);
    std::string line;
    while (std::getline(in, line)) sink.line(line);
    if (!sink.saw_header()) throw input_error("empty events input");
    return result;
}

namespace {

ParseResult parse_events_gz(const std::string& path, const ParseOptions& opts) {
    gzFile gz = gzopen(path.c_str(), "rb");
    if (!gz) throw input_error("cannot open events file: " + path);
    ParseResult result;
    LineSink sink(result, opts);
    std::string pending;
    char buf[1 << 16];
    int got;
    while ((got = gzread(gz, buf, sizeof(buf))) > 0) {
        std::size_t start = 0;
        for (int i = 0; i < got; ++i) {
            if (buf[i] == '\n') {
                if (pending.empty()) {
                    sink.line(std::string_view(buf + start, std::size_t(i) - start));
                } else {
                    pending.append(buf + start, std::size_t(i) - start);
                    sink.line(pending);
                    pending.clear();
                }
                start = std::size_t(i) + 1;
            }
        }
        pending.append(buf + start, std::size_t(got) - start);
    }
    bool read_error = got < 0;
    gzclose(gz);
    if (read_error) throw input_error("gzip read error in " + path);
    if (!pending.empty()) sink.line(pending);
    if (!sink.saw_header()) throw input_error("empty events input");
    return result;
}

} // namespace

ParseResult parse_events_file(const std::string& path, const ParseOptions& opts) {
    if (path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0)
        return parse_events_gz(path, opts);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw input_error("cannot open events file: " + path);
    return parse_events(in, opts);
}

namespace {

struct PendingStay {
    grid::LonLat pos;       // lock fix, possibly averaged with the unlock fix
    unix_time arrive = 0;
    unix_time depart = kOpenEnded;
};

// duration-weighted centroid weight; open-ended and zero-length stays get a
// floor of one second so the centroid stays defined
double stay_weight(const StayPoint& s) {
    if (s.depart == kOpenEnded) return 1.0;
    return double(std::max<unix_time>(1, s.depart - s.arrive));
}

class ChainBuilder {
public:
    ChainBuilder(double s_sched, double s_stay) : s_sched_(s_sched), s_stay_(s_stay) {}

    // events[lo, hi) must all belong to one bike, already in total order
    BikeChain run(const std::vector<RawEvent>& events, std::size_t lo, std::size_t hi,
                  ChainStats& stats) {
        BikeChain chain;
        chain.bike_id = events[lo].bike_id;
        segment_.clear();
        locked_ = false;
        moving_ = false;

        for (std::size_t i = lo; i < hi; ++i) {
            const RawEvent& ev = events[i];
            if (ev.kind == EventKind::lock) {
                if (locked_) {
                    ++stats.orphan_locks; // two locks in a row: drop the incoming one
                    continue;
                }
                if (moving_) ++stats.trips;
                // at stream start the bike is simply already parked
                open_ = PendingStay{ev.pos, ev.t, kOpenEnded};
                locked_ = true;
                moving_ = false;
            } else {
                if (locked_) {
                    close_stay(ev, chain, stats);
                    locked_ = false;
                    moving_ = true;
                } else if (moving_) {
                    ++stats.orphan_unlocks; // two unlocks in a row: drop the incoming one
                } else {
                    moving_ = true; // stream starts mid-stay; the origin stay was never observed
                }
            }
        }
        if (locked_) push_stay(StayPoint{open_.pos, open_.arrive, kOpenEnded, 1}, stats);
        flush_segment(chain);
        stats.stays += counted_stays(chain);
        stats.segments += chain.segments.size();
        ++stats.bikes;
        return chain;
    }

private:
    void close_stay(const RawEvent& unlock_ev, BikeChain& chain, ChainStats& stats) {
        double disp = grid::haversine_m(open_.pos, unlock_ev.pos);
        open_.depart = unlock_ev.t;
        if (disp > s_sched_) {
            // operator moved the locked bike: the stay ends the current
            // segment and the far unlock fix is not folded in
            ++stats.repositionings;
            push_stay(StayPoint{open_.pos, open_.arrive, open_.depart, 1}, stats);
            flush_segment(chain);
            return;
        }
        grid::LonLat pos = open_.pos;
        if (disp <= s_stay_) {
            // both fixes observe one parked episode
            pos.lon = 0.5 * (open_.pos.lon + unlock_ev.pos.lon);
            pos.lat = 0.5 * (open_.pos.lat + unlock_ev.pos.lat);
        }
        push_stay(StayPoint{pos, open_.arrive, open_.depart, 1}, stats);
    }

    void push_stay(StayPoint next, ChainStats& stats) {
        if (!segment_.empty()) {
            StayPoint& prev = segment_.back();
            if (grid::haversine_m(prev.pos, next.pos) <= s_stay_) {
                double wp = merged_weight_;
                double wn = stay_weight(next);
                prev.pos.lon = (prev.pos.lon * wp + next.pos.lon * wn) / (wp + wn);
                prev.pos.lat = (prev.pos.lat * wp + next.pos.lat * wn) / (wp + wn);
                prev.depart = next.depart;
                prev.n_merged += 1;
                merged_weight_ = wp + wn;
                ++stats.merged_away;
                return;
            }
        }
        merged_weight_ = stay_weight(next);
        segment_.push_back(next);
    }

    void flush_segment(BikeChain& chain) {
        if (!segment_.empty()) chain.segments.push_back(std::move(segment_));
        segment_.clear();
    }

    static std::uint64_t counted_stays(const BikeChain& chain) {
        std::uint64_t n = 0;
        for (const auto& seg : chain.segments) n += seg.size();
        return n;
    }

    double s_sched_;
    double s_stay_;
    std::vector<StayPoint> segment_;
    PendingStay open_{};
    bool locked_ = false;
    bool moving_ = false;
    double merged_weight_ = 0.0;
};

} // namespace

ChainResult build_chains(std::vector<RawEvent> events, double s_sched, double s_stay,
                         int threads) {
    if (!(s_sched > 0.0) || !(s_stay >= 0.0))
        throw input_error("thresholds must satisfy s_sched > 0 and s_stay >= 0");

    std::sort(events.begin(), events.end(), [](const RawEvent& a, const RawEvent& b) {
        return std::tie(a.bike_id, a.t, a.kind, a.pos.lon, a.pos.lat) <
               std::tie(b.bike_id, b.t, b.kind, b.pos.lon, b.pos.lat);
    });

    // contiguous [begin, end) ranges per bike
    std::vector<std::pair<std::size_t, std::size_t>> groups;
    for (std::size_t i = 0; i < events.size();) {
        std::size_t j = i + 1;
        while (j < events.size() && events[j].bike_id == events[i].bike_id) ++j;
        groups.emplace_back(i, j);
        i = j;
    }

    ChainResult result;
    result.chains.resize(groups.size());
    std::vector<ChainStats> chunk_stats(std::size_t(std::max(1, threads)));
    parallel_chunks(groups.size(), threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        ChainBuilder builder(s_sched, s_stay);
        ChainStats local{};
        for (std::size_t g = begin; g < end; ++g)
            result.chains[g] = builder.run(events, groups[g].first, groups[g].second, local);
        chunk_stats[chunk] = local;
    });
    for (const ChainStats& cs : chunk_stats) {
        result.stats.bikes += cs.bikes;
        result.stats.segments += cs.segments;
        result.stats.stays += cs.stays;
        result.stats.merged_away += cs.merged_away;
        result.stats.orphan_locks += cs.orphan_locks;
        result.stats.orphan_unlocks += cs.orphan_unlocks;
        result.stats.trips += cs.trips;
        result.stats.repositionings += cs.repositionings;
    }
    return result;
}

} // namespace looplens::ingest
