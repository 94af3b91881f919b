#include "looplens/spatialstats.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <Eigen/Dense>

#include "looplens/kernels.hpp"
#include "looplens/parallel.hpp"
#include "looplens/rng.hpp"

namespace looplens::stats {

WeightsMatrix WeightsMatrix::from_neighbor_lists(const std::vector<std::vector<std::int32_t>>& nbrs) {
    WeightsMatrix w;
    w.n = nbrs.size();
    w.indptr.assign(w.n + 1, 0);
    for (std::size_t i = 0; i < w.n; ++i) w.indptr[i + 1] = w.indptr[i] + std::int64_t(nbrs[i].size());
    w.indices.reserve(std::size_t(w.indptr[w.n]));
    w.weights.reserve(std::size_t(w.indptr[w.n]));
    for (std::size_t i = 0; i < w.n; ++i) {
        std::vector<std::int32_t> sorted = nbrs[i];
        std::sort(sorted.begin(), sorted.end());
        for (std::int32_t j : sorted) {
            if (j == std::int32_t(i)) continue; // no self neighbors
            w.indices.push_back(j);
            w.weights.push_back(1.0);
        }
        w.indptr[i + 1] = std::int64_t(w.indices.size());
        if (w.indptr[i + 1] == w.indptr[i]) w.islands.push_back(std::int32_t(i));
    }
    return w;
}

void WeightsMatrix::row_standardize() {
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::int64_t k = indptr[i]; k < indptr[i + 1]; ++k) s += weights[std::size_t(k)];
        if (s > 0.0)
            for (std::int64_t k = indptr[i]; k < indptr[i + 1]; ++k) weights[std::size_t(k)] /= s;
    }
    row_standardized = true;
}

double WeightsMatrix::s0() const {
    return kernels::sum(weights.data(), weights.size());
}

WeightsMatrix build_weights_knn(const std::vector<grid::XY>& points, int k) {
    std::size_t n = points.size();
    if (n < 2) throw input_error("knn weights need at least two units");
    if (k < 1 || std::size_t(k) >= n)
        throw input_error("knn weights need 1 <= k < n, got k=" + std::to_string(k));

    std::vector<std::vector<std::int32_t>> nbrs(n);
    std::vector<std::pair<double, std::int32_t>> dists;
    for (std::size_t i = 0; i < n; ++i) {
        dists.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double dx = points[i].x - points[j].x;
            double dy = points[i].y - points[j].y;
            dists.emplace_back(dx * dx + dy * dy, std::int32_t(j));
        }
        std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
        std::sort(dists.begin(), dists.begin() + k);
        for (int t = 0; t < k; ++t) nbrs[i].push_back(dists[std::size_t(t)].second);
    }
    // union symmetrization
    for (std::size_t i = 0; i < n; ++i)
        for (std::int32_t j : std::vector<std::int32_t>(nbrs[i]))
            if (std::find(nbrs[std::size_t(j)].begin(), nbrs[std::size_t(j)].end(), std::int32_t(i)) ==
                nbrs[std::size_t(j)].end())
                nbrs[std::size_t(j)].push_back(std::int32_t(i));

    WeightsMatrix w = WeightsMatrix::from_neighbor_lists(nbrs);
    w.row_standardize();
    return w;
}

WeightsMatrix build_weights_queen(const std::vector<grid::Street>& polygons) {
    std::size_t n = polygons.size();
    if (n < 2) throw input_error("queen weights need at least two polygons");

    // snap vertices to ~1cm so shared corners compare equal
    auto snap_key = [](grid::LonLat p) {
        auto q = [](double v) { return std::int64_t(std::llround(v * 1e7)); };
        return std::uint64_t(q(p.lon)) * 0x9e3779b97f4a7c15ULL ^ std::uint64_t(q(p.lat));
    };

    std::unordered_map<std::uint64_t, std::vector<std::int32_t>> vertex_owner;
    for (std::size_t i = 0; i < n; ++i) {
        if (polygons[i].rings.empty() || polygons[i].rings.front().size() < 3)
            throw input_error("degenerate polygon for street " + polygons[i].id);
        for (const auto& ring : polygons[i].rings)
            for (const auto& v : ring) {
                auto& owners = vertex_owner[snap_key(v)];
                if (owners.empty() || owners.back() != std::int32_t(i))
                    owners.push_back(std::int32_t(i));
            }
    }

    std::vector<std::vector<std::int32_t>> nbrs(n);
    for (const auto& [key, owners] : vertex_owner) {
        (void)key;
        for (std::size_t a = 0; a < owners.size(); ++a)
            for (std::size_t b = a + 1; b < owners.size(); ++b) {
                nbrs[std::size_t(owners[a])].push_back(owners[b]);
                nbrs[std::size_t(owners[b])].push_back(owners[a]);
            }
    }
    for (auto& v : nbrs) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    WeightsMatrix w = WeightsMatrix::from_neighbor_lists(nbrs);
    w.row_standardize();
    return w;
}

WeightsMatrix build_weights_distance_band(const std::vector<grid::XY>& points, double band_m) {
    std::size_t n = points.size();
    if (n < 2) throw input_error("distance-band weights need at least two units");
    if (!(band_m > 0.0)) throw input_error("distance band must be positive");

    double band2 = band_m * band_m;
    std::vector<std::vector<std::int32_t>> nbrs(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double dx = points[i].x - points[j].x;
            double dy = points[i].y - points[j].y;
            if (dx * dx + dy * dy <= band2) {
                nbrs[i].push_back(std::int32_t(j));
                nbrs[j].push_back(std::int32_t(i));
            }
        }
    WeightsMatrix w = WeightsMatrix::from_neighbor_lists(nbrs);
    w.row_standardize();
    return w;
}

namespace {

// numerator sum_i (y_i - mean) * sum_j w_ij (y_j - mean), on pre-centered y
double moran_numerator(const std::vector<double>& dev, const WeightsMatrix& w) {
    double acc = 0.0;
    for (std::size_t i = 0; i < w.n; ++i) {
        std::int64_t b = w.indptr[i];
        std::size_t len = std::size_t(w.indptr[i + 1] - b);
        if (len == 0) continue;
        acc += dev[i] * kernels::gather_dot(w.indices.data() + b, w.weights.data() + b, len, dev.data());
    }
    return acc;
}

} // namespace

MoranResult morans_i(std::span<const double> y, const WeightsMatrix& w) {
    if (y.size() != w.n) throw input_error("moran: y length does not match weights dimension");
    if (w.n < 2) throw input_error("moran: need at least two units");
    double s0 = w.s0();
    if (s0 == 0.0) throw input_error("moran: weights sum to zero");

    double mean = kernels::sum(y.data(), y.size()) / double(y.size());
    double denom = kernels::sum_sq_dev(y.data(), y.size(), mean);
    if (denom == 0.0) throw input_error("moran: y has zero variance");

    std::vector<double> dev(y.size());
    kernels::scale_shift(y.data(), y.size(), mean, 1.0, dev.data());

    MoranResult r;
    r.I = (double(w.n) / s0) * (moran_numerator(dev, w) / denom);
    r.expected = -1.0 / double(w.n - 1);
    return r;
}

MoranResult morans_permutation_test(std::span<const double> y, const WeightsMatrix& w,
                                    int n_perm, std::uint64_t seed, int threads) {
    if (n_perm < 1) throw input_error("moran: n_perm must be positive");
    MoranResult r = morans_i(y, w);
    r.n_perm = n_perm;
    r.seed = seed;

    double mean = kernels::sum(y.data(), y.size()) / double(y.size());
    double denom = kernels::sum_sq_dev(y.data(), y.size(), mean);
    std::vector<double> dev(y.size());
    kernels::scale_shift(y.data(), y.size(), mean, 1.0, dev.data());

    // mean and variance are permutation-invariant, so only the numerator
    // needs recomputing per draw
    double s0 = w.s0();
    double scale = double(w.n) / (s0 * denom);
    double observed = std::abs(r.I - r.expected);

    std::vector<std::uint64_t> hits(std::size_t(std::max(1, threads)), 0);
    parallel_chunks(std::size_t(n_perm), threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::vector<double> perm(dev.begin(), dev.end());
        std::uint64_t local = 0;
        for (std::size_t p = begin; p < end; ++p) {
            rng::Stream stream(rng::derive_seed(seed, "moran-perm", p));
            // a fresh Fisher-Yates pass over the identity arrangement per
            // draw keeps results independent of chunking
            std::copy(dev.begin(), dev.end(), perm.begin());
            stream.shuffle(perm);
            double ip = scale * moran_numerator(perm, w);
            if (std::abs(ip - r.expected) >= observed) ++local;
        }
        hits[chunk] += local;
    });
    std::uint64_t total_hits = 0;
    for (std::uint64_t h : hits) total_hits += h;
    r.p_value = double(1 + total_hits) / double(n_perm + 1);
    return r;
}

VifResult vif(const std::vector<std::vector<double>>& columns,
              const std::vector<std::string>& names) {
    if (columns.size() != names.size()) throw input_error("vif: names do not match columns");
    std::size_t p = columns.size();
    if (p < 2) throw input_error("vif: need at least two columns");
    std::size_t n = columns.front().size();
    for (const auto& c : columns)
        if (c.size() != n) throw input_error("vif: ragged columns");
    if (n <= p) throw input_error("vif: need more rows than columns");

    for (std::size_t j = 0; j < p; ++j) {
        double mean = kernels::sum(columns[j].data(), n) / double(n);
        if (kernels::sum_sq_dev(columns[j].data(), n, mean) == 0.0)
            throw input_error("vif: column " + names[j] + " is constant");
    }

    Eigen::MatrixXd X(n, p);
    for (std::size_t j = 0; j < p; ++j)
        for (std::size_t i = 0; i < n; ++i) X(Eigen::Index(i), Eigen::Index(j)) = columns[j][i];

    VifResult result;
    result.entries.reserve(p);
    Eigen::MatrixXd design(n, p); // intercept + others
    double vif_sum = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
        design.col(0).setOnes();
        Eigen::Index c = 1;
        for (std::size_t o = 0; o < p; ++o)
            if (o != j) design.col(c++) = X.col(Eigen::Index(o));
        Eigen::VectorXd yj = X.col(Eigen::Index(j));
        Eigen::VectorXd beta = (design.transpose() * design)
                                   .ldlt()
                                   .solve(design.transpose() * yj);
        Eigen::VectorXd resid = yj - design * beta;
        double ss_res = resid.squaredNorm();
        double ss_tot = (yj.array() - yj.mean()).square().sum();
        double r2 = 1.0 - ss_res / ss_tot;
        if (!std::isfinite(r2) || r2 > 1.0 - 1e-12)
            throw input_error("vif: column " + names[j] + " is exactly collinear with the others");
        double v = 1.0 / (1.0 - r2);
        vif_sum += v;
        result.entries.push_back(VifEntry{names[j], v});
    }
    result.mean_vif = vif_sum / double(p);
    return result;
}

} // namespace looplens::stats
