#include "looplens/dml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "looplens/kernels.hpp"
#include "looplens/rng.hpp"

namespace looplens::dml {

void DmlSpec::validate() const {
    if (outcome.empty() || treatment.empty()) throw input_error("dml: outcome and treatment required");
    if (covariates.empty()) throw input_error("dml: at least one covariate required");
    if (folds < 2) throw input_error("dml: need at least 2 folds");
    if (outcome == treatment) throw input_error("dml: outcome equals treatment");
    for (const auto& c : covariates)
        if (c == outcome || c == treatment)
            throw input_error("dml: covariate " + c + " duplicates outcome or treatment");
    gbt.validate();
}

const char* effect_kind_name(EffectKind k) { return k == EffectKind::ate ? "ATE" : "MTE"; }

namespace {

bool is_binary01(const std::vector<double>& v) {
    bool saw0 = false, saw1 = false;
    for (double x : v) {
        if (x == 0.0) saw0 = true;
        else if (x == 1.0) saw1 = true;
        else return false;
    }
    return saw0 && saw1;
}

double out_of_fold_r2(std::span<const double> truth, std::span<const double> resid) {
    double mean = kernels::sum(truth.data(), truth.size()) / double(truth.size());
    double ss_tot = kernels::sum_sq_dev(truth.data(), truth.size(), mean);
    double ss_res = kernels::dot(resid.data(), resid.data(), resid.size());
    return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

// fold ids depend only on (seed, n, folds) so subsets and reruns line up
std::vector<int> fold_assignment(std::size_t n, int folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Stream stream(rng::derive_seed(seed, "crossfit"));
    stream.shuffle(order);
    std::vector<int> fold(n);
    for (std::size_t k = 0; k < n; ++k) fold[order[k]] = int(k % std::size_t(folds));
    return fold;
}

} // namespace

Residuals crossfit_residuals(const DataFrame& data, const DmlSpec& spec) {
    spec.validate();
    const std::vector<double>& y = data.col(spec.outcome);
    const std::vector<double>& d = data.col(spec.treatment);
    std::size_t n = data.n_rows();
    if (n < std::size_t(10 * spec.folds))
        throw input_error("dml: need at least 10 observations per fold, got n=" + std::to_string(n));

    ColMatrix X;
    for (const auto& name : spec.covariates) X.cols.push_back(data.col(name));

    std::vector<int> fold = fold_assignment(n, spec.folds, spec.seed);

    Residuals out;
    out.binary_treatment = is_binary01(d);
    out.y_resid.resize(n);
    out.d_resid.resize(n);

    std::vector<std::size_t> train_rows, test_rows;
    for (int f = 0; f < spec.folds; ++f) {
        train_rows.clear();
        test_rows.clear();
        for (std::size_t i = 0; i < n; ++i)
            (fold[i] == f ? test_rows : train_rows).push_back(i);
        if (train_rows.size() < std::size_t(2 * spec.gbt.min_samples_leaf) || test_rows.empty())
            throw input_error("dml: fold " + std::to_string(f) +
                              " leaves too little training data; reduce the number of folds");

        ColMatrix Xtr, Xte;
        Xtr.cols.resize(X.n_cols());
        Xte.cols.resize(X.n_cols());
        for (std::size_t j = 0; j < X.n_cols(); ++j) {
            Xtr.cols[j].reserve(train_rows.size());
            Xte.cols[j].reserve(test_rows.size());
            for (std::size_t i : train_rows) Xtr.cols[j].push_back(X.cols[j][i]);
            for (std::size_t i : test_rows) Xte.cols[j].push_back(X.cols[j][i]);
        }
        std::vector<double> ytr, dtr;
        ytr.reserve(train_rows.size());
        dtr.reserve(train_rows.size());
        for (std::size_t i : train_rows) {
            ytr.push_back(y[i]);
            dtr.push_back(d[i]);
        }

        GbtRegressor g = GbtRegressor::fit(Xtr, ytr, spec.gbt,
                                           rng::derive_seed(spec.seed, "g-fold", std::uint64_t(f)));
        GbtRegressor m = GbtRegressor::fit(Xtr, dtr, spec.gbt,
                                           rng::derive_seed(spec.seed, "m-fold", std::uint64_t(f)));
        std::vector<double> ghat = g.predict(Xte);
        std::vector<double> mhat = m.predict(Xte);
        for (std::size_t k = 0; k < test_rows.size(); ++k) {
            std::size_t i = test_rows[k];
            out.y_resid[i] = y[i] - ghat[k];
            double mh = mhat[k];
            if (out.binary_treatment) mh = std::clamp(mh, 0.01, 0.99);
            out.d_resid[i] = d[i] - mh;
        }
    }

    out.r2_outcome = out_of_fold_r2(y, out.y_resid);
    out.r2_treatment = out_of_fold_r2(d, out.d_resid);
    return out;
}

DmlFit estimate_theta(std::span<const double> y_resid, std::span<const double> d_resid) {
    if (y_resid.size() != d_resid.size()) throw input_error("dml: residual length mismatch");
    std::size_t n = y_resid.size();
    if (n < 2) throw input_error("dml: need at least two observations");

    double dd = kernels::dot(d_resid.data(), d_resid.data(), n);
    if (dd <= 0.0)
        throw input_error("dml: no residual treatment variation; effect is not identified");
    double dy = kernels::dot(d_resid.data(), y_resid.data(), n);

    DmlFit fit;
    fit.n = n;
    fit.theta = dy / dd;
    double meat = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double u = y_resid[i] - fit.theta * d_resid[i];
        meat += d_resid[i] * d_resid[i] * u * u;
    }
    double var = meat / (dd * dd);
    fit.se = std::sqrt(var);
    if (fit.se > 0.0) {
        fit.t = fit.theta / fit.se;
        fit.p = std::erfc(std::abs(fit.t) / std::sqrt(2.0));
    } else {
        fit.t = fit.theta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        fit.p = fit.theta == 0.0 ? 1.0 : 0.0;
    }
    return fit;
}

DmlFit run_dml(const DataFrame& data, const DmlSpec& spec) {
    Residuals res = crossfit_residuals(data, spec);
    DmlFit fit = estimate_theta(res.y_resid, res.d_resid);
    fit.kind = res.binary_treatment ? EffectKind::ate : EffectKind::mte;
    fit.r2_outcome = res.r2_outcome;
    fit.r2_treatment = res.r2_treatment;
    return fit;
}

std::vector<CateGroup> cate_by_groups(const DataFrame& data, const DmlSpec& spec,
                                      const Grouping& grouping) {
    spec.validate();
    const std::vector<double>& g = data.col(grouping.by);
    std::size_t n = data.n_rows();
    if (n == 0) throw input_error("dml: empty data");

    std::vector<double> edges = grouping.edges;
    if (edges.empty()) {
        if (grouping.quantiles < 1)
            throw input_error("dml: grouping needs explicit edges or a positive quantile count");
        std::vector<double> sorted(g);
        std::sort(sorted.begin(), sorted.end());
        edges.push_back(sorted.front());
        for (int q = 1; q < grouping.quantiles; ++q) {
            double pos = double(q) / grouping.quantiles * double(n - 1);
            std::size_t lo = std::size_t(pos);
            double frac = pos - double(lo);
            double v = sorted[lo] + frac * (sorted[std::min(lo + 1, n - 1)] - sorted[lo]);
            edges.push_back(v);
        }
        edges.push_back(sorted.back());
        edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    }
    if (edges.size() < 2) throw input_error("dml: grouping produced no bins");
    if (!std::is_sorted(edges.begin(), edges.end()))
        throw input_error("dml: grouping edges must be ascending");

    std::vector<CateGroup> out;
    for (std::size_t b = 0; b + 1 < edges.size(); ++b) {
        double lo = edges[b], hi = edges[b + 1];
        bool last = b + 2 == edges.size();
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < n; ++i) {
            bool in = last ? (g[i] >= lo && g[i] <= hi) : (g[i] >= lo && g[i] < hi);
            if (in) rows.push_back(i);
        }
        CateGroup grp;
        grp.lower = lo;
        grp.upper = hi;
        grp.n = rows.size();
        char buf[64];
        std::snprintf(buf, sizeof(buf), "[%.6g, %.6g%s", lo, hi, last ? "]" : ")");
        grp.label = buf;
        if (rows.size() < std::size_t(10 * spec.folds)) {
            grp.skipped = true; // too small for stable cross-fitting
        } else {
            DataFrame sub = data.select_rows(rows);
            grp.fit = run_dml(sub, spec);
        }
        out.push_back(std::move(grp));
    }
    return out;
}

} // namespace looplens::dml
