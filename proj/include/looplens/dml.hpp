#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "looplens/frame.hpp"
#include "looplens/gbt.hpp"

namespace looplens::dml {

struct DmlSpec {
    std::string outcome;
    std::string treatment;
    std::vector<std::string> covariates;
    int folds = 5;
    GbtParams gbt;
    std::uint64_t seed = 0;

    void validate() const;
};

// Out-of-fold residuals from K-fold cross-fitting: each observation's
// nuisance predictions come from models trained on the other folds.
struct Residuals {
    std::vector<double> y_resid; // Y - g_hat(X)
    std::vector<double> d_resid; // D - m_hat(X)
    double r2_outcome = 0.0;     // out-of-fold R^2 of g_hat
    double r2_treatment = 0.0;   // out-of-fold R^2 of m_hat
    bool binary_treatment = false;
};

Residuals crossfit_residuals(const DataFrame& data, const DmlSpec& spec);

enum class EffectKind { ate, mte };

const char* effect_kind_name(EffectKind k);

struct DmlFit {
    double theta = 0.0;
    double se = 0.0;
    double t = 0.0;
    double p = 0.0;
    EffectKind kind = EffectKind::mte;
    std::size_t n = 0;
    double r2_outcome = 0.0;
    double r2_treatment = 0.0;
};

// theta = sum(dr * yr) / sum(dr^2) with the heteroskedasticity-robust
// variance  sum(dr^2 (yr - theta dr)^2) / (sum dr^2)^2.
DmlFit estimate_theta(std::span<const double> y_resid, std::span<const double> d_resid);

// Cross-fits nuisances and estimates the effect of `treatment` on `outcome`.
// A treatment column taking exactly the values {0, 1} is handled as binary:
// its propensity predictions are clipped to [0.01, 0.99] and the effect is
// labeled an average treatment effect; anything else is a marginal effect.
DmlFit run_dml(const DataFrame& data, const DmlSpec& spec);

struct Grouping {
    std::string by;            // grouping column
    std::vector<double> edges; // explicit bin edges (ascending), or
    int quantiles = 0;         // evenly spaced quantile bins
};

struct CateGroup {
    std::string label;
    double lower = 0.0; // [lower, upper) except the last bin, which is closed
    double upper = 0.0;
    std::size_t n = 0;
    bool skipped = false; // too small to cross-fit
    DmlFit fit;
};

// Group-wise effects: rows are binned by the grouping column and the full
// DML procedure runs independently per bin with the same spec, preserving
// row order, so a single all-spanning bin reproduces run_dml exactly.
// Bins smaller than 10 * folds are skipped.
std::vector<CateGroup> cate_by_groups(const DataFrame& data, const DmlSpec& spec,
                                      const Grouping& grouping);

} // namespace looplens::dml
