#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "looplens/common.hpp"
#include "looplens/spatialstats.hpp"

namespace looplens::sar {

struct ModelMatrix {
    Eigen::VectorXd y;
    Eigen::MatrixXd X; // includes the intercept column
    std::vector<std::string> names;
};

// Spatial-lag model y = rho * W y + X beta + eps fitted by concentrated
// maximum likelihood: beta(rho) and sigma2(rho) are profiled out and the
// scalar concentrated likelihood is maximized by golden-section search over
// the admissible rho interval derived from W's eigenvalue support.
struct SarFit {
    double rho = 0.0;
    Eigen::VectorXd beta;
    double sigma2 = 0.0;
    // standard errors / z / p for [beta..., rho], from the inverse of a
    // numerically differentiated Hessian of the full log-likelihood
    Eigen::VectorXd se;
    Eigen::VectorXd z;
    Eigen::VectorXd p_values;
    double log_likelihood = 0.0;
    double pseudo_r2 = 0.0; // squared correlation of y with (I - rho W)^-1 X beta
    int n = 0;
    std::pair<double, double> rho_interval{0.0, 0.0};
};

SarFit fit_sar(const ModelMatrix& model, const stats::WeightsMatrix& w);

// Reduced-form prediction (I - rho W)^-1 X beta; throws input_error when the
// system is singular at this rho.
Eigen::VectorXd predict_sar(const SarFit& fit, const Eigen::MatrixXd& X,
                            const stats::WeightsMatrix& w);

// log|I - rho W| evaluated two ways. The spectrum route is what the fitter
// uses (the eigenvalues are computed once per W anyway for the rho bounds);
// the dense-LU route exists as an independent cross-check.
std::vector<std::complex<double>> weights_spectrum(const stats::WeightsMatrix& w);
double log_det_spectrum(double rho, const std::vector<std::complex<double>>& eigenvalues);
double log_det_lu(double rho, const stats::WeightsMatrix& w);

Eigen::MatrixXd to_dense(const stats::WeightsMatrix& w);

} // namespace looplens::sar
