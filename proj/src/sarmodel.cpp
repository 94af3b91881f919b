#include "looplens/sarmodel.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace looplens::sar {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBoundMargin = 1e-6;
constexpr double kGoldenTol = 1e-10;

Eigen::VectorXd sparse_mul(const stats::WeightsMatrix& w, const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(Eigen::Index(w.n));
    for (std::size_t i = 0; i < w.n; ++i) {
        double acc = 0.0;
        for (std::int64_t k = w.indptr[i]; k < w.indptr[i + 1]; ++k)
            acc += w.weights[std::size_t(k)] * v[w.indices[std::size_t(k)]];
        out[Eigen::Index(i)] = acc;
    }
    return out;
}

double two_sided_normal_p(double z) {
    if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(z)) return 0.0;
    return std::erfc(std::abs(z) / std::sqrt(2.0));
}

// profile pieces shared by the concentrated likelihood and the full one
struct Profile {
    Eigen::VectorXd b0, b1; // beta(rho) = b0 - rho b1
    Eigen::VectorXd e0, e1; // e(rho) = e0 - rho e1
    double e00, e01, e11;   // cached inner products
    int n = 0;
};

double sigma2_at(const Profile& pr, double rho) {
    return (pr.e00 - 2.0 * rho * pr.e01 + rho * rho * pr.e11) / pr.n;
}

double concentrated_loglik(const Profile& pr, double rho,
                           const std::vector<std::complex<double>>& spectrum) {
    double s2 = sigma2_at(pr, rho);
    if (!(s2 > 0.0)) return -std::numeric_limits<double>::infinity();
    double n = pr.n;
    return -0.5 * n * (std::log(2.0 * kPi) + 1.0) - 0.5 * n * std::log(s2) +
           log_det_spectrum(rho, spectrum);
}

// full log-likelihood in (rho, beta, sigma2), used only for the numeric
// Hessian that produces the standard errors
double full_loglik(double rho, const Eigen::VectorXd& beta, double sigma2,
                   const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& wy,
                   const std::vector<std::complex<double>>& spectrum) {
    if (!(sigma2 > 0.0)) return -std::numeric_limits<double>::infinity();
    double n = double(y.size());
    Eigen::VectorXd e = y - rho * wy - X * beta;
    return -0.5 * n * std::log(2.0 * kPi * sigma2) + log_det_spectrum(rho, spectrum) -
           e.squaredNorm() / (2.0 * sigma2);
}

} // namespace

Eigen::MatrixXd to_dense(const stats::WeightsMatrix& w) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(Eigen::Index(w.n), Eigen::Index(w.n));
    for (std::size_t i = 0; i < w.n; ++i)
        for (std::int64_t k = w.indptr[i]; k < w.indptr[i + 1]; ++k)
            m(Eigen::Index(i), Eigen::Index(w.indices[std::size_t(k)])) = w.weights[std::size_t(k)];
    return m;
}

std::vector<std::complex<double>> weights_spectrum(const stats::WeightsMatrix& w) {
    if (w.n > 5000)
        throw input_error("sar: dense eigen decomposition is limited to n <= 5000 units");
    Eigen::MatrixXd dense = to_dense(w);
    Eigen::EigenSolver<Eigen::MatrixXd> solver(dense, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw input_error("sar: eigen decomposition of W failed");
    std::vector<std::complex<double>> out(w.n);
    for (std::size_t i = 0; i < w.n; ++i) out[i] = solver.eigenvalues()[Eigen::Index(i)];
    return out;
}

double log_det_spectrum(double rho, const std::vector<std::complex<double>>& eigenvalues) {
    // complex eigenvalues of a real matrix pair up, so the imaginary parts of
    // log(1 - rho lambda) cancel and the real sum equals log|det|
    double acc = 0.0;
    for (const auto& lam : eigenvalues) acc += std::log(std::abs(1.0 - rho * lam));
    return acc;
}

double log_det_lu(double rho, const stats::WeightsMatrix& w) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(Eigen::Index(w.n), Eigen::Index(w.n)) -
                        rho * to_dense(w);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i)
        acc += std::log(std::abs(lu.matrixLU()(i, i)));
    return acc;
}

SarFit fit_sar(const ModelMatrix& model, const stats::WeightsMatrix& w) {
    const Eigen::Index n = model.y.size();
    const Eigen::Index p = model.X.cols();
    if (std::size_t(n) != w.n) throw input_error("sar: y length does not match weights dimension");
    if (model.X.rows() != n) throw input_error("sar: X rows do not match y");
    if (std::size_t(model.names.size()) != std::size_t(p))
        throw input_error("sar: names do not match X columns");
    if (n <= p + 1) throw input_error("sar: need more observations than parameters");
    double ymean = model.y.mean();
    if ((model.y.array() - ymean).abs().maxCoeff() == 0.0)
        throw input_error("sar: y has zero variance");

    // rho interval from the eigenvalue support of W
    std::vector<std::complex<double>> spectrum = weights_spectrum(w);
    double lam_min = 0.0, lam_max = 0.0;
    for (const auto& lam : spectrum) {
        if (std::abs(lam.imag()) > 1e-9) continue; // interval uses the real support
        lam_min = std::min(lam_min, lam.real());
        lam_max = std::max(lam_max, lam.real());
    }
    double lo, hi;
    if (lam_min < -1e-12 && lam_max > 1e-12) {
        lo = 1.0 / lam_min + kBoundMargin;
        hi = (w.row_standardized ? 1.0 : 1.0 / lam_max) - kBoundMargin;
    } else {
        // W == 0 or one-signed spectrum: likelihood is flat or one-sided in
        // rho; fall back to the conventional (-1, 1) box
        lo = -1.0 + kBoundMargin;
        hi = 1.0 - kBoundMargin;
    }
    if (!(lo < hi)) throw input_error("sar: empty rho interval");

    // reduced-form pieces: beta(rho) = b0 - rho b1, e(rho) = e0 - rho e1
    Eigen::VectorXd wy = sparse_mul(w, model.y);
    Eigen::MatrixXd xtx = model.X.transpose() * model.X;
    Eigen::LDLT<Eigen::MatrixXd> xtx_ldlt(xtx);
    if (xtx_ldlt.info() != Eigen::Success || xtx_ldlt.rcond() < 1e-14)
        throw input_error("sar: design matrix is singular or nearly collinear");
    Profile pr;
    pr.b0 = xtx_ldlt.solve(model.X.transpose() * model.y);
    pr.b1 = xtx_ldlt.solve(model.X.transpose() * wy);
    pr.e0 = model.y - model.X * pr.b0;
    pr.e1 = wy - model.X * pr.b1;
    pr.e00 = pr.e0.squaredNorm();
    pr.e01 = pr.e0.dot(pr.e1);
    pr.e11 = pr.e1.squaredNorm();
    pr.n = int(n);

    // golden-section maximization of the concentrated likelihood
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - gr * (b - a);
    double d = a + gr * (b - a);
    double fc = concentrated_loglik(pr, c, spectrum);
    double fd = concentrated_loglik(pr, d, spectrum);
    while (b - a > kGoldenTol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = concentrated_loglik(pr, c, spectrum);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = concentrated_loglik(pr, d, spectrum);
        }
    }
    double rho_hat = 0.5 * (a + b);

    SarFit fit;
    fit.rho = rho_hat;
    fit.beta = pr.b0 - rho_hat * pr.b1;
    fit.sigma2 = sigma2_at(pr, rho_hat);
    fit.log_likelihood = concentrated_loglik(pr, rho_hat, spectrum);
    fit.n = int(n);
    fit.rho_interval = {lo, hi};

    // numeric Hessian of the full likelihood in (beta..., rho, sigma2)
    const Eigen::Index q = p + 2;
    Eigen::VectorXd theta(q);
    theta.head(p) = fit.beta;
    theta[p] = fit.rho;
    theta[p + 1] = fit.sigma2;
    auto eval = [&](const Eigen::VectorXd& th) {
        return full_loglik(th[p], th.head(p), th[p + 1], model.y, model.X, wy, spectrum);
    };
    Eigen::VectorXd h(q);
    for (Eigen::Index i = 0; i < q; ++i)
        h[i] = std::max(1e-5, 1e-5 * std::abs(theta[i]));
    Eigen::MatrixXd hess(q, q);
    double f0 = eval(theta);
    for (Eigen::Index i = 0; i < q; ++i) {
        for (Eigen::Index j = i; j < q; ++j) {
            Eigen::VectorXd t = theta;
            if (i == j) {
                t[i] = theta[i] + h[i];
                double fp = eval(t);
                t[i] = theta[i] - h[i];
                double fm = eval(t);
                hess(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            } else {
                t[i] = theta[i] + h[i];
                t[j] = theta[j] + h[j];
                double fpp = eval(t);
                t[j] = theta[j] - h[j];
                double fpm = eval(t);
                t[i] = theta[i] - h[i];
                t[j] = theta[j] + h[j];
                double fmp = eval(t);
                t[j] = theta[j] - h[j];
                double fmm = eval(t);
                hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
            }
        }
    }
    // pseudo-inverse tolerates a flat direction (e.g. rho with W = 0)
    Eigen::MatrixXd cov = (-hess).completeOrthogonalDecomposition().pseudoInverse();

    fit.se.resize(p + 1);
    fit.z.resize(p + 1);
    fit.p_values.resize(p + 1);
    for (Eigen::Index i = 0; i < p + 1; ++i) {
        double v = cov(i, i);
        fit.se[i] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
        double coef = i < p ? fit.beta[i] : fit.rho;
        fit.z[i] = coef / fit.se[i];
        fit.p_values[i] = two_sided_normal_p(fit.z[i]);
    }

    // pseudo R^2: squared correlation between y and the reduced-form fit
    Eigen::VectorXd yhat = predict_sar(fit, model.X, w);
    double my = model.y.mean(), mh = yhat.mean();
    Eigen::ArrayXd dy = model.y.array() - my;
    Eigen::ArrayXd dh = yhat.array() - mh;
    double denom = std::sqrt(dy.square().sum() * dh.square().sum());
    double corr = denom > 0.0 ? (dy * dh).sum() / denom : 0.0;
    fit.pseudo_r2 = corr * corr;
    return fit;
}

Eigen::VectorXd predict_sar(const SarFit& fit, const Eigen::MatrixXd& X,
                            const stats::WeightsMatrix& w) {
    if (std::size_t(X.rows()) != w.n) throw input_error("sar: X rows do not match weights dimension");
    if (X.cols() != fit.beta.size()) throw input_error("sar: X columns do not match beta");
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(Eigen::Index(w.n), Eigen::Index(w.n)) -
                        fit.rho * to_dense(w);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    double logabsdet = 0.0;
    for (Eigen::Index i = 0; i < lu.matrixLU().rows(); ++i) {
        double piv = std::abs(lu.matrixLU()(i, i));
        if (piv == 0.0) throw input_error("sar: I - rho W is singular at rho=" + std::to_string(fit.rho));
        logabsdet += std::log(piv);
    }
    if (logabsdet < -30.0 * double(w.n))
        throw input_error("sar: I - rho W is numerically singular at rho=" + std::to_string(fit.rho));
    return lu.solve(X * fit.beta);
}

} // namespace looplens::sar
