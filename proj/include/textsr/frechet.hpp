#ifndef TEXTSR_FRECHET_HPP
#define TEXTSR_FRECHET_HPP

#include <Eigen/Dense>

#include "tensor.hpp"

namespace textsr {

struct GaussianSummary {
    Tensor<double> mean;  // (d)
    Tensor<double> cov;   // (d,d), symmetric PSD
};

// Sample mean + unbiased covariance of (n,d) features.
inline GaussianSummary summarize_gaussian(const Tensor<double>& feats) {
    if (feats.ndim() != 2) throw ShapeError("summarize_gaussian: features must be (n,d)");
    int64_t n = feats.size(0), d = feats.size(1);
    if (n < 2) throw DomainError("summarize_gaussian: need at least 2 samples");
    GaussianSummary g{Tensor<double>({d}), Tensor<double>({d, d})};
    for (int64_t i = 0; i < n; i++)
        for (int64_t j = 0; j < d; j++) g.mean[j] += feats[i * d + j];
    for (int64_t j = 0; j < d; j++) g.mean[j] /= static_cast<double>(n);
    for (int64_t i = 0; i < n; i++)
        for (int64_t a = 0; a < d; a++) {
            double da = feats[i * d + a] - g.mean[a];
            for (int64_t b = a; b < d; b++)
                g.cov[a * d + b] += da * (feats[i * d + b] - g.mean[b]);
        }
    for (int64_t a = 0; a < d; a++)
        for (int64_t b = a; b < d; b++) {
            g.cov[a * d + b] /= static_cast<double>(n - 1);
            g.cov[b * d + a] = g.cov[a * d + b];
        }
    return g;
}

namespace detail {

inline Eigen::MatrixXd to_eigen(const Tensor<double>& t) {
    int64_t r = t.size(0), c = t.size(1);
    Eigen::MatrixXd m(r, c);
    for (int64_t i = 0; i < r; i++)
        for (int64_t j = 0; j < c; j++) m(i, j) = t[i * c + j];
    return m;
}

// PSD matrix square root by symmetric eigendecomposition, negative
// eigenvalues clipped at zero; beyond tolerance -> NumericalError.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a, const char* what) {
    double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw NumericalError(std::string(what) + ": covariance not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    Eigen::VectorXd ev = es.eigenvalues();
    for (int64_t i = 0; i < ev.size(); i++) {
        if (ev[i] < -1e-8 * scale)
            throw NumericalError(std::string(what) + ": covariance not PSD (eigenvalue " +
                                 std::to_string(ev[i]) + ")");
        ev[i] = ev[i] > 0 ? std::sqrt(ev[i]) : 0.0;
    }
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

// Squared Frechet distance between Gaussians:
//   |m1-m2|^2 + Tr(C1 + C2 - 2 (C1^1/2 C2 C1^1/2)^1/2)
inline double frechet_gaussian(const GaussianSummary& a, const GaussianSummary& b) {
    if (a.mean.numel() != b.mean.numel())
        throw ShapeError("frechet_gaussian: dimension mismatch");
    Eigen::MatrixXd c1 = detail::to_eigen(a.cov);
    Eigen::MatrixXd c2 = detail::to_eigen(b.cov);
    Eigen::MatrixXd s1 = detail::psd_sqrt(c1, "frechet_gaussian(a)");
    Eigen::MatrixXd inner = s1 * c2 * s1;
    inner = 0.5 * (inner + inner.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(inner);
    double tr_sqrt = 0;
    for (int64_t i = 0; i < es.eigenvalues().size(); i++) {
        double ev = es.eigenvalues()[i];
        if (ev > 0) tr_sqrt += std::sqrt(ev);
    }
    double mean_term = 0;
    for (int64_t i = 0; i < a.mean.numel(); i++) {
        double d = a.mean[i] - b.mean[i];
        mean_term += d * d;
    }
    double val = mean_term + c1.trace() + c2.trace() - 2.0 * tr_sqrt;
    return val > 0 ? val : 0.0;
}

}  // namespace textsr

#endif  // TEXTSR_FRECHET_HPP
