#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "lvm/dataset.hpp"
#include "lvm/distributions.hpp"
#include "lvm/log.hpp"
#include "lvm/model_spec.hpp"
#include "lvm/moments.hpp"
#include "lvm/numerics.hpp"

namespace lvm {

struct FitResult {
  ModelSpec estimated;
  std::vector<double> loglik_trace;  // EM: one entry per iteration; closed form: final value
  bool converged = true;
  Index iterations = 1;
  std::map<std::string, double> diagnostics;
};

namespace detail {

inline Vector column_means(const Matrix& y) { return y.colwise().mean(); }

/// MLE-normalized (1/N) covariance of centered data.
inline Matrix sample_covariance(const Matrix& y) {
  const Matrix centered = y.rowwise() - y.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(y.rows());
}

/// Total Gaussian log-likelihood of centered data summarized by its sample
/// covariance: -N/2 (P log 2pi + log det(model_cov) + tr(model_cov^-1 S)).
inline double gaussian_loglik(const Matrix& model_cov, const Matrix& s, Index n) {
  const Matrix l = cholesky(model_cov);
  const double logdet = 2.0 * l.diagonal().array().log().sum();
  const Matrix solved =
      l.transpose().triangularView<Eigen::Upper>().solve(
          l.triangularView<Eigen::Lower>().solve(s));
  const double log2pi = std::log(2.0 * std::numbers::pi);
  return -0.5 * static_cast<double>(n) *
         (static_cast<double>(s.rows()) * log2pi + logdet + solved.trace());
}

/// Flip each column so its largest-magnitude entry is positive; the shared
/// sign gauge for factored loadings.
inline void fix_column_signs(Matrix& m) {
  for (Index k = 0; k < m.cols(); ++k) {
    Index imax = 0;
    m.col(k).cwiseAbs().maxCoeff(&imax);
    if (m(imax, k) < 0.0) m.col(k) = -m.col(k);
  }
}

/// Inverse square root of an SPD matrix through its eigendecomposition.
/// min_eig reports the smallest eigenvalue so callers can detect singularity.
inline Matrix inverse_sqrt(const Matrix& a, double& min_eig) {
  const SymEig eig = sym_eig(a);
  min_eig = eig.values.minCoeff();
  if (!(min_eig > 0.0))
    throw NumericalError("inverse_sqrt: matrix is singular (min eigenvalue " +
                         std::to_string(min_eig) + ")");
  return eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.vectors.transpose();
}

}  // namespace detail

/// Principal angles (radians, ascending) between the column spans of two
/// matrices; the rotation-invariant way to compare estimated loadings.
inline Vector principal_angles(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "b", "subspaces must live in the same ambient space");
  require(a.cols() >= 1 && b.cols() >= 1, "a", "subspaces must be non-empty");
  const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() *
                    Matrix::Identity(a.rows(), std::min(a.rows(), a.cols()));
  const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() *
                    Matrix::Identity(b.rows(), std::min(b.rows(), b.cols()));
  Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
  const Index k = std::min(qa.cols(), qb.cols());
  Vector angles(k);
  for (Index i = 0; i < k; ++i) {
    // singular values are descending cosines, so angles come out ascending
    const double c = std::clamp(svd.singularValues()(i), -1.0, 1.0);
    angles(i) = std::acos(c);
  }
  return angles;
}

/// Closed-form PPCA maximum likelihood: sigma2_hat is the mean of the
/// trailing P-d sample eigenvalues and the loading columns are the top
/// eigenvectors scaled by sqrt(lambda_i - sigma2_hat), which leaves them
/// orthogonal (the rotation gauge). Data of exact rank d gives sigma2_hat = 0,
/// the PCA limit, flagged in diagnostics; rank below d is an error.
inline FitResult fit_ppca_mle(const Dataset& data, Index d) {
  data.validate();
  const Index n = data.rows();
  const Index p = data.cols();
  require(d >= 1, "d", "latent dimension must be at least 1");
  require(d < p, "d", "latent dimension must be below the observation dimension");
  if (n <= p)
    log_info("fit_ppca_mle: measurement density N/P = " +
             std::to_string(data.measurement_density()) +
             " is at or below 1; estimates will be unstable");

  const Matrix s = detail::sample_covariance(data.observations);
  const SymEig eig = sym_eig(s);
  const double scale = std::max(eig.values(0), 0.0);
  const double rank_tol = std::max(scale, 1.0) * 1e-12;
  Index rank = 0;
  for (Index i = 0; i < p; ++i)
    if (eig.values(i) > rank_tol) ++rank;
  if (rank < d)
    throw NumericalError("fit_ppca_mle: sample covariance rank " + std::to_string(rank) +
                         " is below the requested latent dimension " + std::to_string(d));

  double sigma2 = eig.values.tail(p - d).sum() / static_cast<double>(p - d);
  sigma2 = std::max(sigma2, 0.0);
  const bool pca_limit = rank == d || sigma2 <= rank_tol;
  if (pca_limit) sigma2 = 0.0;

  Matrix w(p, d);
  for (Index k = 0; k < d; ++k)
    w.col(k) = eig.vectors.col(k) * std::sqrt(std::max(eig.values(k) - sigma2, 0.0));
  detail::fix_column_signs(w);

  LinearGaussianLvmSpec spec;
  spec.loadings = w;
  spec.noise = IsotropicNoise{sigma2};
  spec.mean_offset = detail::column_means(data.observations);

  FitResult out;
  out.estimated = spec;
  out.iterations = 1;
  out.converged = true;
  out.diagnostics["sigma2"] = sigma2;
  out.diagnostics["rank"] = static_cast<double>(rank);
  out.diagnostics["pca_limit"] = pca_limit ? 1.0 : 0.0;
  out.diagnostics["measurement_density"] = data.measurement_density();
  if (sigma2 > 0.0) {
    const Matrix model_cov = w * w.transpose() + sigma2 * Matrix::Identity(p, p);
    out.loglik_trace.push_back(detail::gaussian_loglik(model_cov, s, n));
  }
  return out;
}

/**
 * EM for the factor analysis model y = W z + eps, z standard normal,
 * eps ~ N(0, Diag(psi)).
 *
 * E-step posterior moments with the current (W, psi), using the data only
 * through its sample covariance S:
 *   beta = W^T (W W^T + Diag(psi))^-1
 *   A = I - beta W + beta S beta^T    (mean posterior second moment of z)
 *   C = S beta^T                      (mean cross moment y z^T)
 * M-step:
 *   W   <- C A^-1
 *   psi <- diag(S - W_new C^T), floored at 1e-6 (Heywood guard, flagged)
 *
 * Initialization is the PPCA closed form with the residual diagonal, so runs
 * are deterministic. The log-likelihood is recorded each iteration and must
 * be non-decreasing up to roundoff.
 */
inline FitResult fit_fa_em(const Dataset& data, Index d, Index max_iter = 500,
                           double tol = 1e-7) {
  data.validate();
  const Index n = data.rows();
  const Index p = data.cols();
  require(d >= 1, "d", "latent dimension must be at least 1");
  require(d < p, "d", "latent dimension must be below the observation dimension");
  require(max_iter >= 1, "max_iter", "must be at least 1");
  require(std::isfinite(tol) && tol > 0.0, "tol", "must be positive");

  constexpr double kHeywoodFloor = 1e-6;
  const Matrix s = detail::sample_covariance(data.observations);

  // PPCA-based start: top-eigenvector loadings, residual diagonal as noise
  const SymEig eig = sym_eig(s);
  const double trailing =
      std::max(eig.values.tail(p - d).sum() / static_cast<double>(p - d), 0.0);
  Matrix w(p, d);
  for (Index k = 0; k < d; ++k)
    w.col(k) = eig.vectors.col(k) * std::sqrt(std::max(eig.values(k) - trailing, 0.0));
  Vector psi = (s - w * w.transpose()).diagonal().cwiseMax(kHeywoodFloor);

  FitResult out;
  Index heywood_hits = 0;
  out.converged = false;
  Index iter = 0;
  for (; iter < max_iter; ++iter) {
    const Matrix model_cov = w * w.transpose() + Matrix(psi.asDiagonal());
    const double ll = detail::gaussian_loglik(model_cov, s, n);
    out.loglik_trace.push_back(ll);
    if (iter > 0 &&
        std::abs(ll - out.loglik_trace[static_cast<std::size_t>(iter - 1)]) < tol) {
      out.converged = true;
      break;
    }

    const Matrix l = cholesky(model_cov);
    const Matrix inv_cov = l.transpose().triangularView<Eigen::Upper>().solve(
        l.triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p)));
    const Matrix beta = w.transpose() * inv_cov;                      // d x p
    const Matrix a = Matrix::Identity(d, d) - beta * w + beta * s * beta.transpose();
    const Matrix c = s * beta.transpose();                            // p x d
    const Matrix a_l = cholesky(0.5 * (a + a.transpose()));
    w = a_l.transpose()
            .triangularView<Eigen::Upper>()
            .solve(a_l.triangularView<Eigen::Lower>().solve(c.transpose()))
            .transpose();                                             // C A^-1
    psi = (s - w * c.transpose()).diagonal();
    for (Index i = 0; i < p; ++i) {
      if (psi(i) < kHeywoodFloor) {
        psi(i) = kHeywoodFloor;
        ++heywood_hits;
      }
    }
  }
  out.iterations = std::max<Index>(iter, 1);

  LinearGaussianLvmSpec spec;
  spec.loadings = w;
  spec.noise = DiagonalNoise{psi};
  spec.mean_offset = detail::column_means(data.observations);
  out.estimated = spec;
  out.diagnostics["heywood_floor_hits"] = static_cast<double>(heywood_hits);
  out.diagnostics["final_loglik"] = out.loglik_trace.back();
  return out;
}

/// Maximum likelihood fit of the two-view shared-factor model. The classical
/// canonical directions come from the SVD of S11^-1/2 S12 S22^-1/2; the
/// loading estimates are W_g = S_gg A_g P_d^1/2 with A_g the top d direction
/// columns and P_d the canonical correlations, which makes the fitted
/// cross-covariance block W1 W2^T of rank d by construction. Per-view noise
/// is S_gg - W_g W_g^T, ridged only if roundoff pushes it off the SPD cone.
inline FitResult fit_cca_mle(const Dataset& data, Index d, bool regularize = false,
                             double gamma = 1e-8) {
  data.validate();
  require(data.column_groups.size() == 2, "column_groups",
          "cca needs exactly two column groups");
  const Index p1 = data.column_groups[0];
  const Index p2 = data.column_groups[1];
  require(d >= 1 && d <= std::min(p1, p2), "d",
          "shared dimension must satisfy 1 <= d <= min(p1, p2)");

  const Matrix s = detail::sample_covariance(data.observations);
  Matrix s11 = s.topLeftCorner(p1, p1);
  Matrix s22 = s.bottomRightCorner(p2, p2);
  const Matrix s12 = s.topRightCorner(p1, p2);
  if (regularize) {
    s11 += gamma * Matrix::Identity(p1, p1);
    s22 += gamma * Matrix::Identity(p2, p2);
  }

  Matrix w1inv, w2inv;
  try {
    double min_eig = 0.0;
    w1inv = detail::inverse_sqrt(s11, min_eig);
    w2inv = detail::inverse_sqrt(s22, min_eig);
  } catch (const NumericalError&) {
    throw NumericalError(
        "fit_cca_mle: a within-group covariance is singular; rerun with the "
        "regularize flag to add a small ridge");
  }

  Eigen::JacobiSVD<Matrix> svd(w1inv * s12 * w2inv,
                               Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector rho = svd.singularValues().head(d);
  for (Index k = 0; k < d; ++k) rho(k) = std::clamp(rho(k), 0.0, 1.0);

  Matrix a1 = w1inv * svd.matrixU().leftCols(d);  // canonical directions, view 1
  Matrix a2 = w2inv * svd.matrixV().leftCols(d);
  detail::fix_column_signs(a1);
  detail::fix_column_signs(a2);
  // keep the two views' direction signs paired through the shared factor
  for (Index k = 0; k < d; ++k) {
    const double cross = (a1.col(k).transpose() * s12 * a2.col(k))(0);
    if (cross < 0.0) a2.col(k) = -a2.col(k);
  }

  const Vector root_rho = rho.cwiseSqrt();
  Matrix w1 = s11 * a1 * root_rho.asDiagonal();
  Matrix w2 = s22 * a2 * root_rho.asDiagonal();

  const auto noise_spd = [](const Matrix& sgg, const Matrix& wg, double& ridge) {
    Matrix resid = sgg - wg * wg.transpose();
    resid = 0.5 * (resid + resid.transpose());
    ridge = 0.0;
    const double unit = std::max(resid.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    for (double r = 1e-12; r <= 1e-3; r *= 100.0) {
      try {
        return SpdMatrix(resid + ridge * Matrix::Identity(resid.rows(), resid.cols()));
      } catch (const NumericalError&) {
        ridge = r * unit;
      }
    }
    return SpdMatrix(resid + ridge * Matrix::Identity(resid.rows(), resid.cols()));
  };
  double ridge1 = 0.0;
  double ridge2 = 0.0;
  MultiViewSpec spec;
  spec.kind = MultiViewKind::cca;
  spec.loadings = {w1, w2};
  spec.view_noise = {noise_spd(s11, w1, ridge1), noise_spd(s22, w2, ridge2)};

  FitResult out;
  out.estimated = spec;
  out.iterations = 1;
  for (Index k = 0; k < d; ++k)
    out.diagnostics["canonical_correlation_" + std::to_string(k + 1)] = rho(k);
  out.diagnostics["noise_ridge_1"] = ridge1;
  out.diagnostics["noise_ridge_2"] = ridge2;
  out.diagnostics["cross_cov_rank"] = static_cast<double>(d);
  try {
    const ImpliedMoments fitted = implied_moments(spec);
    out.loglik_trace.push_back(detail::gaussian_loglik(
        fitted.covariance, s, data.rows()));
  } catch (const NumericalError&) {
    // singular fitted covariance (perfectly correlated views); no trace entry
  }
  return out;
}

/// Balanced one-way variance-component estimator (rows = units, columns =
/// repeats): within mean square estimates the repeat noise, and the excess of
/// the between mean square over it, divided by the repeat count, estimates
/// the unit-level variance. A negative moment estimate is floored at zero and
/// flagged.
inline FitResult fit_airy_anova(const Dataset& data) {
  data.validate();
  const Index n = data.rows();
  const Index p = data.cols();
  require(n >= 2, "observations", "needs at least two rows");
  require(p >= 2, "observations",
          "needs at least two repeats per row to split the variance");

  const Matrix& y = data.observations;
  const double grand = y.mean();
  const Vector row_means = y.rowwise().mean();

  double ss_within = 0.0;
  for (Index i = 0; i < n; ++i)
    ss_within += (y.row(i).array() - row_means(i)).square().sum();
  const double ms_within = ss_within / static_cast<double>(n * (p - 1));
  const double ss_between = (row_means.array() - grand).square().sum();
  const double ms_between =
      static_cast<double>(p) * ss_between / static_cast<double>(n - 1);

  const double raw_between_var = (ms_between - ms_within) / static_cast<double>(p);
  const bool floored = raw_between_var < 0.0;

  AirySpec spec;
  spec.mean = grand;
  spec.between_var = floored ? 0.0 : raw_between_var;
  spec.within_var = ms_within;
  spec.repeats = p;

  FitResult out;
  out.estimated = spec;
  out.iterations = 1;
  out.diagnostics["mean"] = grand;
  out.diagnostics["between_var"] = spec.between_var;
  out.diagnostics["within_var"] = spec.within_var;
  out.diagnostics["variance_floored"] = floored ? 1.0 : 0.0;
  const Matrix s = detail::sample_covariance(y);
  out.loglik_trace.push_back(detail::gaussian_loglik(
      implied_moments(spec).covariance, s, n));
  return out;
}

struct DirichletCategoricalFit {
  Dirichlet posterior;
  Vector predictive;                 // (alpha_k + c_k) / (alpha_0 + n)
  std::vector<std::int64_t> counts;  // per-category tallies of the data
};

/// Conjugate update for categorical observations with 1-based labels in
/// {1..K}: posterior concentration alpha + counts, predictive mass
/// (alpha_k + c_k) / (alpha_0 + n).
inline DirichletCategoricalFit fit_dirichlet_categorical(
    const Dirichlet& prior, const std::vector<Index>& categories) {
  prior.validate();
  const Index k = prior.concentration.size();
  std::vector<std::int64_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const Index c = categories[i];
    require(c >= 1 && c <= k, "categories[" + std::to_string(i) + "]",
            "labels must lie in {1.." + std::to_string(k) + "}");
    ++counts[static_cast<std::size_t>(c - 1)];
  }
  DirichletCategoricalFit out;
  out.counts = counts;
  out.posterior = dirichlet_categorical_posterior(prior, counts);
  const double denom =
      prior.concentration.sum() + static_cast<double>(categories.size());
  out.predictive = out.posterior.concentration / denom;
  return out;
}

}  // namespace lvm
