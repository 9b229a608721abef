#pragma once

#include <string>

#include "lvm/model_spec.hpp"
#include "lvm/numerics.hpp"

namespace lvm {

/// Exact mean and covariance of the observations after marginalizing latents.
/// positive_definite is false when the covariance is only semidefinite (the
/// sigma^2 = 0 PCA limit); gaussian is false when the covariance is exact but
/// the law is not normal (generalized Gaussian latents).
struct ImpliedMoments {
  Vector mean;
  Matrix covariance;
  bool positive_definite = true;
  bool gaussian = true;
};

namespace detail {

inline bool is_positive_definite(const Matrix& a) {
  try {
    cholesky(a);
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

}  // namespace detail

inline ImpliedMoments implied_moments(const LinearGaussianLvmSpec& spec) {
  spec.validate();
  ImpliedMoments out;
  out.mean = spec.mean();
  out.covariance = spec.loadings * spec.loadings.transpose() +
                   noise_covariance(spec.noise, spec.obs_dim());
  out.gaussian = spec.latent_prior.kind == LatentPriorKind::gaussian;
  out.positive_definite = detail::is_positive_definite(out.covariance);
  return out;
}

inline ImpliedMoments implied_moments(const MultiViewSpec& spec) {
  spec.validate();
  const Index p = spec.obs_dim();
  const Matrix w = spec.stacked_loadings();
  Matrix cov = w * w.transpose();
  Index row = 0;
  for (std::size_t g = 0; g < spec.loadings.size(); ++g) {
    const Index pg = spec.loadings[g].rows();
    cov.block(row, row, pg, pg) += spec.view_noise_cov(g);
    row += pg;
  }
  ImpliedMoments out;
  out.mean = Vector::Zero(p);
  out.covariance = std::move(cov);
  out.positive_definite = detail::is_positive_definite(out.covariance);
  return out;
}

/// The structural regressions imply, with A = B^-1 C and latents
/// z2 = A z1 + B^-1 xi:
///   Cov(y1)     = W1 Phi_z1 W1^T + Psi1
///   Cov(y1, y2) = W1 Phi_z1 A^T W2^T
///   Cov(y2)     = W2 (A Phi_z1 A^T + B^-1 Phi_xi B^-T) W2^T + Psi2
inline ImpliedMoments implied_moments(const StructuralSpec& spec) {
  spec.validate();
  const Index p1 = spec.exo_obs_dim();
  const Index p2 = spec.endo_obs_dim();
  const Index d2 = spec.endo_latent_dim();

  const Eigen::PartialPivLU<Matrix> blu(spec.endo_coeff);
  const Matrix a = blu.solve(spec.exo_coeff);                         // B^-1 C
  const Matrix binv = blu.solve(Matrix::Identity(d2, d2));            // B^-1
  const Matrix phi1 = Matrix(spec.exo_latent_var.asDiagonal());
  const Matrix phixi = Matrix(spec.structural_resid_var.asDiagonal());

  const Matrix cov_z2 = a * phi1 * a.transpose() + binv * phixi * binv.transpose();

  Matrix cov(p1 + p2, p1 + p2);
  cov.topLeftCorner(p1, p1) =
      spec.exo_loadings * phi1 * spec.exo_loadings.transpose() +
      Matrix(spec.exo_noise_var.asDiagonal());
  cov.topRightCorner(p1, p2) =
      spec.exo_loadings * phi1 * a.transpose() * spec.endo_loadings.transpose();
  cov.bottomLeftCorner(p2, p1) = cov.topRightCorner(p1, p2).transpose();
  cov.bottomRightCorner(p2, p2) =
      spec.endo_loadings * cov_z2 * spec.endo_loadings.transpose() +
      Matrix(spec.endo_noise_var.asDiagonal());

  ImpliedMoments out;
  out.mean = Vector::Zero(p1 + p2);
  out.covariance = std::move(cov);
  out.positive_definite = detail::is_positive_definite(out.covariance);
  return out;
}

/// Moments of the observed vector under the generative interpretation; the
/// component layer is a deterministic transform and adds nothing.
inline ImpliedMoments implied_moments(const GscaSpec& spec) {
  spec.validate();
  ImpliedMoments out;
  out.mean = spec.mean();
  out.covariance = spec.covariance();
  out.positive_definite = detail::is_positive_definite(out.covariance);
  return out;
}

/// Moments of the row-stacked vectorization: index (i, j) -> i * P + j, so
/// the covariance is kron(row_cov, col_cov).
inline ImpliedMoments implied_moments(const MatrixNormalSpec& spec) {
  spec.validate();
  ImpliedMoments out;
  Matrix mt = spec.mean.transpose();  // column-major of the transpose = row-stacked
  out.mean = vec(mt);
  out.covariance = kron(spec.row_cov.mat(), spec.col_cov.mat());
  out.positive_definite = true;
  return out;
}

inline ImpliedMoments implied_moments(const AirySpec& spec) {
  spec.validate();
  const Index p = spec.repeats;
  ImpliedMoments out;
  out.mean = Vector::Constant(p, spec.mean);
  out.covariance = spec.between_var * Matrix::Ones(p, p) +
                   spec.within_var * Matrix::Identity(p, p);
  out.positive_definite = true;
  return out;
}

/// Joint law of the full response vector over the design rows: rows in the
/// same cluster share their weight draw, rows in different clusters are
/// independent.
inline ImpliedMoments implied_moments(const HierRegressionSpec& spec) {
  spec.validate();
  const Index n = spec.rows();
  ImpliedMoments out;
  out.mean = spec.covariates * spec.hyper_mean;
  out.covariance = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (spec.clusters[static_cast<std::size_t>(i)] !=
          spec.clusters[static_cast<std::size_t>(j)])
        continue;
      out.covariance(i, j) =
          spec.covariates.row(i) * spec.hyper_cov.mat() * spec.covariates.row(j).transpose();
    }
    out.covariance(i, i) += spec.noise_variance;
  }
  out.positive_definite = detail::is_positive_definite(out.covariance);
  return out;
}

inline ImpliedMoments implied_moments(const ModelSpec& spec) {
  struct Visitor {
    ImpliedMoments operator()(const LinearGaussianLvmSpec& s) const {
      return implied_moments(s);
    }
    ImpliedMoments operator()(const MultiViewSpec& s) const { return implied_moments(s); }
    ImpliedMoments operator()(const StructuralSpec& s) const { return implied_moments(s); }
    ImpliedMoments operator()(const GscaSpec& s) const { return implied_moments(s); }
    ImpliedMoments operator()(const MatrixNormalSpec& s) const {
      return implied_moments(s);
    }
    ImpliedMoments operator()(const AirySpec& s) const { return implied_moments(s); }
    ImpliedMoments operator()(const HierRegressionSpec& s) const {
      return implied_moments(s);
    }
    ImpliedMoments operator()(const TobitSpec&) const {
      throw ValidationError("model", "tobit censoring has no linear-Gaussian moments");
    }
    ImpliedMoments operator()(const TemporalSpec&) const {
      throw ValidationError("model",
                            "temporal rollouts are horizon-dependent; no marginal moments");
    }
    ImpliedMoments operator()(const DirichletSpec&) const {
      throw ValidationError("model", "implied moments cover the linear-Gaussian family only");
    }
    ImpliedMoments operator()(const StickBreakingSpec&) const {
      throw ValidationError("model", "implied moments cover the linear-Gaussian family only");
    }
  };
  return std::visit(Visitor{}, spec);
}

}  // namespace lvm
