#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "lvm/deep.hpp"
#include "lvm/distributions.hpp"
#include "lvm/log.hpp"
#include "lvm/model_spec.hpp"
#include "lvm/numerics.hpp"
#include "lvm/rng.hpp"
#include "lvm/serialize.hpp"

namespace lvm {

/// Paired latent and observation draws from one generative run. Rows align:
/// latents.row(i) produced observations.row(i). For time-indexed models rows
/// are time steps. latent_dims records the per-layer split of the latent
/// columns (a single entry for shallow models).
struct SampleBatch {
  Matrix latents;
  Matrix observations;
  std::uint64_t seed = 0;
  std::uint64_t fingerprint = 0;
  std::vector<Index> latent_dims;
};

namespace detail {

// Row-major standard normal fill; the draw order is part of the
// reproducibility contract, so every sampler in this header builds on it.
inline Matrix standard_normal(Index rows, Index cols, RngStream& rng) {
  Matrix z(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index k = 0; k < cols; ++k) z(i, k) = rng.normal();
  return z;
}

// Zero noise variance is allowed and still consumes draws, so the latent
// stream is identical with and without noise.
inline Matrix scaled_noise(Index rows, const Vector& variances, RngStream& rng) {
  Matrix e = standard_normal(rows, variances.size(), rng);
  for (Index k = 0; k < variances.size(); ++k) e.col(k) *= std::sqrt(variances(k));
  return e;
}

inline Matrix correlated_noise(Index rows, const SpdMatrix& cov, RngStream& rng) {
  return standard_normal(rows, cov.dim(), rng) * cov.chol().transpose();
}

// Draw order: all latents (row-major), then all observation noise.
inline void sample_into(const LinearGaussianLvmSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Index d = spec.latent_dim();
  const Index p = spec.obs_dim();
  Matrix z(n, d);
  if (spec.latent_prior.kind == LatentPriorKind::gaussian) {
    z = standard_normal(n, d, rng);
  } else {
    std::vector<GeneralizedGaussian> sources;
    for (Index k = 0; k < d; ++k) {
      const double shape = spec.latent_prior.shapes(k);
      sources.push_back({shape, gg_unit_variance_scale(shape), 0.0});
    }
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < d; ++k) z(i, k) = gg_sample(sources[k], 1, rng)(0);
  }
  Matrix y = z * spec.loadings.transpose();
  if (const auto* iso = std::get_if<IsotropicNoise>(&spec.noise)) {
    y += scaled_noise(n, Vector::Constant(p, iso->variance), rng);
  } else if (const auto* diag = std::get_if<DiagonalNoise>(&spec.noise)) {
    y += scaled_noise(n, diag->variances, rng);
  } else {
    y += correlated_noise(n, std::get<FullNoise>(spec.noise).covariance, rng);
  }
  y.rowwise() += spec.mean().transpose();
  batch.latents = std::move(z);
  batch.observations = std::move(y);
  batch.latent_dims = {d};
}

// Draw order: shared latents (row-major), then per-view noise in view order.
inline void sample_into(const MultiViewSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Index d = spec.latent_dim();
  const Matrix z = standard_normal(n, d, rng);
  const Index total = spec.obs_dim();
  Matrix y(n, total);
  Index offset = 0;
  for (std::size_t g = 0; g < spec.loadings.size(); ++g) {
    const Index pg = spec.loadings[g].rows();
    Matrix view = z * spec.loadings[g].transpose();
    if (spec.kind == MultiViewKind::gfa)
      view += scaled_noise(n, Vector::Constant(pg, spec.noise_variances(static_cast<Index>(g))),
                           rng);
    else
      view += correlated_noise(n, spec.view_noise[g], rng);
    y.middleCols(offset, pg) = view;
    offset += pg;
  }
  batch.latents = z;
  batch.observations = std::move(y);
  batch.latent_dims = {d};
}

// Draw order: exogenous latents, structural residuals, then the two emission
// noise blocks. The endogenous latents solve B z2 = C z1 + xi.
inline void sample_into(const StructuralSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Index d1 = spec.exo_latent_dim();
  const Index d2 = spec.endo_latent_dim();
  const Matrix z1 = scaled_noise(n, spec.exo_latent_var, rng);
  const Matrix xi = scaled_noise(n, spec.structural_resid_var, rng);
  const Eigen::PartialPivLU<Matrix> blu(spec.endo_coeff);
  const Matrix z2 = blu.solve((z1 * spec.exo_coeff.transpose() + xi).transpose()).transpose();
  Matrix y(n, spec.exo_loadings.rows() + spec.endo_loadings.rows());
  y.leftCols(spec.exo_loadings.rows()) =
      z1 * spec.exo_loadings.transpose() + scaled_noise(n, spec.exo_noise_var, rng);
  y.rightCols(spec.endo_loadings.rows()) =
      z2 * spec.endo_loadings.transpose() + scaled_noise(n, spec.endo_noise_var, rng);
  batch.latents.resize(n, d1 + d2);
  batch.latents.leftCols(d1) = z1;
  batch.latents.rightCols(d2) = z2;
  batch.observations = std::move(y);
  batch.latent_dims = {d1, d2};
}

// Generative reading of the composite model: y is drawn from its stated
// distribution and the components are the deterministic scores z = W y.
inline void sample_into(const GscaSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Index p = spec.obs_dim();
  Matrix y = standard_normal(n, p, rng);
  if (!spec.y_cov.empty()) y = y * spec.y_cov.chol().transpose();
  if (spec.y_mean.size() > 0) y.rowwise() += spec.y_mean.transpose();
  batch.latents = y * spec.weights.transpose();
  batch.observations = std::move(y);
  batch.latent_dims = {spec.latent_dim()};
}

// One draw is a whole matrix: Y = M + L_row Z L_col', flattened row by row so
// the observation vector matches the Kronecker covariance convention.
inline void sample_into(const MatrixNormalSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Index rows = spec.mean.rows();
  const Index cols = spec.mean.cols();
  const Matrix lrow = spec.row_cov.chol();
  const Matrix lcol = spec.col_cov.chol();
  Matrix out(n, rows * cols);
  for (Index i = 0; i < n; ++i) {
    const Matrix z = standard_normal(rows, cols, rng);
    const Matrix y = spec.mean + lrow * z * lcol.transpose();
    for (Index r = 0; r < rows; ++r) out.row(i).segment(r * cols, cols) = y.row(r);
  }
  batch.latents.resize(n, 0);
  batch.observations = std::move(out);
  batch.latent_dims = {0};
}

// Draw order: per-level effects, then the repeat-level noise block.
inline void sample_into(const AirySpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  Matrix z = standard_normal(n, 1, rng) * std::sqrt(spec.between_var);
  Matrix y = scaled_noise(n, Vector::Constant(spec.repeats, spec.within_var), rng);
  y.colwise() += z.col(0);
  y.array() += spec.mean;
  batch.latents = std::move(z);
  batch.observations = std::move(y);
  batch.latent_dims = {1};
}

struct TobitSample {
  Matrix latent_star;
  Matrix observed;
};

/// Censored regression draws: y* = slope * x + noise, y = max(0, y*).
/// Columns follow the covariate vector; rows are iid replicates.
inline TobitSample sample_tobit(const TobitSpec& spec, Index n, RngStream& rng) {
  spec.validate();
  require(n >= 1, "n", "must be at least 1");
  const Index m = spec.covariates.size();
  Matrix star = standard_normal(n, m, rng) * std::sqrt(spec.noise_variance);
  star.rowwise() += (spec.slope * spec.covariates).transpose();
  TobitSample out;
  out.observed = star.cwiseMax(0.0);
  out.latent_star = std::move(star);
  return out;
}

inline void sample_into(const TobitSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  TobitSample s = sample_tobit(spec, n, rng);
  batch.latents = std::move(s.latent_star);
  batch.observations = std::move(s.observed);
  batch.latent_dims = {spec.covariates.size()};
}

// Draw order: per-cluster coefficients in cluster order (row-major within a
// cluster), then per-row response noise. latents.row(i) echoes the
// coefficient vector of row i's cluster.
inline void sample_into(const HierRegressionSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  require(n == spec.rows(), "n",
          "hier-regression sample count is fixed by the design rows (" +
              std::to_string(spec.rows()) + ")");
  const Index m = spec.coef_dim();
  const Index j = spec.cluster_count();
  Matrix beta = standard_normal(j, m, rng) * spec.hyper_cov.chol().transpose();
  beta.rowwise() += spec.hyper_mean.transpose();
  Matrix z(n, m);
  Matrix y(n, 1);
  for (Index i = 0; i < n; ++i) z.row(i) = beta.row(spec.clusters[static_cast<std::size_t>(i)]);
  for (Index i = 0; i < n; ++i)
    y(i, 0) = spec.covariates.row(i).dot(z.row(i)) +
              std::sqrt(spec.noise_variance) * rng.normal();
  batch.latents = std::move(z);
  batch.observations = std::move(y);
  batch.latent_dims = {m};
}

inline void sample_into(const DirichletSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const Dirichlet d{spec.concentration};
  Matrix y(n, spec.concentration.size());
  for (Index i = 0; i < n; ++i) y.row(i) = dirichlet_sample(d, rng).transpose();
  batch.latents.resize(n, 0);
  batch.observations = std::move(y);
  batch.latent_dims = {0};
}

inline void sample_into(const StickBreakingSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  const StickBreakingDP d{spec.concentration, spec.truncation};
  Matrix weights(n, spec.truncation);
  Matrix atoms(n, spec.truncation);
  for (Index i = 0; i < n; ++i) {
    auto [w, a] = stick_breaking_atoms(d, rng);
    weights.row(i) = w.transpose();
    atoms.row(i) = a.transpose();
  }
  batch.latents = std::move(atoms);
  batch.observations = std::move(weights);
  batch.latent_dims = {spec.truncation};
}

}  // namespace detail

/// Stationary state covariance of z_t = A z_{t-1} + eta: the fixed point of
/// S = A S A' + Q, solved through the Kronecker identity
/// (I - kron(A, A)) vec(S) = vec(Q). Requires spectral radius < 1.
inline SpdMatrix stationary_state_cov(const TemporalSpec& spec) {
  const Index k = spec.state_dim();
  const double rho = spectral_radius(spec.transition);
  if (rho >= 1.0)
    throw NumericalError("temporal transition is unstable (spectral radius " +
                         std::to_string(rho) + " >= 1), no stationary start exists");
  const Matrix lhs = Matrix::Identity(k * k, k * k) - kron(spec.transition, spec.transition);
  const Vector s = Eigen::PartialPivLU<Matrix>(lhs).solve(vec(spec.innovation_cov.mat()));
  Matrix cov = Eigen::Map<const Matrix>(s.data(), k, k);
  cov = 0.5 * (cov + cov.transpose()).eval();
  return SpdMatrix(cov);
}

/// Ancestral rollout of the linear-Gaussian state space model. Rows are time
/// steps. Draw order: initial state, innovations in time order, then emission
/// noise row-major. Without an explicit initial law the rollout starts from
/// the stationary distribution.
inline SampleBatch sample_temporal(const TemporalSpec& spec, Index horizon,
                                   RngStream& rng) {
  spec.validate();
  require(horizon >= 1, "horizon", "must be at least 1");
  const double rho = spectral_radius(spec.transition);
  log_info("temporal transition spectral radius " + std::to_string(rho));
  const Index k = spec.state_dim();

  Vector init_mean = Vector::Zero(k);
  SpdMatrix init_cov;
  if (spec.stationary_start()) {
    init_cov = stationary_state_cov(spec);
  } else {
    init_mean = spec.initial_mean;
    init_cov = spec.initial_cov;
  }

  SampleBatch batch;
  batch.seed = rng.seed();
  batch.fingerprint = spec_fingerprint(ModelSpec{spec});
  batch.latents.resize(horizon, k);
  Vector z = init_mean + init_cov.chol() * detail::standard_normal(k, 1, rng).col(0);
  batch.latents.row(0) = z.transpose();
  const Matrix linn = spec.innovation_cov.chol();
  for (Index t = 1; t < horizon; ++t) {
    z = spec.transition * z + linn * detail::standard_normal(k, 1, rng).col(0);
    batch.latents.row(t) = z.transpose();
  }
  batch.observations = batch.latents * spec.emission.transpose() +
                       detail::scaled_noise(horizon, spec.emission_noise_var, rng);
  batch.latent_dims = {k};
  return batch;
}

namespace detail {

inline void sample_into(const TemporalSpec& spec, Index n, RngStream& rng,
                        SampleBatch& batch) {
  batch = sample_temporal(spec, n, rng);
}

}  // namespace detail

/// Draws n paired (latent, observation) rows from any zoo spec. Deterministic
/// given (spec, seed): each variant documents its draw order next to its
/// sampler.
inline SampleBatch sample_lvm(const ModelSpec& spec, Index n, RngStream& rng) {
  validate_spec(spec);
  require(n >= 1, "n", "must be at least 1");
  SampleBatch batch;
  batch.seed = rng.seed();
  batch.fingerprint = spec_fingerprint(spec);
  std::visit([&](const auto& s) { detail::sample_into(s, n, rng, batch); }, spec);
  return batch;
}

using detail::TobitSample;
using detail::sample_tobit;

/// Per-view loading matrices under the low-rank structured sparsity prior:
/// column d of view g has variance exp(-log alpha[g, d]). Views are drawn in
/// order, each matrix row-major.
inline std::vector<Matrix> sample_gfa_loadings(const ArdPrior& prior,
                                               const std::vector<Index>& view_dims,
                                               RngStream& rng) {
  prior.validate();
  require(static_cast<Index>(view_dims.size()) == prior.groups(), "view_dims",
          "needs one entry per prior row");
  const Matrix log_alpha = prior.log_precision();
  std::vector<Matrix> loadings;
  for (std::size_t g = 0; g < view_dims.size(); ++g) {
    require(view_dims[g] >= 1, "view_dims[" + std::to_string(g) + "]", "must be positive");
    Matrix w(view_dims[g], prior.latent_dim());
    for (Index i = 0; i < w.rows(); ++i)
      for (Index d = 0; d < w.cols(); ++d)
        w(i, d) = std::exp(-0.5 * log_alpha(static_cast<Index>(g), d)) * rng.normal();
    loadings.push_back(std::move(w));
  }
  return loadings;
}

/// Residuals of the composite structural identity [I; W] y = [C; B] W y + [eps; xi]:
/// eps = y - C W y (observation block) and xi = W y - B W y (component block).
inline std::pair<Vector, Vector> gsca_residual(const GscaSpec& spec, const Vector& y) {
  spec.validate();
  require(y.size() == spec.obs_dim(), "y",
          "length must equal the observation dimension " + std::to_string(spec.obs_dim()));
  const Vector z = spec.weights * y;
  return {y - spec.component_loadings * z, z - spec.path_coeff * z};
}

/// Top-down ancestral sampling through the deep Gaussian stack: the top layer
/// is standard-normal-driven, each lower layer centers on its transform of the
/// layer above, and the emission layer produces observations. Latent columns
/// store every layer, ordered bottom layer first; latent_dims records the
/// per-layer split. Draw order: layers top-down, noise row-major within a
/// layer, emission draws last.
inline SampleBatch dlgm_sample(const DlgmSpec& spec, Index n, RngStream& rng) {
  spec.validate();
  require(n >= 1, "n", "must be at least 1");
  const std::size_t depth = spec.layer_dims.size();

  std::vector<Matrix> layers(depth);
  const std::size_t top = depth - 1;
  layers[top] = detail::standard_normal(n, spec.layer_dims[top], rng);
  for (std::size_t l = top; l > 0; --l) {
    Matrix mean(n, spec.layer_dims[l - 1]);
    for (Index i = 0; i < n; ++i)
      mean.row(i) = mlp_forward(spec.transforms[l - 1], layers[l].row(i).transpose()).transpose();
    layers[l - 1] = mean + detail::standard_normal(n, spec.layer_dims[l - 1], rng) *
                               spec.layer_covs[l - 1].chol().transpose();
  }

  const Index obs_dim = spec.obs_dim();
  Matrix y(n, obs_dim);
  for (Index i = 0; i < n; ++i)
    y.row(i) = mlp_forward(spec.emission.network, layers[0].row(i).transpose()).transpose();
  if (spec.emission.family == EmissionFamily::gaussian) {
    y += detail::scaled_noise(n, spec.emission.noise_variances, rng);
  } else {
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < obs_dim; ++k) {
        const double p = 1.0 / (1.0 + std::exp(-y(i, k)));
        y(i, k) = rng.uniform() < p ? 1.0 : 0.0;
      }
  }

  SampleBatch batch;
  batch.seed = rng.seed();
  batch.fingerprint = spec_fingerprint(spec);
  batch.latent_dims = spec.layer_dims;
  batch.latents.resize(n, spec.total_latent_dim());
  Index offset = 0;
  for (std::size_t l = 0; l < depth; ++l) {
    batch.latents.middleCols(offset, spec.layer_dims[l]) = layers[l];
    offset += spec.layer_dims[l];
  }
  batch.observations = std::move(y);
  return batch;
}

}  // namespace lvm
