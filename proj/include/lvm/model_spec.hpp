#pragma once

/**
 * Declarative specs for the linear-Gaussian latent variable model family and
 * its relatives:
 *
 *   ppca / fa / ica      y = W z + mu + eps     single view, diagonal-family noise
 *   cca / ibfa / mbfa    per-view loadings, full per-view noise, shared z
 *   gfa                  per-view isotropic noise, ARD prior on loading columns
 *   lisrel               structural regressions between two latent blocks
 *   gsca                 component-weight model, deterministic residual identity
 *   matrix-normal        vec(Y) Gaussian with Kronecker covariance
 *   tobit                censored scalar regression
 *   airy                 one-way variance components (compound symmetry)
 *   temporal             linear-Gaussian state space rollout
 *   hier-regression      per-cluster regression weights from a shared prior
 *   dirichlet / stick-breaking   simplex draws for the conjugate example
 *
 * Every spec validates its own invariants and reports the offending field.
 * Sampling and implied moments live in sampling.hpp / moments.hpp.
 */

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "lvm/log.hpp"
#include "lvm/numerics.hpp"

namespace lvm {

// ---------------------------------------------------------------------------
// noise and latent-prior building blocks

struct IsotropicNoise {
  double variance = 1.0;  // 0 allowed: the PCA limit, accepted by implied
                          // moments but rejected by samplers and densities
};

struct DiagonalNoise {
  Vector variances;
};

struct FullNoise {
  SpdMatrix covariance;
};

using NoiseModel = std::variant<IsotropicNoise, DiagonalNoise, FullNoise>;

inline Matrix noise_covariance(const NoiseModel& noise, Index p) {
  if (const auto* iso = std::get_if<IsotropicNoise>(&noise))
    return iso->variance * Matrix::Identity(p, p);
  if (const auto* diag = std::get_if<DiagonalNoise>(&noise))
    return Matrix(diag->variances.asDiagonal());
  return std::get<FullNoise>(noise).covariance.mat();
}

enum class LatentPriorKind { gaussian, generalized_gaussian };

/// Prior over latent coordinates: iid standard normal, or independent
/// unit-variance generalized Gaussians with per-coordinate shapes (ICA).
struct LatentPrior {
  LatentPriorKind kind = LatentPriorKind::gaussian;
  Vector shapes;  // per-coordinate GG shape alpha_d; empty for gaussian
};

// ---------------------------------------------------------------------------
// single-view family: ppca / fa / ica / general linear-Gaussian

struct LinearGaussianLvmSpec {
  Matrix loadings;  // P x D
  NoiseModel noise = IsotropicNoise{};
  LatentPrior latent_prior;
  Vector mean_offset;  // empty = zero

  Index obs_dim() const { return loadings.rows(); }
  Index latent_dim() const { return loadings.cols(); }

  void validate() const {
    require(loadings.rows() >= 1 && loadings.cols() >= 1, "loadings",
            "must be a non-empty P x D matrix");
    require_finite(loadings, "loadings");
    if (mean_offset.size() > 0) {
      require(mean_offset.size() == obs_dim(), "mean_offset",
              "length must equal the observation dimension");
      require_finite(mean_offset, "mean_offset");
    }
    const bool ica = latent_prior.kind == LatentPriorKind::generalized_gaussian;
    if (ica) {
      require(latent_prior.shapes.size() == latent_dim(), "latent_prior.shapes",
              "needs one shape per latent coordinate");
      for (Index d = 0; d < latent_prior.shapes.size(); ++d)
        require(std::isfinite(latent_prior.shapes(d)) && latent_prior.shapes(d) > 0.0,
                "latent_prior.shapes[" + std::to_string(d) + "]", "must be positive");
    } else {
      require(latent_prior.shapes.size() == 0, "latent_prior.shapes",
              "only meaningful for the generalized Gaussian prior");
    }
    if (const auto* iso = std::get_if<IsotropicNoise>(&noise)) {
      require(std::isfinite(iso->variance) && iso->variance >= 0.0, "noise.variance",
              "must be nonnegative");
    } else if (const auto* diag = std::get_if<DiagonalNoise>(&noise)) {
      require(diag->variances.size() == obs_dim(), "noise.variances",
              "length must equal the observation dimension");
      for (Index p = 0; p < diag->variances.size(); ++p) {
        const double v = diag->variances(p);
        // noiseless coordinates are allowed for ICA source-separation setups
        const bool ok = std::isfinite(v) && (ica ? v >= 0.0 : v > 0.0);
        require(ok, "noise.variances[" + std::to_string(p) + "]",
                ica ? "must be nonnegative" : "must be positive");
      }
    } else {
      const auto& full = std::get<FullNoise>(noise);
      require(!full.covariance.empty(), "noise.covariance", "must be set");
      require(full.covariance.dim() == obs_dim(), "noise.covariance",
              "dimension must equal the observation dimension");
      require(!ica, "noise", "generalized Gaussian priors pair with diagonal noise");
    }
  }

  Vector mean() const {
    return mean_offset.size() > 0 ? mean_offset : Vector::Zero(obs_dim());
  }
};

// ---------------------------------------------------------------------------
// multi-view family: cca / ibfa / mbfa / gfa

enum class MultiViewKind { cca, ibfa, mbfa, gfa };

/// Column layout of the IBFA loading matrix: shared columns first, then
/// view-1-specific, then view-2-specific. Specific columns must be exactly
/// zero in the other view's block.
struct IbfaMask {
  Index shared = 0;
  Index view1 = 0;
  Index view2 = 0;

  Index total() const { return shared + view1 + view2; }
};

struct MultiViewSpec {
  MultiViewKind kind = MultiViewKind::cca;
  std::vector<Matrix> loadings;       // per view, p_g x D
  std::vector<SpdMatrix> view_noise;  // per view Sigma^(g); cca / ibfa / mbfa
  Vector noise_variances;             // per view sigma^2_g; gfa
  std::optional<IbfaMask> mask;       // ibfa only

  Index views() const { return static_cast<Index>(loadings.size()); }
  Index latent_dim() const { return loadings.empty() ? 0 : loadings.front().cols(); }

  std::vector<Index> view_dims() const {
    std::vector<Index> dims;
    dims.reserve(loadings.size());
    for (const auto& w : loadings) dims.push_back(w.rows());
    return dims;
  }

  Index obs_dim() const {
    Index p = 0;
    for (const auto& w : loadings) p += w.rows();
    return p;
  }

  Matrix stacked_loadings() const {
    Matrix w(obs_dim(), latent_dim());
    Index row = 0;
    for (const auto& wg : loadings) {
      w.middleRows(row, wg.rows()) = wg;
      row += wg.rows();
    }
    return w;
  }

  /// Dense noise covariance of view g under either noise layout.
  Matrix view_noise_cov(std::size_t g) const {
    const Index pg = loadings[g].rows();
    if (kind == MultiViewKind::gfa)
      return noise_variances(static_cast<Index>(g)) * Matrix::Identity(pg, pg);
    return view_noise[g].mat();
  }

  void validate() const {
    require(!loadings.empty(), "loadings", "needs at least one view");
    const Index d = latent_dim();
    for (std::size_t g = 0; g < loadings.size(); ++g) {
      const std::string field = "loadings[" + std::to_string(g) + "]";
      require(loadings[g].rows() >= 1, field, "view dimension must be positive");
      require(loadings[g].cols() == d, field, "all views share one latent dimension");
      require_finite(loadings[g], field);
    }
    require(d >= 1, "loadings", "latent dimension must be positive");

    switch (kind) {
      case MultiViewKind::cca:
        require(views() == 2, "loadings", "cca is a two-view model");
        require(!mask.has_value(), "mask", "only ibfa uses the block mask");
        break;
      case MultiViewKind::ibfa:
        require(views() == 2, "loadings", "ibfa is a two-view model");
        require(mask.has_value(), "mask", "ibfa requires the block mask");
        break;
      case MultiViewKind::mbfa:
        require(views() >= 2, "loadings", "mbfa needs at least two views");
        require(!mask.has_value(), "mask", "only ibfa uses the block mask");
        break;
      case MultiViewKind::gfa:
        require(views() >= 2, "loadings", "gfa needs at least two views");
        require(!mask.has_value(), "mask", "only ibfa uses the block mask");
        break;
    }

    if (kind == MultiViewKind::gfa) {
      require(view_noise.empty(), "view_noise", "gfa uses isotropic noise_variances");
      require(noise_variances.size() == views(), "noise_variances",
              "needs one variance per view");
      for (Index g = 0; g < noise_variances.size(); ++g)
        require(std::isfinite(noise_variances(g)) && noise_variances(g) > 0.0,
                "noise_variances[" + std::to_string(g) + "]", "must be positive");
    } else {
      require(noise_variances.size() == 0, "noise_variances",
              "full per-view noise uses view_noise");
      require(view_noise.size() == loadings.size(), "view_noise",
              "needs one covariance per view");
      for (std::size_t g = 0; g < view_noise.size(); ++g) {
        const std::string field = "view_noise[" + std::to_string(g) + "]";
        require(!view_noise[g].empty(), field, "must be set");
        require(view_noise[g].dim() == loadings[g].rows(), field,
                "dimension must match the view dimension");
      }
    }

    if (mask.has_value()) {
      require(mask->shared >= 0 && mask->view1 >= 0 && mask->view2 >= 0, "mask",
              "column counts must be nonnegative");
      require(mask->total() == d, "mask", "column counts must sum to the latent dimension");
      // specific blocks must be zero in the opposite view, exactly
      const Matrix& w1 = loadings[0];
      const Matrix& w2 = loadings[1];
      if (mask->view2 > 0)
        require(w1.rightCols(mask->view2).isZero(0.0), "loadings[0]",
                "view-2-specific columns must be zero in view 1");
      if (mask->view1 > 0)
        require(w2.middleCols(mask->shared, mask->view1).isZero(0.0), "loadings[1]",
                "view-1-specific columns must be zero in view 2");
    }
  }
};

/// Low-rank log-precision prior over GFA loading columns:
/// log(alpha) = U V^T + mu_u 1^T + 1 mu_v^T, entry (g, d) giving the
/// precision of loading column d in view g.
struct ArdPrior {
  Matrix u;       // G x R
  Matrix v;       // D x R
  Vector mu_u;    // G
  Vector mu_v;    // D
  double lambda = 0.1;  // prior precision of the U, V entries

  Index groups() const { return u.rows(); }
  Index latent_dim() const { return v.rows(); }

  void validate() const {
    require(u.rows() >= 1 && v.rows() >= 1, "u", "needs at least one group and factor");
    require(u.cols() == v.cols(), "v", "u and v must share the rank R");
    require(u.cols() >= 1, "u", "rank must be at least 1");
    require(u.cols() <= std::min(u.rows(), v.rows()), "u",
            "rank must not exceed min(groups, latent dim)");
    require(mu_u.size() == u.rows(), "mu_u", "length must equal the group count");
    require(mu_v.size() == v.rows(), "mu_v", "length must equal the latent dimension");
    require_finite(u, "u");
    require_finite(v, "v");
    require_finite(mu_u, "mu_u");
    require_finite(mu_v, "mu_v");
    require(std::isfinite(lambda) && lambda > 0.0, "lambda", "must be positive");
  }

  Matrix log_precision() const {
    return u * v.transpose() + mu_u * Vector::Ones(latent_dim()).transpose() +
           Vector::Ones(groups()) * mu_v.transpose();
  }
};

// ---------------------------------------------------------------------------
// structural family

/// Two measured latent blocks with a linear structural equation between them:
/// endo_coeff * z2 = exo_coeff * z1 + xi, observations loading each block
/// separately. All covariances diagonal.
struct StructuralSpec {
  Matrix exo_loadings;          // W1: P1 x D1
  Matrix endo_loadings;         // W2: P2 x D2
  Matrix endo_coeff;            // B:  D2 x D2, nonsingular
  Matrix exo_coeff;             // C:  D2 x D1
  Vector exo_noise_var;         // Psi1 diagonal, length P1
  Vector endo_noise_var;        // Psi2 diagonal, length P2
  Vector exo_latent_var;        // Phi_z1 diagonal, length D1
  Vector structural_resid_var;  // Phi_xi diagonal, length D2

  Index exo_obs_dim() const { return exo_loadings.rows(); }
  Index endo_obs_dim() const { return endo_loadings.rows(); }
  Index exo_latent_dim() const { return exo_loadings.cols(); }
  Index endo_latent_dim() const { return endo_loadings.cols(); }
  Index obs_dim() const { return exo_obs_dim() + endo_obs_dim(); }
  Index latent_dim() const { return exo_latent_dim() + endo_latent_dim(); }

  void validate() const {
    require(exo_loadings.rows() >= 1 && exo_loadings.cols() >= 1, "exo_loadings",
            "must be non-empty");
    require(endo_loadings.rows() >= 1 && endo_loadings.cols() >= 1, "endo_loadings",
            "must be non-empty");
    const Index d1 = exo_latent_dim();
    const Index d2 = endo_latent_dim();
    require(endo_coeff.rows() == d2 && endo_coeff.cols() == d2, "endo_coeff",
            "must be D2 x D2");
    require(exo_coeff.rows() == d2 && exo_coeff.cols() == d1, "exo_coeff",
            "must be D2 x D1");
    require_finite(exo_loadings, "exo_loadings");
    require_finite(endo_loadings, "endo_loadings");
    require_finite(endo_coeff, "endo_coeff");
    require_finite(exo_coeff, "exo_coeff");
    check_diag(exo_noise_var, exo_obs_dim(), "exo_noise_var");
    check_diag(endo_noise_var, endo_obs_dim(), "endo_noise_var");
    check_diag(exo_latent_var, d1, "exo_latent_var");
    check_diag(structural_resid_var, d2, "structural_resid_var");

    Eigen::JacobiSVD<Matrix> svd(endo_coeff);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues().maxCoeff();
    require(smin > 0.0, "endo_coeff", "must be nonsingular");
    const double cond = smax / smin;
    if (cond > 1e8)
      log_info("structural spec: endo_coeff condition number " +
               std::to_string(cond) + " exceeds 1e8; inverse may be inaccurate");
  }

 private:
  static void check_diag(const Vector& v, Index len, const std::string& field) {
    require(v.size() == len, field, "length must be " + std::to_string(len));
    for (Index i = 0; i < v.size(); ++i)
      require(std::isfinite(v(i)) && v(i) > 0.0, field + "[" + std::to_string(i) + "]",
              "must be positive");
  }
};

/// Component-weight model: z = W y, with stacked residual identity
/// [I; W] y = [C; B] W y + [eps; xi]. The residual split is deterministic in
/// y; sampling draws y from the user-given Gaussian (this model's display
/// carries no distributional assumptions of its own).
struct GscaSpec {
  Matrix weights;             // W: D x P
  Matrix component_loadings;  // C: P x D
  Matrix path_coeff;          // B: D x D
  Vector obs_resid_var;       // eps covariance diagonal, length P
  Vector comp_resid_var;      // xi covariance diagonal, length D
  Vector y_mean;              // empty = zero
  SpdMatrix y_cov;            // empty = identity

  Index obs_dim() const { return weights.cols(); }
  Index latent_dim() const { return weights.rows(); }

  void validate() const {
    require(weights.rows() >= 1 && weights.cols() >= 1, "weights",
            "must be a non-empty D x P matrix");
    require_finite(weights, "weights");
    const Index p = obs_dim();
    const Index d = latent_dim();
    require(component_loadings.rows() == p && component_loadings.cols() == d,
            "component_loadings", "must be P x D");
    require(path_coeff.rows() == d && path_coeff.cols() == d, "path_coeff",
            "must be D x D");
    require_finite(component_loadings, "component_loadings");
    require_finite(path_coeff, "path_coeff");
    check_nonneg_diag(obs_resid_var, p, "obs_resid_var");
    check_nonneg_diag(comp_resid_var, d, "comp_resid_var");
    if (y_mean.size() > 0) {
      require(y_mean.size() == p, "y_mean", "length must equal the observation dimension");
      require_finite(y_mean, "y_mean");
    }
    if (!y_cov.empty())
      require(y_cov.dim() == p, "y_cov", "dimension must equal the observation dimension");
  }

  Vector mean() const { return y_mean.size() > 0 ? y_mean : Vector::Zero(obs_dim()); }

  Matrix covariance() const {
    return y_cov.empty() ? Matrix::Identity(obs_dim(), obs_dim()) : y_cov.mat();
  }

 private:
  static void check_nonneg_diag(const Vector& v, Index len, const std::string& field) {
    require(v.size() == len, field, "length must be " + std::to_string(len));
    for (Index i = 0; i < v.size(); ++i)
      require(std::isfinite(v(i)) && v(i) >= 0.0, field + "[" + std::to_string(i) + "]",
              "must be nonnegative");
  }
};

// ---------------------------------------------------------------------------
// auxiliary models

/// Y is N x P with vec-by-rows covariance row_cov otimes col_cov: entry
/// covariance Cov(Y_ij, Y_kl) = row_cov(i,k) * col_cov(j,l).
struct MatrixNormalSpec {
  Matrix mean;        // N x P
  SpdMatrix row_cov;  // N x N
  SpdMatrix col_cov;  // P x P

  Index obs_dim() const { return mean.size(); }

  void validate() const {
    require(mean.rows() >= 1 && mean.cols() >= 1, "mean", "must be non-empty");
    require_finite(mean, "mean");
    require(!row_cov.empty() && row_cov.dim() == mean.rows(), "row_cov",
            "dimension must equal the mean's row count");
    require(!col_cov.empty() && col_cov.dim() == mean.cols(), "col_cov",
            "dimension must equal the mean's column count");
  }
};

/// Censored regression y = max(0, slope * x + eps).
struct TobitSpec {
  double slope = 1.0;
  Vector covariates;  // length n, or length 1 broadcast to all draws
  double noise_variance = 1.0;

  void validate() const {
    require_finite(slope, "slope");
    require(covariates.size() >= 1, "covariates", "must be non-empty");
    require_finite(covariates, "covariates");
    require(std::isfinite(noise_variance) && noise_variance > 0.0, "noise_variance",
            "must be positive");
  }
};

/// One-way variance components: repeats within a unit share a latent level,
/// giving the compound-symmetric covariance between_var * 11^T + within_var * I.
struct AirySpec {
  double mean = 0.0;
  double between_var = 1.0;  // 0 allowed: no per-unit heterogeneity
  double within_var = 1.0;
  Index repeats = 2;

  Index obs_dim() const { return repeats; }

  void validate() const {
    require_finite(mean, "mean");
    require(std::isfinite(between_var) && between_var >= 0.0, "between_var",
            "must be nonnegative");
    require(std::isfinite(within_var) && within_var > 0.0, "within_var",
            "must be positive");
    require(repeats >= 1, "repeats", "must be at least 1");
  }
};

/// Linear-Gaussian state space: z_t = A z_{t-1} + eta, y_t = H z_t + eps.
/// With no initial distribution given, the rollout starts from the stationary
/// law, which requires spectral radius(A) < 1.
struct TemporalSpec {
  Matrix transition;          // A: K x K
  Matrix emission;            // H: P x K
  SpdMatrix innovation_cov;   // K x K
  Vector emission_noise_var;  // length P, entries >= 0 (0 = exact emission)
  Vector initial_mean;        // empty = stationary start
  SpdMatrix initial_cov;      // empty = stationary start

  Index state_dim() const { return transition.rows(); }
  Index obs_dim() const { return emission.rows(); }

  void validate() const {
    require(transition.rows() >= 1 && transition.rows() == transition.cols(),
            "transition", "must be square and non-empty");
    require_finite(transition, "transition");
    require(emission.rows() >= 1 && emission.cols() == state_dim(), "emission",
            "must map the state dimension to the observation dimension");
    require_finite(emission, "emission");
    require(!innovation_cov.empty() && innovation_cov.dim() == state_dim(),
            "innovation_cov", "dimension must equal the state dimension");
    require(emission_noise_var.size() == obs_dim(), "emission_noise_var",
            "needs one variance per observed coordinate");
    for (Index p = 0; p < emission_noise_var.size(); ++p)
      require(std::isfinite(emission_noise_var(p)) && emission_noise_var(p) >= 0.0,
              "emission_noise_var[" + std::to_string(p) + "]", "must be nonnegative");
    require((initial_mean.size() > 0) == !initial_cov.empty(), "initial_mean",
            "initial mean and covariance must be given together");
    if (initial_mean.size() > 0) {
      require(initial_mean.size() == state_dim(), "initial_mean",
              "length must equal the state dimension");
      require_finite(initial_mean, "initial_mean");
      require(initial_cov.dim() == state_dim(), "initial_cov",
              "dimension must equal the state dimension");
    }
  }

  bool stationary_start() const { return initial_mean.size() == 0; }
};

/// Per-cluster regression weights beta_j drawn from a shared Gaussian prior;
/// row n responds through its cluster's weights plus iid noise.
struct HierRegressionSpec {
  Matrix covariates;            // N x M design
  std::vector<Index> clusters;  // cluster id per row, 0-based
  Vector hyper_mean;            // M
  SpdMatrix hyper_cov;          // M x M
  double noise_variance = 1.0;

  Index rows() const { return covariates.rows(); }
  Index coef_dim() const { return covariates.cols(); }

  Index cluster_count() const {
    Index j = 0;
    for (Index c : clusters) j = std::max(j, c + 1);
    return j;
  }

  void validate() const {
    require(covariates.rows() >= 1 && covariates.cols() >= 1, "covariates",
            "must be non-empty");
    require_finite(covariates, "covariates");
    require(static_cast<Index>(clusters.size()) == rows(), "clusters",
            "needs one cluster id per design row");
    for (std::size_t i = 0; i < clusters.size(); ++i)
      require(clusters[i] >= 0, "clusters[" + std::to_string(i) + "]",
              "ids must be nonnegative");
    require(hyper_mean.size() == coef_dim(), "hyper_mean",
            "length must equal the design column count");
    require_finite(hyper_mean, "hyper_mean");
    require(!hyper_cov.empty() && hyper_cov.dim() == coef_dim(), "hyper_cov",
            "dimension must equal the design column count");
    require(std::isfinite(noise_variance) && noise_variance > 0.0, "noise_variance",
            "must be positive");
  }
};

struct DirichletSpec {
  Vector concentration;

  void validate() const {
    require(concentration.size() >= 1, "concentration", "must be non-empty");
    for (Index k = 0; k < concentration.size(); ++k)
      require(std::isfinite(concentration(k)) && concentration(k) > 0.0,
              "concentration[" + std::to_string(k) + "]", "must be positive");
  }
};

struct StickBreakingSpec {
  double concentration = 1.0;
  Index truncation = 200;

  void validate() const {
    require(std::isfinite(concentration) && concentration > 0.0, "concentration",
            "must be positive");
    require(truncation >= 1, "truncation", "must be at least 1");
  }
};

// ---------------------------------------------------------------------------

using ModelSpec =
    std::variant<LinearGaussianLvmSpec, MultiViewSpec, StructuralSpec, GscaSpec,
                 MatrixNormalSpec, TobitSpec, AirySpec, TemporalSpec,
                 HierRegressionSpec, DirichletSpec, StickBreakingSpec>;

inline std::string model_tag(const ModelSpec& spec) {
  struct Tagger {
    std::string operator()(const LinearGaussianLvmSpec& s) const {
      if (s.latent_prior.kind == LatentPriorKind::generalized_gaussian) return "ica";
      if (std::holds_alternative<IsotropicNoise>(s.noise)) return "ppca";
      if (std::holds_alternative<DiagonalNoise>(s.noise)) return "fa";
      return "linear-gaussian";
    }
    std::string operator()(const MultiViewSpec& s) const {
      switch (s.kind) {
        case MultiViewKind::cca: return "cca";
        case MultiViewKind::ibfa: return "ibfa";
        case MultiViewKind::mbfa: return "mbfa";
        case MultiViewKind::gfa: return "gfa";
      }
      return "cca";
    }
    std::string operator()(const StructuralSpec&) const { return "lisrel"; }
    std::string operator()(const GscaSpec&) const { return "gsca"; }
    std::string operator()(const MatrixNormalSpec&) const { return "matrix-normal"; }
    std::string operator()(const TobitSpec&) const { return "tobit"; }
    std::string operator()(const AirySpec&) const { return "airy"; }
    std::string operator()(const TemporalSpec&) const { return "temporal"; }
    std::string operator()(const HierRegressionSpec&) const { return "hier-regression"; }
    std::string operator()(const DirichletSpec&) const { return "dirichlet"; }
    std::string operator()(const StickBreakingSpec&) const { return "stick-breaking"; }
  };
  return std::visit(Tagger{}, spec);
}

inline void validate_spec(const ModelSpec& spec) {
  std::visit([](const auto& s) { s.validate(); }, spec);
}

}  // namespace lvm
