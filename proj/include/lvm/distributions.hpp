#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "lvm/numerics.hpp"
#include "lvm/rng.hpp"

namespace lvm {

/// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shapes below 1 are boosted
/// with the U^{1/a} trick.
inline double gamma_sample(double shape, RngStream& rng) {
  require(std::isfinite(shape) && shape > 0.0, "shape", "must be positive");
  if (shape < 1.0) {
    const double u = rng.uniform();
    return gamma_sample(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline double beta_sample(double a, double b, RngStream& rng) {
  const double x = gamma_sample(a, rng);
  const double y = gamma_sample(b, rng);
  return x / (x + y);
}

struct MultivariateNormal {
  Vector mean;
  SpdMatrix covariance;

  Index dim() const { return covariance.dim(); }

  void validate() const {
    require(!covariance.empty(), "covariance", "must be set");
    require(mean.size() == covariance.dim(), "mean",
            "length must match covariance dimension");
    require_finite(mean, "mean");
  }
};

/// n iid rows, each mean + L*eps with L the lower Cholesky factor. Standard
/// normals are drawn row by row so the sample stream is reproducible.
inline Matrix mvn_sample(const MultivariateNormal& d, Index n, RngStream& rng) {
  d.validate();
  require(n >= 1, "n", "must be at least 1");
  const Index p = d.dim();
  Matrix z(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) z(i, j) = rng.normal();
  Matrix out = z * d.covariance.chol().transpose();
  out.rowwise() += d.mean.transpose();
  return out;
}

inline double mvn_logpdf(const MultivariateNormal& d, const Vector& x) {
  d.validate();
  require(x.size() == d.dim(), "x", "length must match distribution dimension");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  const Vector centered = x - d.mean;
  const Vector w = d.covariance.chol().triangularView<Eigen::Lower>().solve(centered);
  return -0.5 * (d.dim() * log2pi + d.covariance.log_det() + w.squaredNorm());
}

struct Dirichlet {
  Vector concentration;

  void validate() const {
    require(concentration.size() >= 1, "concentration", "must be non-empty");
    for (Index k = 0; k < concentration.size(); ++k)
      require(std::isfinite(concentration(k)) && concentration(k) > 0.0,
              "concentration[" + std::to_string(k) + "]", "must be positive");
  }
};

struct Categorical {
  Vector probabilities;

  void validate() const {
    require(probabilities.size() >= 1, "probabilities", "must be non-empty");
    double sum = 0.0;
    for (Index k = 0; k < probabilities.size(); ++k) {
      const double p = probabilities(k);
      require(std::isfinite(p) && p >= 0.0 && p <= 1.0,
              "probabilities[" + std::to_string(k) + "]", "must lie in [0, 1]");
      sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "probabilities", "must sum to 1");
  }
};

/// Normalized independent Gamma(alpha_k, 1) draws.
inline Vector dirichlet_sample(const Dirichlet& d, RngStream& rng) {
  d.validate();
  Vector g(d.concentration.size());
  for (Index k = 0; k < g.size(); ++k) g(k) = gamma_sample(d.concentration(k), rng);
  const double total = g.sum();
  if (!(total > 0.0))
    throw NumericalError("dirichlet_sample: gamma draws summed to zero");
  return g / total;
}

inline Dirichlet dirichlet_categorical_posterior(const Dirichlet& prior,
                                                 const std::vector<std::int64_t>& counts) {
  prior.validate();
  require(static_cast<Index>(counts.size()) == prior.concentration.size(), "counts",
          "length must match concentration length");
  Vector post = prior.concentration;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    require(counts[k] >= 0, "counts[" + std::to_string(k) + "]", "must be nonnegative");
    post(static_cast<Index>(k)) += static_cast<double>(counts[k]);
  }
  return Dirichlet{post};
}

inline Index categorical_sample(const Categorical& d, RngStream& rng) {
  d.validate();
  const double u = rng.uniform();
  double cum = 0.0;
  for (Index k = 0; k < d.probabilities.size(); ++k) {
    cum += d.probabilities(k);
    if (u < cum) return k;
  }
  return d.probabilities.size() - 1;
}

/// Symmetric generalized Gaussian with density proportional to
/// exp(-|x - location|^shape / scale^shape). shape=2 recovers the normal
/// (scale = sqrt(2) sigma), shape=1 the Laplace.
struct GeneralizedGaussian {
  double shape = 2.0;
  double scale = 1.0;
  double location = 0.0;

  void validate() const {
    require(std::isfinite(shape) && shape > 0.0, "shape", "must be positive");
    require(std::isfinite(scale) && scale > 0.0, "scale", "must be positive");
    require_finite(location, "location");
  }

  double variance() const {
    return scale * scale * std::exp(std::lgamma(3.0 / shape) - std::lgamma(1.0 / shape));
  }
};

/// Scale that makes the given shape a unit-variance distribution; ICA sources
/// are standardized this way so mixing covariances stay comparable.
inline double gg_unit_variance_scale(double shape) {
  require(std::isfinite(shape) && shape > 0.0, "shape", "must be positive");
  return std::exp(0.5 * (std::lgamma(1.0 / shape) - std::lgamma(3.0 / shape)));
}

/// Gamma-transform sampler: |x| = scale * G^{1/shape} with G ~ Gamma(1/shape, 1),
/// sign chosen uniformly.
inline Vector gg_sample(const GeneralizedGaussian& d, Index n, RngStream& rng) {
  d.validate();
  require(n >= 1, "n", "must be at least 1");
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    const double g = gamma_sample(1.0 / d.shape, rng);
    const double mag = d.scale * std::pow(g, 1.0 / d.shape);
    const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
    out(i) = d.location + sign * mag;
  }
  return out;
}

/// Truncated stick-breaking construction of Dirichlet process weights.
/// The expected mass beyond T sticks is (alpha/(1+alpha))^T; T=200 keeps the
/// residual negligible for any alpha the tests use.
struct StickBreakingDP {
  double concentration = 1.0;
  Index truncation = 200;

  void validate() const {
    require(std::isfinite(concentration) && concentration > 0.0, "concentration",
            "must be positive");
    require(truncation >= 1, "truncation", "must be at least 1");
  }
};

inline Vector stick_breaking_weights(const StickBreakingDP& d, RngStream& rng) {
  d.validate();
  Vector w(d.truncation);
  double remaining = 1.0;
  for (Index k = 0; k < d.truncation; ++k) {
    // Beta(1, alpha) by inversion: v = 1 - u^{1/alpha}
    const double u = rng.uniform();
    const double v = 1.0 - std::pow(1.0 - u, 1.0 / d.concentration);
    w(k) = v * remaining;
    remaining *= 1.0 - v;
  }
  return w;
}

/// Weights plus standard-normal atoms, enough to realize a draw from the DP
/// with a N(0,1) base measure.
inline std::pair<Vector, Vector> stick_breaking_atoms(const StickBreakingDP& d,
                                                      RngStream& rng) {
  Vector w = stick_breaking_weights(d, rng);
  Vector atoms(d.truncation);
  for (Index k = 0; k < d.truncation; ++k) atoms(k) = rng.normal();
  return {w, atoms};
}

}  // namespace lvm
