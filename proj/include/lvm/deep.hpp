#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lvm/numerics.hpp"
#include "lvm/rng.hpp"

namespace lvm {

enum class Activation { identity, sigmoid, relu, tanh };

inline double apply_activation(Activation a, double x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
  }
  return x;
}

struct MlpLayer {
  Matrix weights;  // out x in
  Vector bias;     // out
  Activation activation = Activation::identity;
};

/// Plain feedforward stack h_K(...h_0(x)), each layer an affine map followed
/// by an elementwise activation.
struct Mlp {
  std::vector<MlpLayer> layers;

  Index in_dim() const { return layers.front().weights.cols(); }
  Index out_dim() const { return layers.back().weights.rows(); }

  void validate() const {
    require(!layers.empty(), "layers", "needs at least one layer");
    for (std::size_t k = 0; k < layers.size(); ++k) {
      const std::string field = "layers[" + std::to_string(k) + "]";
      const MlpLayer& l = layers[k];
      require(l.weights.rows() >= 1 && l.weights.cols() >= 1, field + ".weights",
              "must be non-empty");
      require_finite(l.weights, field + ".weights");
      require(l.bias.size() == l.weights.rows(), field + ".bias",
              "length must equal the layer's output dimension");
      require_finite(l.bias, field + ".bias");
      if (k > 0)
        require(l.weights.cols() == layers[k - 1].weights.rows(), field + ".weights",
                "input dimension must chain with the previous layer's output");
    }
  }
};

inline Vector mlp_forward(const Mlp& net, const Vector& x) {
  net.validate();
  require(x.size() == net.in_dim(), "x", "length must equal the network input dimension");
  Vector h = x;
  for (const MlpLayer& l : net.layers) {
    Vector pre = l.weights * h + l.bias;
    for (Index i = 0; i < pre.size(); ++i) pre(i) = apply_activation(l.activation, pre(i));
    h = std::move(pre);
  }
  return h;
}

/// Seeded N(0, 1/fan_in) weight initialization; biases zero. Dims run
/// input first, so dims = {4, 8, 2} is a 4 -> 8 -> 2 network.
inline Mlp random_mlp(const std::vector<Index>& dims,
                      const std::vector<Activation>& activations, RngStream& rng) {
  require(dims.size() >= 2, "dims", "needs an input and an output dimension");
  require(activations.size() == dims.size() - 1, "activations",
          "needs one activation per layer");
  Mlp net;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    MlpLayer layer;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[k]));
    layer.weights = Matrix(dims[k + 1], dims[k]);
    for (Index i = 0; i < layer.weights.rows(); ++i)
      for (Index j = 0; j < layer.weights.cols(); ++j)
        layer.weights(i, j) = scale * rng.normal();
    layer.bias = Vector::Zero(dims[k + 1]);
    layer.activation = activations[k];
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// ---------------------------------------------------------------------------
// deep latent Gaussian model

enum class EmissionFamily { gaussian, bernoulli };

struct DlgmEmission {
  EmissionFamily family = EmissionFamily::gaussian;
  Mlp network;             // maps z^(1) to the emission mean (or logits)
  Vector noise_variances;  // gaussian family only; entries >= 0
};

/// Stochastic layers z^(L) ... z^(1), top layer standard normal, each lower
/// layer Gaussian around a network transform of the layer above, then an
/// emission through one of the two supported exponential-family members.
struct DlgmSpec {
  std::vector<Index> layer_dims;      // d_(1) .. d_(L)
  std::vector<Mlp> transforms;        // transforms[l-1]: z^(l+1) -> mean of z^(l)
  std::vector<SpdMatrix> layer_covs;  // layer_covs[l-1] = Sigma^(l)
  DlgmEmission emission;

  Index layer_count() const { return static_cast<Index>(layer_dims.size()); }
  Index obs_dim() const { return emission.network.layers.back().weights.rows(); }

  Index total_latent_dim() const {
    Index d = 0;
    for (Index dl : layer_dims) d += dl;
    return d;
  }

  void validate() const {
    const std::size_t levels = layer_dims.size();
    require(levels >= 1, "layer_dims", "needs at least one stochastic layer");
    for (std::size_t l = 0; l < levels; ++l)
      require(layer_dims[l] >= 1, "layer_dims[" + std::to_string(l) + "]",
              "must be positive");
    require(transforms.size() == levels - 1, "transforms",
            "needs one transform per layer below the top");
    require(layer_covs.size() == levels - 1, "layer_covs",
            "needs one covariance per layer below the top");
    for (std::size_t l = 0; l + 1 < levels; ++l) {
      const std::string tf = "transforms[" + std::to_string(l) + "]";
      transforms[l].validate();
      require(transforms[l].in_dim() == layer_dims[l + 1], tf,
              "input dimension must equal the layer above");
      require(transforms[l].out_dim() == layer_dims[l], tf,
              "output dimension must equal this layer");
      const std::string cv = "layer_covs[" + std::to_string(l) + "]";
      require(!layer_covs[l].empty(), cv, "must be set");
      require(layer_covs[l].dim() == layer_dims[l], cv,
              "dimension must equal the layer dimension");
    }
    emission.network.validate();
    require(emission.network.in_dim() == layer_dims.front(), "emission.network",
            "input dimension must equal the bottom stochastic layer");
    if (emission.family == EmissionFamily::gaussian) {
      require(emission.noise_variances.size() == emission.network.out_dim(),
              "emission.noise_variances", "needs one variance per output coordinate");
      for (Index p = 0; p < emission.noise_variances.size(); ++p)
        require(std::isfinite(emission.noise_variances(p)) &&
                    emission.noise_variances(p) >= 0.0,
                "emission.noise_variances[" + std::to_string(p) + "]",
                "must be nonnegative");
    } else {
      require(emission.noise_variances.size() == 0, "emission.noise_variances",
              "only the gaussian family carries noise variances");
    }
  }
};

// ---------------------------------------------------------------------------
// inverse autoregressive flow

/// Per-coordinate affine conditioner: mu = mean_bias + mean_coeff * z and
/// log sigma = log_scale_bias + log_scale_coeff * z with strictly lower
/// triangular coefficient matrices, so coordinate d reads only z_{<d}.
struct AffineConditioner {
  Vector mean_bias;
  Matrix mean_coeff;
  Vector log_scale_bias;
  Matrix log_scale_coeff;

  Index dim() const { return mean_bias.size(); }

  void validate() const {
    const Index d = dim();
    require(d >= 1, "mean_bias", "must be non-empty");
    require_finite(mean_bias, "mean_bias");
    require(log_scale_bias.size() == d, "log_scale_bias", "length must match mean_bias");
    require_finite(log_scale_bias, "log_scale_bias");
    check_strictly_lower(mean_coeff, d, "mean_coeff");
    check_strictly_lower(log_scale_coeff, d, "log_scale_coeff");
  }

 private:
  static void check_strictly_lower(const Matrix& m, Index d, const std::string& field) {
    require(m.rows() == d && m.cols() == d, field, "must be D x D");
    require_finite(m, field);
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j)
        require(m(i, j) == 0.0, field,
                "must be strictly lower triangular (entry (" + std::to_string(i) + "," +
                    std::to_string(j) + ") is nonzero)");
  }
};

/// Masked-network conditioner: one hidden layer whose connectivity masks
/// enforce that output coordinate d depends only on inputs < d. Degrees
/// follow the usual sequential assignment.
struct MaskedMlpConditioner {
  Matrix hidden_weights;  // H x D, premasked
  Vector hidden_bias;     // H
  Matrix mean_weights;    // D x H, premasked
  Vector mean_bias;       // D
  Matrix log_scale_weights;  // D x H, premasked
  Vector log_scale_bias;     // D
  std::vector<Index> hidden_degrees;  // degree of each hidden unit, in [1, D-1]

  Index dim() const { return hidden_weights.cols(); }

  void validate() const {
    const Index d = dim();
    const Index h = hidden_weights.rows();
    require(d >= 1 && h >= 1, "hidden_weights", "must be non-empty");
    require_finite(hidden_weights, "hidden_weights");
    require(hidden_bias.size() == h, "hidden_bias", "length must equal the hidden width");
    require(mean_weights.rows() == d && mean_weights.cols() == h, "mean_weights",
            "must be D x H");
    require(mean_bias.size() == d, "mean_bias", "length must be D");
    require(log_scale_weights.rows() == d && log_scale_weights.cols() == h,
            "log_scale_weights", "must be D x H");
    require(log_scale_bias.size() == d, "log_scale_bias", "length must be D");
    require(static_cast<Index>(hidden_degrees.size()) == h, "hidden_degrees",
            "needs one degree per hidden unit");
    for (Index k = 0; k < h; ++k) {
      const Index deg = hidden_degrees[static_cast<std::size_t>(k)];
      require(deg >= 1 && deg <= std::max<Index>(d - 1, 1), "hidden_degrees",
              "degrees must lie in [1, D-1]");
      // hidden unit k reads input j only when j <= deg (1-based)
      for (Index j = 0; j < d; ++j)
        if (j + 1 > deg)
          require(hidden_weights(k, j) == 0.0, "hidden_weights",
                  "mask violation: hidden unit reads a coordinate above its degree");
      // output coordinate i reads unit k only when deg < i (1-based), which
      // chains to a strictly lower triangular input dependence
      for (Index i = 0; i < d; ++i) {
        if (deg < i + 1) continue;
        require(mean_weights(i, k) == 0.0, "mean_weights",
                "mask violation: output reads a hidden unit of too-high degree");
        require(log_scale_weights(i, k) == 0.0, "log_scale_weights",
                "mask violation: output reads a hidden unit of too-high degree");
      }
    }
  }
};

struct IafLayer {
  std::variant<AffineConditioner, MaskedMlpConditioner> conditioner;

  Index dim() const {
    return std::visit([](const auto& c) { return c.dim(); }, conditioner);
  }

  void validate() const {
    std::visit([](const auto& c) { c.validate(); }, conditioner);
  }
};

namespace detail {

/// Evaluate (mu, log sigma) at z; the conditioner structure guarantees entry
/// d depends only on z_{<d}.
inline std::pair<Vector, Vector> conditioner_eval(const IafLayer& layer, const Vector& z) {
  if (const auto* aff = std::get_if<AffineConditioner>(&layer.conditioner)) {
    return {aff->mean_bias + aff->mean_coeff * z,
            aff->log_scale_bias + aff->log_scale_coeff * z};
  }
  const auto& m = std::get<MaskedMlpConditioner>(layer.conditioner);
  Vector hidden = m.hidden_weights * z + m.hidden_bias;
  for (Index k = 0; k < hidden.size(); ++k) hidden(k) = std::tanh(hidden(k));
  return {m.mean_bias + m.mean_weights * hidden,
          m.log_scale_bias + m.log_scale_weights * hidden};
}

inline double checked_scale(double log_sigma, Index d) {
  const double sigma = std::exp(log_sigma);
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw NumericalError("iaf: conditioner produced a non-positive scale at coordinate " +
                         std::to_string(d));
  return sigma;
}

}  // namespace detail

/// Sequential transform z_d = mu_d(z_{<d}) + sigma_d(z_{<d}) * eps_d. The
/// Jacobian wrt eps is lower triangular with diagonal sigma_d.
inline Vector iaf_forward(const IafLayer& layer, const Vector& eps) {
  layer.validate();
  const Index d = layer.dim();
  require(eps.size() == d, "eps", "length must equal the flow dimension");
  Vector z = Vector::Zero(d);
  for (Index i = 0; i < d; ++i) {
    const auto [mu, log_sigma] = detail::conditioner_eval(layer, z);
    z(i) = mu(i) + detail::checked_scale(log_sigma(i), i) * eps(i);
  }
  return z;
}

/// Coordinate-wise inversion eps_d = (z_d - mu_d(z_{<d})) / sigma_d(z_{<d}),
/// exact for the affine conditioner. The masked-network conditioner has no
/// closed-form inverse here and is rejected.
inline Vector iaf_inverse(const IafLayer& layer, const Vector& z) {
  layer.validate();
  if (!std::holds_alternative<AffineConditioner>(layer.conditioner))
    throw ValidationError("conditioner", "not analytically invertible");
  const Index d = layer.dim();
  require(z.size() == d, "z", "length must equal the flow dimension");
  const auto [mu, log_sigma] = detail::conditioner_eval(layer, z);
  Vector eps(d);
  for (Index i = 0; i < d; ++i)
    eps(i) = (z(i) - mu(i)) / detail::checked_scale(log_sigma(i), i);
  return eps;
}

// ---------------------------------------------------------------------------
// amortized posterior

/// Reparameterized posterior z = NN_mu(y) + NN_sigma(y) * eps. The scale
/// network's outputs are used directly as standard deviations and must be
/// positive.
struct AmortizedPosterior {
  Mlp mean_net;
  Mlp scale_net;

  Index obs_dim() const { return mean_net.in_dim(); }
  Index latent_dim() const { return mean_net.out_dim(); }

  void validate() const {
    mean_net.validate();
    scale_net.validate();
    require(scale_net.in_dim() == mean_net.in_dim(), "scale_net",
            "input dimension must match mean_net");
    require(scale_net.out_dim() == mean_net.out_dim(), "scale_net",
            "output dimension must match mean_net");
  }
};

inline Matrix amortized_posterior_sample(const AmortizedPosterior& post, const Vector& y,
                                         Index n, RngStream& rng) {
  post.validate();
  require(n >= 1, "n", "must be at least 1");
  require(y.size() == post.obs_dim(), "y", "length must equal the network input dimension");
  const Vector mu = mlp_forward(post.mean_net, y);
  const Vector sigma = mlp_forward(post.scale_net, y);
  for (Index i = 0; i < sigma.size(); ++i)
    if (!(sigma(i) > 0.0))
      throw NumericalError("amortized posterior: scale network output " +
                           std::to_string(i) + " is not positive");
  const Index d = post.latent_dim();
  Matrix draws(n, d);
  for (Index s = 0; s < n; ++s)
    for (Index i = 0; i < d; ++i) draws(s, i) = mu(i) + sigma(i) * rng.normal();
  return draws;
}

/// Masked one-hidden-layer conditioner with sequential degree assignment and
/// seeded N(0, 1/fan_in) weights; D = 1 degenerates to constant outputs.
inline MaskedMlpConditioner random_masked_conditioner(Index d, Index hidden,
                                                      RngStream& rng) {
  require(d >= 1, "d", "must be at least 1");
  require(hidden >= 1, "hidden", "must be at least 1");
  MaskedMlpConditioner c;
  c.hidden_degrees.resize(static_cast<std::size_t>(hidden));
  for (Index k = 0; k < hidden; ++k)
    c.hidden_degrees[static_cast<std::size_t>(k)] = d > 1 ? 1 + (k % (d - 1)) : 1;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double hid_scale = 1.0 / std::sqrt(static_cast<double>(hidden));
  c.hidden_weights = Matrix::Zero(hidden, d);
  for (Index k = 0; k < hidden; ++k)
    for (Index j = 0; j < d; ++j) {
      const double w = in_scale * rng.normal();
      if (j + 1 <= c.hidden_degrees[static_cast<std::size_t>(k)]) c.hidden_weights(k, j) = w;
    }
  c.hidden_bias = Vector::Zero(hidden);
  c.mean_weights = Matrix::Zero(d, hidden);
  c.log_scale_weights = Matrix::Zero(d, hidden);
  for (Index i = 0; i < d; ++i)
    for (Index k = 0; k < hidden; ++k) {
      const double wm = hid_scale * rng.normal();
      const double ws = hid_scale * rng.normal();
      if (c.hidden_degrees[static_cast<std::size_t>(k)] < i + 1) {
        c.mean_weights(i, k) = wm;
        c.log_scale_weights(i, k) = ws;
      }
    }
  c.mean_bias = Vector::Zero(d);
  c.log_scale_bias = Vector::Zero(d);
  return c;
}

}  // namespace lvm
