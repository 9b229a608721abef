#include <catch2/catch_amalgamated.hpp>

#include <lvm/deep.hpp>
#include <lvm/moments.hpp>
#include <lvm/sampling.hpp>
#include <lvm/serialize.hpp>

#include "test_support.hpp"

using lvm::Index;
using lvm::Matrix;
using lvm::Vector;

namespace {

lvm::Mlp single_layer(Matrix w, Vector b, lvm::Activation act = lvm::Activation::identity) {
  lvm::Mlp net;
  net.layers.push_back({std::move(w), std::move(b), act});
  return net;
}

lvm::AffineConditioner zero_conditioner(Index d) {
  lvm::AffineConditioner c;
  c.mean_bias = Vector::Zero(d);
  c.mean_coeff = Matrix::Zero(d, d);
  c.log_scale_bias = Vector::Zero(d);
  c.log_scale_coeff = Matrix::Zero(d, d);
  return c;
}

Matrix random_strictly_lower(Index d, lvm::RngStream& rng, double scale = 0.5) {
  Matrix m = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < i; ++j) m(i, j) = scale * rng.normal();
  return m;
}

}  // namespace

TEST_CASE("feedforward stack applies layers in order", "[deep]") {
  const lvm::Mlp id = single_layer(Matrix::Identity(3, 3), Vector::Zero(3));
  const Vector x = Vector::LinSpaced(3, -1.0, 1.0);
  CHECK(lvm::mlp_forward(id, x) == x);

  const lvm::Mlp relu =
      single_layer(Matrix::Identity(2, 2), Vector::Zero(2), lvm::Activation::relu);
  Vector in(2);
  in << -1.0, 2.0;
  Vector expect(2);
  expect << 0.0, 2.0;
  CHECK(lvm::mlp_forward(relu, in) == expect);

  lvm::RngStream rng(3);
  lvm::Mlp two;
  two.layers.push_back({testsup::random_matrix(4, 3, rng),
                        testsup::random_matrix(4, 1, rng).col(0), lvm::Activation::tanh});
  two.layers.push_back({testsup::random_matrix(2, 4, rng),
                        testsup::random_matrix(2, 1, rng).col(0),
                        lvm::Activation::sigmoid});
  const Vector y = lvm::mlp_forward(two, x);
  Vector h = two.layers[0].weights * x + two.layers[0].bias;
  for (Index i = 0; i < 4; ++i) h(i) = std::tanh(h(i));
  Vector manual = two.layers[1].weights * h + two.layers[1].bias;
  for (Index i = 0; i < 2; ++i) manual(i) = 1.0 / (1.0 + std::exp(-manual(i)));
  CHECK((y - manual).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(lvm::mlp_forward(two, Vector::Zero(4)), lvm::ValidationError);
  lvm::Mlp broken = two;
  broken.layers[1].weights = Matrix::Ones(2, 5);
  CHECK_THROWS_AS(lvm::mlp_forward(broken, x), lvm::ValidationError);
  broken = two;
  broken.layers[0].bias = Vector::Zero(3);
  CHECK_THROWS_AS(broken.validate(), lvm::ValidationError);
}

TEST_CASE("seeded network construction is reproducible", "[deep]") {
  lvm::RngStream a(5), b(5);
  const std::vector<lvm::Activation> acts{lvm::Activation::tanh, lvm::Activation::identity};
  const lvm::Mlp na = lvm::random_mlp({4, 8, 2}, acts, a);
  const lvm::Mlp nb = lvm::random_mlp({4, 8, 2}, acts, b);
  REQUIRE(na.layers.size() == 2);
  CHECK(na.in_dim() == 4);
  CHECK(na.out_dim() == 2);
  CHECK(na.layers[0].weights == nb.layers[0].weights);
  CHECK(na.layers[1].weights == nb.layers[1].weights);
  CHECK(na.layers[0].bias.isZero(0.0));

  lvm::RngStream c(5);
  CHECK_THROWS_AS(lvm::random_mlp({4, 8, 2}, {lvm::Activation::tanh}, c),
                  lvm::ValidationError);
}

TEST_CASE("single-layer deep model with linear emission matches the factor law",
          "[deep]") {
  const lvm::LinearGaussianLvmSpec ppca = testsup::make_ppca(4, 2, 0.3);

  lvm::DlgmSpec deep;
  deep.layer_dims = {2};
  deep.emission.family = lvm::EmissionFamily::gaussian;
  deep.emission.network = single_layer(ppca.loadings, Vector::Zero(4));
  deep.emission.noise_variances = Vector::Constant(4, 0.3);

  lvm::RngStream rng(7);
  const lvm::SampleBatch batch = lvm::dlgm_sample(deep, 200000, rng);
  REQUIRE(batch.latents.cols() == 2);
  REQUIRE(batch.latent_dims == std::vector<Index>{2});

  const auto m = testsup::sample_moments(batch.observations);
  CHECK(testsup::rel_frobenius(m.cov, lvm::implied_moments(ppca).covariance) < 0.02);
  CHECK(batch.fingerprint == lvm::spec_fingerprint(deep));
}

TEST_CASE("two-layer stack concatenates latents bottom first", "[deep]") {
  lvm::RngStream init(11);
  lvm::DlgmSpec deep;
  deep.layer_dims = {3, 2};
  deep.transforms = {lvm::random_mlp({2, 3}, {lvm::Activation::identity}, init)};
  deep.layer_covs = {lvm::SpdMatrix(Matrix(1e-6 * Matrix::Identity(3, 3)))};
  deep.emission.family = lvm::EmissionFamily::gaussian;
  deep.emission.network = single_layer(testsup::random_matrix(4, 3, init), Vector::Zero(4));
  deep.emission.noise_variances = Vector::Constant(4, 0.1);

  lvm::RngStream rng(13);
  const lvm::SampleBatch batch = lvm::dlgm_sample(deep, 2000, rng);
  REQUIRE(batch.latents.cols() == 5);
  REQUIRE(batch.latent_dims == (std::vector<Index>{3, 2}));

  // with a tiny conditional covariance the bottom layer hugs its transform
  const Matrix bottom = batch.latents.leftCols(3);
  const Matrix top = batch.latents.rightCols(2);
  double mean_square = 0.0;
  for (Index i = 0; i < 2000; ++i) {
    const Vector pred = lvm::mlp_forward(deep.transforms[0], top.row(i).transpose());
    mean_square += (bottom.row(i).transpose() - pred).squaredNorm();
  }
  mean_square /= 2000.0 * 3.0;
  CHECK(mean_square < 1e-5);

  // the top layer is standard normal
  const auto tm = testsup::sample_moments(top);
  CHECK(testsup::rel_frobenius(tm.cov, Matrix::Identity(2, 2)) < 0.06);

  lvm::RngStream r1(17), r2(17);
  const lvm::SampleBatch b1 = lvm::dlgm_sample(deep, 100, r1);
  const lvm::SampleBatch b2 = lvm::dlgm_sample(deep, 100, r2);
  CHECK(b1.observations == b2.observations);
  CHECK(b1.latents == b2.latents);
}

TEST_CASE("binary emission draws through the logistic link", "[deep]") {
  lvm::DlgmSpec deep;
  deep.layer_dims = {2};
  deep.emission.family = lvm::EmissionFamily::bernoulli;
  deep.emission.network = single_layer(Matrix::Zero(3, 2), Vector::Zero(3));

  lvm::RngStream rng(19);
  const lvm::SampleBatch batch = lvm::dlgm_sample(deep, 20000, rng);
  CHECK(((batch.observations.array() == 0.0) || (batch.observations.array() == 1.0)).all());
  CHECK(batch.observations.mean() == Catch::Approx(0.5).margin(0.02));

  deep.emission.noise_variances = Vector::Constant(3, 0.1);
  CHECK_THROWS_AS(deep.validate(), lvm::ValidationError);

  deep.emission.noise_variances = Vector();
  deep.transforms = {lvm::random_mlp({2, 2}, {lvm::Activation::tanh}, rng)};
  CHECK_THROWS_AS(deep.validate(), lvm::ValidationError);  // transform without a layer
}

TEST_CASE("identity flow passes noise through unchanged", "[deep]") {
  lvm::IafLayer layer{zero_conditioner(3)};
  const Vector eps = Vector::LinSpaced(3, -1.0, 1.0);
  CHECK(lvm::iaf_forward(layer, eps) == eps);
  CHECK(lvm::iaf_inverse(layer, eps) == eps);
}

TEST_CASE("affine flow produces the triangular-solve covariance", "[deep]") {
  lvm::AffineConditioner c = zero_conditioner(2);
  c.mean_coeff(1, 0) = 0.5;
  const lvm::IafLayer layer{c};

  lvm::RngStream rng(23);
  Matrix draws(200000, 2);
  for (Index i = 0; i < draws.rows(); ++i) {
    Vector eps(2);
    eps << rng.normal(), rng.normal();
    draws.row(i) = lvm::iaf_forward(layer, eps).transpose();
  }
  Matrix expect(2, 2);
  expect << 1.0, 0.5, 0.5, 1.25;
  CHECK(testsup::rel_frobenius(testsup::sample_moments(draws).cov, expect) < 0.02);
}

TEST_CASE("flow covariance matches the closed-form oracle", "[deep]") {
  lvm::RngStream rng(29);
  lvm::AffineConditioner c = zero_conditioner(3);
  c.mean_coeff = random_strictly_lower(3, rng);
  c.log_scale_bias = Vector(3);
  c.log_scale_bias << 0.2, -0.3, 0.1;
  const lvm::IafLayer layer{c};

  Matrix draws(200000, 3);
  for (Index i = 0; i < draws.rows(); ++i) {
    Vector eps(3);
    eps << rng.normal(), rng.normal(), rng.normal();
    draws.row(i) = lvm::iaf_forward(layer, eps).transpose();
  }
  const Vector sigma = c.log_scale_bias.array().exp();
  const Matrix oracle = testsup::affine_flow_covariance(c.mean_coeff, sigma);
  CHECK(testsup::rel_frobenius(testsup::sample_moments(draws).cov, oracle) < 0.02);
}

TEST_CASE("flow Jacobian is lower triangular with the conditioner scales", "[deep]") {
  lvm::RngStream rng(31);

  const auto jacobian_check = [&rng](const lvm::IafLayer& layer, Index d) {
    const Vector eps0 = testsup::random_matrix(d, 1, rng).col(0);
    const Matrix jac = testsup::finite_difference_jacobian(
        [&layer](const Vector& e) { return lvm::iaf_forward(layer, e); }, eps0);
    for (Index i = 0; i < d; ++i) {
      for (Index j = i + 1; j < d; ++j) REQUIRE(std::abs(jac(i, j)) < 1e-8);
      REQUIRE(jac(i, i) > 0.0);
    }
  };

  lvm::AffineConditioner c = zero_conditioner(4);
  c.mean_coeff = random_strictly_lower(4, rng);
  c.log_scale_coeff = random_strictly_lower(4, rng, 0.2);
  jacobian_check(lvm::IafLayer{c}, 4);

  const lvm::MaskedMlpConditioner m = lvm::random_masked_conditioner(5, 16, rng);
  jacobian_check(lvm::IafLayer{m}, 5);
}

TEST_CASE("affine flow inverts exactly", "[deep]") {
  lvm::RngStream rng(37);
  lvm::AffineConditioner c = zero_conditioner(4);
  c.mean_bias = testsup::random_matrix(4, 1, rng).col(0);
  c.mean_coeff = random_strictly_lower(4, rng);
  c.log_scale_bias = 0.3 * testsup::random_matrix(4, 1, rng).col(0);
  c.log_scale_coeff = random_strictly_lower(4, rng, 0.1);
  const lvm::IafLayer layer{c};

  for (int trial = 0; trial < 1000; ++trial) {
    const Vector z = testsup::random_matrix(4, 1, rng).col(0);
    const Vector round = lvm::iaf_forward(layer, lvm::iaf_inverse(layer, z));
    REQUIRE((round - z).cwiseAbs().maxCoeff() < 1e-10);
    const Vector eps = testsup::random_matrix(4, 1, rng).col(0);
    const Vector back = lvm::iaf_inverse(layer, lvm::iaf_forward(layer, eps));
    REQUIRE((back - eps).cwiseAbs().maxCoeff() < 1e-10);
  }

  // scalar case reduces to the explicit standardization
  lvm::AffineConditioner s = zero_conditioner(1);
  s.mean_bias(0) = 2.0;
  s.log_scale_bias(0) = std::log(3.0);
  const Vector z1 = Vector::Constant(1, 5.0);
  CHECK(lvm::iaf_inverse(lvm::IafLayer{s}, z1)(0) == Catch::Approx(1.0).margin(1e-14));
}

TEST_CASE("masked flow respects the autoregressive ordering", "[deep]") {
  lvm::RngStream rng(41);
  const lvm::IafLayer layer{lvm::random_masked_conditioner(5, 16, rng)};

  const Vector base = testsup::random_matrix(5, 1, rng).col(0);
  const Vector z0 = lvm::iaf_forward(layer, base);
  for (int trial = 0; trial < 100; ++trial) {
    const Index d = 1 + static_cast<Index>(rng.uniform() * 4.0);
    Vector perturbed = base;
    perturbed(d) += rng.normal();
    const Vector z1 = lvm::iaf_forward(layer, perturbed);
    for (Index i = 0; i < d; ++i) REQUIRE(z1(i) == z0(i));
    REQUIRE(z1(d) != z0(d));
  }

  CHECK_THROWS_MATCHES(lvm::iaf_inverse(layer, base), lvm::ValidationError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring(
                           "not analytically invertible")));
}

TEST_CASE("flow scale overflow is a numerical error", "[deep]") {
  lvm::AffineConditioner c = zero_conditioner(2);
  c.log_scale_bias = Vector::Constant(2, 1000.0);
  const lvm::IafLayer layer{c};
  CHECK_THROWS_AS(lvm::iaf_forward(layer, Vector::Zero(2)), lvm::NumericalError);
}

TEST_CASE("conditioner validation rejects broken masks", "[deep]") {
  lvm::AffineConditioner c = zero_conditioner(3);
  c.mean_coeff(0, 1) = 0.5;  // above the diagonal
  CHECK_THROWS_AS(c.validate(), lvm::ValidationError);

  lvm::RngStream rng(43);
  lvm::MaskedMlpConditioner m = lvm::random_masked_conditioner(4, 8, rng);
  CHECK_NOTHROW(m.validate());
  // hidden unit 0 has degree 1; reading input 3 breaks the mask
  m.hidden_weights(0, 3) = 0.7;
  CHECK_THROWS_AS(m.validate(), lvm::ValidationError);

  m = lvm::random_masked_conditioner(4, 8, rng);
  m.mean_weights(0, 0) = 0.7;  // output 0 may not read any hidden unit
  CHECK_THROWS_AS(m.validate(), lvm::ValidationError);
}

TEST_CASE("reparameterized posterior draws follow the two networks", "[deep]") {
  lvm::AmortizedPosterior post;
  Vector mu(2);
  mu << 1.0, 2.0;
  Vector sd(2);
  sd << 0.5, 2.0;
  post.mean_net = single_layer(Matrix::Zero(2, 3), mu);
  post.scale_net = single_layer(Matrix::Zero(2, 3), sd);

  lvm::RngStream rng(47);
  const Matrix draws = lvm::amortized_posterior_sample(post, Vector::Zero(3), 100000, rng);
  const auto m = testsup::sample_moments(draws);
  CHECK(m.mean(0) == Catch::Approx(1.0).margin(0.01));
  CHECK(m.mean(1) == Catch::Approx(2.0).margin(0.04));
  CHECK(std::sqrt(m.cov(0, 0)) == Catch::Approx(0.5).epsilon(0.02));
  CHECK(std::sqrt(m.cov(1, 1)) == Catch::Approx(2.0).epsilon(0.02));

  // the posterior is a function of the observation
  lvm::RngStream init(53);
  post.mean_net = lvm::random_mlp({3, 2}, {lvm::Activation::identity}, init);
  lvm::RngStream r1(59), r2(59);
  const Matrix d1 = lvm::amortized_posterior_sample(post, Vector::Zero(3), 5000, r1);
  const Matrix d2 = lvm::amortized_posterior_sample(post, Vector::Ones(3), 5000, r2);
  CHECK(std::abs(d1.col(0).mean() - d2.col(0).mean()) > 0.05);

  // a tiny scale collapses the posterior onto its mean
  post.scale_net = single_layer(Matrix::Zero(2, 3), Vector::Constant(2, 1e-8));
  const Matrix tight = lvm::amortized_posterior_sample(post, Vector::Zero(3), 5000, r1);
  const auto tm = testsup::sample_moments(tight);
  CHECK(tm.cov(0, 0) < 1e-12);
  CHECK(tm.cov(1, 1) < 1e-12);

  post.scale_net = single_layer(Matrix::Zero(2, 3), Vector::Constant(2, -1.0));
  CHECK_THROWS_AS(lvm::amortized_posterior_sample(post, Vector::Zero(3), 10, r1),
                  lvm::NumericalError);
  post.scale_net = single_layer(Matrix::Zero(2, 4), Vector::Constant(2, 1.0));
  CHECK_THROWS_AS(lvm::amortized_posterior_sample(post, Vector::Zero(3), 10, r1),
                  lvm::ValidationError);
}
