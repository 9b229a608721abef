#pragma once

#include <string>
#include <vector>

#include "lvm/model_spec.hpp"
#include "lvm/moments.hpp"
#include "lvm/numerics.hpp"

namespace lvm {

struct RrrFactors {
  Matrix w;  // P x d
  Matrix d;  // d x M
};

/// Best rank-d factorization of a coefficient matrix by singular value
/// truncation: W = U_d S_d^{1/2}, D = S_d^{1/2} V_d^T. The split of the
/// singular values is a gauge choice; to make results reproducible each
/// retained left singular vector is flipped so its largest-magnitude entry
/// is positive.
inline RrrFactors reduce_rank_regression(const Matrix& b, Index rank) {
  require(b.rows() >= 1 && b.cols() >= 1, "b", "must be non-empty");
  require_finite(b, "b");
  require(rank >= 1 && rank < std::min(b.rows(), b.cols()), "rank",
          "must satisfy 1 <= rank < min(rows, cols)");
  Eigen::JacobiSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Matrix u = svd.matrixU().leftCols(rank);
  Matrix v = svd.matrixV().leftCols(rank);
  const Vector s = svd.singularValues().head(rank);
  for (Index k = 0; k < rank; ++k) {
    Index imax = 0;
    u.col(k).cwiseAbs().maxCoeff(&imax);
    if (u(imax, k) < 0.0) {
      u.col(k) = -u.col(k);
      v.col(k) = -v.col(k);
    }
  }
  const Vector root = s.cwiseSqrt();
  RrrFactors out;
  out.w = u * root.asDiagonal();
  out.d = root.asDiagonal() * v.transpose();
  return out;
}

struct ReductionCheck {
  std::string condition;
  bool pass = false;
  double deviation = 0.0;
};

/// Result of testing whether one spec realizes a known special-case
/// relationship with another. comparable=false means the model classes have
/// no such relationship here; that is a result, not an error.
struct ReductionReport {
  std::string from_model;
  std::string to_model;
  bool comparable = false;
  bool holds = false;
  double max_deviation = 0.0;
  std::string relation;
  std::vector<ReductionCheck> conditions;
};

namespace detail {

constexpr double kReductionTol = 1e-12;

inline double moment_deviation(const ImpliedMoments& a, const ImpliedMoments& b) {
  if (a.mean.size() != b.mean.size()) return std::numeric_limits<double>::infinity();
  const double dm = (a.mean - b.mean).cwiseAbs().maxCoeff();
  const double dc = (a.covariance - b.covariance).cwiseAbs().maxCoeff();
  return std::max(dm, dc);
}

// A passing check is named by the property that holds, a failing one by the
// violation, so reports read naturally either way.
inline void add_check(ReductionReport& report, const std::string& holds_name,
                      const std::string& fails_name, double deviation) {
  ReductionCheck c;
  c.pass = deviation <= kReductionTol;
  c.condition = c.pass ? holds_name : fails_name;
  c.deviation = deviation;
  report.conditions.push_back(std::move(c));
}

inline void finalize(ReductionReport& report) {
  report.holds = !report.conditions.empty();
  report.max_deviation = 0.0;
  for (const auto& c : report.conditions) {
    report.holds = report.holds && c.pass;
    report.max_deviation = std::max(report.max_deviation, c.deviation);
  }
}

inline void add_moment_equality(ReductionReport& report, const ModelSpec& a,
                                const ModelSpec& b) {
  const ImpliedMoments ma = implied_moments(a);
  const ImpliedMoments mb = implied_moments(b);
  const bool second_order_only = !ma.gaussian || !mb.gaussian;
  add_check(report,
            second_order_only ? "implied covariance equal" : "implied moments equal",
            second_order_only ? "implied covariance differs" : "implied moments differ",
            moment_deviation(ma, mb));
}

inline double isotropy_deviation(const Vector& variances) {
  return variances.maxCoeff() - variances.minCoeff();
}

inline double offdiagonal_magnitude(const Matrix& m) {
  double dev = 0.0;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      if (i != j) dev = std::max(dev, std::abs(m(i, j)));
  return dev;
}

}  // namespace detail

/// Tests the known special-case relationships of the family:
///   ppca = fa with isotropic noise        cca/mbfa with diagonal noise = fa
///   ibfa = cca with a zero-block loading  ica with all shapes 2 = fa
///   gfa = mbfa with isotropic noise       gfa with stacked views = fa
/// plus same-model moment equality. The pair order does not matter; the
/// report names the canonical relation. Each structural condition and the
/// final moment equality are checked to 1e-12.
inline ReductionReport check_reduction(const ModelSpec& from, const ModelSpec& to) {
  validate_spec(from);
  validate_spec(to);
  ReductionReport report;
  report.from_model = model_tag(from);
  report.to_model = model_tag(to);

  const auto tags_are = [&](const std::string& a, const std::string& b, const ModelSpec*& sa,
                            const ModelSpec*& sb) {
    if (report.from_model == a && report.to_model == b) {
      sa = &from;
      sb = &to;
      return true;
    }
    if (report.from_model == b && report.to_model == a) {
      sa = &to;
      sb = &from;
      return true;
    }
    return false;
  };

  const ModelSpec* a = nullptr;
  const ModelSpec* b = nullptr;

  if (tags_are("ppca", "fa", a, b)) {
    report.comparable = true;
    report.relation = "ppca is fa with isotropic noise";
    const auto& fa = std::get<LinearGaussianLvmSpec>(*b);
    const auto& diag = std::get<DiagonalNoise>(fa.noise);
    detail::add_check(report, "noise isotropic", "noise not isotropic",
                      detail::isotropy_deviation(diag.variances));
    detail::add_moment_equality(report, *a, *b);
  } else if (tags_are("cca", "fa", a, b) || tags_are("mbfa", "fa", a, b)) {
    report.comparable = true;
    report.relation = std::get<MultiViewSpec>(*a).kind == MultiViewKind::cca
                          ? "cca with diagonal noise is fa over the stacked views"
                          : "mbfa with diagonal noise is fa over the stacked views";
    const auto& mv = std::get<MultiViewSpec>(*a);
    double dev = 0.0;
    for (std::size_t g = 0; g < mv.loadings.size(); ++g)
      dev = std::max(dev, detail::offdiagonal_magnitude(mv.view_noise_cov(g)));
    detail::add_check(report, "noise diagonal", "noise not diagonal", dev);
    detail::add_moment_equality(report, *a, *b);
  } else if (tags_are("ibfa", "cca", a, b)) {
    report.comparable = true;
    report.relation = "ibfa is cca with the block-masked loading matrix";
    const auto& ibfa = std::get<MultiViewSpec>(*a);
    const auto& cca = std::get<MultiViewSpec>(*b);
    const IbfaMask& mask = *ibfa.mask;
    double dev = std::numeric_limits<double>::infinity();
    if (cca.views() == 2 && cca.latent_dim() == ibfa.latent_dim() &&
        cca.loadings[0].rows() == ibfa.loadings[0].rows() &&
        cca.loadings[1].rows() == ibfa.loadings[1].rows()) {
      dev = 0.0;
      if (mask.view2 > 0)
        dev = std::max(dev, cca.loadings[0].rightCols(mask.view2).cwiseAbs().maxCoeff());
      if (mask.view1 > 0)
        dev = std::max(dev, cca.loadings[1]
                                .middleCols(mask.shared, mask.view1)
                                .cwiseAbs()
                                .maxCoeff());
    }
    detail::add_check(report, "loading mask preserved", "loading mask violated", dev);
    detail::add_moment_equality(report, *a, *b);
  } else if (tags_are("ica", "fa", a, b)) {
    report.comparable = true;
    report.relation = "ica with all shapes 2 is gaussian, matching fa in law";
    const auto& ica = std::get<LinearGaussianLvmSpec>(*a);
    const double dev = (ica.latent_prior.shapes.array() - 2.0).abs().maxCoeff();
    detail::add_check(report, "latent shapes gaussian", "latent shapes not gaussian", dev);
    detail::add_moment_equality(report, *a, *b);
  } else if (tags_are("gfa", "mbfa", a, b)) {
    report.comparable = true;
    report.relation = "gfa is mbfa with isotropic per-view noise";
    const auto& mbfa = std::get<MultiViewSpec>(*b);
    double dev = 0.0;
    for (std::size_t g = 0; g < mbfa.loadings.size(); ++g) {
      const Matrix cov = mbfa.view_noise_cov(g);
      dev = std::max(dev, detail::offdiagonal_magnitude(cov));
      dev = std::max(dev, cov.diagonal().maxCoeff() - cov.diagonal().minCoeff());
    }
    detail::add_check(report, "noise isotropic per view", "noise not isotropic per view", dev);
    detail::add_moment_equality(report, *a, *b);
  } else if (tags_are("gfa", "fa", a, b)) {
    report.comparable = true;
    report.relation = "gfa stacks to fa: per-view isotropic noise is diagonal";
    detail::add_moment_equality(report, *a, *b);
  } else if (report.from_model == report.to_model) {
    try {
      report.comparable = true;
      report.relation = "same model class; checking moment equality";
      detail::add_moment_equality(report, from, to);
    } catch (const ValidationError&) {
      report.comparable = false;
      report.relation = "no known reduction";
      report.conditions.clear();
    }
  } else {
    report.relation = "no known reduction";
  }

  detail::finalize(report);
  if (!report.comparable) report.holds = false;
  return report;
}

}  // namespace lvm
