#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lvm/deep.hpp"
#include "lvm/estimators.hpp"
#include "lvm/model_spec.hpp"
#include "lvm/moments.hpp"
#include "lvm/numerics.hpp"
#include "lvm/reductions.hpp"

namespace lvm {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// primitive helpers; every reader carries a path so parse errors name the
// exact field

namespace jsonio {

inline const Json& member(const Json& j, const std::string& key, const std::string& path) {
  require(j.is_object(), path, "must be an object");
  const auto it = j.find(key);
  require(it != j.end(), path + "." + key, "missing");
  return *it;
}

inline bool has_member(const Json& j, const std::string& key) {
  return j.is_object() && j.contains(key);
}

inline double number(const Json& j, const std::string& path) {
  require(j.is_number(), path, "must be a number");
  return j.get<double>();
}

inline std::int64_t integer(const Json& j, const std::string& path) {
  require(j.is_number_integer(), path, "must be an integer");
  return j.get<std::int64_t>();
}

inline bool boolean(const Json& j, const std::string& path) {
  require(j.is_boolean(), path, "must be a boolean");
  return j.get<bool>();
}

inline std::string text(const Json& j, const std::string& path) {
  require(j.is_string(), path, "must be a string");
  return j.get<std::string>();
}

inline Vector vector_from(const Json& j, const std::string& path) {
  require(j.is_array(), path, "must be an array of numbers");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v(static_cast<Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Json vector_to(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Matrix matrix_from(const Json& j, const std::string& path) {
  require(j.is_array() && !j.empty(), path, "must be a non-empty array of rows");
  const std::size_t rows = j.size();
  require(j[0].is_array() && !j[0].empty(), path + "[0]", "must be a non-empty row");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string row_path = path + "[" + std::to_string(i) + "]";
    require(j[i].is_array(), row_path, "must be an array");
    require(j[i].size() == cols, row_path,
            "all rows must have " + std::to_string(cols) + " entries");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Index>(i), static_cast<Index>(k)) =
          number(j[i][k], row_path + "[" + std::to_string(k) + "]");
  }
  return m;
}

inline Json matrix_to(const Matrix& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    out.push_back(std::move(row));
  }
  return out;
}

inline SpdMatrix spd_from(const Json& j, const std::string& path) {
  try {
    return SpdMatrix(matrix_from(j, path));
  } catch (const NumericalError& e) {
    throw ValidationError(path, e.what());
  }
}

}  // namespace jsonio

// ---------------------------------------------------------------------------
// model specs

inline Json to_json(const LinearGaussianLvmSpec& s) {
  Json j;
  j["model"] = model_tag(ModelSpec{s});
  j["loadings"] = jsonio::matrix_to(s.loadings);
  if (const auto* iso = std::get_if<IsotropicNoise>(&s.noise)) {
    j["noise"] = Json{{"type", "isotropic"}, {"variance", iso->variance}};
  } else if (const auto* diag = std::get_if<DiagonalNoise>(&s.noise)) {
    j["noise"] = Json{{"type", "diagonal"}, {"variances", jsonio::vector_to(diag->variances)}};
  } else {
    j["noise"] = Json{{"type", "full"},
                      {"covariance", jsonio::matrix_to(std::get<FullNoise>(s.noise).covariance.mat())}};
  }
  if (s.latent_prior.kind == LatentPriorKind::generalized_gaussian)
    j["latent_prior"] = Json{{"type", "generalized-gaussian"},
                             {"shapes", jsonio::vector_to(s.latent_prior.shapes)}};
  else
    j["latent_prior"] = Json{{"type", "gaussian"}};
  if (s.mean_offset.size() > 0) j["mean_offset"] = jsonio::vector_to(s.mean_offset);
  return j;
}

inline LinearGaussianLvmSpec linear_gaussian_from_json(const Json& j,
                                                       const std::string& path) {
  LinearGaussianLvmSpec s;
  s.loadings = jsonio::matrix_from(jsonio::member(j, "loadings", path), path + ".loadings");
  const Json& jn = jsonio::member(j, "noise", path);
  const std::string noise_type = jsonio::text(jsonio::member(jn, "type", path + ".noise"),
                                              path + ".noise.type");
  if (noise_type == "isotropic") {
    s.noise = IsotropicNoise{jsonio::number(jsonio::member(jn, "variance", path + ".noise"),
                                            path + ".noise.variance")};
  } else if (noise_type == "diagonal") {
    s.noise = DiagonalNoise{jsonio::vector_from(
        jsonio::member(jn, "variances", path + ".noise"), path + ".noise.variances")};
  } else if (noise_type == "full") {
    s.noise = FullNoise{jsonio::spd_from(jsonio::member(jn, "covariance", path + ".noise"),
                                         path + ".noise.covariance")};
  } else {
    throw ValidationError(path + ".noise.type",
                          "must be isotropic, diagonal, or full (got '" + noise_type + "')");
  }
  if (jsonio::has_member(j, "latent_prior")) {
    const Json& jp = j["latent_prior"];
    const std::string prior_type = jsonio::text(
        jsonio::member(jp, "type", path + ".latent_prior"), path + ".latent_prior.type");
    if (prior_type == "generalized-gaussian") {
      s.latent_prior.kind = LatentPriorKind::generalized_gaussian;
      s.latent_prior.shapes = jsonio::vector_from(
          jsonio::member(jp, "shapes", path + ".latent_prior"), path + ".latent_prior.shapes");
    } else if (prior_type != "gaussian") {
      throw ValidationError(path + ".latent_prior.type",
                            "must be gaussian or generalized-gaussian");
    }
  }
  if (jsonio::has_member(j, "mean_offset"))
    s.mean_offset = jsonio::vector_from(j["mean_offset"], path + ".mean_offset");
  return s;
}

inline Json to_json(const MultiViewSpec& s) {
  Json j;
  j["model"] = model_tag(ModelSpec{s});
  Json loadings = Json::array();
  for (const auto& w : s.loadings) loadings.push_back(jsonio::matrix_to(w));
  j["loadings"] = std::move(loadings);
  if (s.kind == MultiViewKind::gfa) {
    j["noise_variances"] = jsonio::vector_to(s.noise_variances);
  } else {
    Json noise = Json::array();
    for (const auto& cov : s.view_noise) noise.push_back(jsonio::matrix_to(cov.mat()));
    j["view_noise"] = std::move(noise);
  }
  if (s.mask.has_value())
    j["mask"] = Json{{"shared", s.mask->shared},
                     {"view1", s.mask->view1},
                     {"view2", s.mask->view2}};
  return j;
}

inline MultiViewSpec multi_view_from_json(const Json& j, MultiViewKind kind,
                                          const std::string& path) {
  MultiViewSpec s;
  s.kind = kind;
  const Json& jl = jsonio::member(j, "loadings", path);
  require(jl.is_array() && !jl.empty(), path + ".loadings",
          "must be a non-empty array of per-view matrices");
  for (std::size_t g = 0; g < jl.size(); ++g)
    s.loadings.push_back(
        jsonio::matrix_from(jl[g], path + ".loadings[" + std::to_string(g) + "]"));
  if (kind == MultiViewKind::gfa) {
    s.noise_variances = jsonio::vector_from(
        jsonio::member(j, "noise_variances", path), path + ".noise_variances");
  } else {
    const Json& jn = jsonio::member(j, "view_noise", path);
    require(jn.is_array(), path + ".view_noise", "must be an array of matrices");
    for (std::size_t g = 0; g < jn.size(); ++g)
      s.view_noise.push_back(
          jsonio::spd_from(jn[g], path + ".view_noise[" + std::to_string(g) + "]"));
  }
  if (kind == MultiViewKind::ibfa) {
    const Json& jm = jsonio::member(j, "mask", path);
    IbfaMask mask;
    mask.shared = jsonio::integer(jsonio::member(jm, "shared", path + ".mask"),
                                  path + ".mask.shared");
    mask.view1 = jsonio::integer(jsonio::member(jm, "view1", path + ".mask"),
                                 path + ".mask.view1");
    mask.view2 = jsonio::integer(jsonio::member(jm, "view2", path + ".mask"),
                                 path + ".mask.view2");
    s.mask = mask;
  }
  return s;
}

inline Json to_json(const StructuralSpec& s) {
  Json j;
  j["model"] = "lisrel";
  j["exo_loadings"] = jsonio::matrix_to(s.exo_loadings);
  j["endo_loadings"] = jsonio::matrix_to(s.endo_loadings);
  j["endo_coeff"] = jsonio::matrix_to(s.endo_coeff);
  j["exo_coeff"] = jsonio::matrix_to(s.exo_coeff);
  j["exo_noise_var"] = jsonio::vector_to(s.exo_noise_var);
  j["endo_noise_var"] = jsonio::vector_to(s.endo_noise_var);
  j["exo_latent_var"] = jsonio::vector_to(s.exo_latent_var);
  j["structural_resid_var"] = jsonio::vector_to(s.structural_resid_var);
  return j;
}

inline StructuralSpec structural_from_json(const Json& j, const std::string& path) {
  StructuralSpec s;
  s.exo_loadings =
      jsonio::matrix_from(jsonio::member(j, "exo_loadings", path), path + ".exo_loadings");
  s.endo_loadings =
      jsonio::matrix_from(jsonio::member(j, "endo_loadings", path), path + ".endo_loadings");
  s.endo_coeff =
      jsonio::matrix_from(jsonio::member(j, "endo_coeff", path), path + ".endo_coeff");
  s.exo_coeff =
      jsonio::matrix_from(jsonio::member(j, "exo_coeff", path), path + ".exo_coeff");
  s.exo_noise_var =
      jsonio::vector_from(jsonio::member(j, "exo_noise_var", path), path + ".exo_noise_var");
  s.endo_noise_var = jsonio::vector_from(jsonio::member(j, "endo_noise_var", path),
                                         path + ".endo_noise_var");
  s.exo_latent_var = jsonio::vector_from(jsonio::member(j, "exo_latent_var", path),
                                         path + ".exo_latent_var");
  s.structural_resid_var = jsonio::vector_from(
      jsonio::member(j, "structural_resid_var", path), path + ".structural_resid_var");
  return s;
}

inline Json to_json(const GscaSpec& s) {
  Json j;
  j["model"] = "gsca";
  j["weights"] = jsonio::matrix_to(s.weights);
  j["component_loadings"] = jsonio::matrix_to(s.component_loadings);
  j["path_coeff"] = jsonio::matrix_to(s.path_coeff);
  j["obs_resid_var"] = jsonio::vector_to(s.obs_resid_var);
  j["comp_resid_var"] = jsonio::vector_to(s.comp_resid_var);
  if (s.y_mean.size() > 0) j["y_mean"] = jsonio::vector_to(s.y_mean);
  if (!s.y_cov.empty()) j["y_cov"] = jsonio::matrix_to(s.y_cov.mat());
  return j;
}

inline GscaSpec gsca_from_json(const Json& j, const std::string& path) {
  GscaSpec s;
  s.weights = jsonio::matrix_from(jsonio::member(j, "weights", path), path + ".weights");
  s.component_loadings = jsonio::matrix_from(
      jsonio::member(j, "component_loadings", path), path + ".component_loadings");
  s.path_coeff =
      jsonio::matrix_from(jsonio::member(j, "path_coeff", path), path + ".path_coeff");
  s.obs_resid_var =
      jsonio::vector_from(jsonio::member(j, "obs_resid_var", path), path + ".obs_resid_var");
  s.comp_resid_var = jsonio::vector_from(jsonio::member(j, "comp_resid_var", path),
                                         path + ".comp_resid_var");
  if (jsonio::has_member(j, "y_mean"))
    s.y_mean = jsonio::vector_from(j["y_mean"], path + ".y_mean");
  if (jsonio::has_member(j, "y_cov")) s.y_cov = jsonio::spd_from(j["y_cov"], path + ".y_cov");
  return s;
}

inline Json to_json(const MatrixNormalSpec& s) {
  Json j;
  j["model"] = "matrix-normal";
  j["mean"] = jsonio::matrix_to(s.mean);
  j["row_cov"] = jsonio::matrix_to(s.row_cov.mat());
  j["col_cov"] = jsonio::matrix_to(s.col_cov.mat());
  return j;
}

inline MatrixNormalSpec matrix_normal_from_json(const Json& j, const std::string& path) {
  MatrixNormalSpec s;
  s.mean = jsonio::matrix_from(jsonio::member(j, "mean", path), path + ".mean");
  s.row_cov = jsonio::spd_from(jsonio::member(j, "row_cov", path), path + ".row_cov");
  s.col_cov = jsonio::spd_from(jsonio::member(j, "col_cov", path), path + ".col_cov");
  return s;
}

inline Json to_json(const TobitSpec& s) {
  Json j;
  j["model"] = "tobit";
  j["slope"] = s.slope;
  j["covariates"] = jsonio::vector_to(s.covariates);
  j["noise_variance"] = s.noise_variance;
  return j;
}

inline TobitSpec tobit_from_json(const Json& j, const std::string& path) {
  TobitSpec s;
  s.slope = jsonio::number(jsonio::member(j, "slope", path), path + ".slope");
  s.covariates =
      jsonio::vector_from(jsonio::member(j, "covariates", path), path + ".covariates");
  s.noise_variance = jsonio::number(jsonio::member(j, "noise_variance", path),
                                    path + ".noise_variance");
  return s;
}

inline Json to_json(const AirySpec& s) {
  Json j;
  j["model"] = "airy";
  j["mean"] = s.mean;
  j["between_var"] = s.between_var;
  j["within_var"] = s.within_var;
  j["repeats"] = s.repeats;
  return j;
}

inline AirySpec airy_from_json(const Json& j, const std::string& path) {
  AirySpec s;
  s.mean = jsonio::number(jsonio::member(j, "mean", path), path + ".mean");
  s.between_var =
      jsonio::number(jsonio::member(j, "between_var", path), path + ".between_var");
  s.within_var =
      jsonio::number(jsonio::member(j, "within_var", path), path + ".within_var");
  s.repeats = jsonio::integer(jsonio::member(j, "repeats", path), path + ".repeats");
  return s;
}

inline Json to_json(const TemporalSpec& s) {
  Json j;
  j["model"] = "temporal";
  j["transition"] = jsonio::matrix_to(s.transition);
  j["emission"] = jsonio::matrix_to(s.emission);
  j["innovation_cov"] = jsonio::matrix_to(s.innovation_cov.mat());
  j["emission_noise_var"] = jsonio::vector_to(s.emission_noise_var);
  if (s.initial_mean.size() > 0) {
    j["initial_mean"] = jsonio::vector_to(s.initial_mean);
    j["initial_cov"] = jsonio::matrix_to(s.initial_cov.mat());
  }
  return j;
}

inline TemporalSpec temporal_from_json(const Json& j, const std::string& path) {
  TemporalSpec s;
  s.transition =
      jsonio::matrix_from(jsonio::member(j, "transition", path), path + ".transition");
  s.emission = jsonio::matrix_from(jsonio::member(j, "emission", path), path + ".emission");
  s.innovation_cov =
      jsonio::spd_from(jsonio::member(j, "innovation_cov", path), path + ".innovation_cov");
  s.emission_noise_var = jsonio::vector_from(
      jsonio::member(j, "emission_noise_var", path), path + ".emission_noise_var");
  if (jsonio::has_member(j, "initial_mean") || jsonio::has_member(j, "initial_cov")) {
    s.initial_mean = jsonio::vector_from(jsonio::member(j, "initial_mean", path),
                                         path + ".initial_mean");
    s.initial_cov =
        jsonio::spd_from(jsonio::member(j, "initial_cov", path), path + ".initial_cov");
  }
  return s;
}

inline Json to_json(const HierRegressionSpec& s) {
  Json j;
  j["model"] = "hier-regression";
  j["covariates"] = jsonio::matrix_to(s.covariates);
  Json clusters = Json::array();
  for (Index c : s.clusters) clusters.push_back(c);
  j["clusters"] = std::move(clusters);
  j["hyper_mean"] = jsonio::vector_to(s.hyper_mean);
  j["hyper_cov"] = jsonio::matrix_to(s.hyper_cov.mat());
  j["noise_variance"] = s.noise_variance;
  return j;
}

inline HierRegressionSpec hier_regression_from_json(const Json& j, const std::string& path) {
  HierRegressionSpec s;
  s.covariates =
      jsonio::matrix_from(jsonio::member(j, "covariates", path), path + ".covariates");
  const Json& jc = jsonio::member(j, "clusters", path);
  require(jc.is_array(), path + ".clusters", "must be an array of integers");
  for (std::size_t i = 0; i < jc.size(); ++i)
    s.clusters.push_back(
        jsonio::integer(jc[i], path + ".clusters[" + std::to_string(i) + "]"));
  s.hyper_mean =
      jsonio::vector_from(jsonio::member(j, "hyper_mean", path), path + ".hyper_mean");
  s.hyper_cov = jsonio::spd_from(jsonio::member(j, "hyper_cov", path), path + ".hyper_cov");
  s.noise_variance = jsonio::number(jsonio::member(j, "noise_variance", path),
                                    path + ".noise_variance");
  return s;
}

inline Json to_json(const DirichletSpec& s) {
  Json j;
  j["model"] = "dirichlet";
  j["concentration"] = jsonio::vector_to(s.concentration);
  return j;
}

inline Json to_json(const StickBreakingSpec& s) {
  Json j;
  j["model"] = "stick-breaking";
  j["concentration"] = s.concentration;
  j["truncation"] = s.truncation;
  return j;
}

inline Json to_json(const ModelSpec& spec) {
  return std::visit([](const auto& s) { return to_json(s); }, spec);
}

inline ModelSpec model_spec_from_json(const Json& j, const std::string& path = "spec") {
  const std::string tag =
      jsonio::text(jsonio::member(j, "model", path), path + ".model");
  ModelSpec spec;
  if (tag == "ppca" || tag == "fa" || tag == "ica" || tag == "linear-gaussian") {
    spec = linear_gaussian_from_json(j, path);
  } else if (tag == "cca") {
    spec = multi_view_from_json(j, MultiViewKind::cca, path);
  } else if (tag == "ibfa") {
    spec = multi_view_from_json(j, MultiViewKind::ibfa, path);
  } else if (tag == "mbfa") {
    spec = multi_view_from_json(j, MultiViewKind::mbfa, path);
  } else if (tag == "gfa") {
    spec = multi_view_from_json(j, MultiViewKind::gfa, path);
  } else if (tag == "lisrel") {
    spec = structural_from_json(j, path);
  } else if (tag == "gsca") {
    spec = gsca_from_json(j, path);
  } else if (tag == "matrix-normal") {
    spec = matrix_normal_from_json(j, path);
  } else if (tag == "tobit") {
    spec = tobit_from_json(j, path);
  } else if (tag == "airy") {
    spec = airy_from_json(j, path);
  } else if (tag == "temporal") {
    spec = temporal_from_json(j, path);
  } else if (tag == "hier-regression") {
    spec = hier_regression_from_json(j, path);
  } else if (tag == "dirichlet") {
    DirichletSpec s;
    s.concentration = jsonio::vector_from(jsonio::member(j, "concentration", path),
                                          path + ".concentration");
    spec = s;
  } else if (tag == "stick-breaking") {
    StickBreakingSpec s;
    s.concentration =
        jsonio::number(jsonio::member(j, "concentration", path), path + ".concentration");
    if (jsonio::has_member(j, "truncation"))
      s.truncation = jsonio::integer(j["truncation"], path + ".truncation");
    spec = s;
  } else {
    throw ValidationError(path + ".model", "unknown model tag '" + tag + "'");
  }
  const std::string derived = model_tag(spec);
  require(derived == tag, path + ".model",
          "tag '" + tag + "' does not match the spec structure (which is '" + derived + "')");
  validate_spec(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// deep specs

inline Json to_json(const Mlp& net) {
  Json layers = Json::array();
  for (const MlpLayer& l : net.layers) {
    const char* act = "identity";
    switch (l.activation) {
      case Activation::identity: act = "identity"; break;
      case Activation::sigmoid: act = "sigmoid"; break;
      case Activation::relu: act = "relu"; break;
      case Activation::tanh: act = "tanh"; break;
    }
    layers.push_back(Json{{"weights", jsonio::matrix_to(l.weights)},
                          {"bias", jsonio::vector_to(l.bias)},
                          {"activation", act}});
  }
  return Json{{"layers", std::move(layers)}};
}

inline Mlp mlp_from_json(const Json& j, const std::string& path) {
  const Json& jl = jsonio::member(j, "layers", path);
  require(jl.is_array() && !jl.empty(), path + ".layers", "must be a non-empty array");
  Mlp net;
  for (std::size_t k = 0; k < jl.size(); ++k) {
    const std::string lp = path + ".layers[" + std::to_string(k) + "]";
    MlpLayer layer;
    layer.weights = jsonio::matrix_from(jsonio::member(jl[k], "weights", lp), lp + ".weights");
    layer.bias = jsonio::vector_from(jsonio::member(jl[k], "bias", lp), lp + ".bias");
    const std::string act =
        jsonio::text(jsonio::member(jl[k], "activation", lp), lp + ".activation");
    if (act == "identity") layer.activation = Activation::identity;
    else if (act == "sigmoid") layer.activation = Activation::sigmoid;
    else if (act == "relu") layer.activation = Activation::relu;
    else if (act == "tanh") layer.activation = Activation::tanh;
    else throw ValidationError(lp + ".activation", "unknown activation '" + act + "'");
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline Json to_json(const DlgmSpec& s) {
  Json j;
  j["model"] = "dlgm";
  Json dims = Json::array();
  for (Index d : s.layer_dims) dims.push_back(d);
  j["layer_dims"] = std::move(dims);
  Json transforms = Json::array();
  for (const Mlp& t : s.transforms) transforms.push_back(to_json(t));
  j["transforms"] = std::move(transforms);
  Json covs = Json::array();
  for (const SpdMatrix& c : s.layer_covs) covs.push_back(jsonio::matrix_to(c.mat()));
  j["layer_covs"] = std::move(covs);
  Json emission;
  emission["family"] = s.emission.family == EmissionFamily::gaussian ? "gaussian" : "bernoulli";
  emission["network"] = to_json(s.emission.network);
  if (s.emission.family == EmissionFamily::gaussian)
    emission["noise_variances"] = jsonio::vector_to(s.emission.noise_variances);
  j["emission"] = std::move(emission);
  return j;
}

inline DlgmSpec dlgm_from_json(const Json& j, const std::string& path = "spec") {
  DlgmSpec s;
  const Json& jd = jsonio::member(j, "layer_dims", path);
  require(jd.is_array() && !jd.empty(), path + ".layer_dims", "must be a non-empty array");
  for (std::size_t l = 0; l < jd.size(); ++l)
    s.layer_dims.push_back(
        jsonio::integer(jd[l], path + ".layer_dims[" + std::to_string(l) + "]"));
  const Json& jt = jsonio::member(j, "transforms", path);
  require(jt.is_array(), path + ".transforms", "must be an array");
  for (std::size_t l = 0; l < jt.size(); ++l)
    s.transforms.push_back(
        mlp_from_json(jt[l], path + ".transforms[" + std::to_string(l) + "]"));
  const Json& jc = jsonio::member(j, "layer_covs", path);
  require(jc.is_array(), path + ".layer_covs", "must be an array");
  for (std::size_t l = 0; l < jc.size(); ++l)
    s.layer_covs.push_back(
        jsonio::spd_from(jc[l], path + ".layer_covs[" + std::to_string(l) + "]"));
  const Json& je = jsonio::member(j, "emission", path);
  const std::string family =
      jsonio::text(jsonio::member(je, "family", path + ".emission"), path + ".emission.family");
  if (family == "gaussian") {
    s.emission.family = EmissionFamily::gaussian;
    s.emission.noise_variances =
        jsonio::vector_from(jsonio::member(je, "noise_variances", path + ".emission"),
                            path + ".emission.noise_variances");
  } else if (family == "bernoulli") {
    s.emission.family = EmissionFamily::bernoulli;
  } else {
    throw ValidationError(path + ".emission.family", "must be gaussian or bernoulli");
  }
  s.emission.network =
      mlp_from_json(jsonio::member(je, "network", path + ".emission"), path + ".emission.network");
  s.validate();
  return s;
}

/// Any spec the CLI can load: the zoo variants plus the deep generative model.
using AnySpec = std::variant<ModelSpec, DlgmSpec>;

inline AnySpec any_spec_from_json(const Json& j, const std::string& path = "spec") {
  const std::string tag = jsonio::text(jsonio::member(j, "model", path), path + ".model");
  if (tag == "dlgm") return dlgm_from_json(j, path);
  return model_spec_from_json(j, path);
}

inline Json to_json(const AnySpec& spec) {
  return std::visit([](const auto& s) { return to_json(s); }, spec);
}

inline std::string any_spec_tag(const AnySpec& spec) {
  if (std::holds_alternative<DlgmSpec>(spec)) return "dlgm";
  return model_tag(std::get<ModelSpec>(spec));
}

// ---------------------------------------------------------------------------
// fingerprint: FNV-1a over the canonical (sorted-key, shortest round-trip
// numerals) JSON dump

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t spec_fingerprint(const ModelSpec& spec) {
  return fnv1a64(to_json(spec).dump());
}

inline std::uint64_t spec_fingerprint(const DlgmSpec& spec) {
  return fnv1a64(to_json(spec).dump());
}

inline std::uint64_t spec_fingerprint(const AnySpec& spec) {
  return std::visit([](const auto& s) { return spec_fingerprint(s); }, spec);
}

inline std::string fingerprint_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// reports

inline Json to_json(const ImpliedMoments& m) {
  Json j;
  j["mean"] = jsonio::vector_to(m.mean);
  j["covariance"] = jsonio::matrix_to(m.covariance);
  j["positive_definite"] = m.positive_definite;
  j["gaussian"] = m.gaussian;
  return j;
}

inline Json to_json(const ReductionReport& r) {
  Json j;
  j["from_model"] = r.from_model;
  j["to_model"] = r.to_model;
  j["comparable"] = r.comparable;
  j["holds"] = r.holds;
  j["max_deviation"] = r.max_deviation;
  j["relation"] = r.relation;
  Json conditions = Json::array();
  for (const auto& c : r.conditions)
    conditions.push_back(
        Json{{"condition", c.condition}, {"pass", c.pass}, {"deviation", c.deviation}});
  j["conditions"] = std::move(conditions);
  return j;
}

inline Json to_json(const FitResult& f) {
  Json j;
  j["model"] = model_tag(f.estimated);
  j["estimated"] = to_json(f.estimated);
  j["loglik_trace"] = f.loglik_trace;
  j["converged"] = f.converged;
  j["iterations"] = f.iterations;
  Json diag = Json::object();
  for (const auto& [key, value] : f.diagnostics) diag[key] = value;
  j["diagnostics"] = std::move(diag);
  return j;
}

inline Json to_json(const DirichletCategoricalFit& f) {
  Json j;
  j["model"] = "dirichlet-categorical";
  j["posterior_concentration"] = jsonio::vector_to(f.posterior.concentration);
  j["predictive"] = jsonio::vector_to(f.predictive);
  j["counts"] = f.counts;
  return j;
}

// ---------------------------------------------------------------------------
// file helpers

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot open file");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ValidationError(path, "not valid JSON");
  return j;
}

/// Write-through-temp-and-rename so readers never observe a partial file.
inline void atomic_write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError(tmp.string(), "cannot open file for writing");
    out << body;
    if (!out) throw ValidationError(tmp.string(), "write failed");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace lvm
