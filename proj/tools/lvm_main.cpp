// Batch front end: model-spec JSON in, datasets and JSON reports out.
// Subcommands: simulate, fit, implied-moments, check-reduction, replicate.
// Every flag can also come from a single --config JSON file; explicit flags
// win. Exit codes: 0 success, 1 numerical or convergence failure, 2 bad input.

#include <CLI11.hpp>

#include <cmath>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lvm/lvm.hpp"

namespace {

using lvm::Index;
using lvm::Json;
using lvm::Matrix;
using lvm::Vector;

// Post-parse config merge: a flag absent from the command line takes its
// value from the config document when present there.
template <typename T>
void merge_option(const CLI::Option* opt, const Json& cfg, const std::string& key,
                  T& value) {
  if (opt != nullptr && opt->count() > 0) return;
  if (!cfg.contains(key)) return;
  try {
    value = cfg.at(key).get<T>();
  } catch (const Json::exception&) {
    throw lvm::ValidationError("config." + key, "has the wrong type");
  }
}

void require_flag(const std::string& value, const std::string& flag) {
  if (value.empty())
    throw lvm::ValidationError(flag, "required (flag or config entry)");
}

std::vector<Index> parse_index_list(const std::string& text, const std::string& flag) {
  std::vector<Index> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      out.push_back(static_cast<Index>(std::stoll(tok)));
    } catch (const std::exception&) {
      throw lvm::ValidationError(flag, "'" + tok + "' is not an integer");
    }
  }
  if (out.empty()) throw lvm::ValidationError(flag, "must be a comma-separated list");
  return out;
}

Vector parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      vals.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw lvm::ValidationError(flag, "'" + tok + "' is not a number");
    }
  }
  if (vals.empty()) throw lvm::ValidationError(flag, "must be a comma-separated list");
  return Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size()));
}

void write_or_print(const std::string& out_dir, const std::string& filename,
                    const std::string& body) {
  if (out_dir.empty()) {
    std::cout << body;
    return;
  }
  const std::filesystem::path path = std::filesystem::path(out_dir) / filename;
  lvm::atomic_write_file(path, body);
  lvm::log_info("wrote " + path.string());
}

std::vector<std::string> observation_header(const lvm::AnySpec& spec, Index cols) {
  std::string stem = "y";
  if (const auto* model = std::get_if<lvm::ModelSpec>(&spec)) {
    const std::string tag = lvm::model_tag(*model);
    if (tag == "dirichlet" || tag == "stick-breaking") stem = "w";
  }
  std::vector<std::string> header;
  if (cols == 1) {
    header.push_back(stem);
    return header;
  }
  for (Index k = 1; k <= cols; ++k) header.push_back(stem + "_" + std::to_string(k));
  return header;
}

// ---------------------------------------------------------------------------
// simulate

int cmd_simulate(const std::string& spec_path, Index n, std::uint64_t seed,
                 const std::string& out_dir) {
  require_flag(spec_path, "--spec");
  require_flag(out_dir, "--out");
  const lvm::AnySpec spec = lvm::any_spec_from_json(lvm::read_json_file(spec_path));

  lvm::RngStream rng(seed);
  lvm::SampleBatch batch;
  if (const auto* deep = std::get_if<lvm::DlgmSpec>(&spec))
    batch = lvm::dlgm_sample(*deep, n, rng);
  else
    batch = lvm::sample_lvm(std::get<lvm::ModelSpec>(spec), n, rng);

  std::ostringstream csv;
  lvm::write_csv(csv, batch.observations,
                 observation_header(spec, batch.observations.cols()));
  write_or_print(out_dir, "observations.csv", csv.str());

  Json sidecar;
  sidecar["model"] = lvm::any_spec_tag(spec);
  sidecar["seed"] = batch.seed;
  sidecar["fingerprint"] = lvm::fingerprint_hex(batch.fingerprint);
  Json dims = Json::array();
  for (Index d : batch.latent_dims) dims.push_back(d);
  sidecar["latent_dims"] = std::move(dims);
  sidecar["latents"] = lvm::jsonio::matrix_to(batch.latents);
  write_or_print(out_dir, "latents.json", sidecar.dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// fit

const char* kSupportedPairs =
    "supported pairs: ppca -> ppca-mle, fa -> fa-em, cca -> cca-mle, "
    "airy -> airy-anova, dirichlet -> dirichlet-categorical";

int cmd_fit(const std::string& data_path, const std::string& model, Index latent_dim,
            const std::string& view_dims, const std::string& prior, Index max_iter,
            double tol, bool regularize, const std::string& out_dir) {
  require_flag(data_path, "--data");
  require_flag(model, "--model");
  lvm::Dataset data = lvm::read_csv_file(data_path);

  Json report;
  bool converged = true;
  if (model == "ppca" || model == "fa" || model == "cca") {
    if (latent_dim < 1)
      throw lvm::ValidationError("--latent-dim", "required and positive for " + model);
    lvm::FitResult fit;
    if (model == "ppca") {
      fit = lvm::fit_ppca_mle(data, latent_dim);
    } else if (model == "fa") {
      fit = lvm::fit_fa_em(data, latent_dim, max_iter, tol);
    } else {
      require_flag(view_dims, "--view-dims");
      data.column_groups = parse_index_list(view_dims, "--view-dims");
      fit = lvm::fit_cca_mle(data, latent_dim, regularize);
    }
    converged = fit.converged;
    report = lvm::to_json(fit);
  } else if (model == "airy") {
    const lvm::FitResult fit = lvm::fit_airy_anova(data);
    converged = fit.converged;
    report = lvm::to_json(fit);
  } else if (model == "dirichlet") {
    require_flag(prior, "--prior");
    if (data.cols() != 1)
      throw lvm::ValidationError("--data", "categorical data must be a single label column");
    std::vector<Index> labels;
    for (Index i = 0; i < data.rows(); ++i) {
      const double x = data.observations(i, 0);
      if (x != std::floor(x))
        throw lvm::ValidationError("--data", "label in row " + std::to_string(i + 1) +
                                                 " is not an integer");
      labels.push_back(static_cast<Index>(x));
    }
    const lvm::Dirichlet d{parse_double_list(prior, "--prior")};
    report = lvm::to_json(lvm::fit_dirichlet_categorical(d, labels));
  } else {
    throw lvm::ValidationError("--model",
                               "no estimator for model '" + model + "'; " + kSupportedPairs);
  }

  write_or_print(out_dir, "fit.json", report.dump(2) + "\n");
  if (!converged) {
    std::cerr << "error: estimator did not converge within the iteration budget\n";
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// implied-moments and check-reduction

int cmd_implied_moments(const std::string& spec_path, const std::string& out_dir) {
  require_flag(spec_path, "--spec");
  const lvm::AnySpec spec = lvm::any_spec_from_json(lvm::read_json_file(spec_path));
  const auto* model = std::get_if<lvm::ModelSpec>(&spec);
  if (model == nullptr)
    throw lvm::ValidationError("spec.model", "the deep model has no closed-form moments");
  Json report = lvm::to_json(lvm::implied_moments(*model));
  report["model"] = lvm::model_tag(*model);
  write_or_print(out_dir, "implied_moments.json", report.dump(2) + "\n");
  return 0;
}

int cmd_check_reduction(const std::string& from_path, const std::string& to_path,
                        const std::string& out_dir) {
  require_flag(from_path, "--from");
  require_flag(to_path, "--to");
  const lvm::AnySpec from = lvm::any_spec_from_json(lvm::read_json_file(from_path));
  const lvm::AnySpec to = lvm::any_spec_from_json(lvm::read_json_file(to_path));

  lvm::ReductionReport report;
  if (std::holds_alternative<lvm::DlgmSpec>(from) || std::holds_alternative<lvm::DlgmSpec>(to)) {
    report.from_model = lvm::any_spec_tag(from);
    report.to_model = lvm::any_spec_tag(to);
    report.relation = "no known reduction";
  } else {
    report = lvm::check_reduction(std::get<lvm::ModelSpec>(from),
                                  std::get<lvm::ModelSpec>(to));
  }
  write_or_print(out_dir, "reduction.json", lvm::to_json(report).dump(2) + "\n");
  return 0;
}

// ---------------------------------------------------------------------------
// replicate

// Top population canonical correlation of a two-view spec, from the implied
// covariance blocks.
double population_top_correlation(const lvm::MultiViewSpec& spec) {
  const lvm::ImpliedMoments m = lvm::implied_moments(spec);
  const Index p1 = spec.loadings[0].rows();
  const Index p2 = spec.loadings[1].rows();
  const Matrix s11 = m.covariance.topLeftCorner(p1, p1);
  const Matrix s22 = m.covariance.bottomRightCorner(p2, p2);
  const Matrix s12 = m.covariance.topRightCorner(p1, p2);
  const Matrix l1 = lvm::cholesky(s11);
  const Matrix l2 = lvm::cholesky(s22);
  const Matrix k = l1.triangularView<Eigen::Lower>().solve(
      l2.triangularView<Eigen::Lower>().solve(s12.transpose()).transpose());
  return Eigen::JacobiSVD<Matrix>(k).singularValues()(0);
}

std::map<std::string, double> replication_metrics(const std::string& estimator,
                                                  const lvm::ModelSpec& truth,
                                                  const lvm::SampleBatch& batch) {
  std::map<std::string, double> metrics;
  lvm::Dataset data{batch.observations, {}, {}};

  if (estimator == "ppca-mle") {
    const auto& spec = std::get<lvm::LinearGaussianLvmSpec>(truth);
    const double sigma2 = std::get<lvm::IsotropicNoise>(spec.noise).variance;
    const lvm::FitResult fit = lvm::fit_ppca_mle(data, spec.latent_dim());
    const auto& est = std::get<lvm::LinearGaussianLvmSpec>(fit.estimated);
    const double sigma2_hat = fit.diagnostics.at("sigma2");
    metrics["sigma2_hat"] = sigma2_hat;
    metrics["sigma2_error_rel"] = std::abs(sigma2_hat - sigma2) / sigma2;
    const Vector angles = lvm::principal_angles(est.loadings, spec.loadings);
    metrics["principal_angle_deg"] = angles.maxCoeff() * 180.0 / M_PI;
    return metrics;
  }
  if (estimator == "fa-em") {
    const auto& spec = std::get<lvm::LinearGaussianLvmSpec>(truth);
    const lvm::FitResult fit = lvm::fit_fa_em(data, spec.latent_dim());
    const Matrix truth_cov = lvm::implied_moments(truth).covariance;
    const Matrix est_cov = lvm::implied_moments(fit.estimated).covariance;
    metrics["cov_error_frobenius_rel"] = (est_cov - truth_cov).norm() / truth_cov.norm();
    metrics["iterations"] = static_cast<double>(fit.iterations);
    metrics["converged"] = fit.converged ? 1.0 : 0.0;
    metrics["heywood_floor_hits"] = fit.diagnostics.at("heywood_floor_hits");
    return metrics;
  }
  if (estimator == "cca-mle") {
    const auto& spec = std::get<lvm::MultiViewSpec>(truth);
    data.column_groups = {spec.loadings[0].rows(), spec.loadings[1].rows()};
    const lvm::FitResult fit = lvm::fit_cca_mle(data, spec.latent_dim());
    const double rho1 = population_top_correlation(spec);
    const double rho1_hat = fit.diagnostics.at("canonical_correlation_1");
    metrics["rho1_hat"] = rho1_hat;
    metrics["rho1_error_abs"] = std::abs(rho1_hat - rho1);
    return metrics;
  }
  if (estimator == "airy-anova") {
    const auto& spec = std::get<lvm::AirySpec>(truth);
    const lvm::FitResult fit = lvm::fit_airy_anova(data);
    const auto& est = std::get<lvm::AirySpec>(fit.estimated);
    metrics["mean_hat"] = est.mean;
    metrics["between_var_hat"] = est.between_var;
    metrics["within_var_hat"] = est.within_var;
    metrics["mean_error_abs"] = std::abs(est.mean - spec.mean);
    metrics["between_var_error_rel"] =
        spec.between_var > 0 ? std::abs(est.between_var - spec.between_var) / spec.between_var
                             : est.between_var;
    metrics["within_var_error_rel"] =
        std::abs(est.within_var - spec.within_var) / spec.within_var;
    return metrics;
  }
  throw lvm::ValidationError("--estimator", "unknown estimator '" + estimator + "'; " +
                                                kSupportedPairs);
}

void check_estimator_matches_spec(const std::string& estimator, const lvm::ModelSpec& truth) {
  const std::string tag = lvm::model_tag(truth);
  const std::map<std::string, std::string> wanted = {{"ppca-mle", "ppca"},
                                                     {"fa-em", "fa"},
                                                     {"cca-mle", "cca"},
                                                     {"airy-anova", "airy"}};
  const auto it = wanted.find(estimator);
  if (it == wanted.end())
    throw lvm::ValidationError("--estimator", "unknown estimator '" + estimator + "'; " +
                                                  kSupportedPairs);
  if (it->second != tag)
    throw lvm::ValidationError("--estimator", "estimator " + estimator +
                                                  " does not apply to a " + tag +
                                                  " spec; " + kSupportedPairs);
}

int cmd_replicate(const std::string& spec_path, const std::string& estimator, Index reps,
                  Index n, std::uint64_t seed, const std::string& out_dir) {
  require_flag(spec_path, "--spec");
  require_flag(estimator, "--estimator");
  if (reps < 1) throw lvm::ValidationError("--reps", "must be at least 1");
  const lvm::AnySpec any = lvm::any_spec_from_json(lvm::read_json_file(spec_path));
  const auto* truth = std::get_if<lvm::ModelSpec>(&any);
  if (truth == nullptr)
    throw lvm::ValidationError("spec.model", "no estimator targets the deep model; " +
                                                 std::string(kSupportedPairs));
  check_estimator_matches_spec(estimator, *truth);

  std::vector<std::map<std::string, double>> rows;
  for (Index r = 0; r < reps; ++r) {
    lvm::RngStream rng(seed + static_cast<std::uint64_t>(r));
    const lvm::SampleBatch batch = lvm::sample_lvm(*truth, n, rng);
    rows.push_back(replication_metrics(estimator, *truth, batch));
    lvm::log_debug("replication " + std::to_string(r + 1) + "/" + std::to_string(reps) +
                   " done");
  }

  Json per_rep = Json::array();
  for (const auto& row : rows) {
    Json jrow = Json::object();
    for (const auto& [key, value] : row) jrow[key] = value;
    per_rep.push_back(std::move(jrow));
  }
  Json mean = Json::object();
  Json standard_error = Json::object();
  for (const auto& [key, first] : rows.front()) {
    (void)first;
    double sum = 0.0;
    for (const auto& row : rows) sum += row.at(key);
    const double avg = sum / static_cast<double>(reps);
    double ss = 0.0;
    for (const auto& row : rows) ss += (row.at(key) - avg) * (row.at(key) - avg);
    mean[key] = avg;
    standard_error[key] =
        reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1)) /
                       std::sqrt(static_cast<double>(reps))
                 : 0.0;
  }

  Json report;
  report["model"] = lvm::model_tag(*truth);
  report["estimator"] = estimator;
  report["reps"] = reps;
  report["n"] = n;
  report["seed"] = seed;
  report["replications"] = std::move(per_rep);
  report["mean"] = std::move(mean);
  report["standard_error"] = std::move(standard_error);
  write_or_print(out_dir, "replicate.json", report.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"latent variable model workbench: simulate, fit, and compare specs"};
  app.require_subcommand(0, 1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file supplying any flag by long name");

  std::string spec_path, data_path, model, view_dims, prior, out_dir, from_path, to_path,
      estimator;
  Index n = 1000, latent_dim = 0, max_iter = 500, reps = 1;
  std::uint64_t seed = 0;
  double tol = 1e-7;
  bool regularize = false;

  CLI::App* sim = app.add_subcommand("simulate", "draw a sample batch from a spec");
  auto* sim_spec = sim->add_option("--spec", spec_path, "model spec JSON");
  auto* sim_n = sim->add_option("--n", n, "sample count (or horizon)");
  auto* sim_seed = sim->add_option("--seed", seed, "stream seed");
  auto* sim_out = sim->add_option("--out", out_dir, "output directory");

  CLI::App* fit = app.add_subcommand("fit", "estimate a spec from a data CSV");
  auto* fit_data = fit->add_option("--data", data_path, "observation CSV");
  auto* fit_model = fit->add_option("--model", model, "model tag to fit");
  auto* fit_dim = fit->add_option("--latent-dim", latent_dim, "latent dimension");
  auto* fit_views = fit->add_option("--view-dims", view_dims, "per-view column counts, comma-separated");
  auto* fit_prior = fit->add_option("--prior", prior, "Dirichlet prior concentration, comma-separated");
  auto* fit_iter = fit->add_option("--max-iter", max_iter, "iteration budget");
  auto* fit_tol = fit->add_option("--tol", tol, "convergence tolerance");
  auto* fit_reg = fit->add_flag("--regularize", regularize, "ridge the covariance blocks");
  auto* fit_out = fit->add_option("--out", out_dir, "output directory (default stdout)");

  CLI::App* mom = app.add_subcommand("implied-moments", "closed-form moments of a spec");
  auto* mom_spec = mom->add_option("--spec", spec_path, "model spec JSON");
  auto* mom_out = mom->add_option("--out", out_dir, "output directory (default stdout)");

  CLI::App* red = app.add_subcommand("check-reduction", "test a special-case relationship");
  auto* red_from = red->add_option("--from", from_path, "general model spec JSON");
  auto* red_to = red->add_option("--to", to_path, "candidate special case JSON");
  auto* red_out = red->add_option("--out", out_dir, "output directory (default stdout)");

  CLI::App* rep = app.add_subcommand("replicate", "repeated simulate+fit with seed, seed+1, ...");
  auto* rep_spec = rep->add_option("--spec", spec_path, "truth spec JSON");
  auto* rep_est = rep->add_option("--estimator", estimator, "ppca-mle, fa-em, cca-mle, or airy-anova");
  auto* rep_reps = rep->add_option("--reps", reps, "replication count");
  auto* rep_n = rep->add_option("--n", n, "sample count per replication");
  auto* rep_seed = rep->add_option("--seed", seed, "base seed");
  auto* rep_out = rep->add_option("--out", out_dir, "output directory (default stdout)");

  // lets `lvm <command> --config file.json` reach the top-level --config
  for (CLI::App* sub : {sim, fit, mom, red, rep}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Json cfg = Json::object();
    if (!config_path.empty()) {
      cfg = lvm::read_json_file(config_path);
      if (!cfg.is_object())
        throw lvm::ValidationError(config_path, "config must be a JSON object");
    }

    std::string command;
    if (sim->parsed()) command = "simulate";
    else if (fit->parsed()) command = "fit";
    else if (mom->parsed()) command = "implied-moments";
    else if (red->parsed()) command = "check-reduction";
    else if (rep->parsed()) command = "replicate";
    else if (cfg.contains("command")) command = cfg.at("command").get<std::string>();
    if (command.empty())
      throw lvm::ValidationError("command",
                                 "pick one of simulate, fit, implied-moments, "
                                 "check-reduction, replicate (flag or config entry)");

    if (command == "simulate") {
      merge_option(sim_spec, cfg, "spec", spec_path);
      merge_option(sim_n, cfg, "n", n);
      merge_option(sim_seed, cfg, "seed", seed);
      merge_option(sim_out, cfg, "out", out_dir);
      return cmd_simulate(spec_path, n, seed, out_dir);
    }
    if (command == "fit") {
      merge_option(fit_data, cfg, "data", data_path);
      merge_option(fit_model, cfg, "model", model);
      merge_option(fit_dim, cfg, "latent-dim", latent_dim);
      merge_option(fit_views, cfg, "view-dims", view_dims);
      merge_option(fit_prior, cfg, "prior", prior);
      merge_option(fit_iter, cfg, "max-iter", max_iter);
      merge_option(fit_tol, cfg, "tol", tol);
      merge_option(fit_reg, cfg, "regularize", regularize);
      merge_option(fit_out, cfg, "out", out_dir);
      return cmd_fit(data_path, model, latent_dim, view_dims, prior, max_iter, tol,
                     regularize, out_dir);
    }
    if (command == "implied-moments") {
      merge_option(mom_spec, cfg, "spec", spec_path);
      merge_option(mom_out, cfg, "out", out_dir);
      return cmd_implied_moments(spec_path, out_dir);
    }
    if (command == "check-reduction") {
      merge_option(red_from, cfg, "from", from_path);
      merge_option(red_to, cfg, "to", to_path);
      merge_option(red_out, cfg, "out", out_dir);
      return cmd_check_reduction(from_path, to_path, out_dir);
    }
    if (command == "replicate") {
      merge_option(rep_spec, cfg, "spec", spec_path);
      merge_option(rep_est, cfg, "estimator", estimator);
      merge_option(rep_reps, cfg, "reps", reps);
      merge_option(rep_n, cfg, "n", n);
      merge_option(rep_seed, cfg, "seed", seed);
      merge_option(rep_out, cfg, "out", out_dir);
      return cmd_replicate(spec_path, estimator, reps, n, seed, out_dir);
    }
    throw lvm::ValidationError("command", "unknown command '" + command + "'");
  } catch (const lvm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const lvm::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
