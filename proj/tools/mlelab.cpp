// Command-line front end: fit models to CSV datasets, emit metric-matched
// predictions, evaluate metrics, run simulation experiments, and check the
// design assumptions.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlelab/config.hpp"
#include "mlelab/csv.hpp"
#include "mlelab/errors.hpp"
#include "mlelab/estimators.hpp"
#include "mlelab/inference.hpp"
#include "mlelab/metrics.hpp"
#include "mlelab/model_io.hpp"
#include "mlelab/simharness.hpp"

namespace {

using namespace mlelab;

std::string fmt(double v) { return detail::format_double(v); }

MetricSpec parse_metric_spec(const std::string& s) {
  if (s == "mse") return {MetricKind::mse};
  if (s == "rmse") return {MetricKind::rmse};
  if (s == "mae") return {MetricKind::mae};
  if (s == "wape") return {MetricKind::wape};
  if (s == "mape") return {MetricKind::mape};
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string head = s.substr(0, colon);
    const double param = parse_double(s.substr(colon + 1), "metric parameter");
    if (head == "huber") return {MetricKind::huber, param};
    if (head == "nql") return {MetricKind::nql, param};
  }
  throw ParseError("unknown metric '" + s + "' (use mse|rmse|mae|wape|mape|huber:d|nql:r)");
}

MetricTarget parse_metric_target(const std::string& s) {
  if (s == "mse") return MetricTarget::mse();
  if (s == "rmse") return MetricTarget::rmse();
  if (s == "mae") return MetricTarget::mae();
  if (s == "wape") return MetricTarget::wape();
  if (s == "mape") return MetricTarget::mape();
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string head = s.substr(0, colon);
    const double param = parse_double(s.substr(colon + 1), "metric parameter");
    if (head == "quantile") return MetricTarget::quantile(param);
    if (head == "beta") return MetricTarget::beta_loss(param);
  }
  throw ParseError("unknown prediction metric '" + s +
                   "' (use mse|rmse|mae|wape|mape|quantile:q|beta:b)");
}

struct FitArgs {
  std::string data, response, id, model, out;
  double alpha = 4.0;
  double b = 4.5;
  double delta = 0.05;
  double q = 0.5;
  double huber_delta = 1.0;
  double w = 10.0;
  double gamma = 0.5;
  std::uint64_t seed = 0;
};

int run_fit(const FitArgs& a) {
  if (a.response.empty()) throw ParseError("response column required");
  const Dataset ds = load_dataset(a.data, a.response, a.id);
  const FixedDesign design(ds.x);

  ModelFile out;
  out.kind = a.model;
  out.d = design.dim();

  OptConfig cfg;
  cfg.seed = a.seed;

  if (a.model == "znbp") {
    const FitReport rep = fit_znbp(design, ds.y, a.alpha, cfg);
    out.params = rep.layer();
  } else {
    const ParamSpace space(a.w, a.gamma);
    ParamVector theta;
    if (a.model == "ls") {
      theta = fit_least_squares(design, ds.y, space, cfg).theta();
    } else if (a.model == "tmo-mae") {
      theta = fit_tmo(design, ds.y, {TmoLoss::mae}, space, cfg).theta();
    } else if (a.model == "tmo-mape") {
      theta = fit_tmo(design, ds.y, {TmoLoss::mape}, space, cfg).theta();
    } else if (a.model == "tmo-huber") {
      theta = fit_tmo(design, ds.y, {TmoLoss::huber, a.huber_delta}, space, cfg).theta();
    } else if (a.model == "tmo-pinball") {
      theta = fit_tmo(design, ds.y, {TmoLoss::pinball, a.q}, space, cfg).theta();
    } else if (a.model == "poisson-mle") {
      theta = fit_poisson_mle(design, ds.y, space, cfg).theta();
    } else if (a.model == "pareto-mle") {
      theta = fit_pareto_mle(design, ds.y, a.b, space, cfg).theta();
    } else if (a.model == "mom") {
      theta = fit_median_of_means(design, ds.y, a.delta, a.seed);
    } else {
      throw ParseError("unknown model '" + a.model + "'");
    }
    out.params = theta;
  }
  save_model(out, a.out);
  return 0;
}

struct PredictArgs {
  std::string model, data, metric, response, id, out;
  std::size_t samples = kDefaultPredictiveSamples;
  std::uint64_t seed = 0;
  bool metric_given = false;
};

int run_predict(const PredictArgs& a) {
  const ModelFile model = load_model(a.model);
  const Dataset ds = a.response.empty() ? load_features(a.data, a.id)
                                        : load_dataset(a.data, a.response, a.id);
  if (ds.x.cols() != model.d)
    throw ParseError("schema mismatch: model expects " + std::to_string(model.d) +
                     " features, data has " + std::to_string(ds.x.cols()));

  std::vector<double> predictions(ds.x.rows());
  if (model.is_znbp()) {
    const MetricTarget target = parse_metric_target(a.metric.empty() ? "mse" : a.metric);
    for (std::size_t i = 0; i < ds.x.rows(); ++i) {
      Vec xi(model.d);
      for (std::size_t j = 0; j < model.d; ++j) xi[j] = ds.x(i, j);
      predictions[i] =
          point_predict(model.layer(), xi, target, a.samples, split_seed(a.seed, i));
    }
  } else {
    if (a.metric_given)
      std::cerr << "warning: --metric is ignored for point-estimate models\n";
    for (std::size_t i = 0; i < ds.x.rows(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < model.d; ++j) s += model.theta()[j] * ds.x(i, j);
      predictions[i] = s;
    }
  }

  std::ofstream outf(a.out);
  if (!outf) throw ParseError("cannot write '" + a.out + "'");
  const bool with_id = !ds.ids.empty();
  outf << (with_id ? "id,prediction" : "prediction") << "\n";
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (with_id) outf << ds.ids[i] << ",";
    outf << fmt(predictions[i]) << "\n";
  }
  return 0;
}

Vec read_column(const std::string& path, const std::string& preferred) {
  const CsvTable table = read_csv(path);
  std::size_t col = 0;
  if (!preferred.empty() && table.has_column(preferred)) {
    col = table.column_index(preferred);
  } else if (table.header.size() == 1) {
    col = 0;
  } else if (table.has_column("prediction")) {
    col = table.column_index("prediction");
  } else if (table.has_column("y")) {
    col = table.column_index("y");
  } else {
    throw ParseError("cannot identify the value column in '" + path +
                     "' (expected a single column or one named 'prediction'/'y')");
  }
  Vec out(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i)
    out[i] = parse_double(table.rows[i][col], path + " row " + std::to_string(i + 1));
  return out;
}

int run_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& metric, const std::string& response) {
  const Vec yhat = read_column(pred_path, "prediction");
  const Vec y = read_column(truth_path, response.empty() ? "y" : response);
  if (y.size() != yhat.size())
    throw ParseError("prediction and truth files have different row counts");
  const MetricValue v = evaluate(parse_metric_spec(metric), y, yhat);
  std::cout << v.name << "," << fmt(v.value) << "," << v.n_used << "\n";
  return 0;
}

std::string risk_table_csv(const RiskTable& table) {
  std::ostringstream out;
  out << "estimator,mean,median,p90,p99,failures\n";
  for (const auto& row : table.rows) {
    out << row.name << "," << fmt(row.mean) << "," << fmt(row.median) << "," << fmt(row.p90)
        << "," << fmt(row.p99) << "," << row.failures << "\n";
  }
  return out.str();
}

std::string risk_table_markdown(const RiskTable& table) {
  std::ostringstream out;
  out << "| estimator | mean | median | p90 | p99 | failures |\n";
  out << "|---|---|---|---|---|---|\n";
  char buf[64];
  auto short_fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const auto& row : table.rows) {
    out << "| " << row.name << " | " << short_fmt(row.mean) << " | " << short_fmt(row.median)
        << " | " << short_fmt(row.p90) << " | " << short_fmt(row.p99) << " | " << row.failures
        << " |\n";
  }
  return out.str();
}

int run_simulate(const std::string& config_path) {
  const ExperimentConfig cfg = parse_experiment_config(config_path);
  const RiskTable table = run_trials(cfg.trial);

  std::ofstream csv(cfg.output_path);
  if (!csv) throw ParseError("cannot write '" + cfg.output_path + "'");
  csv << risk_table_csv(table);
  csv.close();

  const std::string md = risk_table_markdown(table);
  std::ofstream mdf(cfg.output_path + ".md");
  if (!mdf) throw ParseError("cannot write '" + cfg.output_path + ".md'");
  mdf << md;
  std::cout << md;
  return 0;
}

int run_check(const std::string& data, const std::string& response,
              const std::string& theta_star_csv, double w, double gamma, double delta) {
  const Dataset ds =
      response.empty() ? load_features(data) : load_dataset(data, response);
  const FixedDesign design(ds.x);

  ParamVector theta_star;
  std::stringstream ss(theta_star_csv);
  std::string cell;
  while (std::getline(ss, cell, ','))
    theta_star.push_back(parse_double(detail::trim(cell), "--theta-star"));
  if (theta_star.size() != design.dim())
    throw ParseError("--theta-star needs exactly " + std::to_string(design.dim()) + " values");

  const AssumptionReport rep =
      check_assumptions(design, theta_star, ParamSpace(w, gamma), delta);
  std::cout << "lambda_min_Sigma: " << fmt(rep.lambda_min_sigma) << "\n";
  std::cout << "lambda_max_Sigma: " << fmt(rep.lambda_max_sigma) << "\n";
  std::cout << "R: " << fmt(rep.max_row_norm) << "\n";
  std::cout << "chi: " << fmt(rep.chi) << "\n";
  std::cout << "zeta: " << fmt(rep.zeta) << "\n";
  std::cout << "hypercontractivity_ratio: " << fmt(rep.hypercontractivity_ratio) << "\n";
  std::cout << "min_margin: " << fmt(rep.min_margin) << "\n";
  std::cout << "A1_margin_ok: " << (rep.margin_ok ? "true" : "false") << "\n";
  if (!rep.margin_ok)
    std::cout << "A1_first_violation_row: " << rep.first_margin_violation << "\n";
  std::cout << "A1_norm_lb_ok: " << (rep.norm_lb_ok ? "true" : "false") << "\n";
  std::cout << "A2_ok: " << (rep.a2_ok ? "true" : "false") << "\n";
  std::cout << "A3_ineq1_lhs: " << fmt(rep.a3_lhs1) << "\n";
  std::cout << "A3_ineq1_rhs: " << fmt(rep.a3_rhs1) << "\n";
  std::cout << "A3_ineq1_ok: " << (rep.a3_ok1 ? "true" : "false") << "\n";
  std::cout << "A3_ineq2_lhs: " << fmt(rep.a3_lhs2) << "\n";
  std::cout << "A3_ineq2_rhs: " << fmt(rep.a3_rhs2) << "\n";
  std::cout << "A3_ineq2_ok: " << (rep.a3_ok2 ? "true" : "false") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Loss-design laboratory: MLE with post-hoc inference vs target-metric fits"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Fit a model to a CSV dataset");
  fit->add_option("--data", fit_args.data)->required();
  fit->add_option("--response", fit_args.response, "response column name");
  fit->add_option("--id", fit_args.id, "id column carried through");
  fit->add_option("--model", fit_args.model,
                  "ls|tmo-mae|tmo-mape|tmo-huber|tmo-pinball|poisson-mle|pareto-mle|mom|znbp")
      ->required();
  fit->add_option("--alpha", fit_args.alpha, "znbp Pareto tail (3|4|5)");
  fit->add_option("--b", fit_args.b, "pareto-mle tail index");
  fit->add_option("--delta", fit_args.delta, "mom confidence parameter");
  fit->add_option("--q", fit_args.q, "tmo-pinball quantile level");
  fit->add_option("--huber-delta", fit_args.huber_delta, "tmo-huber delta");
  fit->add_option("--w", fit_args.w, "parameter-space radius");
  fit->add_option("--gamma", fit_args.gamma, "parameter-space margin");
  fit->add_option("--seed", fit_args.seed)->required();
  fit->add_option("--out", fit_args.out, "model file to write")->required();

  PredictArgs pred_args;
  auto* predict = app.add_subcommand("predict", "Point predictions from a model file");
  predict->add_option("--model", pred_args.model)->required();
  predict->add_option("--data", pred_args.data)->required();
  auto* metric_opt = predict->add_option(
      "--metric", pred_args.metric, "mse|rmse|mae|wape|mape|quantile:q|beta:b (znbp models)");
  predict->add_option("--response", pred_args.response,
                      "response column to drop from the prediction data");
  predict->add_option("--id", pred_args.id);
  predict->add_option("--samples", pred_args.samples, "Monte-Carlo sample count");
  predict->add_option("--seed", pred_args.seed)->required();
  predict->add_option("--out", pred_args.out)->required();

  std::string eval_pred, eval_truth, eval_metric, eval_response;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a metric on predictions vs truth");
  eval_cmd->add_option("--pred", eval_pred)->required();
  eval_cmd->add_option("--truth", eval_truth)->required();
  eval_cmd->add_option("--metric", eval_metric, "mse|rmse|mae|wape|mape|huber:d|nql:r")
      ->required();
  eval_cmd->add_option("--response", eval_response, "truth column name");

  std::string sim_config;
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo excess-risk experiment");
  sim->add_option("--config", sim_config)->required();

  std::string chk_data, chk_response, chk_theta;
  double chk_w = 10.0, chk_gamma = 0.5, chk_delta = 0.05;
  auto* chk = app.add_subcommand("check", "Design/parameter assumption diagnostics");
  chk->add_option("--data", chk_data)->required();
  chk->add_option("--response", chk_response, "response column to drop");
  chk->add_option("--theta-star", chk_theta, "comma-separated true parameter")->required();
  chk->add_option("--w", chk_w);
  chk->add_option("--gamma", chk_gamma);
  chk->add_option("--delta", chk_delta);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*fit) return run_fit(fit_args);
    if (*predict) {
      pred_args.metric_given = metric_opt->count() > 0;
      return run_predict(pred_args);
    }
    if (*eval_cmd) return run_eval(eval_pred, eval_truth, eval_metric, eval_response);
    if (*sim) return run_simulate(sim_config);
    if (*chk) return run_check(chk_data, chk_response, chk_theta, chk_w, chk_gamma, chk_delta);
  } catch (const MetricUndefined& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
