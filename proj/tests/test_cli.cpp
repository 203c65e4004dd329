#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef MLELAB_CLI_PATH
#error "MLELAB_CLI_PATH must be defined"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const std::string out_path =
      (fs::temp_directory_path() / ("mlelab_cli_out_" + std::to_string(counter))).string();
  const std::string err_path =
      (fs::temp_directory_path() / ("mlelab_cli_err_" + std::to_string(counter))).string();
  ++counter;
  const std::string cmd =
      std::string(MLELAB_CLI_PATH) + " " + args + " >" + out_path + " 2>" + err_path;
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(status);
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  std::remove(out_path.c_str());
  std::remove(err_path.c_str());
  return r;
}

std::string write_temp(const std::string& name, const std::string& content) {
  const std::string path = (fs::temp_directory_path() / name).string();
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("fit poisson-mle writes the closed-form parameter") {
  const std::string data = write_temp("cli_pois.csv", "x,y\n1,2\n2,4\n3,6\n");
  const std::string model = (fs::temp_directory_path() / "cli_pois.model").string();
  const auto r = run_cli("fit --data " + data + " --response y --model poisson-mle --w 10" +
                         " --gamma 0.1 --seed 1 --out " + model);
  REQUIRE(r.exit_code == 0);
  const std::string content = slurp(model);
  CHECK(content.find("mlelab-model v1 poisson-mle") == 0);
  CHECK(content.find("theta 2") != std::string::npos);
}

TEST_CASE("missing response column is a usage error") {
  const std::string data = write_temp("cli_pois2.csv", "x,y\n1,2\n");
  const auto r = run_cli("fit --data " + data + " --model poisson-mle --seed 1 --out /tmp/m");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("error:") == 0);
  CHECK(r.err.find("response column required") != std::string::npos);
}

TEST_CASE("znbp fit on all-zero data produces a dominant atom weight") {
  std::ostringstream csv;
  csv << "x,y\n";
  for (int i = 0; i < 80; ++i) csv << "1,0\n";
  const std::string data = write_temp("cli_zeros.csv", csv.str());
  const std::string model = (fs::temp_directory_path() / "cli_zeros.model").string();
  const auto r = run_cli("fit --data " + data +
                         " --response y --model znbp --alpha 4 --seed 2 --out " + model);
  REQUIRE(r.exit_code == 0);

  // Decode: weights = softmax of raw logits at x = 1.
  std::ifstream in(model);
  std::string magic, version, kind, key;
  std::size_t d;
  double alpha;
  in >> magic >> version >> kind >> key >> d >> key >> alpha;
  REQUIRE(kind == "znbp");
  double w0[2], w1[2], w2[2];
  in >> key >> w0[0] >> w0[1] >> key >> w1[0] >> w1[1] >> key >> w2[0] >> w2[1];
  const double l0 = w0[0] + w0[1], l1 = w1[0] + w1[1], l2 = w2[0] + w2[1];
  const double m = std::max({l0, l1, l2});
  const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m), e2 = std::exp(l2 - m);
  CHECK(e0 / (e0 + e1 + e2) >= 0.99);
}

TEST_CASE("predict with a point model is the linear predictor") {
  const std::string model_path = write_temp(
      "cli_ls.model", "mlelab-model v1 ls\nd 2\ntheta 1 2\n");
  const std::string data = write_temp("cli_pred.csv", "x1,x2\n1,1\n0,3\n");
  const std::string out = (fs::temp_directory_path() / "cli_pred_out.csv").string();
  const auto r = run_cli("predict --model " + model_path + " --data " + data +
                         " --seed 3 --out " + out);
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(out) == "prediction\n3\n6\n");

  // --metric on a point model warns and is ignored.
  const auto r2 = run_cli("predict --model " + model_path + " --data " + data +
                          " --metric mae --seed 3 --out " + out);
  REQUIRE(r2.exit_code == 0);
  CHECK(r2.err.find("ignored") != std::string::npos);
  CHECK(slurp(out) == "prediction\n3\n6\n");
}

TEST_CASE("predict rejects schema mismatches") {
  const std::string model_path = write_temp(
      "cli_ls2.model", "mlelab-model v1 ls\nd 2\ntheta 1 2\n");
  const std::string data = write_temp("cli_pred_bad.csv", "x1\n1\n");
  const auto r = run_cli("predict --model " + model_path + " --data " + data +
                         " --seed 3 --out /tmp/nope.csv");
  CHECK(r.exit_code == 2);
  CHECK(r.err.find("schema mismatch") != std::string::npos);
}

TEST_CASE("predict with a forced-zero znbp model emits zeros") {
  const std::string model_path = write_temp(
      "cli_znbp.model",
      "mlelab-model v1 znbp\nd 1\nalpha 4\n"
      "row 0 50\nrow 0 0\nrow 0 0\nrow 0 0\nrow 0 0\nrow 0 0\n");
  const std::string data = write_temp("cli_znbp_x.csv", "x1\n1\n2\n");
  const std::string out = (fs::temp_directory_path() / "cli_znbp_out.csv").string();
  const auto r = run_cli("predict --model " + model_path + " --data " + data +
                         " --metric mae --samples 500 --seed 5 --out " + out);
  REQUIRE(r.exit_code == 0);
  CHECK(slurp(out) == "prediction\n0\n0\n");
}

TEST_CASE("eval on identical files returns zero and undefined metrics exit 4") {
  const std::string pred = write_temp("cli_eval_pred.csv", "prediction\n1\n2\n3\n");
  const std::string truth = write_temp("cli_eval_truth.csv", "y\n1\n2\n3\n");
  for (const std::string metric : {"mse", "rmse", "mae", "wape", "mape", "huber:1", "nql:0.9"}) {
    const auto r = run_cli("eval --pred " + pred + " --truth " + truth + " --metric " + metric);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.find(",0,") != std::string::npos);
  }
  const std::string zeros = write_temp("cli_eval_zeros.csv", "y\n0\n0\n0\n");
  const auto r4 = run_cli("eval --pred " + pred + " --truth " + zeros + " --metric wape");
  CHECK(r4.exit_code == 4);
  CHECK(r4.err.find("error:") == 0);
}

TEST_CASE("fit-predict-eval is byte-deterministic") {
  std::ostringstream csv;
  csv << "x,y\n";
  for (int i = 1; i <= 50; ++i) csv << (i % 7 + 1) << "," << (i % 5) << "\n";
  const std::string data = write_temp("cli_rt.csv", csv.str());
  const std::string model = (fs::temp_directory_path() / "cli_rt.model").string();
  const std::string pred = (fs::temp_directory_path() / "cli_rt_pred.csv").string();

  std::string first_model, first_pred, first_eval;
  for (int round = 0; round < 2; ++round) {
    auto rf = run_cli("fit --data " + data +
                      " --response y --model znbp --alpha 3 --seed 11 --out " + model);
    REQUIRE(rf.exit_code == 0);
    auto rp = run_cli("predict --model " + model + " --data " + data +
                      " --response y --metric wape --samples 400 --seed 12 --out " + pred);
    REQUIRE(rp.exit_code == 0);
    auto re = run_cli("eval --pred " + pred + " --truth " + data + " --response y" +
                      " --metric wape");
    REQUIRE(re.exit_code == 0);
    if (round == 0) {
      first_model = slurp(model);
      first_pred = slurp(pred);
      first_eval = re.out;
    } else {
      CHECK(slurp(model) == first_model);
      CHECK(slurp(pred) == first_pred);
      CHECK(re.out == first_eval);
    }
  }
}

TEST_CASE("simulate writes deterministic risk tables") {
  const std::string out_csv = (fs::temp_directory_path() / "cli_sim_risk.csv").string();
  const std::string config = write_temp("cli_sim.cfg",
                                        "design.kind = gaussian\n"
                                        "design.n = 80\n"
                                        "design.d = 2\n"
                                        "design.gamma = 0.4\n"
                                        "design.w = 6\n"
                                        "model.kind = poisson\n"
                                        "estimators = ls, poisson-mle\n"
                                        "trials = 6\n"
                                        "seed = 9\n"
                                        "output.path = " +
                                            out_csv + "\n");
  const auto r1 = run_cli("simulate --config " + config);
  REQUIRE(r1.exit_code == 0);
  const std::string csv1 = slurp(out_csv);
  const std::string md1 = slurp(out_csv + ".md");
  CHECK(csv1.find("estimator,mean,median,p90,p99,failures") == 0);
  CHECK(md1.find("| estimator |") == 0);
  CHECK(r1.out == md1);

  const auto r2 = run_cli("simulate --config " + config);
  REQUIRE(r2.exit_code == 0);
  CHECK(slurp(out_csv) == csv1);
  CHECK(slurp(out_csv + ".md") == md1);

  // Unknown config key is rejected by name.
  const std::string bad = write_temp("cli_sim_bad.cfg",
                                     "design.kind = gaussian\ndesign.n = 10\n"
                                     "model.kind = poisson\nestimators = ls\ntrials = 1\n"
                                     "seed = 1\noutput.path = /tmp/x.csv\nbogus.key = 1\n");
  const auto rb = run_cli("simulate --config " + bad);
  CHECK(rb.exit_code == 2);
  CHECK(rb.err.find("bogus.key") != std::string::npos);
}

TEST_CASE("check reports rank deficiency") {
  const std::string data = write_temp("cli_check.csv", "x1,x2\n1,0\n1,0\n2,0\n");
  const auto r = run_cli("check --data " + data + " --theta-star 1,0 --gamma 0.5 --w 5");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("lambda_min_Sigma: 0\n") != std::string::npos);
  CHECK(r.out.find("A2_ok: false") != std::string::npos);
}
