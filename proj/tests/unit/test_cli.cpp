#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "../support.hpp"
#include "kanfric/cli.hpp"
#include "kanfric/csv.hpp"
#include "kanfric/friction.hpp"
#include "kanfric/metrics.hpp"

using namespace kanfric;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  return nlohmann::json::parse(in);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Drops timing fields so two reports can be compared.
nlohmann::json without_timing(nlohmann::json j) {
  if (j.is_object()) {
    j.erase("wall_seconds");
    for (auto& [k, v] : j.items()) v = without_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = without_timing(v);
  }
  return j;
}

}  // namespace

TEST_CASE("generate writes the requested dataset") {
  const auto dir = testing::scratch_dir("cli_generate");
  const auto r = cli({"generate", "--axis", "2", "--out", dir});
  REQUIRE(r.code == 0);
  const auto path = dir + "/axis2.csv";
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header == "velocity,torque");
  const auto data = read_csv(path);
  CHECK(data.size() == 1000);
  CHECK(data.torque == stribeck(data.velocity, axis_params(2)));

  REQUIRE(cli({"generate", "--axis", "2", "--noise", "quarter_range", "--output", dir + "/noisy.csv", "--out", dir}).code == 0);
  const auto noisy = read_csv(dir + "/noisy.csv");
  CHECK(noisy.velocity == data.velocity);
  CHECK(noisy.torque != data.torque);

  REQUIRE(cli({"generate", "--params", "22,8,0.1,0.03", "--n", "50", "--vmin", "0", "--vmax", "0.5", "--output",
               dir + "/p.csv", "--out", dir})
              .code == 0);
  const auto p = read_csv(dir + "/p.csv");
  CHECK(p.size() == 50);
  CHECK(p.velocity.minCoeff() >= 0.0);
  CHECK(p.torque == stribeck(p.velocity, axis_params(1)));

  REQUIRE(cli({"generate", "--axis", "1", "--model", "coulomb", "--n", "20", "--output", dir + "/c.csv", "--out", dir}).code == 0);
  CHECK(read_csv(dir + "/c.csv").torque.cwiseAbs().minCoeff() == 22.0);
}

TEST_CASE("generate rejects a bad axis") {
  const auto r = cli({"generate", "--axis", "7", "--out", testing::scratch_dir("cli_bad_axis")});
  CHECK(r.code != 0);
  CHECK(r.err.find("--axis") != std::string::npos);
  CHECK(cli({"generate", "--axis", "1", "--params", "1,2,3,4"}).code != 0);
  CHECK(cli({"nonsense"}).code != 0);
}

TEST_CASE("fit-known identifies the coefficients") {
  const auto dir = testing::scratch_dir("cli_known");
  REQUIRE(cli({"generate", "--axis", "5", "--out", dir}).code == 0);
  const auto r = cli({"fit-known", "--data", dir + "/axis5.csv", "--truth-axis", "5", "--out", dir});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("L_rel(k3)") != std::string::npos);
  const auto report = load_json(dir + "/fit_known_report.json");
  for (const char* k : {"k1", "k2", "k3", "k4"}) CHECK(report["relative_errors"][k].get<double>() <= 1e-4);
  CHECK(report["r_squared"].get<double>() >= 0.9999);
  CHECK(report["trace"]["loss_history"].size() > 0);
  CHECK(slurp(dir + "/fit_known_predictions.csv").rfind("velocity,truth,prediction\n", 0) == 0);
}

TEST_CASE("missing input file fails cleanly") {
  const auto r = cli({"fit-known", "--data", "/no/such/file.csv", "--out", testing::scratch_dir("cli_missing")});
  CHECK(r.code != 0);
  const auto e = cli({"eval", "--model", "/no/such/model.json", "--data", "/no/such/file.csv"});
  CHECK(e.code != 0);
}

TEST_CASE("fit-kan with snapshots, test files and eval") {
  const auto dir = testing::scratch_dir("cli_kan");
  REQUIRE(cli({"generate", "--axis", "3", "--out", dir}).code == 0);
  REQUIRE(cli({"generate", "--axis", "3", "--seed", "9", "--profile", "sinusoid", "--output", dir + "/test.csv", "--out", dir}).code == 0);
  const auto r = cli({"fit-kan", "--data", dir + "/axis3.csv", "--truth-axis", "3", "--snapshots", "3", "--test",
                      dir + "/test.csv", "--svg", "--out", dir});
  REQUIRE(r.code == 0);
  const auto report = load_json(dir + "/fit_kan_report.json");
  CHECK(report["r_squared"].get<double>() >= 0.99);
  CHECK(report["snapshots"].size() == 2);
  CHECK(fs::exists(dir + "/snapshot_100.json"));
  CHECK(fs::exists(dir + "/snapshot_200.json"));
  REQUIRE(report["tests"].size() == 1);
  CHECK(report["tests"][0]["r_squared"].get<double>() >= 0.99);
  CHECK(fs::exists(dir + "/model.json"));
  bool svg = false;
  for (const auto& f : fs::directory_iterator(dir)) svg |= f.path().extension() == ".svg";
  CHECK(svg);

  const auto ev = cli({"eval", "--model", dir + "/model.json", "--data", dir + "/axis3.csv", "--truth-axis", "3", "--out", dir + "/eval"});
  REQUIRE(ev.code == 0);
  const auto er = load_json(dir + "/eval/eval_report.json");
  CHECK(er["r_squared"].get<double>() == report["r_squared"].get<double>());
  CHECK(er["residuals"].contains("rmse"));
}

TEST_CASE("pipeline writes every artifact and the expression evaluates") {
  const auto dir = testing::scratch_dir("cli_pipeline");
  REQUIRE(cli({"generate", "--axis", "2", "--out", dir}).code == 0);
  const auto r = cli({"pipeline", "--data", dir + "/axis2.csv", "--truth-axis", "2", "--out", dir});
  REQUIRE(r.code == 0);
  for (const char* f : {"pre_prune.json", "post_prune.json", "prune_report.json", "expression.txt", "pipeline_report.json",
                        "pipeline_predictions.csv"})
    CHECK(fs::exists(dir + "/" + f));
  const auto report = load_json(dir + "/pipeline_report.json");
  for (const char* stage : {"fit", "prune", "symbolify"}) CHECK(report["stages"].contains(stage));

  const auto ev = cli({"eval", "--model", dir + "/expression.txt", "--data", dir + "/axis2.csv", "--truth-axis", "2", "--out", dir + "/eval"});
  REQUIRE(ev.code == 0);
  CHECK(load_json(dir + "/eval/eval_report.json")["r_squared"].get<double>() >= 0.99);

  // the stages compose through files as well
  REQUIRE(cli({"prune", "--checkpoint", dir + "/pre_prune.json", "--data", dir + "/axis2.csv", "--out", dir + "/p"}).code == 0);
  REQUIRE(cli({"symbolify", "--checkpoint", dir + "/p/pruned.json", "--data", dir + "/axis2.csv", "--out", dir + "/s"}).code == 0);
  CHECK(!slurp(dir + "/s/expression.txt").empty());
  CHECK(load_json(dir + "/s/symbolify_report.json").is_object());
}

TEST_CASE("correlate lists every channel") {
  const auto dir = testing::scratch_dir("cli_corr");
  auto data = add_dynamics_channel(generate_axis_dataset(1, 800, {}, 2, VelocityProfile::sinusoid));
  write_csv(dir + "/d.csv", data);
  const auto r = cli({"correlate", "--data", dir + "/d.csv", "--out", dir});
  REQUIRE(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  std::getline(lines, line);
  CHECK(line == "channel,pearson_vs_torque");
  std::getline(lines, line);
  CHECK(line.rfind("velocity,", 0) == 0);
  const double rv = std::stod(line.substr(9));
  CHECK(rv == doctest::Approx(pearson_correlation(data.velocity, data.torque)).epsilon(1e-15));
  CHECK(r.out.find("\ntime,") != std::string::npos);
  CHECK(r.out.find("\ntau_mcg,") != std::string::npos);

  data.channels["flat"] = Eigen::VectorXd::Constant(800, 2.0);
  write_csv(dir + "/flat.csv", data);
  const auto bad = cli({"correlate", "--data", dir + "/flat.csv", "--out", dir});
  CHECK(bad.code != 0);
  CHECK(bad.err.find("channel 'flat' is constant") != std::string::npos);
}

TEST_CASE("commands are deterministic for a fixed seed") {
  const auto a = testing::scratch_dir("cli_det_a"), b = testing::scratch_dir("cli_det_b");
  for (const auto& dir : {a, b}) {
    REQUIRE(cli({"generate", "--axis", "4", "--seed", "5", "--noise", "half_lambda", "--lambda", "0.05", "--out", dir}).code == 0);
    REQUIRE(cli({"fit-kan", "--data", dir + "/axis4.csv", "--steps", "40", "--seed", "5", "--out", dir}).code == 0);
  }
  CHECK(slurp(a + "/axis4.csv") == slurp(b + "/axis4.csv"));
  CHECK(slurp(a + "/model.json") == slurp(b + "/model.json"));
  auto ra = without_timing(load_json(a + "/fit_kan_report.json")), rb = without_timing(load_json(b + "/fit_kan_report.json"));
  ra["config"].erase("data");  // the directories differ
  rb["config"].erase("data");
  CHECK(ra == rb);
}

TEST_CASE("output directory comes from the environment by default") {
  const auto dir = testing::scratch_dir("cli_env");
  ::setenv(kOutDirEnv, dir.c_str(), 1);
  const auto r = cli({"generate", "--axis", "1", "--n", "10"});
  ::unsetenv(kOutDirEnv);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(dir + "/axis1.csv"));
}

TEST_CASE("the executable reports exit codes") {
  const auto dir = testing::scratch_dir("cli_exe");
  const std::string exe = KANFRIC_CLI;
  CHECK(std::system((exe + " generate --axis 1 --n 5 --out " + dir + " > /dev/null").c_str()) == 0);
  CHECK(std::system((exe + " generate --axis 0 --out " + dir + " > /dev/null 2>&1").c_str()) != 0);
  CHECK(std::system((exe + " --help > /dev/null").c_str()) == 0);
}
