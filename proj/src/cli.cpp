#include "kanfric/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "kanfric/checkpoint.hpp"
#include "kanfric/csv.hpp"
#include "kanfric/errors.hpp"
#include "kanfric/known_form.hpp"
#include "kanfric/pipeline.hpp"
#include "kanfric/report.hpp"
#include "kanfric/training.hpp"

namespace kanfric {

namespace {

using nlohmann::json;

std::vector<std::string> split_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

StribeckParamsd parse_params(const std::string& text, const std::string& flag) {
  std::vector<double> v;
  for (const auto& s : split_names(text)) {
    std::size_t used = 0;
    double x = 0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || used == 0) throw std::invalid_argument(flag + ": not a number '" + s + "'");
    v.push_back(x);
  }
  if (v.size() != 4) throw std::invalid_argument(flag + ": expected k1,k2,k3,k4");
  StribeckParamsd p{v[0], v[1], v[2], v[3], 50.0};
  if (!p.valid()) throw std::invalid_argument(flag + ": k3 must be > 0");
  return p;
}

std::string default_out_dir() {
  const char* env = std::getenv(kOutDirEnv);
  return env && *env ? env : "kanfric_out";
}

std::string in_dir(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

json edge_json(const SymbolicEdge& e) {
  return {{"function", e.function}, {"a", e.a}, {"b", e.b}, {"c", e.c}, {"d", e.d}, {"r2", e.r2}};
}

json decisions_json(const SymbolifyResult& r) {
  json out = json::array();
  for (const auto& d : r.decisions) {
    json item{{"layer", d.layer}, {"out", d.i}, {"in", d.j}, {"accepted", d.accepted}, {"chosen", edge_json(d.chosen)}};
    json others = json::array();
    for (const auto& e : d.runners_up) others.push_back(edge_json(e));
    item["runners_up"] = others;
    out.push_back(item);
  }
  return out;
}

// Options shared by commands that read a dataset and may know the clean law.
struct DataOptions {
  std::string data;
  int truth_axis = 0;
  std::string truth_params;
  std::string clean;

  void attach(CLI::App* cmd, bool required = true) {
    auto* opt = cmd->add_option("--data", data, "CSV with velocity,torque[,channels]");
    if (required) opt->required();
    opt->check(CLI::ExistingFile);
    cmd->add_option("--truth-axis", truth_axis, "clean law of axis 1..6 for R2 vs clean")->check(CLI::Range(1, 6));
    cmd->add_option("--truth", truth_params, "clean law as k1,k2,k3,k4");
    cmd->add_option("--clean", clean, "CSV whose torque column is the clean truth, row-aligned")->check(CLI::ExistingFile);
  }

  std::optional<StribeckParamsd> law() const {
    if (truth_axis) return axis_params(truth_axis);
    if (!truth_params.empty()) return parse_params(truth_params, "--truth");
    return std::nullopt;
  }

  std::optional<Eigen::VectorXd> clean_torque(const FrictionDataset& d) const {
    if (auto p = law()) return stribeck(d.velocity, *p);
    if (clean.empty()) return std::nullopt;
    const auto c = read_csv(clean);
    if (c.size() != d.size()) throw std::invalid_argument("--clean: row count differs from --data");
    if (c.velocity != d.velocity) throw std::invalid_argument("--clean: velocities differ from --data");
    return c.torque;
  }
};

void finish_report(FitReport& report, const Eigen::VectorXd& truth, const Eigen::VectorXd& pred,
                   const std::optional<Eigen::VectorXd>& clean) {
  report.r_squared = r_squared(truth, pred);
  if (clean) report.r_squared_vs_clean = r_squared(*clean, pred);
}

void print_r2(std::ostream& out, const FitReport& r) {
  out << "R2 = " << format_double(r.r_squared) << "\n";
  if (r.r_squared_vs_clean) out << "R2 vs clean = " << format_double(*r.r_squared_vs_clean) << "\n";
}

std::vector<std::string> input_names(const std::string& text) {
  auto names = split_names(text);
  if (names.empty()) throw std::invalid_argument("--inputs: no column names");
  return names;
}

class Cli {
 public:
  Cli(std::ostream& out, std::ostream& err) : out_(out), err_(err) {}

  int run(int argc, const char* const* argv) {
    CLI::App app{"Friction-law identification with Kolmogorov-Arnold networks", "kanfric"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "kanfric 1.0.0");
    register_generate(app);
    register_fit_known(app);
    register_fit_kan(app);
    register_prune(app);
    register_symbolify(app);
    register_pipeline(app);
    register_eval(app);
    register_correlate(app);
    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      return app.exit(e, out_, err_);
    }
    try {
      action_();
    } catch (const std::exception& e) {
      err_ << "error: " << e.what() << "\n";
      return 1;
    }
    return 0;
  }

 private:
  CLI::App* command(CLI::App& app, const std::string& name, const std::string& help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--seed", seed_, "random seed")->capture_default_str();
    cmd->add_option("--out", out_dir_, "output directory (default $" + std::string(kOutDirEnv) + " or ./kanfric_out)");
    return cmd;
  }

  std::string out_dir() const { return out_dir_.empty() ? default_out_dir() : out_dir_; }

  void write_json(const std::string& path, const json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
    out_ << "wrote " << path << "\n";
  }

  // ---- generate ---------------------------------------------------------
  struct GenerateOpts {
    int axis = 0;
    std::string params, model = "stribeck", profile = "uniform", noise = "none", output;
    long n = 1000;
    double vmin = -1.0, vmax = 1.0, lambda = 0.0;
    bool tau_mcg = false;
  } gen_;

  void register_generate(CLI::App& app) {
    auto* cmd = command(app, "generate", "write a synthetic velocity/torque CSV");
    auto* axis = cmd->add_option("--axis", gen_.axis, "joint axis 1..6")->check(CLI::Range(1, 6));
    auto* params = cmd->add_option("--params", gen_.params, "k1,k2,k3,k4 instead of an axis");
    axis->excludes(params);
    cmd->add_option("--model", gen_.model,
                    "stribeck | coulomb | coulomb_static | coulomb_viscous | stribeck_no_viscous")
        ->capture_default_str();
    cmd->add_option("--n", gen_.n, "sample count")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--vmin", gen_.vmin)->capture_default_str();
    cmd->add_option("--vmax", gen_.vmax)->capture_default_str();
    cmd->add_option("--profile", gen_.profile, "uniform | sinusoid | gaussian")->capture_default_str();
    cmd->add_option("--noise", gen_.noise, "none | quarter_range | half_lambda")->capture_default_str();
    cmd->add_option("--lambda", gen_.lambda, "relative noise level for half_lambda")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--tau-mcg", gen_.tau_mcg, "add a surrogate dynamics torque channel (sinusoid profile)");
    cmd->add_option("--output", gen_.output, "CSV path (default <out>/axis<k>.csv)");
    cmd->callback([this] { action_ = [this] { generate(); }; });
  }

  void generate() {
    if (!gen_.axis && gen_.params.empty()) throw std::invalid_argument("generate: give --axis 1..6 or --params");
    const StribeckParamsd p = gen_.axis ? axis_params(gen_.axis) : parse_params(gen_.params, "--params");
    const auto profile = parse_velocity_profile(gen_.profile);
    auto data = generate_dataset(p, gen_.n, {gen_.vmin, gen_.vmax}, seed_, profile, gen_.axis);
    if (gen_.model != "stribeck") {
      const auto kind = parse_classical_model(gen_.model);
      for (Eigen::Index i = 0; i < data.size(); ++i) data.torque[i] = classical_model(kind, data.velocity[i], p);
    }
    if (gen_.tau_mcg) data = add_dynamics_channel(data);
    if (gen_.noise != "none") {
      NoiseSpec spec;
      if (gen_.noise == "quarter_range")
        spec.mode = NoiseSpec::Mode::quarter_range;
      else if (gen_.noise == "half_lambda")
        spec.mode = NoiseSpec::Mode::half_lambda;
      else
        throw std::invalid_argument("--noise: expected none, quarter_range or half_lambda");
      spec.lambda = gen_.lambda;
      spec.seed = seed_ + 0x9E3779B97F4A7C15ULL;
      data = add_noise(data, spec);
    }
    const std::string path = gen_.output.empty()
                                 ? in_dir(out_dir(), gen_.axis ? "axis" + std::to_string(gen_.axis) + ".csv" : "data.csv")
                                 : gen_.output;
    if (std::filesystem::path(path).has_parent_path())
      std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    write_csv(path, data);
    out_ << "wrote " << path << " (" << data.size() << " rows, " << describe(data.provenance) << ")\n";
  }

  // ---- fit-known --------------------------------------------------------
  struct FitKnownOpts {
    DataOptions data;
    std::string init, optimizer = "adam";
    int iters = 30000;
    double lr = 0.01;
    bool svg = false;
  } known_;

  void register_fit_known(CLI::App& app) {
    auto* cmd = command(app, "fit-known", "identify k1..k4 of the smoothed Stribeck law");
    known_.data.attach(cmd);
    cmd->add_option("--init", known_.init, "initial k1,k2,k3,k4 (default 10,5,0.5,0)");
    cmd->add_option("--iters", known_.iters)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--lr", known_.lr)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--optimizer", known_.optimizer, "adam | lbfgs")->capture_default_str();
    cmd->add_flag("--svg", known_.svg, "also write an SVG plot");
    cmd->callback([this] { action_ = [this] { fit_known(); }; });
  }

  FitConfig optimizer_config(const std::string& name, int iters, double lr) const {
    FitConfig c = name == "adam"    ? FitConfig::adam(iters, lr)
                  : name == "lbfgs" ? FitConfig::lbfgs(iters, lr)
                                    : throw std::invalid_argument("--optimizer: expected adam or lbfgs");
    c.seed = seed_;
    return c;
  }

  void fit_known() {
    const auto data = read_csv(known_.data.data);
    const auto init = known_.init.empty() ? default_known_form_init() : parse_params(known_.init, "--init");
    const auto fit = fit_known_form(data, init, optimizer_config(known_.optimizer, known_.iters, known_.lr));
    const Eigen::VectorXd pred = stribeck(data.velocity, fit.params);

    FitReport report;
    const auto names = std::array<const char*, 4>{"k1", "k2", "k3", "k4"};
    const auto est = fit.params.coefficients();
    for (int k = 0; k < 4; ++k) report.estimates[names[k]] = est[k];
    if (auto law = known_.data.law()) {
      const auto truth = law->coefficients();
      for (int k = 0; k < 4; ++k)
        if (truth[k] != 0) report.relative_errors[names[k]] = relative_error(est[k], truth[k]);
    }
    finish_report(report, data.torque, pred, known_.data.clean_torque(data));
    report.config = {{"data", known_.data.data},     {"optimizer", known_.optimizer},
                     {"iterations", std::to_string(known_.iters)}, {"learning_rate", format_double(known_.lr)},
                     {"seed", std::to_string(seed_)}};
    report.wall_seconds = fit.trace.wall_seconds;

    for (const auto& [k, v] : report.estimates) out_ << k << " = " << format_double(v) << "\n";
    for (const auto& [k, v] : report.relative_errors) out_ << "L_rel(" << k << ") = " << format_double(v) << "\n";
    print_r2(out_, report);
    json doc = to_json(report);
    doc["trace"] = to_json(fit.trace);
    const std::string dir = out_dir();
    write_json(in_dir(dir, "fit_known_report.json"), doc);
    write_prediction_csv(in_dir(dir, "fit_known_predictions.csv"), data.velocity, data.torque, pred);
    if (known_.svg)
      write_text_file(in_dir(dir, "fit_known.svg"), svg_plot(data.velocity, data.torque, pred, "known-form fit"));
  }

  // ---- fit-kan ----------------------------------------------------------
  struct FitKanOpts {
    DataOptions data;
    std::string arch = "[1,5,1]", optimizer = "lbfgs", inputs = "velocity";
    int grid = 10, order = 3, steps = 300, snapshots = 0;
    double lr = -1;
    std::vector<std::string> tests;
    bool svg = false;
  } kan_;

  void register_fit_kan(CLI::App& app) {
    auto* cmd = command(app, "fit-kan", "fit a KAN to a dataset and save a checkpoint");
    kan_.data.attach(cmd);
    cmd->add_option("--arch", kan_.arch, "e.g. [1,5,1] or [1,[5,2],1]")->capture_default_str();
    cmd->add_option("--grid", kan_.grid)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--order", kan_.order)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--steps", kan_.steps)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--optimizer", kan_.optimizer, "lbfgs | adam")->capture_default_str();
    cmd->add_option("--lr", kan_.lr, "learning rate (default 1 for lbfgs, 0.01 for adam)");
    cmd->add_option("--inputs", kan_.inputs, "comma-separated input columns")->capture_default_str();
    cmd->add_option("--test", kan_.tests, "extra CSV files to score")->check(CLI::ExistingFile);
    cmd->add_option("--snapshots", kan_.snapshots, "K: save checkpoints at k/K of the steps, k = 1..K-1")
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--svg", kan_.svg, "also write an SVG plot");
    cmd->callback([this] { action_ = [this] { fit_kan(); }; });
  }

  void fit_kan() {
    const auto data = read_csv(kan_.data.data);
    const auto inputs = input_names(kan_.inputs);
    const Eigen::MatrixXd x = input_matrix(data, inputs);
    const ArchSpec arch = parse_arch(kan_.arch, kan_.grid, kan_.order);
    auto net = init_network<double>(arch, seed_);
    fit_normalization(net, x, data.targets());
    const double lr = kan_.lr > 0 ? kan_.lr : kan_.optimizer == "adam" ? 0.01 : 1.0;
    const std::string dir = out_dir();

    std::vector<int> marks;
    for (int k = 1; k < kan_.snapshots; ++k) marks.push_back(static_cast<int>(std::lround(double(k) * kan_.steps / kan_.snapshots)));
    json snapshots = json::array();
    NetworkCallback<double> on_iter;
    if (!marks.empty())
      on_iter = [&](int it, const KanNetworkd& n) {
        if (std::find(marks.begin(), marks.end(), it) == marks.end()) return;
        const std::string path = in_dir(dir, "snapshot_" + std::to_string(it) + ".json");
        save_checkpoint(n, path);
        snapshots.push_back({{"iteration", it}, {"checkpoint", path},
                             {"r_squared", r_squared(data.torque, network_forward(x, n).col(0))}});
      };
    const auto trace = fit_network(net, x, data.targets(), optimizer_config(kan_.optimizer, kan_.steps, lr), on_iter);
    const Eigen::VectorXd pred = network_forward(x, net).col(0);

    FitReport report;
    finish_report(report, data.torque, pred, kan_.data.clean_torque(data));
    report.config = {{"data", kan_.data.data}, {"arch", format_arch(arch)}, {"grid", std::to_string(arch.grid)},
                     {"order", std::to_string(arch.order)}, {"steps", std::to_string(kan_.steps)},
                     {"optimizer", kan_.optimizer}, {"seed", std::to_string(seed_)}, {"inputs", kan_.inputs}};
    report.wall_seconds = trace.wall_seconds;
    print_r2(out_, report);

    json doc = to_json(report);
    doc["trace"] = to_json(trace);
    doc["snapshots"] = snapshots;
    json tests = json::array();
    for (const auto& path : kan_.tests) {
      const auto t = read_csv(path);
      const Eigen::VectorXd tp = network_forward(input_matrix(t, inputs), net).col(0);
      const double r2 = r_squared(t.torque, tp);
      out_ << "R2[" << path << "] = " << format_double(r2) << "\n";
      tests.push_back({{"file", path}, {"r_squared", r2}, {"residuals", to_json(residual_stats(t.torque, tp))}});
    }
    doc["tests"] = tests;
    const std::string ckpt = in_dir(dir, "model.json");
    save_checkpoint(net, ckpt);
    out_ << "wrote " << ckpt << "\n";
    write_json(in_dir(dir, "fit_kan_report.json"), doc);
    write_prediction_csv(in_dir(dir, "fit_kan_predictions.csv"), data.velocity, data.torque, pred);
    if (kan_.svg) write_text_file(in_dir(dir, "fit_kan.svg"), svg_plot(data.velocity, data.torque, pred, "KAN fit"));
  }

  // ---- prune ------------------------------------------------------------
  struct PruneOpts {
    DataOptions data;
    std::string checkpoint, inputs = "velocity";
    PruneConfig config;
    double input_threshold = -1;
    int refit = 50;
  } prune_;

  void register_prune(CLI::App& app) {
    auto* cmd = command(app, "prune", "prune nodes and edges by attribution score, then refit");
    cmd->add_option("--checkpoint", prune_.checkpoint)->required()->check(CLI::ExistingFile);
    prune_.data.attach(cmd);
    cmd->add_option("--node-threshold", prune_.config.node_threshold)->capture_default_str();
    cmd->add_option("--edge-threshold", prune_.config.edge_threshold)->capture_default_str();
    cmd->add_option("--input-threshold", prune_.input_threshold, "also prune inputs below this score");
    cmd->add_option("--refit", prune_.refit, "L-BFGS steps after pruning")->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--inputs", prune_.inputs)->capture_default_str();
    cmd->callback([this] { action_ = [this] { prune_cmd(); }; });
  }

  void prune_cmd() {
    const auto data = read_csv(prune_.data.data);
    const Eigen::MatrixXd x = input_matrix(data, input_names(prune_.inputs));
    auto net = load_checkpoint(prune_.checkpoint);
    const double r2_before = r_squared(data.torque, network_forward(x, net).col(0));
    std::vector<int> removed_inputs;
    if (prune_.input_threshold >= 0) {
      auto r = prune_inputs(net, attribution_scores(net, x), prune_.input_threshold);
      net = std::move(r.net);
      removed_inputs = r.removed_inputs;
    }
    auto result = prune(net, attribution_scores(net, x), x, prune_.config);
    FitTrace trace;
    if (prune_.refit > 0) trace = fit_network(result.net, x, data.targets(), FitConfig::lbfgs(prune_.refit));
    const double r2_after = r_squared(data.torque, network_forward(x, result.net).col(0));
    out_ << "R2 before = " << format_double(r2_before) << "\nR2 after = " << format_double(r2_after) << "\n";

    const std::string dir = out_dir();
    json doc = json::parse(result.report.to_json());
    doc["r_squared_before"] = r2_before;
    doc["r_squared_after"] = r2_after;
    doc["removed_inputs"] = removed_inputs;
    doc["refit"] = to_json(trace);
    write_json(in_dir(dir, "prune_report.json"), doc);
    save_checkpoint(result.net, in_dir(dir, "pruned.json"));
    out_ << "wrote " << in_dir(dir, "pruned.json") << "\n";
  }

  // ---- symbolify --------------------------------------------------------
  struct SymbolifyOpts {
    DataOptions data;
    std::string checkpoint, library, inputs = "velocity";
    SymbolifyOptions options;
  } sym_;

  void register_symbolify(CLI::App& app) {
    auto* cmd = command(app, "symbolify", "replace spline edges by library functions");
    cmd->add_option("--checkpoint", sym_.checkpoint)->required()->check(CLI::ExistingFile);
    sym_.data.attach(cmd);
    cmd->add_option("--threshold", sym_.options.accept_threshold, "minimum edge R2 to accept a function")
        ->capture_default_str();
    cmd->add_option("--refit", sym_.options.refit_steps, "joint L-BFGS refit steps")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--library", sym_.library, "comma-separated subset of the function library");
    cmd->add_option("--inputs", sym_.inputs)->capture_default_str();
    cmd->callback([this] { action_ = [this] { symbolify_cmd(); }; });
  }

  FunctionLibrary library(const std::string& names) const {
    return names.empty() ? default_library() : library_subset(default_library(), split_names(names));
  }

  void symbolify_cmd() {
    const auto data = read_csv(sym_.data.data);
    const Eigen::MatrixXd x = input_matrix(data, input_names(sym_.inputs));
    const auto net = load_checkpoint(sym_.checkpoint);
    const auto result = symbolify(net, library(sym_.library), x, data.targets(), sym_.options);
    const Eigen::VectorXd pred = result.model.forward(x).col(0);
    FitReport report;
    finish_report(report, data.torque, pred, sym_.data.clean_torque(data));
    report.wall_seconds = result.refit.wall_seconds;
    print_r2(out_, report);
    out_ << (result.partial() ? "partial: some edges kept as splines\n" : "") << result.expression << "\n";

    const std::string dir = out_dir();
    json doc = to_json(report);
    doc["expression"] = result.expression;
    doc["partial"] = result.partial();
    doc["agreement_r2"] = result.agreement_r2;
    doc["edges"] = decisions_json(result);
    doc["refit"] = to_json(result.refit);
    write_json(in_dir(dir, "symbolify_report.json"), doc);
    write_text_file(in_dir(dir, "expression.txt"), result.expression + "\n");
    out_ << "wrote " << in_dir(dir, "expression.txt") << "\n";
  }

  // ---- pipeline ---------------------------------------------------------
  struct PipelineOpts {
    DataOptions data;
    std::string arch = "[1,[5,2],1]", library, inputs = "velocity";
    int grid = 3, order = 3;
    PipelineOptions options;
    bool svg = false;
  } pipe_;

  void register_pipeline(CLI::App& app) {
    auto* cmd = command(app, "pipeline", "fit, prune, refit, symbolify and refit in one run");
    pipe_.data.attach(cmd);
    cmd->add_option("--arch", pipe_.arch)->capture_default_str();
    cmd->add_option("--grid", pipe_.grid)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--order", pipe_.order)->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--steps", pipe_.options.fit_steps, "L-BFGS steps of the first fit")
        ->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_option("--refit", pipe_.options.refit_steps, "L-BFGS steps after pruning")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--symbolic-refit", pipe_.options.symbolic.refit_steps, "L-BFGS steps after symbolification")
        ->check(CLI::NonNegativeNumber)->capture_default_str();
    cmd->add_option("--node-threshold", pipe_.options.prune.node_threshold)->capture_default_str();
    cmd->add_option("--edge-threshold", pipe_.options.prune.edge_threshold)->capture_default_str();
    cmd->add_option("--threshold", pipe_.options.symbolic.accept_threshold, "minimum edge R2 to accept a function")
        ->capture_default_str();
    cmd->add_option("--library", pipe_.library, "comma-separated subset of the function library");
    cmd->add_option("--inputs", pipe_.inputs)->capture_default_str();
    cmd->add_flag("--svg", pipe_.svg, "also write an SVG plot");
    cmd->callback([this] { action_ = [this] { pipeline(); }; });
  }

  void pipeline() {
    const auto data = read_csv(pipe_.data.data);
    auto options = pipe_.options;
    options.arch = parse_arch(pipe_.arch, pipe_.grid, pipe_.order);
    options.library = split_names(pipe_.library);
    options.inputs = input_names(pipe_.inputs);
    options.seed = seed_;
    const auto result = run_pipeline(data, options);
    const Eigen::MatrixXd x = input_matrix(data, options.inputs);
    const Eigen::VectorXd pred = result.symbolic.model.forward(x).col(0);
    const auto clean = pipe_.data.clean_torque(data);

    FitReport report;
    finish_report(report, data.torque, pred, clean);
    report.config = {{"data", pipe_.data.data}, {"arch", format_arch(options.arch)},
                     {"grid", std::to_string(options.arch.grid)}, {"order", std::to_string(options.arch.order)},
                     {"steps", std::to_string(options.fit_steps)}, {"refit", std::to_string(options.refit_steps)},
                     {"seed", std::to_string(seed_)}, {"inputs", pipe_.inputs}};
    report.wall_seconds = result.fit_trace.wall_seconds + result.prune_refit_trace.wall_seconds +
                          result.symbolic.refit.wall_seconds;

    const std::string dir = out_dir();
    save_checkpoint(result.fitted, in_dir(dir, "pre_prune.json"));
    save_checkpoint(result.pruned, in_dir(dir, "post_prune.json"));
    write_text_file(in_dir(dir, "prune_report.json"), result.prune_report.to_json());
    write_text_file(in_dir(dir, "expression.txt"), result.symbolic.expression + "\n");
    json doc = to_json(report);
    doc["stages"] = {{"fit", {{"r_squared", result.r2_fit}, {"trace", to_json(result.fit_trace)}}},
                     {"prune", {{"r_squared", result.r2_pruned}, {"trace", to_json(result.prune_refit_trace)}}},
                     {"symbolify",
                      {{"r_squared", result.r2_symbolic},
                       {"agreement_r2", result.symbolic.agreement_r2},
                       {"partial", result.symbolic.partial()},
                       {"edges", decisions_json(result.symbolic)},
                       {"trace", to_json(result.symbolic.refit)}}}};
    doc["expression"] = result.symbolic.expression;
    write_json(in_dir(dir, "pipeline_report.json"), doc);
    write_prediction_csv(in_dir(dir, "pipeline_predictions.csv"), data.velocity, data.torque, pred);
    if (pipe_.svg)
      write_text_file(in_dir(dir, "pipeline.svg"), svg_plot(data.velocity, data.torque, pred, "symbolic model"));

    out_ << "fit R2 = " << format_double(result.r2_fit) << "\npruned R2 = " << format_double(result.r2_pruned)
         << "\nsymbolic R2 = " << format_double(result.r2_symbolic) << "\n";
    if (report.r_squared_vs_clean) out_ << "symbolic R2 vs clean = " << format_double(*report.r_squared_vs_clean) << "\n";
    if (result.symbolic.partial()) out_ << "partial: some edges kept as splines\n";
    out_ << result.symbolic.expression << "\n";
  }

  // ---- eval -------------------------------------------------------------
  struct EvalOpts {
    DataOptions data;
    std::string model, predictions, svg, inputs = "velocity";
  } eval_;

  void register_eval(CLI::App& app) {
    auto* cmd = command(app, "eval", "score a checkpoint or expression file on a dataset");
    cmd->add_option("--model", eval_.model, "checkpoint JSON or expression text file")->required()->check(CLI::ExistingFile);
    eval_.data.attach(cmd);
    cmd->add_option("--predictions", eval_.predictions, "prediction CSV path (default <out>/predictions.csv)");
    cmd->add_option("--svg", eval_.svg, "SVG plot path");
    cmd->add_option("--inputs", eval_.inputs)->capture_default_str();
    cmd->callback([this] { action_ = [this] { eval(); }; });
  }

  void eval() {
    const auto data = read_csv(eval_.data.data);
    const auto names = input_names(eval_.inputs);
    const Eigen::MatrixXd x = input_matrix(data, names);
    const std::string text = read_text_file(eval_.model);
    const auto first = text.find_first_not_of(" \t\r\n");
    Eigen::VectorXd pred(data.size());
    std::string kind;
    if (first != std::string::npos && text[first] == '{') {
      kind = "checkpoint";
      pred = network_forward(x, checkpoint_from_string(text)).col(0);
    } else {
      kind = "expression";
      std::string line = text.substr(first == std::string::npos ? 0 : first);
      line = line.substr(0, line.find('\n'));
      const ExprPtr e = parse_expression(line);
      std::vector<std::string> vars = names.size() == 1 ? std::vector<std::string>{"v"} : std::vector<std::string>{};
      for (std::size_t k = 0; names.size() > 1 && k < names.size(); ++k) vars.push_back("v" + std::to_string(k + 1));
      for (Eigen::Index i = 0; i < data.size(); ++i) {
        std::map<std::string, double> bind;
        for (std::size_t k = 0; k < vars.size(); ++k) bind[vars[k]] = x(i, static_cast<Eigen::Index>(k));
        pred[i] = evaluate(e, bind);
      }
    }
    FitReport report;
    finish_report(report, data.torque, pred, eval_.data.clean_torque(data));
    report.config = {{"model", eval_.model}, {"kind", kind}, {"data", eval_.data.data}};
    print_r2(out_, report);
    const auto stats = residual_stats(data.torque, pred);
    out_ << "residual mean = " << format_double(stats.mean) << ", std = " << format_double(stats.std_dev)
         << ", max |r| = " << format_double(stats.max_abs) << "\n";

    const std::string dir = out_dir();
    json doc = to_json(report);
    doc["residuals"] = to_json(stats);
    write_json(in_dir(dir, "eval_report.json"), doc);
    const std::string csv = eval_.predictions.empty() ? in_dir(dir, "predictions.csv") : eval_.predictions;
    write_prediction_csv(csv, data.velocity, data.torque, pred);
    out_ << "wrote " << csv << "\n";
    if (!eval_.svg.empty()) {
      write_text_file(eval_.svg, svg_plot(data.velocity, data.torque, pred, "truth vs prediction"));
      out_ << "wrote " << eval_.svg << "\n";
    }
  }

  // ---- correlate --------------------------------------------------------
  std::string corr_data_;

  void register_correlate(CLI::App& app) {
    auto* cmd = command(app, "correlate", "Pearson correlation of torque with velocity and every channel");
    cmd->add_option("--data", corr_data_)->required()->check(CLI::ExistingFile);
    cmd->callback([this] { action_ = [this] { correlate(); }; });
  }

  void correlate() {
    const auto data = read_csv(corr_data_);
    std::vector<std::pair<std::string, const Eigen::VectorXd*>> columns{{"velocity", &data.velocity}};
    for (const auto& [name, values] : data.channels) columns.emplace_back(name, &values);
    if (data.torque.maxCoeff() == data.torque.minCoeff()) throw std::invalid_argument("channel 'torque' is constant");
    FitReport report;
    out_ << "channel,pearson_vs_torque\n";
    for (const auto& [name, values] : columns) {
      if (values->maxCoeff() == values->minCoeff()) throw std::invalid_argument("channel '" + name + "' is constant");
      const double r = pearson_correlation(*values, data.torque);
      report.correlations[name] = r;
      out_ << name << "," << format_double(r) << "\n";
    }
    report.config = {{"data", corr_data_}};
    json doc = to_json(report);
    write_json(in_dir(out_dir(), "correlate_report.json"), doc);
  }

  std::ostream& out_;
  std::ostream& err_;
  std::uint64_t seed_ = 0;
  std::string out_dir_;
  std::function<void()> action_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"kanfric"};
  for (const auto& a : args) argv.push_back(a.c_str());
  Cli cli(out, err);
  return cli.run(static_cast<int>(argv.size()), argv.data());
}

int run_cli(int argc, char** argv) {
  Cli cli(std::cout, std::cerr);
  return cli.run(argc, argv);
}

}  // namespace kanfric
