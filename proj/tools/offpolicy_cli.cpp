#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "offpolicy/errors.hpp"
#include "offpolicy/harness.hpp"

using namespace offpolicy;

namespace {

// Reads --config documents: top-level keys are global flags, nested objects
// hold the flags of the subcommand with that name.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config: top level must be an object");
    std::vector<CLI::ConfigItem> items;
    collect(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return v.dump();
  }

  static void collect(const nlohmann::json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object() && parents.empty()) {
        collect(value, {key}, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array())
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      else if (value.is_object())
        item.inputs.push_back(value.dump());
      else
        item.inputs.push_back(scalar(value));
      items.push_back(std::move(item));
    }
  }
};

void write_text(const std::string& text, const std::string& path) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidParameter("cannot open '" + path + "' for writing");
  f << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Off-policy temporal-difference prediction and control on finite MDPs"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  std::string out = "-";
  unsigned threads = 1;
  app.add_option("--seed", seed, "Base random seed");
  app.add_option("--out", out, "Output path, - for stdout");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  app.set_config("--config", "", "JSON document with flag values");

  SolveSpec solve_spec;
  std::string h_features;
  auto* solve_cmd = app.add_subcommand("solve", "Closed-form solution of an objective");
  solve_cmd->add_option("--env", solve_spec.env);
  solve_cmd->add_option("--features", solve_spec.features);
  solve_cmd->add_option("--h-features", h_features, "Auxiliary class for the generalized PBE");
  solve_cmd->add_option("--weighting", solve_spec.weighting)->check(CLI::IsMember({"db", "dpi", "m"}));
  solve_cmd->add_option("--objective", solve_spec.objective)
      ->check(CLI::IsMember({"td", "pbe", "be", "tde", "ve"}));
  solve_cmd->add_option("--lambda", solve_spec.lambda);

  FixedPointSpec fp_spec;
  std::string representations = "agg:2,dep,tile:4x4,relu:76-9-0.25";
  std::string errors_out;
  auto* fp_cmd = app.add_subcommand("fixed-points", "Random-walk fixed-point study");
  fp_cmd->add_option("--repetitions", fp_spec.repetitions)->check(CLI::PositiveNumber);
  fp_cmd->add_option("--representations", representations, "Comma-separated feature names");
  fp_cmd->add_option("--n-states", fp_spec.n_states);
  fp_cmd->add_option("--gamma", fp_spec.gamma);
  fp_cmd->add_option("--errors-out", errors_out, "Standard-error CSV (default: <out>.se.csv)");

  ExperimentSpec run_spec;
  double beta_etd = -1.0;
  auto* run_cmd = app.add_subcommand("run", "Learning curves for a prediction agent");
  run_cmd->add_option("--env", run_spec.env);
  run_cmd->add_option("--features", run_spec.features);
  run_cmd->add_option("--agent", run_spec.agent);
  run_cmd->add_option("--alpha", run_spec.cfg.alpha);
  run_cmd->add_option("--alpha-h", run_spec.cfg.alpha_h);
  run_cmd->add_option("--lambda", run_spec.cfg.lambda);
  run_cmd->add_option("--beta-reg", run_spec.cfg.beta_reg);
  run_cmd->add_option("--beta-etd", beta_etd, "Constant followon decay");
  run_cmd->add_option("--zeta", run_spec.cfg.zeta);
  run_cmd->add_option("--c-bar", run_spec.cfg.c_bar);
  run_cmd->add_option("--weighting", run_spec.weighting)->check(CLI::IsMember({"db", "dpi", "m"}));
  run_cmd->add_option("--runs", run_spec.runs);
  run_cmd->add_option("--steps", run_spec.steps);
  run_cmd->add_option("--record-every", run_spec.record_every);
  run_cmd->add_flag("--expected", run_spec.expected, "Use expected updates");

  ControlSpec control_spec;
  double control_alpha_h = -1.0;
  auto* control_cmd = app.add_subcommand("control", "Action-value control against the mellowmax oracle");
  control_cmd->add_option("--agent", control_spec.agent)->check(CLI::IsMember({"q", "gq", "qrc"}));
  control_cmd->add_option("--env", control_spec.env);
  control_cmd->add_option("--tau", control_spec.tau);
  control_cmd->add_option("--beta", control_spec.beta);
  control_cmd->add_option("--epsilon", control_spec.epsilon);
  control_cmd->add_option("--alpha", control_spec.alpha);
  control_cmd->add_option("--alpha-h", control_alpha_h);
  control_cmd->add_option("--steps", control_spec.steps);
  control_cmd->add_option("--runs", control_spec.runs);
  control_cmd->add_option("--record-every", control_spec.record_every);

  std::string ce_name;
  std::string ce_params = "{}";
  auto* ce_cmd = app.add_subcommand("counterexample", "Counterexample tables");
  ce_cmd->add_option("name", ce_name, "aliased, kolter, tde-bias or baird")->required();
  ce_cmd->add_option("--params", ce_params, "JSON object of parameters");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (solve_cmd->parsed()) {
      if (!h_features.empty()) solve_spec.h_features = h_features;
      solve_spec.seed = seed;
      write_text(solve(solve_spec).dump(2) + "\n", out);
    } else if (fp_cmd->parsed()) {
      fp_spec.seed = seed;
      fp_spec.representations = split_list(representations);
      const FixedPointResult r = run_fixed_point_study(fp_spec, threads);
      write_csv(r, out);
      if (errors_out.empty() && out != "-") errors_out = out + ".se.csv";
      if (!errors_out.empty()) write_fixed_point_errors_csv(r, errors_out);
    } else if (run_cmd->parsed()) {
      run_spec.seed = seed;
      if (beta_etd >= 0.0) run_spec.cfg.beta_etd = beta_etd;
      write_csv(run_learning_curve(run_spec, threads), out);
    } else if (control_cmd->parsed()) {
      control_spec.seed = seed;
      if (control_alpha_h >= 0.0) control_spec.alpha_h = control_alpha_h;
      write_csv(run_control(control_spec, threads), out);
    } else if (ce_cmd->parsed()) {
      nlohmann::json params;
      try {
        params = nlohmann::json::parse(ce_params);
      } catch (const nlohmann::json::exception& e) {
        throw InvalidParameter(std::string("--params: ") + e.what());
      }
      write_csv(run_counterexample(ce_name, params), out);
    }
  } catch (const InvalidParameter& e) {
    std::cerr << "invalid parameter: " << e.what() << "\n";
    return 2;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
