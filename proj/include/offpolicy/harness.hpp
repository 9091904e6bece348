#pragma once

#include <cstdint>
#include <functional>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "offpolicy/agents.hpp"
#include "offpolicy/analysis.hpp"
#include "offpolicy/environments.hpp"
#include "offpolicy/features.hpp"

namespace offpolicy {

// Runs body(i) for i in [0, n) on up to `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

// "db", "dpi" or "m" (emphatic with the given lambda).
StateWeighting weighting_by_name(const std::string& name, const Environment& env, double lambda = 0.0);

struct ExperimentSpec {
  std::string env = "random-walk:19";
  std::string features = "tabular";
  std::optional<std::string> h_features;
  std::string agent = "td";
  AgentConfig cfg;
  std::string weighting = "db";  // weighting used for VE
  std::size_t runs = 1;
  std::size_t steps = 1000;
  std::uint64_t seed = 0;
  std::size_t record_every = 100;
  // Run the expected-update dynamics instead of sampled transitions.
  bool expected = false;

  void validate() const;
};

struct ResultRow {
  std::size_t run = 0;
  std::size_t step = 0;
  std::string metric;
  double value = 0.0;
};

inline constexpr double kDivergenceNorm = 1e8;

// Rows per recorded step: "rmsve" and "pbe". A run whose weights exceed the
// divergence norm emits a "diverged" row (value = 1) and stops.
std::vector<ResultRow> run_learning_curve(const ExperimentSpec& spec, unsigned threads = 1);

struct FixedPointSpec {
  std::size_t n_states = 19;
  double gamma = 0.99;
  std::vector<std::string> representations = {"agg:2", "dep", "tile:4x4", "relu:76-9-0.25"};
  std::size_t repetitions = 10000;
  std::uint64_t seed = 0;
};

struct FixedPointCell {
  std::string representation;
  std::string objective;  // "pbe" or "be"
  std::string weighting;  // "db", "dpi", "m"
  std::string eval_weighting;
  std::size_t count = 0;
  double mean_value = 0.0;
  double se_value = 0.0;
  std::size_t normalized_count = 0;
  double mean_normalized = 0.0;
  double se_normalized = 0.0;
};

struct FixedPointResult {
  std::vector<FixedPointCell> cells;
  std::map<std::string, std::size_t> skipped;     // singular systems per representation
  std::map<std::string, std::size_t> degenerate;  // tables with no spread, per representation

  const FixedPointCell& cell(const std::string& rep, const std::string& obj, const std::string& w,
                             const std::string& eval) const;
};

FixedPointResult run_fixed_point_study(const FixedPointSpec& spec, unsigned threads = 1);

struct CounterexampleRow {
  std::string series;
  double x = 0.0;
  double y = 0.0;
};

// "aliased", "kolter", "tde-bias", "baird".
std::vector<CounterexampleRow> run_counterexample(const std::string& name,
                                                  const nlohmann::json& params = nlohmann::json::object());

// Behavior parameters swept for the two-state family.
std::vector<double> kolter_sweep_grid();

struct ControlSpec {
  std::string agent = "qrc";
  std::string env = "control-chain";
  double tau = 0.0;
  double beta = 1.0;
  double epsilon = 0.1;
  double alpha = 0.1;
  std::optional<double> alpha_h;
  std::size_t steps = 10000;
  std::size_t runs = 1;
  std::size_t record_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ControlRow {
  std::size_t run = 0;
  std::size_t step = 0;
  double max_q_error = 0.0;
  double return_estimate = 0.0;
};

std::vector<ControlRow> run_control(const ControlSpec& spec, unsigned threads = 1);

struct SolveSpec {
  std::string env = "random-walk:19";
  std::string features = "tabular";
  std::optional<std::string> h_features;
  std::string weighting = "db";
  std::string objective = "td";
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

nlohmann::json solve(const SolveSpec& spec);

std::string format_real(double v);

void write_csv(const std::vector<ResultRow>& rows, const std::string& path);
void write_csv(const FixedPointResult& result, const std::string& path);
void write_csv(const std::vector<CounterexampleRow>& rows, const std::string& path);
void write_csv(const std::vector<ControlRow>& rows, const std::string& path);

// Companion file with standard errors for the fixed-point grid.
void write_fixed_point_errors_csv(const FixedPointResult& result, const std::string& path);

}  // namespace offpolicy
