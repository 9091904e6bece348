#include "offpolicy/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "offpolicy/control.hpp"
#include "offpolicy/errors.hpp"
#include "offpolicy/expected_dynamics.hpp"
#include "offpolicy/random.hpp"

namespace offpolicy {

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t t = 0; t < workers; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

StateWeighting weighting_by_name(const std::string& name, const Environment& env, double lambda) {
  if (name == "db") return {stationary_distribution(env.mdp, env.behavior).d, WeightingKind::behavior};
  if (name == "dpi") return {stationary_distribution(env.mdp, env.target).d, WeightingKind::target};
  if (name == "m") {
    const StateWeighting db{stationary_distribution(env.mdp, env.behavior).d, WeightingKind::behavior};
    return emphatic_weighting(db, followon(env.mdp, env.target, db), lambda);
  }
  throw InvalidParameter("unknown weighting '" + name + "' (expected db, dpi or m)");
}

void ExperimentSpec::validate() const {
  if (runs < 1) throw InvalidParameter("runs must be at least 1");
  if (steps < 1) throw InvalidParameter("steps must be at least 1");
  if (record_every < 1 || record_every > steps) throw InvalidParameter("record_every must lie in [1, steps]");
  cfg.validate();
}

namespace {

constexpr std::uint64_t kFeatureStream = ~std::uint64_t{0};

VectorXd initial_weights(const std::string& features, Eigen::Index k) {
  if (features == "baird") return baird_initial_weights();
  return VectorXd::Zero(k);
}

}  // namespace

std::vector<ResultRow> run_learning_curve(const ExperimentSpec& spec, unsigned threads) {
  spec.validate();
  const Environment env = environment_by_name(spec.env);
  Rng feature_rng = seed_stream(spec.seed, kFeatureStream);
  const FeatureMap X = features_by_name(spec.features, env.mdp.n_states, feature_rng);
  AgentConfig cfg = spec.cfg;
  cfg.algorithm = algorithm_from_name(spec.agent);
  cfg.validate();
  check_coverage(env.target, env.behavior);

  const VectorXd v_pi = true_values(env.mdp, env.target);
  const StateWeighting d_eval = weighting_by_name(spec.weighting, env);
  const StateWeighting d_b = weighting_by_name("db", env);
  const ObjectiveMatrices pbe_mats = compute_matrices(env.mdp, env.target, d_b, X, 0.0);
  std::optional<ExpectedDynamics> dynamics;
  if (spec.expected) dynamics.emplace(env.mdp, env.target, env.behavior, X.X, d_b);

  std::vector<std::vector<ResultRow>> per_run(spec.runs);
  parallel_for(spec.runs, threads, [&](std::size_t run) {
    Rng rng = seed_stream(spec.seed, run);
    AgentState st(initial_weights(spec.features, X.k()), env.target, env.behavior);
    Simulator sim(env.mdp, env.target, env.behavior);
    sim.reset(rng);
    auto& rows = per_run[run];
    auto record = [&](std::size_t step) {
      rows.push_back({run, step, "rmsve", std::sqrt(ve(st.w, X, v_pi, d_eval))});
      rows.push_back({run, step, "pbe", linear_pbe(st.w, pbe_mats)});
    };
    record(0);
    for (std::size_t t = 1; t <= spec.steps; ++t) {
      if (dynamics) {
        const ExpectedUpdate u = dynamics->expected_update(st.w, st.h, cfg);
        st.w += u.dw;
        st.h += u.dh;
      } else {
        const TransitionSample s = sim.step(rng);
        step(st, featurize(s, X.X, env.target, env.behavior), cfg);
        if (s.gamma_next == 0.0) reset_episode(st);
      }
      if (!st.w.allFinite() || st.w.norm() > kDivergenceNorm) {
        rows.push_back({run, t, "diverged", 1.0});
        return;
      }
      if (t % spec.record_every == 0 || t == spec.steps) record(t);
    }
  });
  std::vector<ResultRow> out;
  for (auto& rows : per_run) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

const FixedPointCell& FixedPointResult::cell(const std::string& rep, const std::string& obj, const std::string& w,
                                             const std::string& eval) const {
  for (const auto& c : cells)
    if (c.representation == rep && c.objective == obj && c.weighting == w && c.eval_weighting == eval) return c;
  throw InvalidParameter("no fixed-point cell " + rep + "/" + obj + "/" + w + "/" + eval);
}

namespace {

const std::vector<std::string> kObjectives = {"pbe", "be"};
const std::vector<std::string> kWeightings = {"db", "dpi", "m"};
const std::vector<std::string> kEvals = {"db", "dpi"};

struct RepetitionOutcome {
  bool skipped = false;
  // [eval][objective * 3 + weighting]
  std::vector<std::vector<double>> raw;
  std::vector<std::optional<std::vector<double>>> normalized;
};

RepetitionOutcome fixed_point_repetition(const FixedPointSpec& spec, const std::string& rep_name, Rng& rng,
                                         const Environment& env, const VectorXd& v_pi,
                                         const std::vector<StateWeighting>& weights) {
  RepetitionOutcome out;
  const FeatureMap X = independent_columns(features_by_name(rep_name, spec.n_states, rng));
  std::vector<VectorXd> solutions;
  try {
    for (const auto& obj : kObjectives)
      for (std::size_t wi = 0; wi < kWeightings.size(); ++wi) {
        if (obj == "pbe")
          solutions.push_back(td_fixed_point(compute_matrices(env.mdp, env.target, weights[wi], X, 0.0)));
        else
          solutions.push_back(be_solution(env.mdp, env.target, weights[wi], X));
      }
  } catch (const SingularSystem&) {
    out.skipped = true;
    return out;
  }
  for (std::size_t e = 0; e < kEvals.size(); ++e) {
    const StateWeighting& d_eval = weights[e];
    const double floor = ve(ve_minimizer(X, v_pi, d_eval), X, v_pi, d_eval);
    VeTable table;
    std::vector<double> raw;
    for (std::size_t oi = 0; oi < kObjectives.size(); ++oi)
      for (std::size_t wi = 0; wi < kWeightings.size(); ++wi) {
        const double v = ve(solutions[oi * kWeightings.size() + wi], X, v_pi, d_eval);
        raw.push_back(v);
        table[{kObjectives[oi], kWeightings[wi]}] = v;
      }
    out.raw.push_back(raw);
    try {
      const VeTable norm = normalize_ve(table, floor);
      std::vector<double> n;
      for (const auto& obj : kObjectives)
        for (const auto& w : kWeightings) n.push_back(norm.at({obj, w}));
      out.normalized.emplace_back(std::move(n));
    } catch (const DegenerateTable&) {
      out.normalized.emplace_back(std::nullopt);
    }
  }
  return out;
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = ss / static_cast<double>(v.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

}  // namespace

FixedPointResult run_fixed_point_study(const FixedPointSpec& spec, unsigned threads) {
  if (spec.repetitions < 1) throw InvalidParameter("repetitions must be at least 1");
  if (spec.representations.empty()) throw InvalidParameter("at least one representation is required");
  const Environment base = random_walk(spec.n_states, spec.gamma);
  const std::size_t reps = spec.representations.size();

  std::vector<std::vector<RepetitionOutcome>> outcomes(spec.repetitions);
  parallel_for(spec.repetitions, threads, [&](std::size_t r) {
    Rng rng = seed_stream(spec.seed, r);
    Environment env = base;
    env.target = random_policy(rng, env.mdp.n_states, env.mdp.n_actions);
    env.behavior = random_policy(rng, env.mdp.n_states, env.mdp.n_actions);
    const VectorXd v_pi = true_values(env.mdp, env.target);
    std::vector<StateWeighting> weights;
    for (const auto& w : kWeightings) weights.push_back(weighting_by_name(w, env));
    auto& row = outcomes[r];
    for (std::size_t i = 0; i < reps; ++i)
      row.push_back(fixed_point_repetition(spec, spec.representations[i], rng, env, v_pi, weights));
  });

  FixedPointResult result;
  for (std::size_t i = 0; i < reps; ++i) {
    const std::string& rep = spec.representations[i];
    std::size_t skipped = 0, degenerate = 0;
    for (const auto& o : outcomes) {
      if (o[i].skipped) {
        ++skipped;
        continue;
      }
      for (const auto& n : o[i].normalized)
        if (!n) ++degenerate;
    }
    result.skipped[rep] = skipped;
    result.degenerate[rep] = degenerate;
    for (std::size_t e = 0; e < kEvals.size(); ++e)
      for (std::size_t oi = 0; oi < kObjectives.size(); ++oi)
        for (std::size_t wi = 0; wi < kWeightings.size(); ++wi) {
          const std::size_t j = oi * kWeightings.size() + wi;
          std::vector<double> raw, norm;
          for (const auto& o : outcomes) {
            if (o[i].skipped) continue;
            raw.push_back(o[i].raw[e][j]);
            if (o[i].normalized[e]) norm.push_back((*o[i].normalized[e])[j]);
          }
          FixedPointCell c;
          c.representation = rep;
          c.objective = kObjectives[oi];
          c.weighting = kWeightings[wi];
          c.eval_weighting = kEvals[e];
          c.count = raw.size();
          std::tie(c.mean_value, c.se_value) = mean_se(raw);
          c.normalized_count = norm.size();
          std::tie(c.mean_normalized, c.se_normalized) = mean_se(norm);
          result.cells.push_back(c);
        }
  }
  return result;
}

std::vector<double> kolter_sweep_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 99; ++i) grid.push_back(i / 100.0);
  return grid;
}

namespace {

template <class T>
T param(const nlohmann::json& params, const char* key, T fallback) {
  if (!params.contains(key)) return fallback;
  try {
    return params.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter(std::string("parameter '") + key + "': " + e.what());
  }
}

std::vector<CounterexampleRow> aliased_rows() {
  const Environment env = aliased_four_state();
  const FeatureMap X = aliased_features();
  const StateWeighting d = weighting_by_name("db", env);
  const VectorXd v_pi = true_values(env.mdp, env.target);
  const VectorXd w_pbe = td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0));
  const VectorXd w_be = be_solution(env.mdp, env.target, d, X);
  std::vector<CounterexampleRow> rows;
  for (const auto& [name, w] : {std::pair<std::string, VectorXd>{"pbe", w_pbe}, {"be", w_be}}) {
    const VectorXd v = X.X * w;
    rows.push_back({name, 0.0, v[2]});
    rows.push_back({name, 1.0, v[3]});
    rows.push_back({name + "-ve", 0.0, ve(w, X, v_pi, d)});
  }
  return rows;
}

std::vector<CounterexampleRow> kolter_rows(const nlohmann::json& params) {
  const std::string eval = param<std::string>(params, "eval", "dpi");
  std::vector<double> grid = kolter_sweep_grid();
  if (params.contains("grid")) grid = param<std::vector<double>>(params, "grid", grid);
  const FeatureMap X = kolter_features();
  std::vector<CounterexampleRow> rows;
  for (double p : grid) {
    const Environment env = kolter_family(p);
    const VectorXd v_pi = true_values(env.mdp, env.target);
    const StateWeighting d_eval = weighting_by_name(eval, env);
    const StateWeighting db = weighting_by_name("db", env);
    const StateWeighting dpi = weighting_by_name("dpi", env);
    const StateWeighting m = weighting_by_name("m", env);
    const double floor = ve(ve_minimizer(X, v_pi, d_eval), X, v_pi, d_eval);
    auto pbe_ve = [&](const StateWeighting& d) {
      try {
        return ve(td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0)), X, v_pi, d_eval);
      } catch (const SingularSystem&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    rows.push_back({"pbe-db", p, pbe_ve(db)});
    rows.push_back({"pbe-dpi", p, pbe_ve(dpi)});
    rows.push_back({"pbe-m", p, pbe_ve(m)});
    rows.push_back({"be-db", p, ve(be_solution(env.mdp, env.target, db, X), X, v_pi, d_eval)});
    rows.push_back({"floor", p, floor});
  }
  return rows;
}

std::vector<CounterexampleRow> tde_bias_rows(const nlohmann::json& params) {
  const auto n = param<std::size_t>(params, "n", 5);
  const Environment env = random_walk(n, param<double>(params, "gamma", 0.99));
  const FeatureMap X = tabular(n);
  const StateWeighting d = weighting_by_name("dpi", env);
  const VectorXd v_pi = true_values(env.mdp, env.target);
  const VectorXd w_td = td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0));
  const VectorXd w_tde = tde_fixed_point(env.mdp, env.target, d, X);
  return {{"td", 0.0, ve(w_td, X, v_pi, d)}, {"tde", 0.0, ve(w_tde, X, v_pi, d)}};
}

std::vector<CounterexampleRow> baird_rows(const nlohmann::json& params) {
  const auto iterations = param<long>(params, "iterations", 100000);
  const auto every = param<long>(params, "record_every", 1000);
  if (iterations < 1 || every < 1) throw InvalidParameter("iterations and record_every must be positive");
  std::vector<std::string> algorithms = {"td", "gtd", "gtd2", "htd", "etd", "tdrc"};
  if (params.contains("algorithms")) algorithms = param<std::vector<std::string>>(params, "algorithms", algorithms);
  const Environment env = baird_star();
  const FeatureMap X = baird_features();
  const StateWeighting db = weighting_by_name("db", env);
  const ExpectedDynamics dyn(env.mdp, env.target, env.behavior, X.X, db);
  const ObjectiveMatrices mats = compute_matrices(env.mdp, env.target, db, X, 0.0);
  std::vector<CounterexampleRow> rows;
  for (const auto& name : algorithms) {
    AgentConfig cfg;
    cfg.algorithm = algorithm_from_name(name);
    cfg.alpha = param<double>(params, "alpha", 0.01);
    cfg.alpha_h = param<double>(params, "alpha_h", 0.1);
    cfg.validate();
    VectorXd w = baird_initial_weights();
    VectorXd h = VectorXd::Zero(X.k());
    auto emit = [&](long t) {
      rows.push_back({name + ":norm", static_cast<double>(t), w.norm()});
      rows.push_back({name + ":pbe", static_cast<double>(t), linear_pbe(w, mats)});
    };
    emit(0);
    for (long t = every; t <= iterations; t += every) {
      const bool ok = dyn.iterate(w, h, cfg, every, kDivergenceNorm);
      emit(t);
      if (!ok) break;
    }
  }
  return rows;
}

}  // namespace

std::vector<CounterexampleRow> run_counterexample(const std::string& name, const nlohmann::json& params) {
  if (!params.is_object()) throw InvalidParameter("counterexample parameters must be a JSON object");
  if (name == "aliased") return aliased_rows();
  if (name == "kolter") return kolter_rows(params);
  if (name == "tde-bias") return tde_bias_rows(params);
  if (name == "baird") return baird_rows(params);
  throw InvalidParameter("unknown counterexample '" + name + "' (expected aliased, kolter, tde-bias or baird)");
}

void ControlSpec::validate() const {
  control_agent_from_name(agent);
  if (!(tau >= 0.0)) throw InvalidParameter("tau must be nonnegative");
  if (!(beta >= 0.0)) throw InvalidParameter("beta must be nonnegative");
  if (runs < 1 || steps < 1) throw InvalidParameter("runs and steps must be at least 1");
  if (record_every < 1) throw InvalidParameter("record_every must be at least 1");
  ControlConfig{alpha, alpha_h.value_or(alpha), epsilon}.validate();
}

std::vector<ControlRow> run_control(const ControlSpec& spec, unsigned threads) {
  spec.validate();
  const ControlAgent agent = control_agent_from_name(spec.agent);
  const Environment env = environment_by_name(spec.env);
  const FiniteMdp& mdp = env.mdp;
  const FeatureMap X = tabular(mdp.n_states);
  const MatrixXd q_star = optimal_q_oracle(mdp, spec.tau);
  const ControlConfig cfg{spec.alpha, spec.alpha_h.value_or(spec.alpha), spec.epsilon};
  const auto n = static_cast<Eigen::Index>(mdp.n_states);

  std::vector<std::vector<ControlRow>> per_run(spec.runs);
  parallel_for(spec.runs, threads, [&](std::size_t run) {
    Rng rng = seed_stream(spec.seed, run);
    ActionValueModel model(static_cast<Eigen::Index>(mdp.n_actions), X.k(), spec.tau, spec.beta);
    auto& rows = per_run[run];
    auto record = [&](std::size_t t) {
      const MatrixXd q = (model.W * X.X.transpose()).transpose();
      double ret = 0.0;
      for (Eigen::Index s = 0; s < n; ++s) ret += mdp.start[s] * mellowmax(q.row(s).transpose(), spec.tau);
      rows.push_back({run, t, (q - q_star).cwiseAbs().maxCoeff(), ret});
    };
    std::size_t s = sample_start(rng, mdp);
    record(0);
    for (std::size_t t = 1; t <= spec.steps; ++t) {
      ControlSample cs;
      cs.x = X.row(static_cast<Eigen::Index>(s));
      const std::size_t a = sample_index(rng, epsilon_greedy(model.q(cs.x), spec.epsilon));
      const std::size_t s2 = sample_index(rng, mdp.P[a].row(static_cast<Eigen::Index>(s)).transpose());
      cs.a = static_cast<Eigen::Index>(a);
      cs.x_next = X.row(static_cast<Eigen::Index>(s2));
      cs.reward = mdp.reward(s, a, s2);
      cs.gamma_next = mdp.discount(s, a, s2);
      control_step(agent, model, cs, cfg);
      s = cs.gamma_next == 0.0 ? sample_start(rng, mdp) : s2;
      if (t % spec.record_every == 0 || t == spec.steps) record(t);
    }
  });
  std::vector<ControlRow> out;
  for (auto& rows : per_run) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json solve(const SolveSpec& spec) {
  const Environment env = environment_by_name(spec.env);
  Rng rng = seed_stream(spec.seed, kFeatureStream);
  const FeatureMap X = features_by_name(spec.features, env.mdp.n_states, rng);
  std::optional<FeatureMap> XH;
  if (spec.h_features) XH = features_by_name(*spec.h_features, env.mdp.n_states, rng);
  const StateWeighting d = weighting_by_name(spec.weighting, env, spec.lambda);
  const StateWeighting db = weighting_by_name("db", env);
  const StateWeighting dpi = weighting_by_name("dpi", env);
  const VectorXd v_pi = true_values(env.mdp, env.target);

  VectorXd w;
  double value = 0.0;
  const std::string& obj = spec.objective;
  if (obj == "td" || (obj == "pbe" && !XH)) {
    const ObjectiveMatrices m = compute_matrices(env.mdp, env.target, d, X, spec.lambda);
    w = td_fixed_point(m);
    value = linear_pbe(w, m);
  } else if (obj == "pbe") {
    if (spec.lambda != 0.0) throw InvalidParameter("the generalized PBE solution requires lambda = 0");
    w = generalized_pbe_solution(env.mdp, env.target, d, X, *XH);
    value = generalized_pbe(w, env.mdp, env.target, d, X, *XH);
  } else if (obj == "be") {
    w = be_solution(env.mdp, env.target, d, X);
    value = bellman_error(w, env.mdp, env.target, d, X);
  } else if (obj == "tde") {
    w = tde_fixed_point(env.mdp, env.target, d, X);
    value = tde_value(w, env.mdp, env.target, d, X);
  } else if (obj == "ve") {
    w = ve_minimizer(X, v_pi, d);
    value = ve(w, X, v_pi, d);
  } else {
    throw InvalidParameter("unknown objective '" + obj + "' (expected td, pbe, be, tde or ve)");
  }

  const BoundReport br = bound_constants(env.mdp, env.target, d, X, dpi);
  nlohmann::json out;
  out["weights"] = std::vector<double>(w.data(), w.data() + w.size());
  out["ve_db"] = ve(w, X, v_pi, db);
  out["ve_dpi"] = ve(w, X, v_pi, dpi);
  out["objective_value"] = value;
  out["bound_report"] = {{"c_d", finite_or_null(br.c_d)},
                         {"s_dF", finite_or_null(br.s_dF)},
                         {"kappa", finite_or_null(br.kappa)},
                         {"applicable", br.applicable},
                         {"bound_constant", finite_or_null(br.bound_constant)}};
  return out;
}

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

void write_text(const std::string& text, const std::string& path) {
  if (path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InvalidParameter("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace

void write_csv(const std::vector<ResultRow>& rows, const std::string& path) {
  std::ostringstream o;
  o << "run,step,metric,value\n";
  for (const auto& r : rows) o << r.run << ',' << r.step << ',' << r.metric << ',' << format_real(r.value) << '\n';
  write_text(o.str(), path);
}

void write_csv(const FixedPointResult& result, const std::string& path) {
  std::ostringstream o;
  o << "representation,objective,weighting,eval_weighting,value,normalized\n";
  for (const auto& c : result.cells)
    o << c.representation << ',' << c.objective << ',' << c.weighting << ',' << c.eval_weighting << ','
      << format_real(c.mean_value) << ',' << format_real(c.mean_normalized) << '\n';
  for (const auto& [rep, n] : result.skipped) o << rep << ",skipped,,," << n << ",\n";
  for (const auto& [rep, n] : result.degenerate) o << rep << ",degenerate,,," << n << ",\n";
  write_text(o.str(), path);
}

void write_fixed_point_errors_csv(const FixedPointResult& result, const std::string& path) {
  std::ostringstream o;
  o << "representation,objective,weighting,eval_weighting,count,se_value,normalized_count,se_normalized\n";
  for (const auto& c : result.cells)
    o << c.representation << ',' << c.objective << ',' << c.weighting << ',' << c.eval_weighting << ',' << c.count
      << ',' << format_real(c.se_value) << ',' << c.normalized_count << ',' << format_real(c.se_normalized) << '\n';
  write_text(o.str(), path);
}

void write_csv(const std::vector<CounterexampleRow>& rows, const std::string& path) {
  std::ostringstream o;
  o << "series,x,y\n";
  for (const auto& r : rows) o << r.series << ',' << format_real(r.x) << ',' << format_real(r.y) << '\n';
  write_text(o.str(), path);
}

void write_csv(const std::vector<ControlRow>& rows, const std::string& path) {
  std::ostringstream o;
  o << "run,step,max_q_error_vs_oracle,return_estimate\n";
  for (const auto& r : rows)
    o << r.run << ',' << r.step << ',' << format_real(r.max_q_error) << ',' << format_real(r.return_estimate) << '\n';
  write_text(o.str(), path);
}

}  // namespace offpolicy
