#include "offpolicy/environments.hpp"

#include <filesystem>
#include <fstream>

#include "offpolicy/errors.hpp"

namespace offpolicy {

namespace {

void set(FiniteMdp& m, std::size_t s, std::size_t a, std::size_t s2, double p, double r, double g) {
  m.P[a](s, s2) += p;
  m.r[a](s, s2) = r;
  m.gamma[a](s, s2) = g;
}

Environment finish(std::string name, FiniteMdp mdp, Policy target, Policy behavior) {
  mdp.validate();
  target.validate(mdp);
  behavior.validate(mdp);
  check_coverage(target, behavior);
  return {std::move(name), std::move(mdp), std::move(target), std::move(behavior)};
}

}  // namespace

Environment random_walk(std::size_t n, double gamma) {
  if (n < 3 || n % 2 == 0) throw InvalidParameter("random walk needs an odd number of states >= 3");
  if (gamma < 0.0 || gamma > 1.0) throw InvalidParameter("random walk discount must lie in [0,1]");
  FiniteMdp m(n, 2);
  const std::size_t center = n / 2;
  for (std::size_t s = 0; s < n; ++s) {
    if (s == 0 || s == n - 1) {
      set(m, s, 0, center, 1.0, 0.0, 0.0);
      set(m, s, 1, center, 1.0, 0.0, 0.0);
      continue;
    }
    set(m, s, 0, s - 1, 1.0, s - 1 == 0 ? -1.0 : 0.0, gamma);
    set(m, s, 1, s + 1, 1.0, s + 1 == n - 1 ? 1.0 : 0.0, gamma);
  }
  m.start[center] = 1.0;
  return finish("random-walk:" + std::to_string(n), std::move(m), Policy::uniform(n, 2), Policy::uniform(n, 2));
}

Environment baird_star(double gamma) {
  FiniteMdp m(7, 2);
  for (std::size_t s = 0; s < 7; ++s) {
    for (std::size_t j = 0; j < 6; ++j) set(m, s, 0, j, 1.0 / 6.0, 0.0, gamma);
    set(m, s, 1, 6, 1.0, 0.0, gamma);
  }
  m.start.setConstant(1.0 / 7.0);
  MatrixXd target(7, 2), behavior(7, 2);
  target.col(0).setZero();
  target.col(1).setOnes();
  behavior.col(0).setConstant(6.0 / 7.0);
  behavior.col(1).setConstant(1.0 / 7.0);
  return finish("baird", std::move(m), Policy(target), Policy(behavior));
}

Environment kolter_family(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("behavior parameter must lie in (0,1)");
  constexpr double gamma = 0.9;
  FiniteMdp m(2, 2);
  // Rewards chosen so that v_pi = (1, 1.55) under the uniform target.
  const VectorXd v = (VectorXd(2) << 1.0, 1.55).finished();
  const double mean_v = v.mean();
  for (std::size_t s = 0; s < 2; ++s) {
    const double r = v[s] - gamma * mean_v;
    for (std::size_t a = 0; a < 2; ++a) set(m, s, a, a, 1.0, r, gamma);
  }
  m.start.setConstant(0.5);
  MatrixXd behavior(2, 2);
  behavior.col(0).setConstant(p);
  behavior.col(1).setConstant(1.0 - p);
  return finish("kolter:" + std::to_string(p), std::move(m), Policy::uniform(2, 2), Policy(behavior));
}

Environment aliased_four_state() {
  FiniteMdp m(4, 1);
  set(m, 0, 0, 2, 1.0, 0.0, 1.0);
  set(m, 1, 0, 3, 1.0, 0.0, 1.0);
  for (std::size_t s2 : {0, 1}) {
    set(m, 2, 0, s2, 0.5, 1.0, 0.0);
    set(m, 3, 0, s2, 0.5, 0.0, 0.0);
  }
  m.start << 0.5, 0.5, 0.0, 0.0;
  return finish("aliased", std::move(m), Policy::uniform(4, 1), Policy::uniform(4, 1));
}

Environment two_action_chain() {
  FiniteMdp m(2, 2);
  set(m, 0, 0, 1, 1.0, 0.0, 1.0);
  set(m, 0, 1, 0, 1.0, 0.0, 1.0);
  set(m, 1, 0, 0, 1.0, 1.0, 0.0);
  set(m, 1, 1, 1, 1.0, 0.0, 1.0);
  m.start << 1.0, 0.0;
  MatrixXd target(2, 2);
  target << 1.0, 0.0, 1.0, 0.0;
  return finish("two-action-chain", std::move(m), Policy(target), Policy::uniform(2, 2));
}

Environment control_chain(double gamma) {
  FiniteMdp m(3, 2);
  for (std::size_t s = 0; s < 3; ++s) {
    set(m, s, 0, s == 0 ? 0 : s - 1, 1.0, 0.0, gamma);
    if (s == 2)
      set(m, s, 1, 0, 1.0, 1.0, 0.0);
    else
      set(m, s, 1, s + 1, 1.0, 0.0, gamma);
  }
  m.start << 1.0, 0.0, 0.0;
  return finish("control-chain", std::move(m), Policy::uniform(3, 2), Policy::uniform(3, 2));
}

namespace {

double parse_param(const std::string& text, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw InvalidParameter("bad parameter in '" + spec + "'");
    return v;
  } catch (const std::logic_error&) {
    throw InvalidParameter("bad parameter in '" + spec + "'");
  }
}

Policy policy_from_json(const nlohmann::json& j, const FiniteMdp& m) {
  MatrixXd p(m.n_states, m.n_actions);
  for (std::size_t s = 0; s < m.n_states; ++s)
    for (std::size_t a = 0; a < m.n_actions; ++a) p(s, a) = j.at(s).at(a).get<double>();
  return Policy(p);
}

}  // namespace

Environment environment_by_name(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "random-walk" || name == "rw") {
    if (arg.empty()) return random_walk(19);
    const double n = parse_param(arg, spec);
    if (n < 0 || n != static_cast<double>(static_cast<long>(n))) throw InvalidParameter("walk size must be a count");
    return random_walk(static_cast<std::size_t>(n));
  }
  if (name == "baird") return baird_star();
  if (name == "kolter") return kolter_family(arg.empty() ? 0.5 : parse_param(arg, spec));
  if (name == "aliased") return aliased_four_state();
  if (name == "two-action-chain") return two_action_chain();
  if (name == "control-chain") return control_chain(arg.empty() ? 0.9 : parse_param(arg, spec));
  if (std::filesystem::exists(spec)) {
    std::ifstream in(spec);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw InvalidParameter("cannot parse environment file: " + std::string(e.what()));
    }
    FiniteMdp m = mdp_from_json(j);
    Policy target = j.contains("target") ? policy_from_json(j["target"], m) : Policy::uniform(m.n_states, m.n_actions);
    Policy behavior =
        j.contains("behavior") ? policy_from_json(j["behavior"], m) : Policy::uniform(m.n_states, m.n_actions);
    return finish(spec, std::move(m), std::move(target), std::move(behavior));
  }
  throw InvalidParameter("unknown environment '" + spec + "'");
}

nlohmann::json mdp_to_json(const FiniteMdp& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  auto tensor = [&](const std::vector<MatrixXd>& t) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t a = 0; a < mdp.n_actions; ++a) {
        nlohmann::json cell = nlohmann::json::array();
        for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) cell.push_back(t[a](s, s2));
        row.push_back(cell);
      }
      out.push_back(row);
    }
    return out;
  };
  j["P"] = tensor(mdp.P);
  j["r"] = tensor(mdp.r);
  j["gamma"] = tensor(mdp.gamma);
  j["start"] = std::vector<double>(mdp.start.data(), mdp.start.data() + mdp.start.size());
  return j;
}

FiniteMdp mdp_from_json(const nlohmann::json& j) {
  try {
    const auto n = j.at("n_states").get<std::size_t>();
    const auto na = j.at("n_actions").get<std::size_t>();
    FiniteMdp m(n, na);
    auto read = [&](const char* key, std::vector<MatrixXd>& t) {
      const auto& arr = j.at(key);
      if (arr.size() != n) throw InvalidParameter(std::string(key) + " has wrong first dimension");
      for (std::size_t s = 0; s < n; ++s) {
        if (arr[s].size() != na) throw InvalidParameter(std::string(key) + " has wrong action dimension");
        for (std::size_t a = 0; a < na; ++a) {
          if (arr[s][a].size() != n) throw InvalidParameter(std::string(key) + " has wrong next-state dimension");
          for (std::size_t s2 = 0; s2 < n; ++s2) t[a](s, s2) = arr[s][a][s2].get<double>();
        }
      }
    };
    read("P", m.P);
    read("r", m.r);
    read("gamma", m.gamma);
    const auto start = j.at("start").get<std::vector<double>>();
    if (start.size() != n) throw InvalidParameter("start has wrong length");
    for (std::size_t s = 0; s < n; ++s) m.start[s] = start[s];
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidParameter("malformed environment document: " + std::string(e.what()));
  }
}

}  // namespace offpolicy
