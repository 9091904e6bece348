#pragma once

#include <limits>
#include <optional>
#include <string>

#include "offpolicy/mdp.hpp"

namespace offpolicy {

enum class Algorithm {
  td,
  alt_life,
  gtd,
  gtd2,
  htd,
  pgtd,
  pgtd2,
  tb,
  vtrace,
  abtd,
  etd,
  etd_beta,
  emphatic_gtd,
  tdrc
};

Algorithm algorithm_from_name(const std::string& name);
std::string algorithm_name(Algorithm a);

struct AgentConfig {
  Algorithm algorithm = Algorithm::td;
  double alpha = 0.01;
  double alpha_h = 0.01;
  double lambda = 0.0;
  double beta_reg = 1.0;
  // Constant followon decay. Unset means the per-transition discount is used.
  std::optional<double> beta_etd;
  double zeta = 0.5;
  double c_bar = std::numeric_limits<double>::infinity();

  void validate() const;
};

// One transition seen through the features.
struct FeatureTransition {
  VectorXd x;
  VectorXd x_next;
  double reward = 0.0;
  double gamma_next = 0.0;
  double rho = 1.0;
  double pi_prob = 1.0;  // pi(a_t | s_t)
  double b_prob = 1.0;   // b(a_t | s_t)
};

FeatureTransition featurize(const TransitionSample& s, const MatrixXd& X, const Policy& pi,
                            const Policy& b);

struct AgentState {
  VectorXd w;
  VectorXd h;
  VectorXd z_rho;
  VectorXd z_b;
  double F = 1.0;
  double rho_prev = 1.0;
  double gamma_prev = 0.0;  // discount of the transition into the current state
  double prod_rho = 1.0;
  double trace_factor_prev = 0.0;  // adaptive traces: factor carried from the last step
  bool episode_start = true;
  double psi0 = 0.0;
  double psi_max = 0.0;

  AgentState() = default;
  explicit AgentState(Eigen::Index k);
  AgentState(const VectorXd& w0, const Policy& pi, const Policy& b);
};

void reset_episode(AgentState& st);

// psi_0 = 1 / max_{s,a} max(b, pi), psi_max = 1 / min_{s,a} max(b, pi).
void set_abtd_constants(AgentState& st, const Policy& pi, const Policy& b);

double td_error(const AgentState& st, const FeatureTransition& tr);
double td_error(const VectorXd& w, const FeatureTransition& tr);

void step_offpolicy_td(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_alternative_life_td(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_gtd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_gtd2(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_htd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);

enum class ProximalVariant { gtd2, gtd };
void step_proximal(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg,
                   ProximalVariant variant);

enum class TraceRule { generic, tb, vtrace, abtd };
void step_adaptive_trace(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg,
                         TraceRule rule);
double abtd_nu(const AgentState& st, double zeta, double pi_prob, double b_prob);

void step_etd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_emphatic_gtd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);
void step_tdrc(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);

// Dispatches on cfg.algorithm.
void step(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg);

}  // namespace offpolicy
