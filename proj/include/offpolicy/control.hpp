#pragma once

#include <string>

#include "offpolicy/mdp.hpp"

namespace offpolicy {

struct ActionValueModel {
  MatrixXd W;      // n_actions x k
  MatrixXd Theta;  // n_actions x k
  double tau = 0.0;
  double beta_reg = 0.0;

  ActionValueModel() = default;
  ActionValueModel(Eigen::Index n_actions, Eigen::Index k, double tau_, double beta_)
      : W(MatrixXd::Zero(n_actions, k)), Theta(MatrixXd::Zero(n_actions, k)), tau(tau_), beta_reg(beta_) {}

  VectorXd q(const VectorXd& x) const { return W * x; }
  double h(const VectorXd& x, Eigen::Index a) const { return Theta.row(a).dot(x); }
};

struct ControlConfig {
  double alpha = 0.1;
  double alpha_h = 0.1;
  double epsilon = 0.1;
  void validate() const;
};

struct ControlSample {
  VectorXd x;
  Eigen::Index a = 0;
  VectorXd x_next;
  double reward = 0.0;
  double gamma_next = 0.0;
};

double mellowmax(const VectorXd& q, double tau);

// Softmax(tau q); one-hot at the lowest-index argmax when tau = 0.
VectorXd mellowmax_weights(const VectorXd& q, double tau);

// Gradient of m(q(s,.)) with respect to W, as an n_actions x k matrix.
MatrixXd mellowmax_gradient(const VectorXd& q, double tau, const VectorXd& x);

void qrc_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg);
void gq_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg);
void q_learning_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg);

// q(s,a) table from value iteration with the mellow Bellman optimality operator.
MatrixXd optimal_q_oracle(const FiniteMdp& mdp, double tau, long max_iterations = 10000000);

// Lowest-index argmax with probability 1 - epsilon plus epsilon spread uniformly.
VectorXd epsilon_greedy(const VectorXd& q, double epsilon);

enum class ControlAgent { q_learning, gq, qrc };
ControlAgent control_agent_from_name(const std::string& name);

void control_step(ControlAgent agent, ActionValueModel& m, const ControlSample& s,
                  const ControlConfig& cfg);

// Expected update over (s, a) drawn from weights sa(s, a), s' ~ P, with state features X.
MatrixXd expected_control_update(ControlAgent agent, const ActionValueModel& m, const FiniteMdp& mdp,
                                 const MatrixXd& X, const MatrixXd& sa, const ControlConfig& cfg,
                                 MatrixXd* dTheta);

// Iterates expected updates until the largest change falls below tol.
// Returns the number of iterations used, or -1 when max_iterations is hit.
long run_expected_control(ControlAgent agent, ActionValueModel& m, const FiniteMdp& mdp,
                          const MatrixXd& X, const MatrixXd& sa, const ControlConfig& cfg,
                          long max_iterations, double tol);

}  // namespace offpolicy
