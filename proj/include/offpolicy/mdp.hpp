#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace offpolicy {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Rng = std::mt19937_64;

// Tabular MDP with per-transition discount. Tensors are stored per action:
// P[a](s, s') = Pr(s' | s, a), and likewise for r and gamma.
struct FiniteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::vector<MatrixXd> P;
  std::vector<MatrixXd> r;
  std::vector<MatrixXd> gamma;
  VectorXd start;

  FiniteMdp() = default;
  FiniteMdp(std::size_t states, std::size_t actions);

  double p(std::size_t s, std::size_t a, std::size_t s2) const { return P[a](s, s2); }
  double reward(std::size_t s, std::size_t a, std::size_t s2) const { return r[a](s, s2); }
  double discount(std::size_t s, std::size_t a, std::size_t s2) const { return gamma[a](s, s2); }

  // Throws InvalidParameter when an invariant does not hold.
  void validate() const;
};

struct Policy {
  MatrixXd probs;  // (s, a)

  Policy() = default;
  explicit Policy(MatrixXd p) : probs(std::move(p)) {}
  static Policy uniform(std::size_t states, std::size_t actions);

  double operator()(std::size_t s, std::size_t a) const { return probs(s, a); }
  void validate(const FiniteMdp& mdp) const;
};

enum class WeightingKind { behavior, target, followon, emphatic, custom };

struct StateWeighting {
  VectorXd d;
  WeightingKind kind = WeightingKind::custom;

  StateWeighting() = default;
  StateWeighting(VectorXd v, WeightingKind k) : d(std::move(v)), kind(k) {}
  void validate() const;
};

struct TransitionSample {
  std::size_t s = 0;
  std::size_t a = 0;
  std::size_t s_next = 0;
  double reward = 0.0;
  double gamma_next = 0.0;
  double rho = 1.0;
};

MatrixXd discounted_transition_operator(const FiniteMdp& mdp, const Policy& pi);

// r_pi(s) = sum_a pi(a|s) sum_s' P(s,a,s') r(s,a,s')
VectorXd expected_reward(const FiniteMdp& mdp, const Policy& pi);

VectorXd true_values(const FiniteMdp& mdp, const Policy& pi);

// State-to-state matrix of the chain in which terminating mass (gamma = 0)
// jumps to the start distribution.
MatrixXd restart_chain(const FiniteMdp& mdp, const Policy& pi);

StateWeighting stationary_distribution(const FiniteMdp& mdp, const Policy& pi);

StateWeighting followon(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d_b);

StateWeighting emphatic_weighting(const StateWeighting& d_b, const StateWeighting& f, double lambda);

// Throws CoverageViolation when pi puts mass on an action b never takes.
void check_coverage(const Policy& pi, const Policy& b);

TransitionSample sample_step(Rng& rng, std::size_t s, const Policy& b, const Policy& pi,
                             const FiniteMdp& mdp);

std::size_t sample_start(Rng& rng, const FiniteMdp& mdp);

// Draws an index from a discrete distribution given by a row of weights.
std::size_t sample_index(Rng& rng, const Eigen::Ref<const VectorXd>& probs);

// Simulates b in the MDP, starting a new episode after terminating transitions.
class Simulator {
 public:
  Simulator(const FiniteMdp& mdp, const Policy& pi, const Policy& b);

  std::size_t reset(Rng& rng);
  TransitionSample step(Rng& rng);
  std::size_t state() const { return s_; }

 private:
  FiniteMdp mdp_;
  Policy pi_;
  Policy b_;
  std::size_t s_ = 0;
};

}  // namespace offpolicy
