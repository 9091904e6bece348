#pragma once

#include <vector>

#include "offpolicy/agents.hpp"
#include "offpolicy/mdp.hpp"

namespace offpolicy {

struct ExpectedUpdate {
  VectorXd dw;
  VectorXd dh;
};

// (w, h) -> M (w, h) + c, the expected update written as an affine map on the
// stacked weights.
struct AffineUpdate {
  MatrixXd M;
  VectorXd c;
};

// Expected one-step change of (w, h) when s ~ d, a ~ b(.|s), s' ~ P(s,a,.),
// averaging the per-sample update of an agent over every transition.
// Only history-free settings are supported: lambda = 0, and for the
// emphatic methods the followon is replaced by its conditional mean f(s)/d(s).
class ExpectedDynamics {
 public:
  ExpectedDynamics(const FiniteMdp& mdp, const Policy& pi, const Policy& b, const MatrixXd& X,
                   const StateWeighting& d);

  ExpectedUpdate expected_update(const VectorXd& w, const VectorXd& h, const AgentConfig& cfg) const;

  // Exact for every supported setting, since the updates are affine in (w, h).
  AffineUpdate affine_update(const AgentConfig& cfg, Eigen::Index k) const;

  // Applies n expected updates in place. Returns false if the weights became
  // non-finite or exceeded the norm limit, in which case iteration stops early.
  bool iterate(VectorXd& w, VectorXd& h, const AgentConfig& cfg, long iterations,
               double norm_limit = 1e300) const;

  const VectorXd& conditional_followon(const AgentConfig& cfg) const;

 private:
  struct Weighted {
    std::size_t s;
    double weight;
    FeatureTransition tr;
  };
  std::vector<Weighted> transitions_;
  VectorXd emphasis_gamma_;  // f(s)/d(s) with the discounted followon
  MatrixXd P_pi_;            // undiscounted target chain, for the constant-beta followon
  VectorXd d_;
  mutable VectorXd emphasis_beta_;
  mutable double cached_beta_ = -1.0;
};

}  // namespace offpolicy
