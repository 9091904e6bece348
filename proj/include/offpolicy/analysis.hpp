#pragma once

#include <limits>
#include <map>
#include <string>
#include <utility>

#include "offpolicy/features.hpp"
#include "offpolicy/mdp.hpp"

namespace offpolicy {

struct ObjectiveMatrices {
  MatrixXd A;
  VectorXd b;
  MatrixXd C;
  StateWeighting weighting;
  double lambda = 0.0;
  // Set when C was ill conditioned and a small ridge was added before solves.
  bool c_regularized = false;
  MatrixXd C_solve;  // C, or C + ridge I

  VectorXd solve_c(const VectorXd& rhs) const;
};

ObjectiveMatrices compute_matrices(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                   const FeatureMap& X, double lambda);

double linear_pbe(const VectorXd& w, const ObjectiveMatrices& m);
double neu(const VectorXd& w, const ObjectiveMatrices& m);
VectorXd pbe_gradient(const VectorXd& w, const ObjectiveMatrices& m);
VectorXd neu_gradient(const VectorXd& w, const ObjectiveMatrices& m);

VectorXd td_fixed_point(const ObjectiveMatrices& m);

// Oblique-projection solution of the PBE with auxiliary class spanned by X_H (lambda = 0).
VectorXd generalized_pbe_solution(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                  const FeatureMap& X_F, const FeatureMap& X_H);

VectorXd be_solution(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                     const FeatureMap& X);

struct ObliqueProjection {
  MatrixXd matrix;
  double d_norm = 0.0;
};

ObliqueProjection oblique_projection(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                     const FeatureMap& X_F, const FeatureMap& X_H);

// d-weighted orthogonal projection onto span(X). Uses a pseudo-inverse so
// weightings with zeros are accepted.
MatrixXd weighted_projection(const MatrixXd& X, const VectorXd& d);

double weighted_sq_norm(const VectorXd& v, const VectorXd& d);

double ve(const VectorXd& w, const FeatureMap& X, const VectorXd& v_pi, const StateWeighting& d_eval);
VectorXd ve_minimizer(const FeatureMap& X, const VectorXd& v_pi, const StateWeighting& d);

// Expected TD error per state, E_pi[delta | s], for the value vector v.
VectorXd expected_td_error(const FiniteMdp& mdp, const Policy& pi, const VectorXd& v);

double bellman_error(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi,
                     const StateWeighting& d, const FeatureMap& X);

// ||Pi_H (T v - v)||_d^2
double generalized_pbe(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi,
                       const StateWeighting& d, const FeatureMap& X_F, const FeatureMap& X_H);

double tde_value(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                 const FeatureMap& X);
VectorXd tde_fixed_point(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                         const FeatureMap& X);

// sum_s d(s) Var[R + gamma v(S') | s] under pi.
double target_variance(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi,
                       const StateWeighting& d, const FeatureMap& X);

// 2 (b - Aw)^T h - h^T C h
double saddlepoint_objective(const ObjectiveMatrices& m, const VectorXd& w, const VectorXd& h);

struct SaddleResult {
  VectorXd h_star;
  double value = 0.0;
};

SaddleResult saddlepoint_inner_max(const ObjectiveMatrices& m, const VectorXd& w);

double approx_error(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                    const FeatureMap& X_H, const VectorXd& w, const FeatureMap& X_F);

struct BoundReport {
  double c_d = 0.0;
  double s_dF = 0.0;
  double kappa = 1.0;  // +inf when d_eval has mass where d has none
  bool applicable = false;
  double bound_constant = std::numeric_limits<double>::quiet_NaN();
};

BoundReport bound_constants(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                            const FeatureMap& X, const StateWeighting& d_eval);

std::pair<double, double> be_decomposition(const FiniteMdp& mdp, const Policy& pi,
                                           const StateWeighting& d, const FeatureMap& X,
                                           const VectorXd& w);

using VeKey = std::pair<std::string, std::string>;  // (objective, weighting)
using VeTable = std::map<VeKey, double>;

// Subtracts floor, then divides by the largest shifted entry.
VeTable normalize_ve(const VeTable& raw, double floor);

}  // namespace offpolicy
