#include "offpolicy/mdp.hpp"

#include <cmath>
#include <sstream>

#include "offpolicy/errors.hpp"

namespace offpolicy {

namespace {

constexpr double kSumTol = 1e-12;

bool is_prob_vector(const Eigen::Ref<const VectorXd>& v) {
  return (v.array() >= 0.0).all() && std::abs(v.sum() - 1.0) <= kSumTol * std::max<double>(1.0, v.size());
}

}  // namespace

FiniteMdp::FiniteMdp(std::size_t states, std::size_t actions)
    : n_states(states),
      n_actions(actions),
      P(actions, MatrixXd::Zero(states, states)),
      r(actions, MatrixXd::Zero(states, states)),
      gamma(actions, MatrixXd::Zero(states, states)),
      start(VectorXd::Zero(states)) {}

void FiniteMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw InvalidParameter("mdp needs at least one state and action");
  if (P.size() != n_actions || r.size() != n_actions || gamma.size() != n_actions)
    throw InvalidParameter("mdp tensors must have one slice per action");
  const auto n = static_cast<Eigen::Index>(n_states);
  for (std::size_t a = 0; a < n_actions; ++a) {
    if (P[a].rows() != n || P[a].cols() != n || r[a].rows() != n || r[a].cols() != n ||
        gamma[a].rows() != n || gamma[a].cols() != n)
      throw InvalidParameter("mdp tensor slice has wrong shape");
    if (!P[a].allFinite() || !r[a].allFinite() || !gamma[a].allFinite())
      throw InvalidParameter("mdp tensors must be finite");
    if ((gamma[a].array() < 0.0).any() || (gamma[a].array() > 1.0).any())
      throw InvalidParameter("discounts must lie in [0,1]");
    for (Eigen::Index s = 0; s < n; ++s) {
      if (!is_prob_vector(P[a].row(s).transpose())) {
        std::ostringstream os;
        os << "transition row (" << s << "," << a << ") is not a distribution";
        throw InvalidParameter(os.str());
      }
    }
  }
  if (start.size() != n || !is_prob_vector(start)) throw InvalidParameter("start must be a distribution");
}

Policy Policy::uniform(std::size_t states, std::size_t actions) {
  return Policy(MatrixXd::Constant(states, actions, 1.0 / static_cast<double>(actions)));
}

void Policy::validate(const FiniteMdp& mdp) const {
  if (probs.rows() != static_cast<Eigen::Index>(mdp.n_states) ||
      probs.cols() != static_cast<Eigen::Index>(mdp.n_actions))
    throw InvalidParameter("policy shape does not match mdp");
  for (Eigen::Index s = 0; s < probs.rows(); ++s)
    if (!is_prob_vector(probs.row(s).transpose())) throw InvalidParameter("policy row is not a distribution");
}

void StateWeighting::validate() const {
  if (d.size() == 0 || !d.allFinite() || (d.array() < 0.0).any() || !(d.array() > 0.0).any())
    throw InvalidParameter("weighting must be nonnegative with some positive entry");
}

MatrixXd discounted_transition_operator(const FiniteMdp& mdp, const Policy& pi) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  MatrixXd out = MatrixXd::Zero(n, n);
  for (std::size_t a = 0; a < mdp.n_actions; ++a)
    out += pi.probs.col(a).asDiagonal() * mdp.P[a].cwiseProduct(mdp.gamma[a]);
  return out;
}

VectorXd expected_reward(const FiniteMdp& mdp, const Policy& pi) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  VectorXd out = VectorXd::Zero(n);
  for (std::size_t a = 0; a < mdp.n_actions; ++a)
    out += pi.probs.col(a).cwiseProduct(mdp.P[a].cwiseProduct(mdp.r[a]).rowwise().sum());
  return out;
}

namespace {

VectorXd solve_resolvent(const MatrixXd& M, const VectorXd& rhs, const char* what) {
  Eigen::FullPivLU<MatrixXd> lu(M);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw SingularSystem(std::string(what) + ": system is singular");
  VectorXd x = lu.solve(rhs);
  if (!x.allFinite()) throw SingularSystem(std::string(what) + ": non-finite solution");
  return x;
}

}  // namespace

VectorXd true_values(const FiniteMdp& mdp, const Policy& pi) {
  const MatrixXd P = discounted_transition_operator(mdp, pi);
  const auto n = P.rows();
  return solve_resolvent(MatrixXd::Identity(n, n) - P, expected_reward(mdp, pi), "true_values");
}

MatrixXd restart_chain(const FiniteMdp& mdp, const Policy& pi) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  MatrixXd out = MatrixXd::Zero(n, n);
  VectorXd terminating = VectorXd::Zero(n);
  for (std::size_t a = 0; a < mdp.n_actions; ++a) {
    const MatrixXd cont = (mdp.gamma[a].array() > 0.0).cast<double>().matrix();
    const MatrixXd kept = mdp.P[a].cwiseProduct(cont);
    out += pi.probs.col(a).asDiagonal() * kept;
    terminating += pi.probs.col(a).cwiseProduct((mdp.P[a] - kept).rowwise().sum());
  }
  out += terminating * mdp.start.transpose();
  return out;
}

StateWeighting stationary_distribution(const FiniteMdp& mdp, const Policy& pi) {
  const MatrixXd Pt = restart_chain(mdp, pi).transpose();
  const auto n = Pt.rows();
  {
    MatrixXd M = MatrixXd::Identity(n, n) - Pt;
    M.row(n - 1).setOnes();
    VectorXd rhs = VectorXd::Zero(n);
    rhs[n - 1] = 1.0;
    Eigen::FullPivLU<MatrixXd> lu(M);
    if (lu.isInvertible()) {
      VectorXd d = lu.solve(rhs);
      if (d.allFinite() && d.minCoeff() > -1e-12) {
        d = d.cwiseMax(0.0);
        d /= d.sum();
        if ((d - Pt * d).cwiseAbs().maxCoeff() < 1e-10) return {d, WeightingKind::custom};
      }
    }
  }
  VectorXd d = VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  constexpr long kMaxIter = 1000000;
  constexpr double kTol = 1e-12;
  // Averaging with the identity removes periodicity without moving the fixed point.
  for (long it = 0; it < kMaxIter; ++it) {
    VectorXd next = 0.5 * (d + Pt * d);
    next /= next.sum();
    const double change = (next - d).cwiseAbs().maxCoeff();
    d.swap(next);
    if (change < kTol) {
      if ((d - Pt * d).cwiseAbs().maxCoeff() < 1e-10) return {d, WeightingKind::custom};
    }
  }
  throw NonConvergent("stationary distribution: power iteration did not converge");
}

StateWeighting followon(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d_b) {
  const MatrixXd P = discounted_transition_operator(mdp, pi);
  const auto n = P.rows();
  VectorXd f = solve_resolvent(MatrixXd::Identity(n, n) - P.transpose(), d_b.d, "followon");
  return {f, WeightingKind::followon};
}

StateWeighting emphatic_weighting(const StateWeighting& d_b, const StateWeighting& f, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw InvalidParameter("lambda must lie in [0,1]");
  return {lambda * d_b.d + (1.0 - lambda) * f.d, WeightingKind::emphatic};
}

void check_coverage(const Policy& pi, const Policy& b) {
  if (pi.probs.rows() != b.probs.rows() || pi.probs.cols() != b.probs.cols())
    throw InvalidParameter("policy shapes differ");
  for (Eigen::Index s = 0; s < pi.probs.rows(); ++s)
    for (Eigen::Index a = 0; a < pi.probs.cols(); ++a)
      if (pi.probs(s, a) > 0.0 && b.probs(s, a) <= 0.0) {
        std::ostringstream os;
        os << "behavior never takes action " << a << " in state " << s << " but target does";
        throw CoverageViolation(os.str());
      }
}

std::size_t sample_index(Rng& rng, const Eigen::Ref<const VectorXd>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = static_cast<std::size_t>(i);
    if (x < acc) return last;
  }
  return last;
}

std::size_t sample_start(Rng& rng, const FiniteMdp& mdp) { return sample_index(rng, mdp.start); }

TransitionSample sample_step(Rng& rng, std::size_t s, const Policy& b, const Policy& pi, const FiniteMdp& mdp) {
  TransitionSample t;
  t.s = s;
  t.a = sample_index(rng, b.probs.row(s).transpose());
  t.s_next = sample_index(rng, mdp.P[t.a].row(s).transpose());
  t.reward = mdp.reward(s, t.a, t.s_next);
  t.gamma_next = mdp.discount(s, t.a, t.s_next);
  t.rho = pi(s, t.a) / b(s, t.a);
  return t;
}

Simulator::Simulator(const FiniteMdp& mdp, const Policy& pi, const Policy& b) : mdp_(mdp), pi_(pi), b_(b) {
  mdp_.validate();
  pi_.validate(mdp_);
  b_.validate(mdp_);
  check_coverage(pi_, b_);
}

std::size_t Simulator::reset(Rng& rng) {
  s_ = sample_start(rng, mdp_);
  return s_;
}

TransitionSample Simulator::step(Rng& rng) {
  TransitionSample t = sample_step(rng, s_, b_, pi_, mdp_);
  s_ = t.gamma_next == 0.0 ? sample_start(rng, mdp_) : t.s_next;
  return t;
}

}  // namespace offpolicy
