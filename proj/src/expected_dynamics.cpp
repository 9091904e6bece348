#include "offpolicy/expected_dynamics.hpp"

#include "offpolicy/errors.hpp"

namespace offpolicy {

ExpectedDynamics::ExpectedDynamics(const FiniteMdp& mdp, const Policy& pi, const Policy& b, const MatrixXd& X,
                                   const StateWeighting& d)
    : d_(d.d) {
  mdp.validate();
  pi.validate(mdp);
  b.validate(mdp);
  check_coverage(pi, b);
  d.validate();
  if (X.rows() != static_cast<Eigen::Index>(mdp.n_states) || d.d.size() != X.rows())
    throw InvalidParameter("expected dynamics: sizes do not match");
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double weight = d.d[static_cast<Eigen::Index>(s)] * b(s, a) * mdp.P[a](s, s2);
        if (weight <= 0.0) continue;
        TransitionSample t{s, a, s2, mdp.r[a](s, s2), mdp.gamma[a](s, s2), pi(s, a) / b(s, a)};
        transitions_.push_back({s, weight, featurize(t, X, pi, b)});
      }
  const VectorXd f = followon(mdp, pi, d).d;
  emphasis_gamma_ = VectorXd::Ones(f.size());
  for (Eigen::Index s = 0; s < f.size(); ++s)
    if (d.d[s] > 0.0) emphasis_gamma_[s] = f[s] / d.d[s];
  P_pi_ = MatrixXd::Zero(X.rows(), X.rows());
  for (std::size_t a = 0; a < mdp.n_actions; ++a) P_pi_ += pi.probs.col(a).asDiagonal() * mdp.P[a];
}

const VectorXd& ExpectedDynamics::conditional_followon(const AgentConfig& cfg) const {
  const bool constant_decay = cfg.beta_etd && cfg.algorithm != Algorithm::etd;
  if (!constant_decay) return emphasis_gamma_;
  if (cached_beta_ != *cfg.beta_etd) {
    const auto n = P_pi_.rows();
    Eigen::FullPivLU<MatrixXd> lu(MatrixXd::Identity(n, n) - *cfg.beta_etd * P_pi_.transpose());
    if (!lu.isInvertible()) throw SingularSystem("followon with constant decay is unbounded");
    const VectorXd f = lu.solve(d_);
    emphasis_beta_ = VectorXd::Ones(n);
    for (Eigen::Index s = 0; s < n; ++s)
      if (d_[s] > 0.0) emphasis_beta_[s] = f[s] / d_[s];
    cached_beta_ = *cfg.beta_etd;
  }
  return emphasis_beta_;
}

ExpectedUpdate ExpectedDynamics::expected_update(const VectorXd& w, const VectorXd& h, const AgentConfig& cfg) const {
  if (cfg.lambda != 0.0) throw InvalidParameter("expected dynamics are defined for lambda = 0");
  if (cfg.algorithm == Algorithm::alt_life || cfg.algorithm == Algorithm::abtd)
    throw InvalidParameter("expected dynamics: " + algorithm_name(cfg.algorithm) + " depends on history");
  const bool emphatic = cfg.algorithm == Algorithm::etd || cfg.algorithm == Algorithm::etd_beta ||
                        cfg.algorithm == Algorithm::emphatic_gtd;
  const VectorXd* emphasis = emphatic ? &conditional_followon(cfg) : nullptr;
  ExpectedUpdate out{VectorXd::Zero(w.size()), VectorXd::Zero(h.size())};
  AgentState st(w.size());
  for (const auto& t : transitions_) {
    reset_episode(st);
    st.w = w;
    st.h = h;
    if (emphasis) st.F = (*emphasis)[static_cast<Eigen::Index>(t.s)];
    step(st, t.tr, cfg);
    out.dw += t.weight * (st.w - w);
    out.dh += t.weight * (st.h - h);
  }
  return out;
}

AffineUpdate ExpectedDynamics::affine_update(const AgentConfig& cfg, Eigen::Index k) const {
  const VectorXd zero = VectorXd::Zero(k);
  const ExpectedUpdate base = expected_update(zero, zero, cfg);
  AffineUpdate out{MatrixXd::Identity(2 * k, 2 * k), VectorXd(2 * k)};
  out.c << base.dw, base.dh;
  for (Eigen::Index j = 0; j < 2 * k; ++j) {
    VectorXd w = zero, h = zero;
    (j < k ? w[j] : h[j - k]) = 1.0;
    const ExpectedUpdate u = expected_update(w, h, cfg);
    out.M.col(j).head(k) += u.dw - base.dw;
    out.M.col(j).tail(k) += u.dh - base.dh;
  }
  return out;
}

bool ExpectedDynamics::iterate(VectorXd& w, VectorXd& h, const AgentConfig& cfg, long iterations,
                               double norm_limit) const {
  const Eigen::Index k = w.size();
  const AffineUpdate map = affine_update(cfg, k);
  VectorXd y(2 * k), next(2 * k);
  y << w, h;
  bool ok = true;
  for (long i = 0; i < iterations; ++i) {
    next.noalias() = map.M * y;
    y = next + map.c;
    if (!y.head(k).allFinite() || y.head(k).norm() > norm_limit) {
      ok = false;
      break;
    }
  }
  w = y.head(k);
  h = y.tail(k);
  return ok;
}

}  // namespace offpolicy
