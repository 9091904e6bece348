#include "offpolicy/control.hpp"

#include <cmath>

#include "offpolicy/errors.hpp"

namespace offpolicy {

namespace {

Eigen::Index lowest_argmax(const VectorXd& q) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < q.size(); ++i)
    if (q[i] > q[best]) best = i;
  return best;
}

}  // namespace

void ControlConfig::validate() const {
  if (!(alpha >= 0.0) || !(alpha_h >= 0.0)) throw InvalidParameter("stepsizes must be nonnegative");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidParameter("epsilon must lie in [0,1]");
}

double mellowmax(const VectorXd& q, double tau) {
  if (tau < 0.0) throw InvalidParameter("tau must be nonnegative");
  const double mx = q.maxCoeff();
  if (tau == 0.0) return mx;
  const double mean_exp = ((q.array() - mx) * tau).exp().mean();
  return mx + std::log(mean_exp) / tau;
}

VectorXd mellowmax_weights(const VectorXd& q, double tau) {
  if (tau < 0.0) throw InvalidParameter("tau must be nonnegative");
  if (tau == 0.0) {
    VectorXd w = VectorXd::Zero(q.size());
    w[lowest_argmax(q)] = 1.0;
    return w;
  }
  const VectorXd e = ((q.array() - q.maxCoeff()) * tau).exp().matrix();
  return e / e.sum();
}

MatrixXd mellowmax_gradient(const VectorXd& q, double tau, const VectorXd& x) {
  return mellowmax_weights(q, tau) * x.transpose();
}

namespace {

struct Terms {
  double delta;
  double h;
  MatrixXd grad_m;  // gradient of m(q(s',.)) with respect to W
};

Terms terms(const ActionValueModel& m, const ControlSample& s) {
  const VectorXd q_next = m.q(s.x_next);
  Terms t;
  t.delta = s.reward + s.gamma_next * mellowmax(q_next, m.tau) - m.W.row(s.a).dot(s.x);
  t.h = m.h(s.x, s.a);
  t.grad_m = mellowmax_gradient(q_next, m.tau, s.x_next);
  return t;
}

void update_theta(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg, const Terms& t) {
  m.Theta.row(s.a) += cfg.alpha_h * ((t.delta - t.h) * s.x.transpose() - m.beta_reg * m.Theta.row(s.a));
}

}  // namespace

void qrc_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg) {
  const Terms t = terms(m, s);
  m.W.row(s.a) += cfg.alpha * t.delta * s.x.transpose();
  m.W -= cfg.alpha * s.gamma_next * t.h * t.grad_m;
  update_theta(m, s, cfg, t);
}

void gq_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg) {
  const Terms t = terms(m, s);
  m.W.row(s.a) += cfg.alpha * t.h * s.x.transpose();
  m.W -= cfg.alpha * s.gamma_next * t.h * t.grad_m;
  update_theta(m, s, cfg, t);
}

void q_learning_step(ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg) {
  const VectorXd q_next = m.q(s.x_next);
  const double delta = s.reward + s.gamma_next * mellowmax(q_next, m.tau) - m.W.row(s.a).dot(s.x);
  m.W.row(s.a) += cfg.alpha * delta * s.x.transpose();
}

MatrixXd optimal_q_oracle(const FiniteMdp& mdp, double tau, long max_iterations) {
  mdp.validate();
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const auto na = static_cast<Eigen::Index>(mdp.n_actions);
  MatrixXd q = MatrixXd::Zero(n, na);
  for (long it = 0; it < max_iterations; ++it) {
    VectorXd m(n);
    for (Eigen::Index s = 0; s < n; ++s) m[s] = mellowmax(q.row(s).transpose(), tau);
    MatrixXd next(n, na);
    for (Eigen::Index a = 0; a < na; ++a)
      next.col(a) = (mdp.P[a].cwiseProduct(mdp.r[a] + mdp.gamma[a] * m.asDiagonal())).rowwise().sum();
    const double change = (next - q).cwiseAbs().maxCoeff();
    q.swap(next);
    if (!q.allFinite()) break;
    if (change < 1e-12) return q;
  }
  throw NonConvergent("mellow value iteration did not converge");
}

VectorXd epsilon_greedy(const VectorXd& q, double epsilon) {
  VectorXd p = VectorXd::Constant(q.size(), epsilon / static_cast<double>(q.size()));
  p[lowest_argmax(q)] += 1.0 - epsilon;
  return p;
}

ControlAgent control_agent_from_name(const std::string& name) {
  if (name == "q") return ControlAgent::q_learning;
  if (name == "gq") return ControlAgent::gq;
  if (name == "qrc") return ControlAgent::qrc;
  throw InvalidParameter("unknown control agent '" + name + "'");
}

void control_step(ControlAgent agent, ActionValueModel& m, const ControlSample& s, const ControlConfig& cfg) {
  switch (agent) {
    case ControlAgent::q_learning: return q_learning_step(m, s, cfg);
    case ControlAgent::gq: return gq_step(m, s, cfg);
    case ControlAgent::qrc: return qrc_step(m, s, cfg);
  }
}

MatrixXd expected_control_update(ControlAgent agent, const ActionValueModel& m, const FiniteMdp& mdp,
                                 const MatrixXd& X, const MatrixXd& sa, const ControlConfig& cfg, MatrixXd* dTheta) {
  MatrixXd dW = MatrixXd::Zero(m.W.rows(), m.W.cols());
  if (dTheta) *dTheta = MatrixXd::Zero(m.Theta.rows(), m.Theta.cols());
  ControlSample s;
  for (std::size_t st = 0; st < mdp.n_states; ++st)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double wsa = sa(static_cast<Eigen::Index>(st), static_cast<Eigen::Index>(a));
      if (wsa <= 0.0) continue;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.P[a](st, s2);
        if (p == 0.0) continue;
        s.x = X.row(static_cast<Eigen::Index>(st)).transpose();
        s.a = static_cast<Eigen::Index>(a);
        s.x_next = X.row(static_cast<Eigen::Index>(s2)).transpose();
        s.reward = mdp.r[a](st, s2);
        s.gamma_next = mdp.gamma[a](st, s2);
        ActionValueModel copy = m;
        control_step(agent, copy, s, cfg);
        dW += wsa * p * (copy.W - m.W);
        if (dTheta) *dTheta += wsa * p * (copy.Theta - m.Theta);
      }
    }
  return dW;
}

long run_expected_control(ControlAgent agent, ActionValueModel& m, const FiniteMdp& mdp, const MatrixXd& X,
                          const MatrixXd& sa, const ControlConfig& cfg, long max_iterations, double tol) {
  MatrixXd dTheta;
  for (long it = 0; it < max_iterations; ++it) {
    const MatrixXd dW = expected_control_update(agent, m, mdp, X, sa, cfg, &dTheta);
    m.W += dW;
    m.Theta += dTheta;
    if (!m.W.allFinite()) return -1;
    if (std::max(dW.cwiseAbs().maxCoeff(), dTheta.cwiseAbs().maxCoeff()) < tol) return it + 1;
  }
  return -1;
}

}  // namespace offpolicy
