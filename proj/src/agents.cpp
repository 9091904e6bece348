#include "offpolicy/agents.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "offpolicy/errors.hpp"

namespace offpolicy {

namespace {

const std::map<std::string, Algorithm>& names() {
  static const std::map<std::string, Algorithm> m = {
      {"td", Algorithm::td},         {"alt-life", Algorithm::alt_life}, {"gtd", Algorithm::gtd},
      {"gtd2", Algorithm::gtd2},     {"htd", Algorithm::htd},           {"pgtd", Algorithm::pgtd},
      {"pgtd2", Algorithm::pgtd2},   {"tb", Algorithm::tb},             {"vtrace", Algorithm::vtrace},
      {"abtd", Algorithm::abtd},     {"etd", Algorithm::etd},           {"etd-beta", Algorithm::etd_beta},
      {"emphatic-gtd", Algorithm::emphatic_gtd}, {"tdrc", Algorithm::tdrc}};
  return m;
}

}  // namespace

Algorithm algorithm_from_name(const std::string& name) {
  const auto it = names().find(name);
  if (it == names().end()) throw InvalidParameter("unknown algorithm '" + name + "'");
  return it->second;
}

std::string algorithm_name(Algorithm a) {
  for (const auto& [k, v] : names())
    if (v == a) return k;
  return "?";
}

void AgentConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidParameter("alpha must be a nonnegative real");
  if (!(alpha_h >= 0.0) || !std::isfinite(alpha_h)) throw InvalidParameter("alpha_h must be a nonnegative real");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidParameter("lambda must lie in [0,1]");
  if (!(beta_reg >= 0.0)) throw InvalidParameter("beta_reg must be nonnegative");
  if (beta_etd && !(*beta_etd >= 0.0 && *beta_etd <= 1.0)) throw InvalidParameter("beta_etd must lie in [0,1]");
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw InvalidParameter("zeta must lie in [0,1]");
  if (!(c_bar > 0.0)) throw InvalidParameter("c_bar must be positive");
  if (algorithm == Algorithm::etd_beta && !beta_etd) throw InvalidParameter("etd-beta needs beta_etd");
}

FeatureTransition featurize(const TransitionSample& s, const MatrixXd& X, const Policy& pi, const Policy& b) {
  FeatureTransition t;
  t.x = X.row(static_cast<Eigen::Index>(s.s)).transpose();
  t.x_next = X.row(static_cast<Eigen::Index>(s.s_next)).transpose();
  t.reward = s.reward;
  t.gamma_next = s.gamma_next;
  t.rho = s.rho;
  t.pi_prob = pi(s.s, s.a);
  t.b_prob = b(s.s, s.a);
  return t;
}

AgentState::AgentState(Eigen::Index k)
    : w(VectorXd::Zero(k)), h(VectorXd::Zero(k)), z_rho(VectorXd::Zero(k)), z_b(VectorXd::Zero(k)) {}

AgentState::AgentState(const VectorXd& w0, const Policy& pi, const Policy& b) : AgentState(w0.size()) {
  w = w0;
  set_abtd_constants(*this, pi, b);
}

void reset_episode(AgentState& st) {
  st.z_rho.setZero();
  st.z_b.setZero();
  st.F = 1.0;
  st.rho_prev = 1.0;
  st.gamma_prev = 0.0;
  st.prod_rho = 1.0;
  st.trace_factor_prev = 0.0;
  st.episode_start = true;
}

void set_abtd_constants(AgentState& st, const Policy& pi, const Policy& b) {
  const MatrixXd m = pi.probs.cwiseMax(b.probs);
  st.psi0 = 1.0 / m.maxCoeff();
  st.psi_max = 1.0 / m.minCoeff();
}

double td_error(const VectorXd& w, const FeatureTransition& tr) {
  return tr.reward + tr.gamma_next * w.dot(tr.x_next) - w.dot(tr.x);
}

double td_error(const AgentState& st, const FeatureTransition& tr) { return td_error(st.w, tr); }

namespace {

// z_rho <- rho (gamma_t lambda z_rho + scale x_t)
void rho_trace(AgentState& st, const FeatureTransition& tr, double lambda, double scale = 1.0) {
  st.z_rho = tr.rho * (st.gamma_prev * lambda * st.z_rho + scale * tr.x);
}

void finish(AgentState& st, const FeatureTransition& tr) {
  st.rho_prev = tr.rho;
  st.gamma_prev = tr.gamma_next;
  st.episode_start = false;
}

// Followon for the current step: F_0 at the start of an episode, otherwise
// rho_{t-1} * decay * F_{t-1} + 1 with decay gamma_t or a constant beta.
double advance_followon(AgentState& st, const AgentConfig& cfg) {
  if (!st.episode_start) {
    const double decay = cfg.beta_etd ? *cfg.beta_etd : st.gamma_prev;
    st.F = st.rho_prev * decay * st.F + 1.0;
  }
  return st.F;
}

// Shared GTD(lambda) arithmetic given the trace already in st.z_rho.
// emphasis scales the h-side covariance term (1 for plain GTD).
void gtd_update(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg, double emphasis) {
  const double delta = td_error(st, tr);
  const double hx = st.h.dot(tr.x);
  const double hz = st.h.dot(st.z_rho);
  st.h += cfg.alpha_h * (delta * st.z_rho - emphasis * hx * tr.x);
  st.w += cfg.alpha * delta * st.z_rho - cfg.alpha * tr.gamma_next * (1.0 - cfg.lambda) * hz * tr.x_next;
}

}  // namespace

void step_offpolicy_td(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  rho_trace(st, tr, cfg.lambda);
  st.w += cfg.alpha * td_error(st, tr) * st.z_rho;
  finish(st, tr);
}

void step_alternative_life_td(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  rho_trace(st, tr, cfg.lambda, st.prod_rho);
  st.w += cfg.alpha * td_error(st, tr) * st.z_rho;
  st.prod_rho *= tr.rho;
  finish(st, tr);
}

void step_gtd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  rho_trace(st, tr, cfg.lambda);
  gtd_update(st, tr, cfg, 1.0);
  finish(st, tr);
}

void step_gtd2(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  rho_trace(st, tr, cfg.lambda);
  const double delta = td_error(st, tr);
  const double hx = st.h.dot(tr.x);
  const double hz = st.h.dot(st.z_rho);
  st.h += cfg.alpha_h * (delta * st.z_rho - hx * tr.x);
  st.w += cfg.alpha * hx * tr.x - cfg.alpha * tr.gamma_next * (1.0 - cfg.lambda) * hz * tr.x_next;
  finish(st, tr);
}

void step_htd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  rho_trace(st, tr, cfg.lambda);
  st.z_b = st.gamma_prev * cfg.lambda * st.z_b + tr.x;
  const double delta = td_error(st, tr);
  const VectorXd u = tr.x - tr.gamma_next * tr.x_next;
  const double hzb = st.h.dot(st.z_b);
  const double hdiff = (st.z_rho - st.z_b).dot(st.h);
  st.h += cfg.alpha_h * (delta * st.z_rho - hzb * u);
  st.w += cfg.alpha * (delta * st.z_rho + hdiff * u);
  finish(st, tr);
}

void step_proximal(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg, ProximalVariant variant) {
  rho_trace(st, tr, cfg.lambda);
  const VectorXd& z = st.z_rho;
  const double corr = cfg.alpha * tr.gamma_next * (1.0 - cfg.lambda);
  const double delta = td_error(st, tr);
  const double hx = st.h.dot(tr.x);
  const double hz = st.h.dot(z);

  const VectorXd h_half = st.h + cfg.alpha_h * (delta * z - hx * tr.x);
  VectorXd w_half;
  if (variant == ProximalVariant::gtd2)
    w_half = st.w + cfg.alpha * hx * tr.x - corr * hz * tr.x_next;
  else
    w_half = st.w + cfg.alpha * delta * z - corr * hz * tr.x_next;

  const double delta_half = td_error(w_half, tr);
  const double hhx = h_half.dot(tr.x);
  const double hhz = h_half.dot(z);
  st.h += cfg.alpha_h * (delta_half * z - hhx * tr.x);
  if (variant == ProximalVariant::gtd2)
    st.w += cfg.alpha * hhx * tr.x - corr * hhz * tr.x_next;
  else
    st.w += cfg.alpha * delta_half * z - corr * hhz * tr.x_next;
  finish(st, tr);
}

double abtd_nu(const AgentState& st, double zeta, double pi_prob, double b_prob) {
  const double psi = 2.0 * zeta * st.psi0 + std::max(0.0, 2.0 * zeta - 1.0) * (st.psi_max - 2.0 * st.psi0);
  return std::min(psi, 1.0 / std::max(b_prob, pi_prob));
}

void step_adaptive_trace(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg, TraceRule rule) {
  // z_rho holds the unweighted trace z_t for these methods.
  st.z_rho = st.gamma_prev * st.trace_factor_prev * st.z_rho + tr.x;
  st.w += cfg.alpha * tr.rho * td_error(st, tr) * st.z_rho;
  switch (rule) {
    case TraceRule::generic:
      st.trace_factor_prev = tr.rho * cfg.lambda;
      break;
    case TraceRule::tb:
      st.trace_factor_prev = tr.pi_prob * cfg.lambda;
      break;
    case TraceRule::vtrace:
      st.trace_factor_prev = std::min(cfg.c_bar, tr.rho) * cfg.lambda;
      break;
    case TraceRule::abtd:
      st.trace_factor_prev = abtd_nu(st, cfg.zeta, tr.pi_prob, tr.b_prob) * tr.pi_prob;
      break;
  }
  finish(st, tr);
}

void step_etd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  const double F = advance_followon(st, cfg);
  const double M = cfg.lambda + (1.0 - cfg.lambda) * F;
  rho_trace(st, tr, cfg.lambda, M);
  st.w += cfg.alpha * td_error(st, tr) * st.z_rho;
  finish(st, tr);
}

void step_emphatic_gtd(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  const double F = advance_followon(st, cfg);
  const double M = cfg.lambda + (1.0 - cfg.lambda) * F;
  rho_trace(st, tr, cfg.lambda, M);
  gtd_update(st, tr, cfg, M);
  finish(st, tr);
}

void step_tdrc(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  const double delta = td_error(st, tr);
  const double hx = st.h.dot(tr.x);
  st.h += cfg.alpha_h * ((tr.rho * delta - hx) * tr.x - cfg.beta_reg * st.h);
  st.w += cfg.alpha * tr.rho * (delta * tr.x - hx * tr.gamma_next * tr.x_next);
  st.z_rho = tr.rho * tr.x;
  finish(st, tr);
}

void step(AgentState& st, const FeatureTransition& tr, const AgentConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::td: return step_offpolicy_td(st, tr, cfg);
    case Algorithm::alt_life: return step_alternative_life_td(st, tr, cfg);
    case Algorithm::gtd: return step_gtd(st, tr, cfg);
    case Algorithm::gtd2: return step_gtd2(st, tr, cfg);
    case Algorithm::htd: return step_htd(st, tr, cfg);
    case Algorithm::pgtd: return step_proximal(st, tr, cfg, ProximalVariant::gtd);
    case Algorithm::pgtd2: return step_proximal(st, tr, cfg, ProximalVariant::gtd2);
    case Algorithm::tb: return step_adaptive_trace(st, tr, cfg, TraceRule::tb);
    case Algorithm::vtrace: return step_adaptive_trace(st, tr, cfg, TraceRule::vtrace);
    case Algorithm::abtd: return step_adaptive_trace(st, tr, cfg, TraceRule::abtd);
    case Algorithm::etd: {
      AgentConfig plain = cfg;
      plain.beta_etd.reset();
      return step_etd(st, tr, plain);
    }
    case Algorithm::etd_beta: return step_etd(st, tr, cfg);
    case Algorithm::emphatic_gtd: return step_emphatic_gtd(st, tr, cfg);
    case Algorithm::tdrc: return step_tdrc(st, tr, cfg);
  }
}

}  // namespace offpolicy
