#include "offpolicy/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "offpolicy/errors.hpp"

namespace offpolicy {

namespace {

constexpr double kRidge = 1e-10;
constexpr double kMaxCondition = 1e12;

void check_sizes(const FiniteMdp& mdp, const StateWeighting& d, const FeatureMap& X) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  if (d.d.size() != n) throw InvalidParameter("weighting length does not match the mdp");
  if (X.n() != n) throw InvalidParameter("feature rows do not match the mdp");
  d.validate();
}

// Solves M x = rhs, throwing SingularSystem when M is numerically singular
// relative to its own norm or to `scale`, the size of the terms it was built from.
MatrixXd solve_square_many(const MatrixXd& M, const MatrixXd& rhs, const char* what, double scale = 0.0) {
  Eigen::JacobiSVD<MatrixXd> svd(M);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] == 0.0 || sv[sv.size() - 1] < 1e-14 * std::max(sv[0], scale))
    throw SingularSystem(std::string(what) + ": matrix is singular");
  MatrixXd x = M.fullPivLu().solve(rhs);
  if (!x.allFinite()) throw SingularSystem(std::string(what) + ": non-finite solution");
  return x;
}

VectorXd solve_square(const MatrixXd& M, const VectorXd& rhs, const char* what, double scale = 0.0) {
  return solve_square_many(M, rhs, what, scale).col(0);
}

MatrixXd identity_minus(const MatrixXd& P) { return MatrixXd::Identity(P.rows(), P.cols()) - P; }

}  // namespace

VectorXd ObjectiveMatrices::solve_c(const VectorXd& rhs) const {
  VectorXd x = C_solve.ldlt().solve(rhs);
  if (!x.allFinite()) throw SingularSystem("feature covariance is singular");
  return x;
}

ObjectiveMatrices compute_matrices(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                   const FeatureMap& X, double lambda) {
  check_sizes(mdp, d, X);
  if (lambda < 0.0 || lambda > 1.0) throw InvalidParameter("lambda must lie in [0,1]");
  const MatrixXd P = discounted_transition_operator(mdp, pi);
  const VectorXd r = expected_reward(mdp, pi);
  const MatrixXd LX = identity_minus(P) * X.X;
  ObjectiveMatrices m;
  m.weighting = d;
  m.lambda = lambda;
  const MatrixXd XtD = X.X.transpose() * d.d.asDiagonal();
  if (lambda == 0.0) {
    m.A = XtD * LX;
    m.b = XtD * r;
  } else {
    Eigen::FullPivLU<MatrixXd> lu(identity_minus(lambda * P));
    lu.setThreshold(1e-13);
    if (!lu.isInvertible()) throw SingularSystem("I - lambda P is singular");
    m.A = XtD * lu.solve(LX);
    m.b = XtD * lu.solve(r);
  }
  m.C = XtD * X.X;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(m.C, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  m.C_solve = m.C;
  if (lo <= 0.0 || hi / lo > kMaxCondition) {
    m.C_solve.diagonal().array() += kRidge;
    m.c_regularized = true;
  }
  return m;
}

double linear_pbe(const VectorXd& w, const ObjectiveMatrices& m) {
  const VectorXd e = m.b - m.A * w;
  return std::max(0.0, e.dot(m.solve_c(e)));
}

double neu(const VectorXd& w, const ObjectiveMatrices& m) { return (m.b - m.A * w).squaredNorm(); }

VectorXd pbe_gradient(const VectorXd& w, const ObjectiveMatrices& m) {
  return -2.0 * m.A.transpose() * m.solve_c(m.b - m.A * w);
}

VectorXd neu_gradient(const VectorXd& w, const ObjectiveMatrices& m) {
  return 2.0 * m.A.transpose() * (m.A * w - m.b);
}

VectorXd td_fixed_point(const ObjectiveMatrices& m) {
  return solve_square(m.A, m.b, "td fixed point", m.C.norm());
}

MatrixXd weighted_projection(const MatrixXd& X, const VectorXd& d) {
  const MatrixXd XtD = X.transpose() * d.asDiagonal();
  const MatrixXd G = XtD * X;
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(G);
  return X * cod.pseudoInverse() * XtD;
}

double weighted_sq_norm(const VectorXd& v, const VectorXd& d) { return d.dot(v.cwiseAbs2()); }

namespace {

struct Oblique {
  MatrixXd L;
  MatrixXd M;
  MatrixXd G;  // M^T L X
  VectorXd r;
};

Oblique oblique_parts(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d, const FeatureMap& X_F,
                      const FeatureMap& X_H) {
  check_sizes(mdp, d, X_F);
  if (X_H.n() != X_F.n()) throw InvalidParameter("auxiliary features do not match the mdp");
  Oblique o;
  o.L = identity_minus(discounted_transition_operator(mdp, pi));
  o.r = expected_reward(mdp, pi);
  const MatrixXd PiH = weighted_projection(X_H.X, d.d);
  o.M = PiH.transpose() * d.d.asDiagonal() * o.L * X_F.X;
  o.G = o.M.transpose() * o.L * X_F.X;
  return o;
}

}  // namespace

VectorXd generalized_pbe_solution(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                  const FeatureMap& X_F, const FeatureMap& X_H) {
  const Oblique o = oblique_parts(mdp, pi, d, X_F, X_H);
  return solve_square(o.G, o.M.transpose() * o.r, "generalized pbe");
}

VectorXd be_solution(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d, const FeatureMap& X) {
  return generalized_pbe_solution(mdp, pi, d, X, tabular(mdp.n_states));
}

ObliqueProjection oblique_projection(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                     const FeatureMap& X_F, const FeatureMap& X_H) {
  const Oblique o = oblique_parts(mdp, pi, d, X_F, X_H);
  ObliqueProjection out;
  out.matrix = X_F.X * solve_square_many(o.G, o.M.transpose() * o.L, "oblique projection");
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < d.d.size(); ++i)
    if (d.d[i] > 0.0) support.push_back(i);
  // A column outside the support that reaches a weighted row makes the norm unbounded.
  for (Eigen::Index i : support)
    for (Eigen::Index j = 0; j < d.d.size(); ++j)
      if (d.d[j] == 0.0 && std::abs(out.matrix(i, j)) > 1e-12) {
        out.d_norm = std::numeric_limits<double>::infinity();
        return out;
      }
  const auto k = static_cast<Eigen::Index>(support.size());
  MatrixXd S(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) {
      const auto i = support[a], j = support[b];
      S(a, b) = std::sqrt(d.d[i] / d.d[j]) * out.matrix(i, j);
    }
  out.d_norm = Eigen::JacobiSVD<MatrixXd>(S).singularValues()[0];
  return out;
}

double ve(const VectorXd& w, const FeatureMap& X, const VectorXd& v_pi, const StateWeighting& d_eval) {
  return weighted_sq_norm(X.X * w - v_pi, d_eval.d);
}

VectorXd ve_minimizer(const FeatureMap& X, const VectorXd& v_pi, const StateWeighting& d) {
  const VectorXd s = d.d.cwiseSqrt();
  const MatrixXd B = s.asDiagonal() * X.X;
  return B.completeOrthogonalDecomposition().solve(s.cwiseProduct(v_pi));
}

VectorXd expected_td_error(const FiniteMdp& mdp, const Policy& pi, const VectorXd& v) {
  return expected_reward(mdp, pi) + discounted_transition_operator(mdp, pi) * v - v;
}

double bellman_error(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                     const FeatureMap& X) {
  check_sizes(mdp, d, X);
  return weighted_sq_norm(expected_td_error(mdp, pi, X.X * w), d.d);
}

double generalized_pbe(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                       const FeatureMap& X_F, const FeatureMap& X_H) {
  check_sizes(mdp, d, X_F);
  const VectorXd e = expected_td_error(mdp, pi, X_F.X * w);
  return weighted_sq_norm(weighted_projection(X_H.X, d.d) * e, d.d);
}

namespace {

// Visits every (s, a, s') with positive pi and P mass.
template <typename F>
void for_each_transition(const FiniteMdp& mdp, const Policy& pi, F&& f) {
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const double pa = pi(s, a);
      if (pa == 0.0) continue;
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double p = mdp.P[a](s, s2);
        if (p == 0.0) continue;
        f(s, a, s2, pa * p);
      }
    }
}

}  // namespace

double tde_value(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                 const FeatureMap& X) {
  check_sizes(mdp, d, X);
  const VectorXd v = X.X * w;
  double total = 0.0;
  for_each_transition(mdp, pi, [&](std::size_t s, std::size_t a, std::size_t s2, double p) {
    const double delta = mdp.r[a](s, s2) + mdp.gamma[a](s, s2) * v[s2] - v[s];
    total += d.d[s] * p * delta * delta;
  });
  return total;
}

VectorXd tde_fixed_point(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d, const FeatureMap& X) {
  check_sizes(mdp, d, X);
  const auto k = X.k();
  MatrixXd G = MatrixXd::Zero(k, k);
  VectorXd g = VectorXd::Zero(k);
  for_each_transition(mdp, pi, [&](std::size_t s, std::size_t a, std::size_t s2, double p) {
    const VectorXd u = mdp.gamma[a](s, s2) * X.X.row(s2).transpose() - X.X.row(s).transpose();
    const double wgt = d.d[s] * p;
    G += wgt * u * u.transpose();
    g -= wgt * mdp.r[a](s, s2) * u;
  });
  return solve_square(G, g, "tde fixed point");
}

double target_variance(const VectorXd& w, const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                       const FeatureMap& X) {
  check_sizes(mdp, d, X);
  const VectorXd v = X.X * w;
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  VectorXd mean = VectorXd::Zero(n), second = VectorXd::Zero(n);
  for_each_transition(mdp, pi, [&](std::size_t s, std::size_t a, std::size_t s2, double p) {
    const double target = mdp.r[a](s, s2) + mdp.gamma[a](s, s2) * v[s2];
    mean[s] += p * target;
    second[s] += p * target * target;
  });
  return d.d.dot((second - mean.cwiseAbs2()).cwiseMax(0.0));
}

double saddlepoint_objective(const ObjectiveMatrices& m, const VectorXd& w, const VectorXd& h) {
  return 2.0 * (m.b - m.A * w).dot(h) - h.dot(m.C * h);
}

SaddleResult saddlepoint_inner_max(const ObjectiveMatrices& m, const VectorXd& w) {
  SaddleResult out;
  out.h_star = m.solve_c(m.b - m.A * w);
  out.value = saddlepoint_objective(m, w, out.h_star);
  return out;
}

double approx_error(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d, const FeatureMap& X_H,
                    const VectorXd& w, const FeatureMap& X_F) {
  check_sizes(mdp, d, X_F);
  const VectorXd h_star = expected_td_error(mdp, pi, X_F.X * w);
  const VectorXd resid = h_star - weighted_projection(X_H.X, d.d) * h_star;
  return std::sqrt(weighted_sq_norm(resid, d.d));
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// sup_v ||M v||_d / ||v||_d over all v.
double weighted_operator_norm(const MatrixXd& M, const VectorXd& d) {
  std::vector<Eigen::Index> support;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    if (d[i] > 0.0) support.push_back(i);
  for (Eigen::Index i : support)
    for (Eigen::Index j = 0; j < d.size(); ++j)
      if (d[j] == 0.0 && M(i, j) != 0.0) return kInf;
  const auto k = static_cast<Eigen::Index>(support.size());
  MatrixXd S(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      S(a, b) = std::sqrt(d[support[a]] / d[support[b]]) * M(support[a], support[b]);
  return Eigen::JacobiSVD<MatrixXd>(S).singularValues()[0];
}

// sup_u ||K u||_d / ||X u||_d.
double restricted_norm(const MatrixXd& K, const MatrixXd& X, const VectorXd& d) {
  const MatrixXd G = X.transpose() * d.asDiagonal() * X;
  const MatrixXd H = K.transpose() * d.asDiagonal() * K;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(G);
  const VectorXd& ev = es.eigenvalues();
  const double tol = 1e-12 * std::max(1.0, ev.cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> range, null;
  for (Eigen::Index i = 0; i < ev.size(); ++i) (ev[i] > tol ? range : null).push_back(i);
  for (Eigen::Index i : null) {
    const VectorXd u = es.eigenvectors().col(i);
    if (u.dot(H * u) > 1e-20) return kInf;
  }
  if (range.empty()) return 0.0;
  MatrixXd T(G.rows(), static_cast<Eigen::Index>(range.size()));
  for (std::size_t j = 0; j < range.size(); ++j)
    T.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(range[j]) / std::sqrt(ev[range[j]]);
  const MatrixXd R = T.transpose() * H * T;
  Eigen::SelfAdjointEigenSolver<MatrixXd> rs(0.5 * (R + R.transpose()), Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, rs.eigenvalues().maxCoeff()));
}

}  // namespace

BoundReport bound_constants(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d, const FeatureMap& X,
                            const StateWeighting& d_eval) {
  check_sizes(mdp, d, X);
  if (d_eval.d.size() != d.d.size()) throw InvalidParameter("evaluation weighting has the wrong length");
  const MatrixXd P = discounted_transition_operator(mdp, pi);
  BoundReport rep;
  rep.c_d = weighted_operator_norm(P, d.d);
  rep.s_dF = restricted_norm(weighted_projection(X.X, d.d) * P * X.X, X.X, d.d);
  rep.kappa = 0.0;
  for (Eigen::Index s = 0; s < d.d.size(); ++s) {
    if (d_eval.d[s] <= 0.0) continue;
    rep.kappa = d.d[s] > 0.0 ? std::max(rep.kappa, d_eval.d[s] / d.d[s]) : kInf;
  }
  rep.applicable = rep.s_dF < 1.0 - 1e-10;
  if (rep.applicable) rep.bound_constant = rep.c_d < 1.0 ? 1.0 / (1.0 - rep.c_d) : (1.0 + rep.c_d) / (1.0 - rep.s_dF);
  return rep;
}

std::pair<double, double> be_decomposition(const FiniteMdp& mdp, const Policy& pi, const StateWeighting& d,
                                           const FeatureMap& X, const VectorXd& w) {
  check_sizes(mdp, d, X);
  const VectorXd v = X.X * w;
  const VectorXd Tv = expected_reward(mdp, pi) + discounted_transition_operator(mdp, pi) * v;
  const VectorXd PiTv = weighted_projection(X.X, d.d) * Tv;
  return {weighted_sq_norm(v - PiTv, d.d), weighted_sq_norm(Tv - PiTv, d.d)};
}

VeTable normalize_ve(const VeTable& raw, double floor) {
  if (raw.empty()) throw InvalidParameter("empty value-error table");
  double top = 0.0;
  for (const auto& [key, v] : raw) top = std::max(top, v - floor);
  if (!(top > 1e-12 * std::max(1.0, std::abs(floor))))
    throw DegenerateTable("value errors do not vary above the floor");
  VeTable out;
  for (const auto& [key, v] : raw) out[key] = std::clamp((v - floor) / top, 0.0, 1.0);
  return out;
}

}  // namespace offpolicy
