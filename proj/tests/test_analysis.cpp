#include <gtest/gtest.h>

#include <offpolicy/analysis.hpp>
#include <offpolicy/environments.hpp>
#include <offpolicy/errors.hpp>

#include <cmath>

#include "generators.hpp"

using namespace offpolicy;
using offpolicy::gen::random_features;
using offpolicy::gen::random_instance;
using offpolicy::gen::random_mdp;
using offpolicy::gen::random_vector;
using offpolicy::gen::random_weighting;

namespace {

// Matrices by summing over every transition, independent of the operator code.
std::pair<MatrixXd, VectorXd> summed_td_matrices(const FiniteMdp& mdp, const Policy& pi, const VectorXd& d,
                                                 const MatrixXd& X) {
  MatrixXd A = MatrixXd::Zero(X.cols(), X.cols());
  VectorXd b = VectorXd::Zero(X.cols());
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    for (std::size_t a = 0; a < mdp.n_actions; ++a)
      for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
        const double w = d[s] * pi(s, a) * mdp.p(s, a, s2);
        if (w == 0.0) continue;
        const VectorXd x = X.row(s).transpose();
        const VectorXd x2 = X.row(s2).transpose();
        A += w * x * (x - mdp.discount(s, a, s2) * x2).transpose();
        b += w * mdp.reward(s, a, s2) * x;
      }
  return {A, b};
}

double central_difference(const std::function<double(const VectorXd&)>& f, const VectorXd& w, Eigen::Index i,
                          double h) {
  VectorXd up = w;
  VectorXd dn = w;
  up[i] += h;
  dn[i] -= h;
  return (f(up) - f(dn)) / (2.0 * h);
}

double relative_error(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

VectorXd bellman_residual(const FiniteMdp& mdp, const Policy& pi, const VectorXd& v) {
  return expected_reward(mdp, pi) + discounted_transition_operator(mdp, pi) * v - v;
}

bool well_posed(const gen::Instance& inst, const StateWeighting& d) {
  const MatrixXd C = inst.X.X.transpose() * d.d.asDiagonal() * inst.X.X;
  Eigen::JacobiSVD<MatrixXd> svd(C);
  const auto& sv = svd.singularValues();
  return sv[sv.size() - 1] > 1e-6 * sv[0];
}

}  // namespace

TEST(Matrices, TwoStateHandComputation) {
  FiniteMdp m(2, 1);
  m.P[0] << 0.25, 0.75, 0.5, 0.5;
  m.r[0] << 1.0, 2.0, -1.0, 0.0;
  m.gamma[0].setConstant(0.9);
  m.start << 1.0, 0.0;
  const Policy pi = Policy::uniform(2, 1);
  const StateWeighting d((VectorXd(2) << 0.5, 0.5).finished(), WeightingKind::custom);
  const auto mats = compute_matrices(m, pi, d, tabular(2), 0.0);
  MatrixXd A(2, 2);
  A << 0.5 * (1 - 0.9 * 0.25), -0.5 * 0.9 * 0.75, -0.5 * 0.9 * 0.5, 0.5 * (1 - 0.9 * 0.5);
  const VectorXd b = (VectorXd(2) << 0.5 * (0.25 + 1.5), 0.5 * (-0.5)).finished();
  EXPECT_LT((mats.A - A).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((mats.b - b).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((mats.C - 0.5 * MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Matrices, MatchTransitionSums) {
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const auto [A, b] = summed_td_matrices(inst.mdp, inst.pi, d.d, inst.X.X);
    EXPECT_LT((mats.A - A).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((mats.b - b).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((mats.C - mats.C.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<MatrixXd>(mats.C).eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(Matrices, ZeroRewardGivesZeroB) {
  Rng rng(2);
  FiniteMdp m = random_mdp(rng, 4, 2);
  for (auto& r : m.r) r.setZero();
  const auto mats = compute_matrices(m, Policy::uniform(4, 2), random_weighting(rng, 4), random_features(rng, 4, 2), 0.3);
  EXPECT_EQ(mats.b.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Matrices, TabularOnPolicyForm) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.target);
  const auto mats = compute_matrices(env.mdp, env.target, d, tabular(5), 0.0);
  const MatrixXd expect = d.d.asDiagonal() * (MatrixXd::Identity(5, 5) - discounted_transition_operator(env.mdp, env.target));
  EXPECT_LT((mats.A - expect).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Matrices, LambdaOneRecoversTrueValues) {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto inst = random_instance(rng);
    const std::size_t n = inst.mdp.n_states;
    const auto d = random_weighting(rng, n);
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, tabular(n), 1.0);
    EXPECT_LT((td_fixed_point(mats) - true_values(inst.mdp, inst.pi)).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(Pbe, ZeroAtFixedPoint) {
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const VectorXd w = td_fixed_point(mats);
    EXPECT_LT((mats.A * w - mats.b).norm(), 1e-10);
    EXPECT_LT(linear_pbe(w, mats), 1e-10);
    EXPECT_LT(neu(w, mats), 1e-10);
    EXPECT_LT(pbe_gradient(w, mats).norm(), 1e-9);
  }
}

TEST(Pbe, MatchesProjectionDefinition) {
  Rng rng(5);
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.target);
  const auto mats = compute_matrices(env.mdp, env.target, d, tabular(5), 0.0);
  for (int i = 0; i < 20; ++i) {
    const VectorXd w = random_vector(rng, 5);
    const VectorXd err = bellman_residual(env.mdp, env.target, w);
    EXPECT_NEAR(linear_pbe(w, mats), err.dot(d.d.asDiagonal() * err), 1e-8);
  }
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto dd = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, dd)) continue;
    const auto m2 = compute_matrices(inst.mdp, inst.pi, dd, inst.X, 0.0);
    const MatrixXd& X = inst.X.X;
    const MatrixXd D = dd.d.asDiagonal();
    const MatrixXd Pi = X * (X.transpose() * D * X).inverse() * X.transpose() * D;
    const VectorXd w = random_vector(rng, X.cols());
    const VectorXd proj = Pi * bellman_residual(inst.mdp, inst.pi, X * w);
    const double want = proj.dot(D * proj);
    EXPECT_NEAR(linear_pbe(w, m2), want, 1e-8 * std::max(1.0, want));
  }
}

TEST(Pbe, NeuDominatesScaledPbe) {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const double lmin = Eigen::SelfAdjointEigenSolver<MatrixXd>(mats.C).eigenvalues().minCoeff();
    const VectorXd w = random_vector(rng, inst.X.k());
    EXPECT_GE(neu(w, mats) + 1e-12, lmin * linear_pbe(w, mats));
  }
}

TEST(Pbe, NeuEqualsPbeForOrthonormalFeatures) {
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    const FiniteMdp m = random_mdp(rng, 5, 2);
    const Policy pi = random_policy(rng, 5, 2);
    const auto d = random_weighting(rng, 5);
    const MatrixXd Q = Eigen::HouseholderQR<MatrixXd>(random_features(rng, 5, 3).X).householderQ() * MatrixXd::Identity(5, 3);
    const FeatureMap X{d.d.cwiseSqrt().cwiseInverse().asDiagonal() * Q, "orthonormal"};
    const auto mats = compute_matrices(m, pi, d, X, 0.0);
    EXPECT_LT((mats.C - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
    const VectorXd w = random_vector(rng, 3);
    EXPECT_NEAR(neu(w, mats), linear_pbe(w, mats), 1e-10 * std::max(1.0, neu(w, mats)));
  }
}

TEST(Pbe, GradientsMatchFiniteDifferences) {
  Rng rng(8);
  int checked = 0;
  while (checked < 100) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const VectorXd w = random_vector(rng, inst.X.k());
    VectorXd fd_pbe(w.size());
    VectorXd fd_neu(w.size());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      fd_pbe[i] = central_difference([&](const VectorXd& x) { return linear_pbe(x, mats); }, w, i, 1e-6);
      fd_neu[i] = central_difference([&](const VectorXd& x) { return neu(x, mats); }, w, i, 1e-6);
    }
    EXPECT_LT(relative_error(pbe_gradient(w, mats), fd_pbe), 1e-5);
    EXPECT_LT(relative_error(neu_gradient(w, mats), fd_neu), 1e-6);
  }
}

TEST(Pbe, GradientStepDescends) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const VectorXd w = random_vector(rng, inst.X.k());
    const VectorXd g = pbe_gradient(w, mats);
    if (g.norm() < 1e-8) continue;
    EXPECT_LT(linear_pbe(w - 1e-6 / g.norm() * g, mats), linear_pbe(w, mats));
  }
}

TEST(FixedPoint, TabularIsExact) {
  Rng rng(10);
  for (int i = 0; i < 50; ++i) {
    const auto inst = random_instance(rng);
    const std::size_t n = inst.mdp.n_states;
    const auto d = random_weighting(rng, n);
    const VectorXd v = true_values(inst.mdp, inst.pi);
    const VectorXd w = td_fixed_point(compute_matrices(inst.mdp, inst.pi, d, tabular(n), 0.0));
    EXPECT_LT(ve(w, tabular(n), v, d), 1e-18);
  }
}

TEST(FixedPoint, AliasedPbeValues) {
  const auto env = aliased_four_state();
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const FeatureMap X = aliased_features();
  const VectorXd v = X.X * td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0));
  EXPECT_NEAR(v[2], 1.0, 1e-10);
  EXPECT_NEAR(v[3], 0.0, 1e-10);
}

TEST(FixedPoint, MatchesExpectedTdIteration) {
  const auto env = random_walk(19);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const auto mats = compute_matrices(env.mdp, env.target, d, state_aggregation(19, 2), 0.0);
  VectorXd w = VectorXd::Zero(2);
  for (int t = 0; t < 200000; ++t) w += 0.5 * (mats.b - mats.A * w);
  EXPECT_LT((w - td_fixed_point(mats)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FixedPoint, SingularThrows) {
  const auto env = kolter_family(0.5);
  const StateWeighting d((VectorXd(2) << 1.0, 0.0).finished(), WeightingKind::custom);
  const FeatureMap X{(MatrixXd(2, 2) << 1.0, 0.0, 0.0, 1.0).finished(), "t"};
  EXPECT_THROW(td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0)), SingularSystem);
}

TEST(FixedPoint, CancellingSingleFeatureThrows) {
  // A = C - gamma * (...) cancels to round-off at p = 9/11.
  const auto env = kolter_family(9.0 / 11.0);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const auto m = compute_matrices(env.mdp, env.target, d, kolter_features(), 0.0);
  EXPECT_LT(std::abs(m.A(0, 0)), 1e-14);
  EXPECT_THROW(td_fixed_point(m), SingularSystem);
}

TEST(Generalized, ReductionChain) {
  Rng rng(11);
  int checked = 0;
  while (checked < 100) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const VectorXd td = td_fixed_point(mats);
    const VectorXd same = generalized_pbe_solution(inst.mdp, inst.pi, d, inst.X, inst.X);
    EXPECT_LT(relative_error(same, td), 1e-9);
    const VectorXd be = be_solution(inst.mdp, inst.pi, d, inst.X);
    const VectorXd full = generalized_pbe_solution(inst.mdp, inst.pi, d, inst.X, tabular(inst.mdp.n_states));
    EXPECT_LT(relative_error(full, be), 1e-9);
  }
}

TEST(Generalized, AliasedTabularAuxiliary) {
  const auto env = aliased_four_state();
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const FeatureMap X = aliased_features();
  const VectorXd v = X.X * generalized_pbe_solution(env.mdp, env.target, d, X, tabular(4));
  EXPECT_NEAR(v[2], 0.75, 1e-10);
  EXPECT_NEAR(v[3], 0.25, 1e-10);
  const VectorXd vb = X.X * be_solution(env.mdp, env.target, d, X);
  EXPECT_NEAR(vb[2], 0.75, 1e-10);
  EXPECT_NEAR(vb[3], 0.25, 1e-10);
}

TEST(Generalized, NestedAuxiliaryIsMonotone) {
  Rng rng(12);
  const auto env = random_walk(7);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const FeatureMap F = state_aggregation(7, 2);
  MatrixXd H1(7, 4);
  H1 << F.X, random_features(rng, 7, 2).X;
  const FeatureMap mid{H1, "mid"};
  for (int i = 0; i < 20; ++i) {
    const VectorXd w = random_vector(rng, 2);
    const double p0 = generalized_pbe(w, env.mdp, env.target, d, F, F);
    const double p1 = generalized_pbe(w, env.mdp, env.target, d, F, mid);
    const double p2 = generalized_pbe(w, env.mdp, env.target, d, F, tabular(7));
    EXPECT_LE(p0, p1 + 1e-12);
    EXPECT_LE(p1, p2 + 1e-12);
    EXPECT_NEAR(p2, bellman_error(w, env.mdp, env.target, d, F), 1e-12);
    const auto mats = compute_matrices(env.mdp, env.target, d, F, 0.0);
    EXPECT_NEAR(p0, linear_pbe(w, mats), 1e-10);
  }
  const VectorXd wmid = generalized_pbe_solution(env.mdp, env.target, d, F, mid);
  const double pmid = generalized_pbe(wmid, env.mdp, env.target, d, F, mid);
  EXPECT_GE(pmid, -1e-14);
  EXPECT_LE(pmid, bellman_error(wmid, env.mdp, env.target, d, F) + 1e-12);
}

TEST(BellmanSolution, TabularGivesTrueValues) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const VectorXd w = be_solution(env.mdp, env.target, d, tabular(5));
  EXPECT_LT((w - true_values(env.mdp, env.target)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LT(bellman_error(w, env.mdp, env.target, d, tabular(5)), 1e-20);
}

TEST(BellmanSolution, MatchesNormalEquations) {
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const FiniteMdp m = random_mdp(rng, 3, 2);
    const Policy pi = random_policy(rng, 3, 2);
    const auto d = random_weighting(rng, 3);
    const FeatureMap X = random_features(rng, 3, 2);
    const MatrixXd B = (MatrixXd::Identity(3, 3) - discounted_transition_operator(m, pi)) * X.X;
    const MatrixXd D = d.d.asDiagonal();
    const VectorXd want = (B.transpose() * D * B).ldlt().solve(B.transpose() * D * expected_reward(m, pi));
    const VectorXd got = be_solution(m, pi, d, X);
    EXPECT_LT(relative_error(got, want), 1e-9);
  }
}

TEST(Oblique, TabularIsIdentity) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const auto op = oblique_projection(env.mdp, env.target, d, tabular(5), tabular(5));
  EXPECT_LT((op.matrix - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(op.d_norm, 1.0, 1e-10);
}

TEST(Oblique, IdempotentAndReproducesSolutions) {
  Rng rng(14);
  int checked = 0;
  while (checked < 100) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const FeatureMap H = tabular(inst.mdp.n_states);
    for (const FeatureMap* aux : {&inst.X, &H}) {
      const auto op = oblique_projection(inst.mdp, inst.pi, d, inst.X, *aux);
      EXPECT_LT((op.matrix * op.matrix - op.matrix).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, op.d_norm * op.d_norm));
      const VectorXd v = true_values(inst.mdp, inst.pi);
      const VectorXd sol = inst.X.X * generalized_pbe_solution(inst.mdp, inst.pi, d, inst.X, *aux);
      EXPECT_LT((op.matrix * v - sol).cwiseAbs().maxCoeff(), 1e-8 * std::max(1.0, sol.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Oblique, ErrorBoundedByProjectionNorm) {
  Rng rng(15);
  int checked = 0;
  int violations = 0;
  while (checked < 1000) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const auto op = oblique_projection(inst.mdp, inst.pi, d, inst.X, inst.X);
    const VectorXd v = true_values(inst.mdp, inst.pi);
    const VectorXd sol = op.matrix * v;
    const VectorXd best = weighted_projection(inst.X.X, d.d) * v;
    const double lhs = std::sqrt(weighted_sq_norm(v - sol, d.d));
    const double rhs = op.d_norm * std::sqrt(weighted_sq_norm(v - best, d.d));
    if (lhs > rhs * (1 + 1e-8) + 1e-10) ++violations;
  }
  EXPECT_EQ(violations, 0);
}

TEST(ValueError, MinimizerIsOptimal) {
  Rng rng(16);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    const VectorXd v = true_values(inst.mdp, inst.pi);
    const VectorXd w = ve_minimizer(inst.X, v, d);
    const double best = ve(w, inst.X, v, d);
    for (int j = 0; j < 10; ++j) EXPECT_LE(best, ve(w + random_vector(rng, w.size(), 0.1), inst.X, v, d) + 1e-12);
  }
}

TEST(ValueError, AggregationWeightedLeastSquares) {
  const auto env = random_walk(19);
  const auto d = stationary_distribution(env.mdp, env.target);
  const VectorXd v = true_values(env.mdp, env.target);
  const VectorXd w = ve_minimizer(state_aggregation(19, 2), v, d);
  // Each bin's weighted mean.
  const double left = d.d.head(9).dot(v.head(9)) / d.d.head(9).sum();
  const double right = d.d.tail(10).dot(v.tail(10)) / d.d.tail(10).sum();
  EXPECT_NEAR(w[0], left, 1e-12);
  EXPECT_NEAR(w[1], right, 1e-12);
}

TEST(ValueError, ReturnErrorHasSameMinimizer) {
  const auto env = random_walk(5);
  const auto& mdp = env.mdp;
  const auto d = stationary_distribution(mdp, env.target);
  const VectorXd v = true_values(mdp, env.target);
  // Second moment of the return: M = E[(R + gamma G')^2].
  VectorXd c = VectorXd::Zero(5);
  MatrixXd P2 = MatrixXd::Zero(5, 5);
  for (std::size_t s = 0; s < 5; ++s)
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t s2 = 0; s2 < 5; ++s2) {
        const double p = env.target(s, a) * mdp.p(s, a, s2);
        const double r = mdp.reward(s, a, s2);
        const double g = mdp.discount(s, a, s2);
        c[s] += p * (r * r + 2.0 * g * r * v[s2]);
        P2(s, s2) += p * g * g;
      }
  const VectorXd M = (MatrixXd::Identity(5, 5) - P2).lu().solve(c);
  const FeatureMap X = state_aggregation(5, 2);
  auto return_error = [&](const VectorXd& w) {
    const VectorXd xw = X.X * w;
    return d.d.dot((M - 2.0 * v.cwiseProduct(xw) + xw.cwiseProduct(xw)).eval());
  };
  // Central differences with unit step are exact on quadratics.
  const VectorXd zero = VectorXd::Zero(2);
  VectorXd g(2);
  MatrixXd H(2, 2);
  for (Eigen::Index i = 0; i < 2; ++i) {
    g[i] = central_difference(return_error, zero, i, 1.0);
    for (Eigen::Index j = 0; j < 2; ++j) {
      VectorXd e = VectorXd::Zero(2);
      e[j] = 1.0;
      H(i, j) = central_difference(return_error, e, i, 1.0) - g[i];
    }
  }
  const VectorXd w_re = -H.lu().solve(g);
  const VectorXd w_ve = ve_minimizer(X, v, d);
  EXPECT_NEAR(ve(w_re, X, v, d), ve(w_ve, X, v, d), 1e-10);
}

TEST(TdError, DecomposesIntoBellmanErrorAndVariance) {
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto& m = inst.mdp;
    const auto d = random_weighting(rng, m.n_states);
    const VectorXd w = random_vector(rng, inst.X.k());
    const VectorXd v = inst.X.X * w;
    double variance = 0.0;
    for (std::size_t s = 0; s < m.n_states; ++s) {
      double mean = 0.0;
      double sq = 0.0;
      for (std::size_t a = 0; a < m.n_actions; ++a)
        for (std::size_t s2 = 0; s2 < m.n_states; ++s2) {
          const double p = inst.pi(s, a) * m.p(s, a, s2);
          const double y = m.reward(s, a, s2) + m.discount(s, a, s2) * v[s2];
          mean += p * y;
          sq += p * y * y;
        }
      variance += d.d[s] * (sq - mean * mean);
    }
    const double be = bellman_error(w, m, inst.pi, d, inst.X);
    EXPECT_NEAR(tde_value(w, m, inst.pi, d, inst.X), be + variance, 1e-10 * std::max(1.0, be + variance));
    EXPECT_NEAR(target_variance(w, m, inst.pi, d, inst.X), variance, 1e-10 * std::max(1.0, variance));
  }
}

TEST(TdError, DeterministicEqualsBellmanError) {
  Rng rng(18);
  FiniteMdp m(4, 1);
  for (std::size_t s = 0; s < 4; ++s) {
    m.P[0](s, (s + 1) % 4) = 1.0;
    m.r[0](s, (s + 1) % 4) = static_cast<double>(s);
    m.gamma[0](s, (s + 1) % 4) = 0.8;
  }
  m.start << 1, 0, 0, 0;
  const Policy pi = Policy::uniform(4, 1);
  const auto d = random_weighting(rng, 4);
  const FeatureMap X = random_features(rng, 4, 2);
  for (int i = 0; i < 20; ++i) {
    const VectorXd w = random_vector(rng, 2);
    EXPECT_NEAR(tde_value(w, m, pi, d, X), bellman_error(w, m, pi, d, X), 1e-10);
  }
}

TEST(TdError, FixedPointIsBiasedOnRandomWalk) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.target);
  const VectorXd v = true_values(env.mdp, env.target);
  const VectorXd w_tde = tde_fixed_point(env.mdp, env.target, d, tabular(5));
  const VectorXd w_td = td_fixed_point(compute_matrices(env.mdp, env.target, d, tabular(5), 0.0));
  EXPECT_LT(ve(w_td, tabular(5), v, d), 1e-20);
  EXPECT_GT(ve(w_tde, tabular(5), v, d), 1e-3);
  // Stationarity of the quadratic.
  for (Eigen::Index i = 0; i < 5; ++i) {
    const double g = central_difference([&](const VectorXd& x) { return tde_value(x, env.mdp, env.target, d, tabular(5)); },
                                        w_tde, i, 1e-5);
    EXPECT_NEAR(g, 0.0, 1e-8);
  }
}

TEST(TdError, MatchesSampleAverage) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.target);
  const VectorXd w = (VectorXd(5) << 0.3, -0.2, 0.1, 0.5, -0.4).finished();
  Rng rng(19);
  constexpr int kN = 1000000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < kN; ++i) {
    const std::size_t s = sample_index(rng, d.d);
    const auto t = sample_step(rng, s, env.target, env.target, env.mdp);
    const double delta = t.reward + t.gamma_next * w[static_cast<Eigen::Index>(t.s_next)] - w[static_cast<Eigen::Index>(s)];
    sum += delta * delta;
    sq += delta * delta * delta * delta;
  }
  const double mean = sum / kN;
  const double se = std::sqrt((sq / kN - mean * mean) / kN);
  EXPECT_NEAR(tde_value(w, env.mdp, env.target, d, tabular(5)), mean, 3.0 * se);
}

TEST(Saddle, InnerMaxIsPbe) {
  Rng rng(20);
  int checked = 0;
  while (checked < 100) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const auto mats = compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0);
    const VectorXd w = random_vector(rng, inst.X.k());
    const auto res = saddlepoint_inner_max(mats, w);
    const VectorXd h = mats.C.ldlt().solve(mats.b - mats.A * w);
    EXPECT_LT(relative_error(res.h_star, h), 1e-8);
    const double pbe = linear_pbe(w, mats);
    EXPECT_NEAR(res.value, pbe, 1e-10 * std::max(1.0, pbe));
    EXPECT_NEAR(saddlepoint_objective(mats, w, res.h_star), pbe, 1e-10 * std::max(1.0, pbe));
    const auto at_fixed = saddlepoint_inner_max(mats, td_fixed_point(mats));
    EXPECT_LT(at_fixed.h_star.norm(), 1e-8);
    EXPECT_LT(std::abs(at_fixed.value), 1e-10);
  }
}

TEST(Saddle, GridSearchFindsMaximizer) {
  const auto env = random_walk(5);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const auto mats = compute_matrices(env.mdp, env.target, d, state_aggregation(5, 2), 0.0);
  const VectorXd w = (VectorXd(2) << 0.4, -0.7).finished();
  const auto res = saddlepoint_inner_max(mats, w);
  const double step = 0.005;
  double best = -std::numeric_limits<double>::infinity();
  VectorXd arg(2);
  for (double x = res.h_star[0] - 1.0; x <= res.h_star[0] + 1.0; x += step)
    for (double y = res.h_star[1] - 1.0; y <= res.h_star[1] + 1.0; y += step) {
      const VectorXd h = (VectorXd(2) << x, y).finished();
      const double val = saddlepoint_objective(mats, w, h);
      if (val > best) {
        best = val;
        arg = h;
      }
    }
  EXPECT_LT((arg - res.h_star).cwiseAbs().maxCoeff(), step);
  EXPECT_LE(best, res.value + 1e-12);
}

TEST(ApproxError, GapBetweenBellmanAndProjected) {
  Rng rng(21);
  int checked = 0;
  while (checked < 100) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const VectorXd w = random_vector(rng, inst.X.k());
    const double be = bellman_error(w, inst.mdp, inst.pi, d, inst.X);
    const double pbe = generalized_pbe(w, inst.mdp, inst.pi, d, inst.X, inst.X);
    const double ae = approx_error(inst.mdp, inst.pi, d, inst.X, w, inst.X);
    EXPECT_NEAR(be - pbe, ae * ae, 1e-8 * std::max(1.0, be));
    EXPECT_LT(approx_error(inst.mdp, inst.pi, d, tabular(inst.mdp.n_states), w, inst.X), 1e-7);
  }
}

TEST(ApproxError, ShrinksWithLargerAuxiliaryClass) {
  Rng rng(22);
  const auto env = random_walk(7);
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const FeatureMap F = state_aggregation(7, 2);
  FeatureMap H = F;
  double prev = std::numeric_limits<double>::infinity();
  const VectorXd w = random_vector(rng, 2);
  for (int extra = 0; extra <= 5; ++extra) {
    const double ae = approx_error(env.mdp, env.target, d, H, w, F);
    EXPECT_LE(ae, prev + 1e-12);
    prev = ae;
    MatrixXd grown(7, H.k() + 1);
    grown << H.X, random_features(rng, 7, 1).X;
    H = {grown, "grown"};
  }
  EXPECT_LT(prev, 1e-7);
}

TEST(Bounds, OnPolicyConstantDiscount) {
  Rng rng(23);
  for (int i = 0; i < 50; ++i) {
    const FiniteMdp m = random_mdp(rng, 4, 2, true);
    const double g = m.gamma[0](0, 0);
    const Policy pi = random_policy(rng, 4, 2);
    const auto d = stationary_distribution(m, pi);
    const auto rep = bound_constants(m, pi, d, random_features(rng, 4, 2), d);
    EXPECT_NEAR(rep.c_d, g, 1e-10);
    EXPECT_NEAR(rep.kappa, 1.0, 1e-15);
    EXPECT_LE(rep.s_dF, rep.c_d + 1e-9);
  }
  const auto env = kolter_family(0.5);
  const auto dpi = stationary_distribution(env.mdp, env.target);
  EXPECT_NEAR(bound_constants(env.mdp, env.target, dpi, kolter_features(), dpi).c_d, 0.9, 1e-10);
}

TEST(Bounds, MismatchFlaggedWhenSupportDiffers) {
  const auto env = random_walk(5);
  const StateWeighting d((VectorXd(5) << 0.5, 0.5, 0, 0, 0).finished(), WeightingKind::custom);
  const auto de = stationary_distribution(env.mdp, env.target);
  EXPECT_TRUE(std::isinf(bound_constants(env.mdp, env.target, d, tabular(5), de).kappa));
}

TEST(Bounds, ValueErrorWithinBound) {
  Rng rng(24);
  int checked = 0;
  int violations = 0;
  int applicable = 0;
  while (checked < 1000) {
    const auto inst = random_instance(rng);
    const std::size_t n = inst.mdp.n_states;
    const auto d = random_weighting(rng, n);
    const auto d_eval = random_weighting(rng, n);
    if (!well_posed(inst, d)) continue;
    ++checked;
    const auto rep = bound_constants(inst.mdp, inst.pi, d, inst.X, d_eval);
    EXPECT_LE(rep.s_dF, rep.c_d + 1e-9);
    if (!rep.applicable) continue;
    ++applicable;
    const VectorXd v = true_values(inst.mdp, inst.pi);
    const VectorXd w = td_fixed_point(compute_matrices(inst.mdp, inst.pi, d, inst.X, 0.0));
    const double err = std::sqrt(ve(w, inst.X, v, d));
    const double floor = std::sqrt(ve(ve_minimizer(inst.X, v, d), inst.X, v, d));
    if (err > rep.bound_constant * floor * (1 + 1e-8) + 1e-10) ++violations;
    const double err_eval = std::sqrt(ve(w, inst.X, v, d_eval));
    if (err_eval > std::sqrt(rep.kappa) * rep.bound_constant * floor * (1 + 1e-8) + 1e-10) ++violations;
  }
  EXPECT_EQ(violations, 0);
  EXPECT_GT(applicable, 100);
}

TEST(Decomposition, BellmanErrorSplits) {
  Rng rng(25);
  for (int i = 0; i < 100; ++i) {
    const auto inst = random_instance(rng);
    const auto d = random_weighting(rng, inst.mdp.n_states);
    const VectorXd w = random_vector(rng, inst.X.k());
    const auto [pbe, penalty] = be_decomposition(inst.mdp, inst.pi, d, inst.X, w);
    const double be = bellman_error(w, inst.mdp, inst.pi, d, inst.X);
    EXPECT_GE(pbe, 0.0);
    EXPECT_GE(penalty, 0.0);
    EXPECT_NEAR(pbe + penalty, be, 1e-10 * std::max(1.0, be));
    const auto tab = be_decomposition(inst.mdp, inst.pi, d, tabular(inst.mdp.n_states),
                                      random_vector(rng, static_cast<Eigen::Index>(inst.mdp.n_states)));
    EXPECT_LT(tab.second, 1e-12);
  }
}

TEST(Decomposition, AliasedPenaltyAtPbeSolution) {
  const auto env = aliased_four_state();
  const auto d = stationary_distribution(env.mdp, env.behavior);
  const FeatureMap X = aliased_features();
  const VectorXd w = td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0));
  const auto [pbe, penalty] = be_decomposition(env.mdp, env.target, d, X, w);
  EXPECT_LT(pbe, 1e-12);
  EXPECT_GT(penalty, 0.01);
}

TEST(Normalize, Arithmetic) {
  const VeTable raw{{{"pbe", "db"}, 0.2}, {{"be", "db"}, 0.6}};
  const VeTable out = normalize_ve(raw, 0.1);
  EXPECT_NEAR(out.at({"pbe", "db"}), 0.2, 1e-15);
  EXPECT_DOUBLE_EQ(out.at({"be", "db"}), 1.0);
}

TEST(Normalize, DegenerateTables) {
  EXPECT_THROW(normalize_ve({{{"pbe", "db"}, 0.1}}, 0.1), DegenerateTable);
  EXPECT_THROW(normalize_ve({}, 0.0), InvalidParameter);
}

TEST(Normalize, RangeProperty) {
  Rng rng(26);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 100; ++i) {
    VeTable raw;
    double lo = 1e300;
    for (const std::string obj : {"pbe", "be"})
      for (const std::string w : {"db", "dpi", "m"}) {
        raw[{obj, w}] = u(rng);
        lo = std::min(lo, raw[{obj, w}]);
      }
    const VeTable out = normalize_ve(raw, lo * 0.5);
    double hi = 0.0;
    for (const auto& [k, v] : out) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      hi = std::max(hi, v);
    }
    EXPECT_EQ(hi, 1.0);
  }
}

TEST(Normalize, WalkGridOrdering) {
  const auto env = random_walk(19);
  const auto db = stationary_distribution(env.mdp, env.behavior);
  const auto dpi = stationary_distribution(env.mdp, env.target);
  const auto m = emphatic_weighting(db, followon(env.mdp, env.target, db), 0.0);
  const VectorXd v = true_values(env.mdp, env.target);
  const FeatureMap X = state_aggregation(19, 2);
  VeTable raw;
  for (const auto& [name, d] : {std::pair<std::string, StateWeighting>{"db", db}, {"dpi", dpi}, {"m", m}}) {
    raw[{"pbe", name}] = ve(td_fixed_point(compute_matrices(env.mdp, env.target, d, X, 0.0)), X, v, dpi);
    raw[{"be", name}] = ve(be_solution(env.mdp, env.target, d, X), X, v, dpi);
  }
  const VeTable out = normalize_ve(raw, ve(ve_minimizer(X, v, dpi), X, v, dpi));
  for (const auto& [k, val] : out) {
    EXPECT_GE(val, 0.0);
    EXPECT_LE(val, 1.0);
  }
  EXPECT_LE(out.at({"pbe", "m"}), out.at({"pbe", "db"}));
}
