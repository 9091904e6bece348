#pragma once

#include <string>

#include "offpolicy/mdp.hpp"

namespace offpolicy {

struct FeatureMap {
  MatrixXd X;  // n_states x k
  std::string name;

  Eigen::Index k() const { return X.cols(); }
  Eigen::Index n() const { return X.rows(); }
  VectorXd row(Eigen::Index s) const { return X.row(s).transpose(); }
  void validate() const;
};

FeatureMap tabular(std::size_t n);

// Contiguous bins; when n is not divisible the later bins are one larger.
FeatureMap state_aggregation(std::size_t n, std::size_t bins);

// k = ceil((n+1)/2) overlapping windows, rows scaled to unit norm.
FeatureMap dependent_features(std::size_t n);

FeatureMap tile_coding(std::size_t n, std::size_t tilings, std::size_t tiles, Rng& rng);

struct ReluNetwork {
  MatrixXd W1;  // hidden x 1
  VectorXd b1;
  MatrixXd W2;  // out x hidden
  VectorXd b2;

  VectorXd forward(double position) const;
};

ReluNetwork random_relu_network(std::size_t hidden, std::size_t out, double sparsity, Rng& rng);

FeatureMap random_relu_features(std::size_t n, std::size_t hidden, std::size_t out, double sparsity,
                                Rng& rng);

// 8 features for the 7-state star.
FeatureMap baird_features();
VectorXd baird_initial_weights();

// Single feature with values (1, 1.5) for the two-state family.
FeatureMap kolter_features();

// A1 and A2 share feature 0; B and C get their own.
FeatureMap aliased_features();

// Keeps a maximal linearly independent subset of columns; same function class.
FeatureMap independent_columns(const FeatureMap& f);

// "tabular", "agg:B", "dep", "tile:TxN", "relu:H-O-S", "baird", "kolter", "aliased".
FeatureMap features_by_name(const std::string& spec, std::size_t n_states, Rng& rng);

std::string features_to_csv(const FeatureMap& f);

}  // namespace offpolicy
