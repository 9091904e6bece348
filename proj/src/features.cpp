#include "offpolicy/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "offpolicy/errors.hpp"

namespace offpolicy {

void FeatureMap::validate() const {
  if (X.rows() == 0 || X.cols() == 0) throw InvalidParameter("feature map is empty");
  if (!X.allFinite()) throw InvalidParameter("feature map has non-finite entries");
  for (Eigen::Index s = 0; s < X.rows(); ++s)
    if (X.row(s).cwiseAbs().maxCoeff() == 0.0) throw InvalidParameter("feature map has an all-zero row");
}

FeatureMap tabular(std::size_t n) {
  if (n == 0) throw InvalidParameter("tabular features need n >= 1");
  return {MatrixXd::Identity(n, n), "tabular"};
}

FeatureMap state_aggregation(std::size_t n, std::size_t bins) {
  if (bins < 1 || bins > n) throw InvalidParameter("aggregation needs 1 <= bins <= n");
  MatrixXd X = MatrixXd::Zero(n, bins);
  const std::size_t base = n / bins;
  const std::size_t extra = n % bins;
  std::size_t s = 0;
  for (std::size_t j = 0; j < bins; ++j) {
    const std::size_t size = base + (j >= bins - extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) X(s++, j) = 1.0;
  }
  return {X, "agg:" + std::to_string(bins)};
}

FeatureMap dependent_features(std::size_t n) {
  if (n < 3) throw InvalidParameter("dependent features need n >= 3");
  const std::size_t k = (n + 2) / 2;  // ceil((n+1)/2)
  MatrixXd X = MatrixXd::Zero(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i < k ? 0 : i - k + 1;
    const std::size_t hi = std::min(i, k - 1);
    for (std::size_t j = lo; j <= hi; ++j) X(i, j) = 1.0;
    X.row(i).normalize();
  }
  return {X, "dep"};
}

namespace {

FeatureMap drop_zero_columns(const MatrixXd& X, std::string name) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (X.col(j).cwiseAbs().maxCoeff() > 0.0) keep.push_back(j);
  MatrixXd out(X.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(keep[j]);
  return {out, std::move(name)};
}

}  // namespace

FeatureMap tile_coding(std::size_t n, std::size_t tilings, std::size_t tiles, Rng& rng) {
  if (n == 0 || tilings < 1 || tiles < 1) throw InvalidParameter("tile coding needs n, tilings, tiles >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // One spare tile per tiling absorbs the offset; unused columns are dropped.
  const std::size_t per = tiles + 1;
  MatrixXd X = MatrixXd::Zero(n, tilings * per);
  for (std::size_t t = 0; t < tilings; ++t) {
    const double offset = u(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double coord = static_cast<double>(i) / static_cast<double>(n);
      auto tile = static_cast<std::size_t>(std::floor(coord * static_cast<double>(tiles) + offset));
      tile = std::min(tile, tiles);
      X(i, t * per + tile) = 1.0;
    }
  }
  return drop_zero_columns(X, "tile:" + std::to_string(tilings) + "x" + std::to_string(tiles));
}

VectorXd ReluNetwork::forward(double position) const {
  const VectorXd hidden = (W1.col(0) * position + b1).cwiseMax(0.0);
  return (W2 * hidden + b2).cwiseMax(0.0);
}

ReluNetwork random_relu_network(std::size_t hidden, std::size_t out, double sparsity, Rng& rng) {
  if (hidden < 1 || out < 1) throw InvalidParameter("network layers must be nonempty");
  if (!(sparsity >= 0.0 && sparsity < 1.0)) throw InvalidParameter("sparsity must lie in [0,1)");
  const auto H = static_cast<Eigen::Index>(hidden);
  const auto O = static_cast<Eigen::Index>(out);
  auto xavier = [](Eigen::Index fan_in, Eigen::Index fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  };
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double lim1 = xavier(1, H);
  const double lim2 = xavier(H, O);
  ReluNetwork net;
  net.W1.resize(H, 1);
  net.b1.resize(H);
  net.W2.resize(O, H);
  net.b2.resize(O);
  for (Eigen::Index i = 0; i < H; ++i) net.W1(i, 0) = lim1 * unit(rng);
  for (Eigen::Index i = 0; i < H; ++i) net.b1[i] = lim1 * unit(rng);
  for (Eigen::Index i = 0; i < O; ++i)
    for (Eigen::Index j = 0; j < H; ++j) net.W2(i, j) = lim2 * unit(rng);
  for (Eigen::Index i = 0; i < O; ++i) net.b2[i] = lim2 * unit(rng);

  // Zero an exact share of the weights, chosen uniformly without replacement.
  const std::size_t total = hidden + hidden * out;
  const auto zeroed = static_cast<std::size_t>(std::llround(sparsity * static_cast<double>(total)));
  std::vector<std::size_t> idx(total);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < zeroed; ++i) {
    const std::size_t j = idx[i];
    if (j < hidden)
      net.W1(static_cast<Eigen::Index>(j), 0) = 0.0;
    else
      net.W2.data()[j - hidden] = 0.0;
  }
  return net;
}

FeatureMap random_relu_features(std::size_t n, std::size_t hidden, std::size_t out, double sparsity, Rng& rng) {
  if (n < 2) throw InvalidParameter("relu features need n >= 2");
  constexpr int kMaxDraws = 1000;
  for (int draw = 0; draw < kMaxDraws; ++draw) {
    const ReluNetwork net = random_relu_network(hidden, out, sparsity, rng);
    MatrixXd X(n, out);
    for (std::size_t i = 0; i < n; ++i) {
      const double pos = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
      X.row(static_cast<Eigen::Index>(i)) = net.forward(pos).transpose();
    }
    bool ok = true;
    for (Eigen::Index s = 0; s < X.rows() && ok; ++s) ok = X.row(s).maxCoeff() > 0.0;
    if (ok) {
      std::ostringstream name;
      name << "relu:" << hidden << "-" << out << "-" << sparsity;
      return {X, name.str()};
    }
  }
  throw NonConvergent("could not draw a network without dead states");
}

FeatureMap baird_features() {
  MatrixXd X = MatrixXd::Zero(7, 8);
  for (int s = 0; s < 6; ++s) {
    X(s, s) = 2.0;
    X(s, 7) = 1.0;
  }
  X(6, 6) = 1.0;
  X(6, 7) = 2.0;
  return {X, "baird"};
}

VectorXd baird_initial_weights() { return (VectorXd(8) << 1, 1, 1, 1, 1, 1, 10, 1).finished(); }

FeatureMap kolter_features() { return {(MatrixXd(2, 1) << 1.0, 1.5).finished(), "kolter"}; }

FeatureMap aliased_features() {
  MatrixXd X = MatrixXd::Zero(4, 3);
  X(0, 0) = X(1, 0) = 1.0;
  X(2, 1) = 1.0;
  X(3, 2) = 1.0;
  return {X, "aliased"};
}

FeatureMap independent_columns(const FeatureMap& f) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(f.X);
  qr.setThreshold(1e-10);
  const auto rank = qr.rank();
  if (rank == f.X.cols()) return f;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < rank; ++i) cols.push_back(qr.colsPermutation().indices()[i]);
  std::sort(cols.begin(), cols.end());
  MatrixXd X(f.X.rows(), rank);
  for (Eigen::Index i = 0; i < rank; ++i) X.col(i) = f.X.col(cols[static_cast<std::size_t>(i)]);
  return {X, f.name};
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double number(const std::string& s, const std::string& spec) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::logic_error&) {
  }
  throw InvalidParameter("bad feature parameter in '" + spec + "'");
}

std::size_t count(const std::string& s, const std::string& spec) {
  const double v = number(s, spec);
  if (v < 0 || v != std::floor(v)) throw InvalidParameter("expected a count in '" + spec + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

FeatureMap features_by_name(const std::string& spec, std::size_t n_states, Rng& rng) {
  const auto colon = spec.find(':');
  const std::string name = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : spec.substr(colon + 1);
  if (name == "tabular") return tabular(n_states);
  if (name == "agg") return state_aggregation(n_states, arg.empty() ? 2 : count(arg, spec));
  if (name == "dep") return dependent_features(n_states);
  if (name == "tile") {
    const auto parts = split(arg.empty() ? "4x4" : arg, 'x');
    if (parts.size() != 2) throw InvalidParameter("tile features are written tile:TILINGSxTILES");
    return tile_coding(n_states, count(parts[0], spec), count(parts[1], spec), rng);
  }
  if (name == "relu") {
    const auto parts = split(arg.empty() ? "76-9-0.25" : arg, '-');
    if (parts.size() != 3) throw InvalidParameter("relu features are written relu:HIDDEN-OUT-SPARSITY");
    return random_relu_features(n_states, count(parts[0], spec), count(parts[1], spec), number(parts[2], spec), rng);
  }
  auto fixed = [&](FeatureMap f) {
    if (static_cast<std::size_t>(f.n()) != n_states) throw InvalidParameter("'" + spec + "' does not fit this environment");
    return f;
  };
  if (name == "baird") return fixed(baird_features());
  if (name == "kolter") return fixed(kolter_features());
  if (name == "aliased") return fixed(aliased_features());
  throw InvalidParameter("unknown features '" + spec + "'");
}

std::string features_to_csv(const FeatureMap& f) {
  std::ostringstream os;
  os.precision(17);
  os << "state";
  for (Eigen::Index j = 0; j < f.k(); ++j) os << ",feature_" << j;
  os << "\n";
  for (Eigen::Index s = 0; s < f.n(); ++s) {
    os << s;
    for (Eigen::Index j = 0; j < f.k(); ++j) os << "," << f.X(s, j);
    os << "\n";
  }
  return os.str();
}

}  // namespace offpolicy
