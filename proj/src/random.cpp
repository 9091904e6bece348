#include "offpolicy/random.hpp"

#include <random>

namespace offpolicy {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng seed_stream(std::uint64_t base_seed, std::uint64_t run_index) {
  const std::uint64_t a = splitmix64(base_seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(run_index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(run_index), static_cast<std::uint32_t>(run_index >> 32)};
  return Rng(seq);
}

VectorXd sample_simplex(Rng& rng, Eigen::Index dim) {
  std::exponential_distribution<double> e(1.0);
  VectorXd v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = e(rng);
  return v / v.sum();
}

Policy random_policy(Rng& rng, std::size_t states, std::size_t actions) {
  MatrixXd p(states, actions);
  for (std::size_t s = 0; s < states; ++s)
    p.row(static_cast<Eigen::Index>(s)) = sample_simplex(rng, static_cast<Eigen::Index>(actions)).transpose();
  return Policy(std::move(p));
}

}  // namespace offpolicy
