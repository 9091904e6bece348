#pragma once

#include <cstdint>

#include "offpolicy/mdp.hpp"

namespace offpolicy {

std::uint64_t splitmix64(std::uint64_t x);

// Independent stream per (base seed, run index).
Rng seed_stream(std::uint64_t base_seed, std::uint64_t run_index);

// Uniform draw from the probability simplex of the given dimension.
VectorXd sample_simplex(Rng& rng, Eigen::Index dim);

// Policy with each row drawn uniformly from the simplex.
Policy random_policy(Rng& rng, std::size_t states, std::size_t actions);

}  // namespace offpolicy
