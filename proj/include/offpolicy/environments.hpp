#pragma once

#include <json.hpp>
#include <string>

#include "offpolicy/mdp.hpp"

namespace offpolicy {

struct Environment {
  std::string name;
  FiniteMdp mdp;
  Policy target;
  Policy behavior;
};

// Walk over n states whose end states are terminal. Entering the right end
// pays +1 and the left end -1; both actions in an end state restart at the
// center with gamma = 0.
Environment random_walk(std::size_t n, double gamma = 0.99);

// 7-state star: action 0 (dashed) jumps uniformly to states 0..5, action 1
// (solid) jumps to state 6. Behavior takes dashed w.p. 6/7, target solid always.
Environment baird_star(double gamma = 0.99);

// Two states, action k moves to state k. Target uniform, behavior takes
// action 0 with probability p in both states, so d_b = (p, 1 - p).
Environment kolter_family(double p);

// States A1, A2, B, C. A1 -> B -> exit with reward 1, A2 -> C -> exit with 0.
Environment aliased_four_state();

// States x, y with actions a1, a2. a1 moves x -> y and exits from y;
// a2 stays put. Target always a1, behavior uniform.
Environment two_action_chain();

// Three-state chain for control: action 0 left, action 1 right, exiting on
// the right end pays +1.
Environment control_chain(double gamma = 0.9);

// Builds by name: "random-walk[:n]", "baird", "kolter[:p]", "aliased",
// "two-action-chain", "control-chain", or a path to a JSON document.
Environment environment_by_name(const std::string& spec);

nlohmann::json mdp_to_json(const FiniteMdp& mdp);
FiniteMdp mdp_from_json(const nlohmann::json& j);

}  // namespace offpolicy
