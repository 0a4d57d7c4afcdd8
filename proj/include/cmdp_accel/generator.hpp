#pragma once

#include "cmdp_accel/mdp_core.hpp"

#include <cstdint>

namespace cmdp_accel {

struct GeneratorParams {
  std::uint64_t seed = 0;
  int num_states = 5;
  int num_actions = 3;
  int num_constraints = 1;
  double discount = 0.9;
  double threshold_fraction = 0.5;
};

// Random instance: Dirichlet(1) transition rows, Uniform[0,1] rewards, uniform
// rho, and c_i = threshold_fraction * max_pi V_i. Draws are retried with
// seed + 1, seed + 2, ... (at most 10 attempts) until the Slater margin is
// positive. Deterministic in the parameters.
TabularCmdp gen_random_cmdp(const GeneratorParams& params);

TabularCmdp gen_random_cmdp(std::uint64_t seed, int num_states, int num_actions,
                            int num_constraints, double discount, double threshold_fraction);

}  // namespace cmdp_accel
