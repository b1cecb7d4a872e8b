// Writes one trajectory of the iteration as CSV: iteration,agent,x1..xd,V.
//
//   trajectory [n] [d] [seed] > path.csv

#include "spherecons/dynamics.hpp"
#include "spherecons/graph.hpp"
#include "spherecons/io.hpp"

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  using namespace spherecons;
  const Index n = argc > 1 ? std::atol(argv[1]) : 6;
  const Index d = argc > 2 ? std::atol(argv[2]) : 3;
  const std::uint64_t seed = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 1;

  const WeightMatrix a =
      sample_sdd(random_symmetric_connected(n, 0.4, derive_seed(seed, 1), SymmetricGraphModel::UniformTree), 0.1,
                 true, derive_seed(seed, 2));
  const IterationMatrix m(a);
  const auto states = collect_trajectory(m, random_configuration(n, d, derive_seed(seed, 3)), 10000);
  std::vector<double> v;
  for (const Configuration& c : states) v.push_back(potential(a, c));
  write_trajectory_csv(std::cout, states, v);
  std::cerr << states.size() - 1 << " steps, final class "
            << to_string(classify_configuration(states.back()).kind) << '\n';
  return 0;
}
