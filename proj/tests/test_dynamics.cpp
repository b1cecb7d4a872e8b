#include "catch_amalgamated.hpp"

#include "spherecons/dynamics.hpp"
#include "spherecons/graph.hpp"

#include <cmath>

using namespace spherecons;

namespace {

WeightMatrix two_agents() {
  Matrix a(2, 2);
  a << 3, 1, 1, 3;
  return WeightMatrix::from_entries(a);
}

Configuration axes() { return Configuration::from_rows(Matrix::Identity(2, 2)); }

// Direct oracle: y_i = sum_j m_ij x_j / ||sum_j m_ij x_j|| written out agent by agent.
Matrix iterate_oracle(const Matrix& m, const Matrix& x) {
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.rows(); ++j) y.row(i) += m(i, j) * x.row(j);
    y.row(i) /= std::sqrt(y.row(i).squaredNorm());
  }
  return y;
}

struct Problem {
  WeightMatrix a;
  Configuration x0;
};

Problem random_problem(std::uint64_t seed, bool symmetric) {
  const Index n = 2 + static_cast<Index>(seed % 6), d = 2 + static_cast<Index>(seed % 3);
  const DirectedGraph g = symmetric ? random_symmetric_connected(n, 0.4, seed, SymmetricGraphModel::ErdosRenyi)
                                    : random_strongly_connected(n, 0.4, seed);
  return {sample_sdd(g, 0.1, symmetric, seed + 1), random_configuration(n, d, seed + 2)};
}

}  // namespace

TEST_CASE("one step on two agents", "[dynamics]") {
  const Configuration y = iterate(IterationMatrix(two_agents()), axes());
  Matrix expected(2, 2);
  expected << 3, 1, 1, 3;
  expected /= std::sqrt(10.0);
  CHECK((y.rows() - expected).cwiseAbs().maxCoeff() <= 1e-15);

  const Vector dvec = normalization_diagonal(IterationMatrix(two_agents()), axes());
  CHECK(std::abs(dvec(0) - 1 / std::sqrt(10.0)) <= 1e-15);
  CHECK(std::abs(dvec(1) - 1 / std::sqrt(10.0)) <= 1e-15);
  CHECK(potential(two_agents(), axes()) == 6.0);
}

TEST_CASE("iterate matches the agent-wise oracle", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Problem p = random_problem(seed, seed % 2 == 0);
    const Configuration y = iterate(IterationMatrix(p.a), p.x0);
    REQUIRE((y.rows() - iterate_oracle(p.a.entries(), p.x0.rows())).cwiseAbs().maxCoeff() <= 1e-14);
    for (Index i = 0; i < y.agents(); ++i) REQUIRE(std::abs(y.rows().row(i).norm() - 1.0) <= 1e-14);
  }
}

TEST_CASE("potential is the sum of weighted dot products", "[dynamics]") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const Problem p = random_problem(seed, false);
    double v = 0;
    for (Index i = 0; i < p.a.size(); ++i)
      for (Index j = 0; j < p.a.size(); ++j) v += p.a(i, j) * p.x0.rows().row(i).dot(p.x0.rows().row(j));
    REQUIRE(std::abs(potential(p.a, p.x0) - v) <= 1e-12 * (1 + std::abs(v)));
  }
}

TEST_CASE("consensus is a fixed point", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Problem p = random_problem(seed, seed % 2 == 1);
    const Configuration c = consensus_configuration(p.a.size(), random_configuration(1, p.x0.dim(), seed).agent(0));
    REQUIRE(fixed_point_residual(IterationMatrix(p.a), c) <= 1e-14);
    const TrajectoryResult r = run(IterationMatrix(p.a), c);
    REQUIRE(r.iterations == 0);
    REQUIRE(r.converged);
  }
}

TEST_CASE("states stay in the open half-space of their predecessor", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Problem p = random_problem(seed, false);
    const Configuration y = iterate(IterationMatrix(p.a), p.x0);
    for (Index i = 0; i < y.agents(); ++i) REQUIRE(p.x0.rows().row(i).dot(y.rows().row(i)) > 0.0);
  }
}

TEST_CASE("potential never decreases for symmetric weights", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Problem p = random_problem(seed, true);
    RunOptions opts;
    opts.record_potential = true;
    opts.max_iter = 500;
    const TrajectoryResult r = run(IterationMatrix(p.a), p.x0, opts);
    REQUIRE(r.potential_history.size() == static_cast<std::size_t>(r.iterations + 1));
    for (std::size_t k = 1; k < r.potential_history.size(); ++k)
      REQUIRE(r.potential_history[k] >= r.potential_history[k - 1] - 1e-12 * std::abs(r.potential_history[k - 1]));
  }
}

TEST_CASE("descent mode never increases the potential", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Problem p = random_problem(seed, true);
    const DescentMatrix md = descent_matrix(p.a);
    RunOptions opts;
    opts.record_potential = true;
    opts.max_iter = 2000;
    opts.potential_matrix = p.a.entries();
    const TrajectoryResult r = run(IterationMatrix(md), p.x0, opts);
    for (std::size_t k = 1; k < r.potential_history.size(); ++k)
      REQUIRE(r.potential_history[k] <= r.potential_history[k - 1] + 1e-12 * std::abs(r.potential_history[k - 1]));
  }
}

TEST_CASE("converged runs end at fixed points", "[dynamics][property]") {
  int converged = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Problem p = random_problem(seed, seed % 2 == 0);
    const TrajectoryResult r = run(IterationMatrix(p.a), p.x0);
    if (!r.converged) continue;
    ++converged;
    REQUIRE(r.residual <= kFixedPointTol);
    REQUIRE(fixed_point_residual(IterationMatrix(p.a), r.final) <= kFixedPointTol);
  }
  CHECK(converged >= 50);
}

TEST_CASE("descent fixed points are fixed points of the weight iteration", "[dynamics][property]") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Problem p = random_problem(seed, true);
    const DescentResult r = find_nonconsensus_fixed_point(p.a, p.x0);
    if (!r.trajectory.converged) continue;
    REQUIRE(r.residual_descent <= kFixedPointTol);
    REQUIRE(r.residual_weight <= 1e-9);
    REQUIRE(r.alpha == Catch::Approx(1.25 * p.a.entries().rowwise().sum().maxCoeff()));
  }
}

TEST_CASE("run honours the iteration cap", "[dynamics]") {
  const Problem p = random_problem(7, false);
  RunOptions opts;
  opts.max_iter = 3;
  const TrajectoryResult r = run(IterationMatrix(p.a), p.x0, opts);
  CHECK(r.iterations == 3);
  CHECK_FALSE(r.converged);
  Configuration x = p.x0;
  for (int k = 0; k < 3; ++k) x = iterate(IterationMatrix(p.a), x);
  CHECK((x.rows() - r.final.rows()).norm() <= 1e-15);
  opts.max_iter = -1;
  CHECK_THROWS_AS(run(IterationMatrix(p.a), p.x0, opts), InvalidArgument);
}

TEST_CASE("collected trajectories", "[dynamics]") {
  const Problem p = random_problem(3, true);
  const auto states = collect_trajectory(IterationMatrix(p.a), p.x0, 10);
  CHECK(states.size() == 11);
  CHECK(states.front().rows() == p.x0.rows());
  for (std::size_t k = 1; k < states.size(); ++k)
    CHECK((states[k].rows() - iterate(IterationMatrix(p.a), states[k - 1]).rows()).norm() == 0.0);

  const Configuration c = consensus_configuration(2, Vector::Unit(2, 0));
  CHECK(collect_trajectory(IterationMatrix(two_agents()), c, 10).size() == 2);
}

TEST_CASE("input validation", "[dynamics]") {
  Matrix weak(2, 2);
  weak << 1, 1, 1, 1;
  CHECK_THROWS_AS(IterationMatrix(WeightMatrix::from_entries(weak)), InvalidArgument);
  CHECK_THROWS_AS(iterate(IterationMatrix(two_agents()), random_configuration(3, 2, 1)), InvalidArgument);

  Matrix m(2, 2);
  m << 1, -1, 0, 1;
  Matrix x(2, 2);
  x << 1, 0, 1, 0;
  Matrix out(2, 2);
  try {
    detail::step(m, x, out);
    FAIL("expected ZeroRowImage");
  } catch (const ZeroRowImage& e) {
    CHECK(e.agent() == 0);
  }
}
