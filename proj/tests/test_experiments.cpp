#include "catch_amalgamated.hpp"

#include "spherecons/experiments.hpp"

#include <cmath>
#include <sstream>

using namespace spherecons;
using namespace spherecons::experiments;

namespace {

ExperimentConfig small(std::string_view kind, long trials, std::uint64_t seed) {
  ExperimentConfig c = defaults_for(kind);
  c.trials = trials;
  c.seed = seed;
  c.workers = 1;
  return c;
}

std::string csv(const std::vector<TrialRecord>& records) {
  std::ostringstream os;
  write_records_csv(os, records);
  return os.str();
}

}  // namespace

TEST_CASE("derived seeds", "[experiments]") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
}

TEST_CASE("config validation", "[experiments]") {
  ExperimentConfig c = defaults_for("sweep");
  CHECK_THROWS_AS(validate(c), InvalidArgument);
  c.seed = 1;
  CHECK_NOTHROW(validate(c));
  for (auto bad : {+[](ExperimentConfig& x) { x.trials = 0; }, +[](ExperimentConfig& x) { x.n_min = 1; },
                   +[](ExperimentConfig& x) { x.d_max = 1; }, +[](ExperimentConfig& x) { x.edge_prob_max = 1.5; },
                   +[](ExperimentConfig& x) { x.margin = 0; }, +[](ExperimentConfig& x) { x.fp_tol = 0; }}) {
    ExperimentConfig b = c;
    bad(b);
    CHECK_THROWS_AS(validate(b), InvalidArgument);
  }
  CHECK_THROWS_AS(parse_graph_family("tree"), InvalidArgument);
}

TEST_CASE("config JSON round trip", "[experiments]") {
  ExperimentConfig c = defaults_for("rank-table");
  c.seed = 77;
  c.margin = 0.3;
  c.weight_law.lower = 0.2;
  const ExperimentConfig back = config_from_json(to_json(c), ExperimentConfig{});
  CHECK(to_json(back) == to_json(c));

  const ExperimentConfig shorthand =
      config_from_json(Json::parse(R"({"n": 5, "d": 3, "edge_prob": 0.2, "cells": [[3, 2]]})"), defaults_for("sweep"));
  CHECK(shorthand.n_min == 5);
  CHECK(shorthand.n_max == 5);
  CHECK(shorthand.d_min == 3);
  CHECK(shorthand.edge_prob_min == 0.2);
  CHECK(shorthand.edge_prob_max == 0.2);
  CHECK(shorthand.cells == std::vector<std::pair<Index, Index>>{{3, 2}});
}

TEST_CASE("records CSV round trip", "[experiments]") {
  TrialRecord r;
  r.trial = 3;
  r.seed = 0xFFFFFFFFFFFFFFFFULL;
  r.n = 4;
  r.d = 2;
  r.graph_hash = 0x0123456789abcdefULL;
  r.matrix_hash = 42;
  r.cls = "higher-rank";
  r.rank = 2;
  r.iters = 1234;
  r.residual_a = 1.0 / 3.0;
  r.residual_ma = 1e-13;
  TrialRecord e;  // error record: NaN residuals
  const std::vector<TrialRecord> in{r, e};
  std::istringstream is(csv(in));
  const auto out = read_records_csv(is);
  REQUIRE(out.size() == 2);
  CHECK(out[0].seed == r.seed);
  CHECK(out[0].graph_hash == r.graph_hash);
  CHECK(out[0].matrix_hash == r.matrix_hash);
  CHECK(out[0].cls == r.cls);
  CHECK(out[0].residual_a == r.residual_a);
  CHECK(out[0].residual_ma == r.residual_ma);
  CHECK(std::isnan(out[0].spec_radius));
  CHECK(out[1].cls == "error");
  CHECK(csv(out) == csv(in));

  std::istringstream bad("trial,seed\n1,2\n");
  CHECK_THROWS_AS(read_records_csv(bad), InvalidArgument);
}

TEST_CASE("sweep is reproducible and independent of the worker count", "[experiments]") {
  ExperimentConfig c = small("sweep", 40, 11);
  const Report a = consensus_sweep(c);
  const Report b = consensus_sweep(c);
  c.workers = 4;
  const Report p = consensus_sweep(c);
  CHECK(csv(a.records) == csv(b.records));
  CHECK(csv(a.records) == csv(p.records));
  CHECK(a.summary["consensus"] == 40);
  CHECK(a.summary["errors"] == 0);
  for (std::size_t k = 0; k < a.records.size(); ++k) CHECK(a.records[k].trial == static_cast<long>(k));

  c.seed = 12;
  CHECK(csv(consensus_sweep(c).records) != csv(a.records));
}

TEST_CASE("a trial started at consensus converges at iteration zero", "[experiments]") {
  const TrialSetup s = sample_setup(small("sweep", 1, 3), 5);
  const Configuration c = consensus_configuration(s.n, s.x0.agent(0));
  const TrajectoryResult r = run(IterationMatrix(s.a), c);
  CHECK(r.iterations == 0);
  CHECK(r.converged);
}

TEST_CASE("sampled setups follow the configuration", "[experiments]") {
  ExperimentConfig c = small("sweep", 1, 1);
  c.n_min = 3;
  c.n_max = 5;
  c.d_min = c.d_max = 4;
  long symmetric = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const TrialSetup s = sample_setup(c, t);
    REQUIRE(s.n >= 3);
    REQUIRE(s.n <= 5);
    REQUIRE(s.d == 4);
    REQUIRE(is_strongly_connected(s.a.graph()));
    REQUIRE(is_strictly_diagonally_dominant(s.a));
    REQUIRE(s.a.is_symmetric() == s.symmetric);
    symmetric += s.symmetric;
  }
  CHECK(symmetric > 60);
  CHECK(symmetric < 140);

  const TrialSetup fixed = sample_setup(c, 9, std::make_pair<Index, Index>(7, 3));
  CHECK(fixed.n == 7);
  CHECK(fixed.d == 3);

  ExperimentConfig automatic = small("theorem2", 1, 1);
  for (std::uint64_t t = 0; t < 50; ++t) {
    const TrialSetup s = sample_setup(automatic, t);
    REQUIRE_FALSE(s.symmetric);
    if (s.d >= 3) REQUIRE(s.a.graph() == complete_graph(s.n));
  }
}

TEST_CASE("parallel_map keeps index order", "[experiments]") {
  const auto out = parallel_map<long>(1000, 8, [](long i) { return i * i; });
  for (long i = 0; i < 1000; ++i) REQUIRE(out[static_cast<std::size_t>(i)] == i * i);
}

TEST_CASE("rank table", "[experiments]") {
  ExperimentConfig c = small("rank-table", 60, 5);
  c.cells = {{3, 2}, {4, 3}};
  const Report r = rank_table(c);
  CHECK(r.records.size() == 120);
  const Json& table = r.summary["table"];
  REQUIRE(table.size() == 2);
  for (const Json& row : table) {
    double total = 0;
    for (double f : row["fractions"]) total += f;
    CHECK(total == Catch::Approx(1.0));
    long counted = 0;
    for (long k : row["counts"]) counted += k;
    CHECK(counted == row["converged"].get<long>());
  }
  CHECK(table[0].contains("reference"));

  c.symmetric = false;
  CHECK_THROWS_AS(rank_table(c), InvalidArgument);
}

TEST_CASE("reference table", "[experiments]") {
  const auto ref = reference_rank_table();
  CHECK(ref.at({3, 2})[0] == 0.7571);
  CHECK(ref.at({3, 2})[1] == 0.2429);
  CHECK(ref.at({6, 2})[0] == 0.3528);
  CHECK(ref.at({6, 2})[1] == 0.6472);
}

TEST_CASE("theorem2 probe", "[experiments]") {
  ExperimentConfig c = small("theorem2", 30, 4);
  c.perturbation_trials = 2;
  const Report r = theorem2_probe(c);
  CHECK(r.summary["rank_ge_2"] == 0);
  CHECK(r.summary["counterexamples"].empty());
  CHECK(r.summary["converged"].get<long>() + r.summary["unconverged"].get<long>() +
            static_cast<long>(r.summary["failures"].size()) ==
        30);
  CHECK(r.summary["perturbation"]["symmetric_rank2_found"] == 2);
  c.symmetric = true;
  CHECK_THROWS_AS(theorem2_probe(c), InvalidArgument);
}

TEST_CASE("asymmetric perturbation keeps the zero pattern", "[experiments]") {
  const WeightMatrix a = sample_sdd(random_symmetric_connected(6, 0.3, 1, SymmetricGraphModel::ErdosRenyi), 0.1, true, 2);
  const WeightMatrix p = asymmetric_perturbation(a, 1e-3, 3);
  CHECK(p.graph() == a.graph());
  CHECK_FALSE(p.is_symmetric());
  CHECK(p.entries().diagonal() == a.entries().diagonal());
  CHECK(((p.entries() - a.entries()).array().abs() <= 1e-3 * a.entries().array() + 1e-18).all());
}

TEST_CASE("pentagon demo", "[experiments]") {
  const PentagonReport r = pentagon_demo();
  CHECK(r.residual < 1e-12);
  CHECK(std::abs(r.spectral_radius - 1.0) <= 1e-9);
  CHECK(r.cls == Classification{ConfigurationClass::HigherRank, 2});
  CHECK(r.min_neighbor_dot == Catch::Approx(std::cos(2 * std::numbers::pi / 5)));
  CHECK(r.max_neighbor_dot == Catch::Approx(std::cos(2 * std::numbers::pi / 5)));
  CHECK(r.neutrality.neutral);
  CHECK(r.stability.kind == StabilityClass::NeutralNonConsensus);
}

TEST_CASE("tangent kick", "[experiments]") {
  const Configuration c = random_configuration(4, 3, 1);
  const Configuration k = tangent_kick(c, 1e-6, 2);
  CHECK((k.rows() - c.rows()).norm() == Catch::Approx(1e-6).epsilon(1e-3));
  CHECK((tangent_kick(c, 1e-6, 2).rows() - k.rows()).norm() == 0.0);
}

TEST_CASE("audit", "[experiments]") {
  ExperimentConfig c = small("audit", 10, 2024);
  c.det_matrices = 20;
  const AuditReport r = stability_audit(c);
  CHECK(r.summary["fixed_points"] == r.summary["unstable_certified"]);
  CHECK(r.summary["fixed_points"] == r.summary["trace_formula_matches"]);
  CHECK(r.det.evaluations == 200);
  CHECK(r.det.det_failures == 0);
  CHECK(r.det.cos_bound_failures == 0);
  c.d_min = c.d_max = 2;
  CHECK_THROWS_AS(stability_audit(c), InvalidArgument);
}

TEST_CASE("jg rank", "[experiments]") {
  const JgReport r = jg_rank(small("jg-rank", 6, 3));
  CHECK(r.summary["fixed_points"] == r.summary["full_rank"]);
  CHECK(r.summary["symmetric_checked"] == r.summary["symmetric_bound_satisfied"]);
  CHECK(r.summary["errors"] == 0);
}
