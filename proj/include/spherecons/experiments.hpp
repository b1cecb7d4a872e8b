#pragma once

// Seeded Monte-Carlo experiments.
//
// Every trial t of an experiment with master seed s draws all of its randomness
// from trial_seed = derive_seed(s, t) (or, for per-cell experiments, from
// derive_seed(derive_seed(s, cell_key), t)), split further into independent
// streams for parameters, graph, weights, initial state and noise. Trials share
// no mutable state, so the worker count never changes a result.

#include "spherecons/common.hpp"
#include "spherecons/dynamics.hpp"
#include "spherecons/fixed_point_lab.hpp"
#include "spherecons/graph.hpp"
#include "spherecons/io.hpp"
#include "spherecons/linalg.hpp"
#include "spherecons/sphere_state.hpp"
#include "spherecons/stability.hpp"
#include "spherecons/weights.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace spherecons::experiments {

enum class GraphFamily {
  Directed,   // random strongly connected digraph
  Symmetric,  // random connected undirected graph
  Mixed,      // Directed or Symmetric with probability 1/2 each
  Complete,
  Auto,       // Directed when d = 2, Complete when d >= 3
};

inline std::string_view to_string(GraphFamily g) {
  switch (g) {
    case GraphFamily::Directed: return "directed";
    case GraphFamily::Symmetric: return "symmetric";
    case GraphFamily::Mixed: return "mixed";
    case GraphFamily::Complete: return "complete";
    case GraphFamily::Auto: return "auto";
  }
  return "?";
}

inline GraphFamily parse_graph_family(std::string_view s) {
  if (s == "directed") return GraphFamily::Directed;
  if (s == "symmetric") return GraphFamily::Symmetric;
  if (s == "mixed") return GraphFamily::Mixed;
  if (s == "complete") return GraphFamily::Complete;
  if (s == "auto") return GraphFamily::Auto;
  throw InvalidArgument("unknown graph family '" + std::string(s) + "'");
}

struct ExperimentConfig {
  std::string kind;
  Index n_min = 3, n_max = 8;
  Index d_min = 2, d_max = 5;
  std::vector<std::pair<Index, Index>> cells;  // (n, d) cells for rank-table
  GraphFamily graph = GraphFamily::Directed;
  DirectedGraphModel directed_model = DirectedGraphModel::Cycle;
  SymmetricGraphModel symmetric_model = SymmetricGraphModel::ErdosRenyi;
  double edge_prob_min = 0.5, edge_prob_max = 0.5;  // drawn uniformly per trial
  bool symmetric = false;
  double margin = 0.1;
  WeightLaw weight_law;
  double slack = kDefaultSlack;
  long trials = 1000;
  std::optional<std::uint64_t> seed;
  double fp_tol = kFixedPointTol;
  long max_iter = kMaxIterations;
  double consensus_tol = kConsensusTol;
  double rank_tol = kRankTol;
  double perturbation = 1e-3;    // theorem2: relative asymmetric noise on A
  long perturbation_trials = 20;
  double tangent_noise = 1e-6;   // audit: size of the kick off each fixed point
  long det_matrices = 1000;      // audit: sqrt(2)-condition matrices
  long det_configurations = 10;  // audit: configurations per matrix
  double sqrt2_margin = 0.45;    // audit: dominance margin for those matrices
  unsigned workers = 0;          // 0 = hardware concurrency
  std::string out_dir;
};

inline void validate(const ExperimentConfig& c) {
  require(c.trials >= 1, "trials must be >= 1");
  require(c.seed.has_value(), "a seed is required (no wall-clock seeding)");
  require(c.fp_tol > 0 && c.consensus_tol > 0 && c.rank_tol > 0, "tolerances must be positive");
  require(c.max_iter >= 1, "max_iter must be >= 1");
  require(c.n_min >= 2 && c.n_max >= c.n_min, "invalid n range");
  require(c.d_min >= 2 && c.d_max >= c.d_min, "invalid d range");
  require(c.edge_prob_min >= 0 && c.edge_prob_max <= 1 && c.edge_prob_min <= c.edge_prob_max,
          "invalid edge probability range");
  require(c.margin > 0 && c.slack > 0, "margin and slack must be positive");
  for (const auto& [n, d] : c.cells) require(n >= 2 && d >= 2, "rank-table cells need n >= 2 and d >= 2");
}

/// Per-command defaults, before any config file or flag is applied.
inline ExperimentConfig defaults_for(std::string_view kind) {
  ExperimentConfig c;
  c.kind = std::string(kind);
  if (kind == "sweep") {
    c.graph = GraphFamily::Mixed;
    c.directed_model = DirectedGraphModel::BidirectedTree;
    c.trials = 10000;
  } else if (kind == "rank-table") {
    c.graph = GraphFamily::Symmetric;
    c.symmetric_model = SymmetricGraphModel::UniformTree;
    c.edge_prob_min = 0.1;
    c.edge_prob_max = 0.65;
    c.symmetric = true;
    c.trials = 10000;
    c.cells = {{3, 2}, {6, 2}, {4, 3}, {6, 3}, {7, 4}, {8, 5}};
  } else if (kind == "theorem2") {
    c.graph = GraphFamily::Auto;
    c.d_min = 2;
    c.d_max = 4;
    c.trials = 10000;
    // Non-symmetric descent often settles on a rotating orbit instead of a
    // fixed point; converged runs need well under 10^5 steps.
    c.max_iter = 100000;
  } else if (kind == "audit") {
    c.graph = GraphFamily::Symmetric;
    c.symmetric = true;
    c.n_min = c.n_max = 4;
    c.d_min = c.d_max = 3;
    c.trials = 100;
  } else if (kind == "jg-rank") {
    c.graph = GraphFamily::Complete;
    c.symmetric = true;
    c.n_min = 4;
    c.n_max = 6;
    c.d_min = 2;
    c.d_max = 4;
    c.trials = 50;
  }
  return c;
}

inline ExperimentConfig config_from_json(const Json& j, ExperimentConfig c) {
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("kind", c.kind);
  get("n_min", c.n_min);
  get("n_max", c.n_max);
  get("d_min", c.d_min);
  get("d_max", c.d_max);
  if (j.contains("n")) c.n_min = c.n_max = j.at("n").get<Index>();
  if (j.contains("d")) c.d_min = c.d_max = j.at("d").get<Index>();
  if (j.contains("cells")) {
    c.cells.clear();
    for (const Json& cell : j.at("cells")) c.cells.emplace_back(cell.at(0).get<Index>(), cell.at(1).get<Index>());
  }
  if (j.contains("graph")) c.graph = parse_graph_family(j.at("graph").get<std::string>());
  if (j.contains("directed_model")) c.directed_model = parse_directed_model(j.at("directed_model").get<std::string>());
  if (j.contains("symmetric_model")) c.symmetric_model = parse_symmetric_model(j.at("symmetric_model").get<std::string>());
  if (j.contains("edge_prob")) c.edge_prob_min = c.edge_prob_max = j.at("edge_prob").get<double>();
  get("edge_prob_min", c.edge_prob_min);
  get("edge_prob_max", c.edge_prob_max);
  get("symmetric", c.symmetric);
  get("margin", c.margin);
  get("weight_lower", c.weight_law.lower);
  get("weight_mirror", c.weight_law.mirror);
  get("slack", c.slack);
  get("trials", c.trials);
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  get("fp_tol", c.fp_tol);
  get("max_iter", c.max_iter);
  get("consensus_tol", c.consensus_tol);
  get("rank_tol", c.rank_tol);
  get("perturbation", c.perturbation);
  get("perturbation_trials", c.perturbation_trials);
  get("tangent_noise", c.tangent_noise);
  get("det_matrices", c.det_matrices);
  get("det_configurations", c.det_configurations);
  get("sqrt2_margin", c.sqrt2_margin);
  get("workers", c.workers);
  get("out", c.out_dir);
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json cells = Json::array();
  for (const auto& [n, d] : c.cells) cells.push_back({n, d});
  return Json{{"kind", c.kind},
              {"n_min", c.n_min},
              {"n_max", c.n_max},
              {"d_min", c.d_min},
              {"d_max", c.d_max},
              {"cells", cells},
              {"graph", to_string(c.graph)},
              {"directed_model", to_string(c.directed_model)},
              {"symmetric_model", to_string(c.symmetric_model)},
              {"edge_prob_min", c.edge_prob_min},
              {"edge_prob_max", c.edge_prob_max},
              {"symmetric", c.symmetric},
              {"margin", c.margin},
              {"weight_lower", c.weight_law.lower},
              {"weight_mirror", c.weight_law.mirror},
              {"slack", c.slack},
              {"trials", c.trials},
              {"seed", c.seed.value_or(0)},
              {"fp_tol", c.fp_tol},
              {"max_iter", c.max_iter},
              {"consensus_tol", c.consensus_tol},
              {"rank_tol", c.rank_tol},
              {"perturbation", c.perturbation},
              {"perturbation_trials", c.perturbation_trials},
              {"tangent_noise", c.tangent_noise},
              {"det_matrices", c.det_matrices},
              {"det_configurations", c.det_configurations},
              {"sqrt2_margin", c.sqrt2_margin}};
}

/// Sampling laws that the results depend on, stored with every summary.
inline Json sampling_metadata(const ExperimentConfig& c) {
  return Json{{"directed_graph_model", to_string(c.directed_model)},
              {"symmetric_graph_model", to_string(c.symmetric_model)},
              {"edge_prob", {c.edge_prob_min, c.edge_prob_max}},
              {"off_diagonal_law", "uniform on (" + format_double(c.weight_law.lower) + ", 1]"},
              {"symmetric_weights", c.weight_law.mirror ? "mirror the i<j draw" : "average the (i,j) and (j,i) draws"},
              {"diagonal", "(1 + margin) * off-diagonal row sum"},
              {"initial_state", "rows i.i.d. uniform on the sphere"},
              {"rng", "mt19937_64, per-trial seeds from splitmix64"}};
}

// ---------------------------------------------------------------------------
// Trial records

struct TrialRecord {
  long trial = 0;
  std::uint64_t seed = 0;
  Index n = 0, d = 0;
  std::uint64_t graph_hash = 0, matrix_hash = 0;
  std::string cls = "error";  // consensus | antipodal | higher-rank | error
  Index rank = 0;
  long iters = 0;
  double residual_a = std::numeric_limits<double>::quiet_NaN();
  double residual_ma = std::numeric_limits<double>::quiet_NaN();
  double spec_radius = std::numeric_limits<double>::quiet_NaN();
  // Not part of records.csv.
  bool converged = false;
  bool symmetric = false;
  double max_potential_drop = 0;  // max_k V(x_k) - V(x_{k+1}), symmetric sweeps only
  std::string error;
};

inline constexpr std::string_view kRecordsHeader =
    "trial,seed,n,d,graph_hash,matrix_hash,class,rank,iters,residual_A,residual_MA,spec_radius";

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline void write_records_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  os << kRecordsHeader << '\n';
  for (const TrialRecord& r : records)
    os << r.trial << ',' << r.seed << ',' << r.n << ',' << r.d << ',' << hex64(r.graph_hash) << ','
       << hex64(r.matrix_hash) << ',' << r.cls << ',' << r.rank << ',' << r.iters << ',' << format_double(r.residual_a)
       << ',' << format_double(r.residual_ma) << ',' << format_double(r.spec_radius) << '\n';
}

inline std::vector<TrialRecord> read_records_csv(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)) && line == kRecordsHeader, "records.csv: unexpected header");
  std::vector<TrialRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    require(f.size() == 12, "records.csv: expected 12 fields, got " + std::to_string(f.size()));
    TrialRecord r;
    r.trial = std::stol(f[0]);
    r.seed = std::stoull(f[1]);
    r.n = std::stol(f[2]);
    r.d = std::stol(f[3]);
    r.graph_hash = std::stoull(f[4], nullptr, 16);
    r.matrix_hash = std::stoull(f[5], nullptr, 16);
    r.cls = f[6];
    r.rank = std::stol(f[7]);
    r.iters = std::stol(f[8]);
    r.residual_a = std::strtod(f[9].c_str(), nullptr);
    r.residual_ma = std::strtod(f[10].c_str(), nullptr);
    r.spec_radius = std::strtod(f[11].c_str(), nullptr);
    out.push_back(std::move(r));
  }
  return out;
}

/// Report of one experiment command: per-trial records plus a JSON summary.
struct Report {
  std::vector<TrialRecord> records;
  Json summary;
};

// ---------------------------------------------------------------------------
// Sampling and scheduling

enum Stream : std::uint64_t { kParams = 0, kGraph = 1, kWeights = 2, kStart = 3, kNoise = 4 };

struct TrialSetup {
  Index n = 0, d = 0;
  bool symmetric = false;
  WeightMatrix a;
  Configuration x0;
};

/// Draws (n, d, graph, A, X0) for one trial. `cell` fixes (n, d) when given.
inline TrialSetup sample_setup(const ExperimentConfig& cfg, std::uint64_t trial_seed,
                               std::optional<std::pair<Index, Index>> cell = std::nullopt) {
  std::mt19937_64 params(derive_seed(trial_seed, kParams));
  Index n = 0, d = 0;
  if (cell) {
    std::tie(n, d) = *cell;
  } else {
    n = std::uniform_int_distribution<Index>(cfg.n_min, cfg.n_max)(params);
    d = std::uniform_int_distribution<Index>(cfg.d_min, cfg.d_max)(params);
  }
  const double p = cfg.edge_prob_min == cfg.edge_prob_max
                       ? cfg.edge_prob_min
                       : std::uniform_real_distribution<double>(cfg.edge_prob_min, cfg.edge_prob_max)(params);

  GraphFamily family = cfg.graph;
  if (family == GraphFamily::Mixed)
    family = std::bernoulli_distribution(0.5)(params) ? GraphFamily::Symmetric : GraphFamily::Directed;
  if (family == GraphFamily::Auto) family = d == 2 ? GraphFamily::Directed : GraphFamily::Complete;

  const std::uint64_t graph_seed = derive_seed(trial_seed, kGraph);
  bool symmetric = false;
  std::optional<DirectedGraph> g;
  switch (family) {
    case GraphFamily::Directed:
      g = random_strongly_connected(n, p, graph_seed, cfg.directed_model);
      symmetric = false;
      break;
    case GraphFamily::Symmetric:
      g = random_symmetric_connected(n, p, graph_seed, cfg.symmetric_model);
      symmetric = cfg.kind == "sweep" ? true : cfg.symmetric;
      break;
    default:
      g = complete_graph(n);
      symmetric = cfg.symmetric;
      break;
  }
  WeightMatrix a = sample_sdd(*g, cfg.margin, symmetric, derive_seed(trial_seed, kWeights), cfg.weight_law);
  Configuration x0 = random_configuration(n, d, derive_seed(trial_seed, kStart));
  return TrialSetup{n, d, symmetric, std::move(a), std::move(x0)};
}

/// Runs body(i) for i in [0, count) on `workers` threads and returns the
/// results in index order.
template <class Result, class Body>
std::vector<Result> parallel_map(long count, unsigned workers, Body body) {
  std::vector<Result> out(static_cast<std::size_t>(count));
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<long>(workers, count));
  std::atomic<long> next{0};
  auto worker = [&] {
    for (long i = next++; i < count; i = next++) out[static_cast<std::size_t>(i)] = body(i);
  };
  if (workers <= 1) {
    worker();
    return out;
  }
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  return out;
}

inline double limit_spectral_radius(const WeightMatrix& a, const Configuration& c) {
  return differential_report(IterationMatrix(a), c).spectral_radius;
}

inline void fill_limit(TrialRecord& r, const Configuration& limit, const ExperimentConfig& cfg) {
  const Classification k = classify_configuration(limit, cfg.consensus_tol, cfg.rank_tol);
  r.cls = to_string(k.kind);
  r.rank = numerical_rank(limit, cfg.rank_tol);
}

inline TrialRecord start_record(long trial, std::uint64_t seed, const TrialSetup& s) {
  TrialRecord r;
  r.trial = trial;
  r.seed = seed;
  r.n = s.n;
  r.d = s.d;
  r.graph_hash = fingerprint(s.a.graph());
  r.matrix_hash = fingerprint(s.a.entries());
  r.symmetric = s.symmetric;
  return r;
}

inline Json failures_json(const std::vector<TrialRecord>& records) {
  Json out = Json::array();
  for (const TrialRecord& r : records)
    if (!r.error.empty()) out.push_back({{"trial", r.trial}, {"seed", r.seed}, {"cause", r.error}});
  return out;
}

inline Json unconverged_json(const std::vector<TrialRecord>& records) {
  Json out = Json::array();
  for (const TrialRecord& r : records)
    if (r.error.empty() && !r.converged) {
      const double residual = std::isnan(r.residual_ma) ? r.residual_a : r.residual_ma;
      out.push_back({{"trial", r.trial}, {"n", r.n}, {"d", r.d}, {"residual", residual}});
    }
  return out;
}

// ---------------------------------------------------------------------------
// sweep: the A-iteration from random states

inline TrialRecord consensus_trial(const ExperimentConfig& cfg, long trial) {
  const std::uint64_t seed = derive_seed(*cfg.seed, static_cast<std::uint64_t>(trial));
  TrialRecord r;
  r.trial = trial;
  r.seed = seed;
  try {
    const TrialSetup s = sample_setup(cfg, seed);
    r = start_record(trial, seed, s);
    RunOptions opts;
    opts.fp_tol = cfg.fp_tol;
    opts.max_iter = cfg.max_iter;
    opts.record_potential = s.symmetric;
    const TrajectoryResult t = run(IterationMatrix(s.a), s.x0, opts);
    r.iters = t.iterations;
    r.residual_a = t.residual;
    r.converged = t.converged;
    for (std::size_t k = 1; k < t.potential_history.size(); ++k)
      r.max_potential_drop = std::max(r.max_potential_drop, t.potential_history[k - 1] - t.potential_history[k]);
    fill_limit(r, t.final, cfg);
    r.spec_radius = limit_spectral_radius(s.a, t.final);
  } catch (const std::exception& e) {
    r.cls = "error";
    r.error = e.what();
  }
  return r;
}

inline Report consensus_sweep(const ExperimentConfig& cfg) {
  validate(cfg);
  Report rep;
  rep.records = parallel_map<TrialRecord>(cfg.trials, cfg.workers, [&](long t) { return consensus_trial(cfg, t); });
  long consensus = 0, symmetric = 0, unconverged = 0, errors = 0;
  double worst_drop = 0;
  std::map<std::string, long> classes;
  for (const TrialRecord& r : rep.records) {
    ++classes[r.cls];
    if (!r.error.empty()) {
      ++errors;
      continue;
    }
    if (!r.converged) ++unconverged;
    if (r.converged && r.cls == "consensus") ++consensus;
    if (r.symmetric) {
      ++symmetric;
      worst_drop = std::max(worst_drop, r.max_potential_drop);
    }
  }
  rep.summary = Json{{"kind", "sweep"},
                     {"trials", cfg.trials},
                     {"consensus", consensus},
                     {"consensus_fraction", static_cast<double>(consensus) / static_cast<double>(cfg.trials)},
                     {"classes", classes},
                     {"unconverged", unconverged},
                     {"errors", errors},
                     {"symmetric_trials", symmetric},
                     {"max_potential_drop", worst_drop},
                     {"unconverged_trials", unconverged_json(rep.records)},
                     {"failures", failures_json(rep.records)},
                     {"sampling", sampling_metadata(cfg)},
                     {"config", to_json(cfg)}};
  return rep;
}

// ---------------------------------------------------------------------------
// rank-table: descent mode on symmetric problems

/// Rank distribution reported for symmetric problems, indexed by (n, d); the
/// entries are the fractions of limits with rank 1, 2, 3, 4.
inline std::map<std::pair<Index, Index>, std::vector<double>> reference_rank_table() {
  return {{{3, 2}, {0.7571, 0.2429, 0, 0}}, {{6, 2}, {0.3528, 0.6472, 0, 0}},
          {{4, 3}, {0.2953, 0.7046, 0.0001, 0}}, {{6, 3}, {0.494, 0.9256, 0.25, 0}},
          {{7, 4}, {0.0192, 0.8802, 0.1006, 0}}, {{8, 5}, {0.055, 0.7647, 0.2298, 0}}};
}

inline std::uint64_t cell_key(Index n, Index d) { return static_cast<std::uint64_t>(n) * 1000u + static_cast<std::uint64_t>(d); }

inline TrialRecord descent_trial(const ExperimentConfig& cfg, long trial, std::uint64_t seed,
                                 std::optional<std::pair<Index, Index>> cell) {
  TrialRecord r;
  r.trial = trial;
  r.seed = seed;
  try {
    const TrialSetup s = sample_setup(cfg, seed, cell);
    r = start_record(trial, seed, s);
    const DescentResult res = find_nonconsensus_fixed_point(s.a, s.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
    r.iters = res.trajectory.iterations;
    r.residual_ma = res.residual_descent;
    r.residual_a = res.residual_weight;
    r.converged = res.trajectory.converged;
    fill_limit(r, res.trajectory.final, cfg);
    r.spec_radius = limit_spectral_radius(s.a, res.trajectory.final);
  } catch (const std::exception& e) {
    r.cls = "error";
    r.error = e.what();
  }
  return r;
}

struct RankCell {
  Index n = 0, d = 0;
  long trials = 0, converged = 0;
  std::vector<long> counts;  // counts[m-1] = converged limits of rank m
  double fraction(Index m) const {
    return converged == 0 ? 0.0 : static_cast<double>(counts[static_cast<std::size_t>(m - 1)]) / converged;
  }
};

inline std::vector<RankCell> tabulate_ranks(const ExperimentConfig& cfg, const std::vector<TrialRecord>& records) {
  std::vector<RankCell> cells;
  for (const auto& [n, d] : cfg.cells) {
    RankCell c{n, d, 0, 0, std::vector<long>(static_cast<std::size_t>(std::min(n, d)), 0)};
    for (const TrialRecord& r : records) {
      if (r.n != n || r.d != d) continue;
      ++c.trials;
      if (!r.error.empty() || !r.converged) continue;
      ++c.converged;
      ++c.counts[static_cast<std::size_t>(r.rank - 1)];
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

inline Report rank_table(ExperimentConfig cfg) {
  if (cfg.cells.empty()) cfg.cells = {{cfg.n_min, cfg.d_min}};
  validate(cfg);
  require(cfg.symmetric, "rank-table runs on symmetric weight matrices");
  Report rep;
  const long per_cell = cfg.trials;
  const long total = per_cell * static_cast<long>(cfg.cells.size());
  rep.records = parallel_map<TrialRecord>(total, cfg.workers, [&](long k) {
    const auto& cell = cfg.cells[static_cast<std::size_t>(k / per_cell)];
    const long t = k % per_cell;
    const std::uint64_t seed = derive_seed(derive_seed(*cfg.seed, cell_key(cell.first, cell.second)),
                                           static_cast<std::uint64_t>(t));
    TrialRecord r = descent_trial(cfg, t, seed, cell);
    return r;
  });
  const auto reference = reference_rank_table();
  Json table = Json::array();
  for (const RankCell& c : tabulate_ranks(cfg, rep.records)) {
    std::vector<double> fractions;
    for (Index m = 1; m <= static_cast<Index>(c.counts.size()); ++m) fractions.push_back(c.fraction(m));
    Json row{{"n", c.n}, {"d", c.d}, {"trials", c.trials}, {"converged", c.converged},
             {"counts", c.counts}, {"fractions", fractions}};
    if (auto it = reference.find({c.n, c.d}); it != reference.end()) row["reference"] = it->second;
    table.push_back(std::move(row));
  }
  rep.summary = Json{{"kind", "rank-table"},
                     {"trials_per_cell", per_cell},
                     {"table", std::move(table)},
                     {"unconverged_trials", unconverged_json(rep.records)},
                     {"failures", failures_json(rep.records)},
                     {"sampling", sampling_metadata(cfg)},
                     {"config", to_json(cfg)}};
  return rep;
}

// ---------------------------------------------------------------------------
// theorem2: descent mode on non-symmetric problems

/// a_ij (1 + eps u_ij) on every edge, u_ij uniform on [-1, 1] independently for
/// (i,j) and (j,i); the diagonal is kept. Zero structure is preserved.
inline WeightMatrix asymmetric_perturbation(const WeightMatrix& a, double eps, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix out = a.entries();
  for (Index i = 0; i < a.size(); ++i)
    for (Index j = 0; j < a.size(); ++j)
      if (i != j && a(i, j) > 0.0) out(i, j) *= 1.0 + eps * u(rng);
  return WeightMatrix(std::move(out), a.graph());
}

struct PerturbationOutcome {
  bool found_symmetric_rank2 = false;
  long attempts = 0;
  Index rank_symmetric = 0;
  Index rank_perturbed = 0;
  bool converged_perturbed = false;
  long iterations_perturbed = 0;
  double residual_perturbed = 0;  // ||f(x) - x|| where the perturbed run stopped
};

/// Finds a symmetric A whose descent limit has rank >= 2, perturbs A
/// asymmetrically, and reruns descent from the same start.
inline PerturbationOutcome perturbation_trial(const ExperimentConfig& cfg, std::uint64_t seed, Index n, Index d) {
  ExperimentConfig sym = cfg;
  sym.kind = "rank-table";
  sym.graph = GraphFamily::Symmetric;
  sym.symmetric = true;
  PerturbationOutcome out;
  for (long attempt = 0; attempt < 200; ++attempt) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(attempt));
    const TrialSetup setup = sample_setup(sym, s, std::make_pair(n, d));
    const DescentResult base = find_nonconsensus_fixed_point(setup.a, setup.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
    ++out.attempts;
    if (!base.trajectory.converged) continue;
    const Index rank = numerical_rank(base.trajectory.final, cfg.rank_tol);
    if (rank < 2) continue;
    out.found_symmetric_rank2 = true;
    out.rank_symmetric = rank;
    const WeightMatrix perturbed = asymmetric_perturbation(setup.a, cfg.perturbation, derive_seed(s, kNoise));
    const DescentResult res = find_nonconsensus_fixed_point(perturbed, setup.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
    out.converged_perturbed = res.trajectory.converged;
    out.iterations_perturbed = res.trajectory.iterations;
    out.residual_perturbed = res.residual_descent;
    out.rank_perturbed = numerical_rank(res.trajectory.final, cfg.rank_tol);
    return out;
  }
  return out;
}

inline Report theorem2_probe(const ExperimentConfig& cfg) {
  validate(cfg);
  require(!cfg.symmetric, "theorem2 probes non-symmetric weight matrices");
  Report rep;
  rep.records = parallel_map<TrialRecord>(cfg.trials, cfg.workers, [&](long t) {
    return descent_trial(cfg, t, derive_seed(*cfg.seed, static_cast<std::uint64_t>(t)), std::nullopt);
  });
  long converged = 0, higher = 0;
  Json counterexamples = Json::array();
  std::map<std::string, long> by_family;
  for (const TrialRecord& r : rep.records) {
    if (!r.error.empty() || !r.converged) continue;
    ++converged;
    ++by_family[r.d == 2 ? "d2" : "d" + std::to_string(r.d)];
    if (r.rank >= 2) {
      ++higher;
      const TrialSetup s = sample_setup(cfg, r.seed);
      const DescentResult res = find_nonconsensus_fixed_point(s.a, s.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
      counterexamples.push_back(
          {{"trial", r.trial}, {"weights", to_json(s.a)}, {"limit", to_json(res.trajectory.final)}});
    }
  }

  const std::uint64_t pert_master = derive_seed(*cfg.seed, 0xE95ULL);
  const auto outcomes = parallel_map<PerturbationOutcome>(cfg.perturbation_trials, cfg.workers, [&](long t) {
    return perturbation_trial(cfg, derive_seed(pert_master, static_cast<std::uint64_t>(t)), 6, 2);
  });
  long pert_found = 0, pert_converged = 0, pert_rank1 = 0;
  double pert_min_residual = std::numeric_limits<double>::infinity();
  for (const PerturbationOutcome& o : outcomes) {
    if (!o.found_symmetric_rank2) continue;
    ++pert_found;
    pert_min_residual = std::min(pert_min_residual, o.residual_perturbed);
    if (!o.converged_perturbed) continue;
    ++pert_converged;
    if (o.rank_perturbed == 1) ++pert_rank1;
  }

  rep.summary = Json{{"kind", "theorem2"},
                     {"trials", cfg.trials},
                     {"converged", converged},
                     {"converged_by_dimension", by_family},
                     {"rank_ge_2", higher},
                     {"counterexamples", std::move(counterexamples)},
                     {"perturbation",
                      {{"epsilon", cfg.perturbation},
                       {"trials", cfg.perturbation_trials},
                       {"symmetric_rank2_found", pert_found},
                       {"perturbed_converged", pert_converged},
                       {"perturbed_min_residual", pert_min_residual},
                       {"perturbed_limit_rank1", pert_rank1}}},
                     {"unconverged", cfg.trials - converged - static_cast<long>(failures_json(rep.records).size())},
                     {"unconverged_trials", unconverged_json(rep.records)},
                     {"failures", failures_json(rep.records)},
                     {"sampling", sampling_metadata(cfg)},
                     {"config", to_json(cfg)}};
  return rep;
}

// ---------------------------------------------------------------------------
// pentagon: the d = 2 neutral non-consensus fixed point

/// n = 5 ring with diagonal 3 and neighbour weights 1.
inline WeightMatrix pentagon_weights() {
  Matrix a = Matrix::Zero(5, 5);
  for (Index i = 0; i < 5; ++i) {
    a(i, i) = 3.0;
    a(i, (i + 1) % 5) = 1.0;
    a(i, (i + 4) % 5) = 1.0;
  }
  return WeightMatrix(std::move(a), ring_graph(5));
}

/// Row i at angle 2 pi i / 5.
inline Configuration pentagon_configuration() {
  Matrix x(5, 2);
  for (Index i = 0; i < 5; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / 5.0;
    x(i, 0) = std::cos(angle);
    x(i, 1) = std::sin(angle);
  }
  return Configuration::from_rows(std::move(x));
}

struct PentagonReport {
  double residual = 0;
  Classification cls{ConfigurationClass::Consensus, 1};
  double spectral_radius = 0;
  double min_neighbor_dot = 0, max_neighbor_dot = 0;
  NeutralityCheck neutrality;
  StabilityClassification stability;
  Json to_json() const {
    return Json{{"residual", residual},
                {"class", spherecons::to_string(cls.kind)},
                {"rank", cls.rank},
                {"spectral_radius", spectral_radius},
                {"neighbor_dot_min", min_neighbor_dot},
                {"neighbor_dot_max", max_neighbor_dot},
                {"right_stochastic_error", neutrality.max_row_sum_error},
                {"positive_dot_neutral", neutrality.neutral},
                {"stability", spherecons::to_string(stability.kind)}};
  }
};

inline PentagonReport pentagon_demo() {
  const WeightMatrix a = pentagon_weights();
  const Configuration x = pentagon_configuration();
  const IterationMatrix m(a);
  PentagonReport r;
  r.residual = fixed_point_residual(m, x);
  r.cls = classify_configuration(x);
  r.spectral_radius = differential_report(m, x).spectral_radius;
  r.min_neighbor_dot = std::numeric_limits<double>::infinity();
  r.max_neighbor_dot = -std::numeric_limits<double>::infinity();
  for (const Edge& e : a.graph().edges()) {
    const double dot = x.rows().row(e.from).dot(x.rows().row(e.to));
    r.min_neighbor_dot = std::min(r.min_neighbor_dot, dot);
    r.max_neighbor_dot = std::max(r.max_neighbor_dot, dot);
  }
  r.neutrality = positive_dot_neutrality_check(a, x);
  r.stability = instability_certificate(a, x);
  return r;
}

// ---------------------------------------------------------------------------
// audit: instability of descent-found fixed points, escape, determinant

/// Random tangent vector at c with overall Euclidean norm `size`.
inline Configuration tangent_kick(const Configuration& c, double size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix v(c.agents(), c.dim());
  for (Index i = 0; i < v.rows(); ++i)
    for (Index k = 0; k < v.cols(); ++k) v(i, k) = gauss(rng);
  for (Index i = 0; i < v.rows(); ++i) v.row(i) -= v.row(i).dot(c.rows().row(i)) * c.rows().row(i);
  v *= size / v.norm();
  return Configuration::from_rows(c.rows() + v);
}

struct AuditTrial {
  bool found = false;          // descent converged to a non-consensus limit
  StabilityClass stability = StabilityClass::Inconclusive;
  double h_top = 0;
  double spectral_radius = 0;
  bool trace_match = false;
  double trace_lhs = 0, trace_rhs = 0;
  bool escaped = false;        // kicked A-iteration reached consensus
  Index rank = 0;
  std::string error;
};

inline AuditTrial audit_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  AuditTrial out;
  try {
    const TrialSetup s = sample_setup(cfg, seed);
    const DescentResult res = find_nonconsensus_fixed_point(s.a, s.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
    if (!res.trajectory.converged || res.limit_class.kind == ConfigurationClass::Consensus) return out;
    out.found = true;
    const Configuration& fp = res.trajectory.final;
    out.rank = numerical_rank(fp, cfg.rank_tol);
    const StabilityClassification cert = instability_certificate(s.a, fp);
    out.stability = cert.kind;
    out.h_top = cert.h_top_eigenvalue.value_or(std::numeric_limits<double>::quiet_NaN());
    out.spectral_radius = cert.spectral_radius;
    const TraceFormulaCheck tr = trace_formula_check(s.a, fp);
    out.trace_match = tr.match;
    out.trace_lhs = tr.lhs;
    out.trace_rhs = tr.rhs;
    RunOptions opts;
    opts.fp_tol = cfg.fp_tol;
    opts.max_iter = cfg.max_iter;
    const TrajectoryResult t =
        run(IterationMatrix(s.a), tangent_kick(fp, cfg.tangent_noise, derive_seed(seed, kNoise)), opts);
    out.escaped = t.converged &&
                  classify_configuration(t.final, cfg.consensus_tol, cfg.rank_tol).kind == ConfigurationClass::Consensus;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

struct DeterminantSweep {
  long matrices = 0, evaluations = 0;
  long det_failures = 0;      // |det M| <= 1e-12 * Hadamard scale
  long cos_bound_failures = 0;  // cos(theta_i) < sqrt(1 - a_i^2) after unit-diagonal scaling
  double min_relative_det = std::numeric_limits<double>::infinity();
  double min_cos_slack = std::numeric_limits<double>::infinity();
};

/// |det M| and the alignment bound over random sqrt(2)-condition matrices.
inline DeterminantSweep determinant_sweep(const ExperimentConfig& cfg, std::uint64_t master) {
  DeterminantSweep out;
  for (long k = 0; k < cfg.det_matrices; ++k) {
    const std::uint64_t seed = derive_seed(master, static_cast<std::uint64_t>(k));
    ExperimentConfig c = cfg;
    c.graph = GraphFamily::Directed;
    c.margin = cfg.sqrt2_margin;
    c.n_min = 2;
    c.n_max = 8;
    c.d_min = 2;
    c.d_max = 5;
    const TrialSetup s = sample_setup(c, seed);
    require(satisfies_sqrt2_condition(s.a), "sampled matrix misses the sqrt(2) condition");
    const WeightMatrix unit = left_scale_normalize(s.a);
    const IterationMatrix m(unit);
    ++out.matrices;
    for (long j = 0; j < cfg.det_configurations; ++j) {
      const Configuration x = random_configuration(s.n, s.d, derive_seed(seed, 16 + static_cast<std::uint64_t>(j)));
      const DeterminantCheck det = determinant_nonzero_check(unit, x);
      ++out.evaluations;
      if (!det.nonzero) ++out.det_failures;
      out.min_relative_det = std::min(out.min_relative_det, det.relative());
      const Configuration y = iterate(m, x);
      for (Index i = 0; i < s.n; ++i) {
        const double ai = unit.off_diagonal_sum(i);
        const double slack = x.rows().row(i).dot(y.rows().row(i)) - std::sqrt(1.0 - ai * ai);
        out.min_cos_slack = std::min(out.min_cos_slack, slack);
        if (slack < -1e-14) ++out.cos_bound_failures;
      }
    }
  }
  return out;
}

inline Json to_json(const DeterminantSweep& d) {
  return Json{{"matrices", d.matrices},
              {"evaluations", d.evaluations},
              {"det_failures", d.det_failures},
              {"min_relative_det", d.min_relative_det},
              {"cos_bound_failures", d.cos_bound_failures},
              {"min_cos_slack", d.min_cos_slack}};
}

struct AuditReport {
  std::vector<AuditTrial> trials;
  DeterminantSweep det;
  Json summary;
};

inline AuditReport stability_audit(const ExperimentConfig& cfg) {
  validate(cfg);
  require(cfg.symmetric, "audit needs symmetric weight matrices");
  require(cfg.d_min >= 3, "audit needs d >= 3");
  AuditReport rep;
  rep.trials = parallel_map<AuditTrial>(cfg.trials, cfg.workers, [&](long t) {
    return audit_trial(cfg, derive_seed(*cfg.seed, static_cast<std::uint64_t>(t)));
  });
  long found = 0, unstable = 0, trace_ok = 0, escaped = 0, errors = 0;
  double min_h = std::numeric_limits<double>::infinity(), min_rho = std::numeric_limits<double>::infinity();
  for (const AuditTrial& t : rep.trials) {
    if (!t.error.empty()) ++errors;
    if (!t.found) continue;
    ++found;
    if (t.stability == StabilityClass::UnstableCertified) ++unstable;
    if (t.trace_match) ++trace_ok;
    if (t.escaped) ++escaped;
    min_h = std::min(min_h, t.h_top);
    min_rho = std::min(min_rho, t.spectral_radius);
  }
  rep.det = determinant_sweep(cfg, derive_seed(*cfg.seed, 0xDE7ULL));
  rep.summary = Json{{"kind", "audit"},
                     {"trials", cfg.trials},
                     {"fixed_points", found},
                     {"unstable_certified", unstable},
                     {"trace_formula_matches", trace_ok},
                     {"escaped_to_consensus", escaped},
                     {"escape_fraction", found ? static_cast<double>(escaped) / found : 0.0},
                     {"min_h_top_eigenvalue", min_h},
                     {"min_spectral_radius", min_rho},
                     {"errors", errors},
                     {"determinant", to_json(rep.det)},
                     {"sampling", sampling_metadata(cfg)},
                     {"config", to_json(cfg)}};
  return rep;
}

// ---------------------------------------------------------------------------
// jg-rank: rank of the fixed-point Jacobian on complete graphs

struct JgTrial {
  bool found = false;
  Index n = 0, d = 0, m = 0;
  RankAnalysis full;                   // non-symmetric parametrization
  std::optional<RankAnalysis> sym;     // symmetric parametrization, m >= 2 only
  std::string error;
};

inline JgTrial jg_trial(const ExperimentConfig& cfg, std::uint64_t seed) {
  JgTrial out;
  try {
    ExperimentConfig c = cfg;
    c.graph = GraphFamily::Complete;
    const TrialSetup s = sample_setup(c, seed);
    out.n = s.n;
    out.d = s.d;
    const DescentResult res = find_nonconsensus_fixed_point(s.a, s.x0, cfg.slack, cfg.fp_tol, cfg.max_iter);
    if (!res.trajectory.converged) return out;
    const FixedPointSystem sys = make_fixed_point_system(s.a, res.trajectory.final);
    out.found = true;
    out.m = sys.m;
    out.full = full_rank_check(sys);
    if (sys.m >= 2 && s.a.is_symmetric()) out.sym = symmetric_rank_deficiency_check(sys);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

struct JgReport {
  std::vector<JgTrial> trials;
  Json summary;
};

inline JgReport jg_rank(const ExperimentConfig& cfg) {
  validate(cfg);
  JgReport rep;
  rep.trials = parallel_map<JgTrial>(cfg.trials, cfg.workers, [&](long t) {
    return jg_trial(cfg, derive_seed(*cfg.seed, static_cast<std::uint64_t>(t)));
  });
  long found = 0, full_rank = 0, sym_checked = 0, sym_ok = 0, errors = 0;
  double worst_null = 0;
  Json details = Json::array();
  for (const JgTrial& t : rep.trials) {
    if (!t.error.empty()) ++errors;
    if (!t.found) continue;
    ++found;
    if (t.full.satisfied) ++full_rank;
    Json row{{"full", to_json(t.full)}};
    if (t.sym) {
      ++sym_checked;
      if (t.sym->satisfied) ++sym_ok;
      worst_null = std::max(worst_null, t.sym->null_residual);
      row["symmetric"] = to_json(*t.sym);
    }
    details.push_back(std::move(row));
  }
  rep.summary = Json{{"kind", "jg-rank"},
                     {"trials", cfg.trials},
                     {"fixed_points", found},
                     {"full_rank", full_rank},
                     {"symmetric_checked", sym_checked},
                     {"symmetric_bound_satisfied", sym_ok},
                     {"max_skew_null_residual", worst_null},
                     {"errors", errors},
                     {"analyses", std::move(details)},
                     {"config", to_json(cfg)}};
  return rep;
}

}  // namespace spherecons::experiments
