// spherecons: command-line front end for the experiment harness.

#include "spherecons/experiments.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
namespace ex = spherecons::experiments;
using spherecons::Json;

namespace {

struct CommonFlags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<long> trials;
  std::optional<long> n;
  std::optional<long> d;
  std::optional<double> margin;
  std::optional<double> slack;
  std::optional<std::string> out;
  bool symmetric = false;
  std::optional<unsigned> workers;
  std::optional<std::string> graph;
  std::optional<std::string> symmetric_model;
  std::optional<std::string> directed_model;
  std::optional<double> edge_prob_min;
  std::optional<double> edge_prob_max;
  std::optional<double> weight_lower;
  bool weight_mirror = false;
  std::vector<std::string> cells;
};

void add_common(CLI::App* sub, CommonFlags& f, bool experiment) {
  sub->add_option("--config", f.config_path, "JSON config file; flags override its fields")->check(CLI::ExistingFile);
  auto* seed = sub->add_option("--seed", f.seed, "master seed (u64)");
  if (experiment) seed->required();
  sub->add_option("--trials", f.trials, "number of trials (per cell for rank-table)");
  sub->add_option("--n", f.n, "number of agents (fixes the n range)");
  sub->add_option("--d", f.d, "ambient dimension (fixes the d range)");
  sub->add_option("--margin", f.margin, "diagonal dominance margin");
  sub->add_option("--slack", f.slack, "descent shift slack");
  sub->add_option("--out", f.out, "output directory");
  sub->add_flag("--symmetric", f.symmetric, "use symmetric weight matrices");
  sub->add_option("--workers", f.workers, "worker threads (0 = all cores)");
  sub->add_option("--graph", f.graph, "directed|symmetric|mixed|complete|auto");
  sub->add_option("--directed-model", f.directed_model, "cycle|tree|erdos-renyi");
  sub->add_option("--symmetric-model", f.symmetric_model, "cycle|tree|erdos-renyi");
  sub->add_option("--edge-prob-min", f.edge_prob_min, "lower end of the per-trial edge probability");
  sub->add_option("--edge-prob-max", f.edge_prob_max, "upper end of the per-trial edge probability");
  sub->add_option("--weight-lower", f.weight_lower, "off-diagonal weights uniform on (lower, 1]");
  sub->add_flag("--weight-mirror", f.weight_mirror, "symmetric weights: mirror one draw instead of averaging two");
  sub->add_option("--cell", f.cells, "rank-table cell n,d (repeatable)");
}

ex::ExperimentConfig build_config(std::string_view kind, const CommonFlags& f) {
  ex::ExperimentConfig c = ex::defaults_for(kind);
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    c = ex::config_from_json(Json::parse(in), c);
  }
  if (f.seed) c.seed = *f.seed;
  if (f.trials) c.trials = *f.trials;
  if (f.n) c.n_min = c.n_max = *f.n;
  if (f.d) c.d_min = c.d_max = *f.d;
  if (f.margin) c.margin = *f.margin;
  if (f.slack) c.slack = *f.slack;
  if (f.out) c.out_dir = *f.out;
  if (f.symmetric) c.symmetric = true;
  if (f.workers) c.workers = *f.workers;
  if (f.graph) c.graph = ex::parse_graph_family(*f.graph);
  if (f.directed_model) c.directed_model = spherecons::parse_directed_model(*f.directed_model);
  if (f.symmetric_model) c.symmetric_model = spherecons::parse_symmetric_model(*f.symmetric_model);
  if (f.weight_lower) c.weight_law.lower = *f.weight_lower;
  if (f.weight_mirror) c.weight_law.mirror = true;
  if (f.edge_prob_min) c.edge_prob_min = *f.edge_prob_min;
  if (f.edge_prob_max) c.edge_prob_max = *f.edge_prob_max;
  if (f.edge_prob_min && !f.edge_prob_max) c.edge_prob_max = std::max(c.edge_prob_max, *f.edge_prob_min);
  if (f.edge_prob_max && !f.edge_prob_min) c.edge_prob_min = std::min(c.edge_prob_min, *f.edge_prob_max);
  if (!f.cells.empty()) {
    c.cells.clear();
    for (const std::string& s : f.cells) {
      const auto comma = s.find(',');
      spherecons::require(comma != std::string::npos, "--cell expects n,d");
      c.cells.emplace_back(std::stol(s.substr(0, comma)), std::stol(s.substr(comma + 1)));
    }
  } else if (kind == "rank-table" && (f.n || f.d)) {
    c.cells = {{c.n_min, c.d_min}};
  }
  return c;
}

void write_outputs(const std::string& dir, const std::vector<ex::TrialRecord>* records, const Json& summary) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  if (records) {
    std::ofstream csv(fs::path(dir) / "records.csv");
    ex::write_records_csv(csv, *records);
  }
  std::ofstream js(fs::path(dir) / "summary.json");
  js << summary.dump(2) << '\n';
}

/// Summary without the bulky per-trial arrays, for the terminal.
Json brief(Json s) {
  for (const char* key : {"counterexamples", "analyses", "config", "sampling"})
    if (s.contains(key)) s.erase(key);
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus on the unit sphere: experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  auto* sweep = app.add_subcommand("sweep", "A-iteration from random states; counts consensus limits");
  auto* rank = app.add_subcommand("rank-table", "descent-mode rank distribution on symmetric problems");
  auto* thm2 = app.add_subcommand("theorem2", "descent mode on non-symmetric problems; rank >= 2 limits");
  auto* pent = app.add_subcommand("pentagon", "neutral non-consensus fixed point for d = 2");
  auto* audit = app.add_subcommand("audit", "instability certificates, escape test, determinant sweep");
  auto* jg = app.add_subcommand("jg-rank", "rank of the fixed-point Jacobian on complete graphs");
  for (auto* sub : {sweep, rank, thm2, audit, jg}) add_common(sub, flags, true);
  add_common(pent, flags, false);

  CLI11_PARSE(app, argc, argv);

  try {
    Json summary;
    if (sweep->parsed()) {
      const auto cfg = build_config("sweep", flags);
      const auto rep = ex::consensus_sweep(cfg);
      write_outputs(cfg.out_dir, &rep.records, rep.summary);
      summary = rep.summary;
    } else if (rank->parsed()) {
      const auto cfg = build_config("rank-table", flags);
      const auto rep = ex::rank_table(cfg);
      write_outputs(cfg.out_dir, &rep.records, rep.summary);
      summary = rep.summary;
    } else if (thm2->parsed()) {
      const auto cfg = build_config("theorem2", flags);
      const auto rep = ex::theorem2_probe(cfg);
      write_outputs(cfg.out_dir, &rep.records, rep.summary);
      summary = rep.summary;
    } else if (pent->parsed()) {
      summary = ex::pentagon_demo().to_json();
      if (flags.out) write_outputs(*flags.out, nullptr, summary);
    } else if (audit->parsed()) {
      const auto cfg = build_config("audit", flags);
      const auto rep = ex::stability_audit(cfg);
      write_outputs(cfg.out_dir, nullptr, rep.summary);
      summary = rep.summary;
    } else if (jg->parsed()) {
      const auto cfg = build_config("jg-rank", flags);
      const auto rep = ex::jg_rank(cfg);
      write_outputs(cfg.out_dir, nullptr, rep.summary);
      summary = rep.summary;
    }
    std::cout << brief(summary).dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
