#pragma once

// JSON and CSV formats. Node and agent labels are 1-based on the wire.

#include "spherecons/common.hpp"
#include "spherecons/dynamics.hpp"
#include "spherecons/fixed_point_lab.hpp"
#include "spherecons/graph.hpp"
#include "spherecons/sphere_state.hpp"
#include "spherecons/stability.hpp"
#include "spherecons/weights.hpp"

#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace spherecons {

using Json = nlohmann::json;

inline Json rows_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix rows_from_json(const Json& rows) {
  require(rows.is_array() && !rows.empty(), "expected a non-empty array of rows");
  const auto n = static_cast<Index>(rows.size());
  const auto d = static_cast<Index>(rows.front().size());
  Matrix m(n, d);
  for (Index i = 0; i < n; ++i) {
    const Json& row = rows.at(static_cast<std::size_t>(i));
    require(row.is_array() && static_cast<Index>(row.size()) == d, "ragged row " + std::to_string(i + 1));
    for (Index j = 0; j < d; ++j) m(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return m;
}

// {"n": int, "edges": [[i,j],...]}
inline Json to_json(const DirectedGraph& g) {
  Json edges = Json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.from + 1, e.to + 1});
  return Json{{"n", g.size()}, {"edges", std::move(edges)}};
}

inline DirectedGraph graph_from_json(const Json& j) {
  const auto n = j.at("n").get<Index>();
  std::vector<Edge> edges;
  for (const Json& e : j.at("edges")) {
    require(e.is_array() && e.size() == 2, "edge must be a pair [i, j]");
    edges.push_back({e[0].get<Index>() - 1, e[1].get<Index>() - 1});
  }
  return DirectedGraph(n, edges);
}

// {"n": int, "rows": [[...],...]}
inline Json to_json(const WeightMatrix& a) { return Json{{"n", a.size()}, {"rows", rows_to_json(a.entries())}}; }

inline WeightMatrix weights_from_json(const Json& j) {
  const Matrix m = rows_from_json(j.at("rows"));
  require(m.rows() == j.at("n").get<Index>() && m.cols() == m.rows(), "weight matrix must be n x n");
  return WeightMatrix::from_entries(m);
}

// {"n": .., "d": .., "rows": [[...],...]}
inline Json to_json(const Configuration& c) {
  return Json{{"n", c.agents()}, {"d", c.dim()}, {"rows", rows_to_json(c.rows())}};
}

inline Configuration configuration_from_json(const Json& j) {
  Matrix m = rows_from_json(j.at("rows"));
  require(m.rows() == j.at("n").get<Index>() && m.cols() == j.at("d").get<Index>(), "configuration shape mismatch");
  return Configuration::from_rows(std::move(m));
}

inline Json to_json(const TrajectoryResult& t) {
  Json j{{"final", to_json(t.final)},
         {"iterations", t.iterations},
         {"residual", t.residual},
         {"converged", t.converged}};
  if (!t.potential_history.empty()) j["potential_history"] = t.potential_history;
  return j;
}

inline Json to_json(const DifferentialReport& r) {
  Json eig = Json::array();
  for (Index i = 0; i < r.eigenvalues.size(); ++i) eig.push_back({r.eigenvalues(i).real(), r.eigenvalues(i).imag()});
  return Json{{"eigenvalues", std::move(eig)},
              {"spectral_radius", r.spectral_radius},
              {"det", r.det},
              {"angles", std::vector<double>(r.angles.data(), r.angles.data() + r.angles.size())},
              {"reduced", rows_to_json(r.reduced)}};
}

// {n, d, m, symmetric, rank, bound, satisfied, min_singular_values}
inline Json to_json(const RankAnalysis& r) {
  return Json{{"n", r.n},
              {"d", r.d},
              {"m", r.m},
              {"symmetric", r.symmetric},
              {"rank", r.rank},
              {"bound", r.bound},
              {"satisfied", r.satisfied},
              {"min_singular_values",
               std::vector<double>(r.min_singular_values.data(),
                                   r.min_singular_values.data() + r.min_singular_values.size())}};
}

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Row-major CSV with header c1,...,cN.
inline void write_matrix_csv(std::ostream& os, const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << 'c' << (j + 1);
  os << '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << format_double(m(i, j));
    os << '\n';
  }
}

/// One line per (iteration, agent): iteration,agent,x1..xd,V.
/// `potential` may be empty, in which case the column is left blank.
inline void write_trajectory_csv(std::ostream& os, const std::vector<Configuration>& states,
                                 const std::vector<double>& potential) {
  require(!states.empty(), "empty trajectory");
  const Index d = states.front().dim();
  os << "iteration,agent";
  for (Index k = 0; k < d; ++k) os << ",x" << (k + 1);
  os << ",V\n";
  for (std::size_t t = 0; t < states.size(); ++t)
    for (Index i = 0; i < states[t].agents(); ++i) {
      os << t << ',' << (i + 1);
      for (Index k = 0; k < d; ++k) os << ',' << format_double(states[t].rows()(i, k));
      os << ',';
      if (t < potential.size()) os << format_double(potential[t]);
      os << '\n';
    }
}

/// Spectrum as re,im lines.
inline void write_spectrum_csv(std::ostream& os, const ComplexVector& eig) {
  os << "re,im\n";
  for (Index i = 0; i < eig.size(); ++i) os << format_double(eig(i).real()) << ',' << format_double(eig(i).imag()) << '\n';
}

}  // namespace spherecons
