#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "formdom/hash.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"

namespace formdom {

/// Thrown for malformed files and misuse of interfaces, as opposed to a
/// mathematical FAIL which is always delivered through a report.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Edge {
  int x = 0;
  int y = 0;
  double b = 0.0;
};

/// Finite weighted graph (X, b, c, m): vertices 0..n-1, symmetric edge
/// weights b stored once per unordered pair, killing term c and measure m per
/// vertex. Construction permits axiom violations (negative weights, zero
/// measure, self loops) so that validate_graph can report them; generators
/// and checks assume a validated graph. Immutable after construction.
class WeightedGraph {
 public:
  WeightedGraph(int n, Eigen::VectorXd m, Eigen::VectorXd c, std::vector<Edge> edges)
      : n_(n), m_(std::move(m)), c_(std::move(c)), edges_(std::move(edges)) {
    if (n_ < 0) throw std::invalid_argument("vertex count must be nonnegative");
    if (m_.size() != n_ || c_.size() != n_)
      throw std::invalid_argument("m and c must have one entry per vertex");
    std::set<std::pair<int, int>> seen;
    for (auto& e : edges_) {
      if (e.x > e.y) std::swap(e.x, e.y);
      if (e.x < 0 || e.y >= n_) throw std::invalid_argument("edge endpoint out of range");
      if (!seen.insert({e.x, e.y}).second)
        throw std::invalid_argument("duplicate edge pair (" + std::to_string(e.x) + "," +
                                    std::to_string(e.y) + ")");
    }
    std::sort(edges_.begin(), edges_.end(),
              [](const Edge& a, const Edge& b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
    adjacency_.resize(static_cast<std::size_t>(n_));
    row_sums_ = Eigen::VectorXd::Zero(n_);
    for (const auto& e : edges_) {
      adjacency_[static_cast<std::size_t>(e.x)].push_back({e.y, e.b});
      if (e.x != e.y) adjacency_[static_cast<std::size_t>(e.y)].push_back({e.x, e.b});
      row_sums_(e.x) += e.b;
      if (e.x != e.y) row_sums_(e.y) += e.b;
    }
  }

  int n() const { return n_; }
  const Eigen::VectorXd& m() const { return m_; }
  const Eigen::VectorXd& c() const { return c_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::pair<int, double>>& neighbors(int x) const {
    return adjacency_[static_cast<std::size_t>(x)];
  }
  /// Stored row sum sum_z b(x,z); finite automatically at finite n.
  double row_sum(int x) const { return row_sums_(x); }

  std::uint64_t hash() const {
    HashAccumulator h;
    h.pod(n_);
    for (int i = 0; i < n_; ++i) {
      h.pod(m_(i));
      h.pod(c_(i));
    }
    for (const auto& e : edges_) {
      h.pod(e.x);
      h.pod(e.y);
      h.pod(e.b);
    }
    return h.value();
  }

 private:
  int n_;
  Eigen::VectorXd m_, c_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::pair<int, double>>> adjacency_;
  Eigen::VectorXd row_sums_;
};

/// Finite-dimensional stand-in for restriction to compactly supported
/// functions: an interior vertex set plus the adjacent boundary ring.
struct Truncation {
  WeightedGraph parent;
  std::vector<int> interior; // sorted
  std::vector<int> boundary; // sorted, adjacent to interior, disjoint from it
};

/// Checks the weighted-graph axioms: b(x,x) = 0, b >= 0, m > 0, c >= 0.
/// Symmetry holds by storage. Row sums are recorded for reference; at finite
/// n they are finite by construction and constrain nothing.
inline VerificationReport validate_graph(const WeightedGraph& g) {
  VerificationReport report;
  report.check = "graph-axioms";
  report.samples = static_cast<std::size_t>(g.n());
  nlohmann::json violations = nlohmann::json::array();
  for (const auto& e : g.edges()) {
    if (e.x == e.y && e.b != 0.0)
      violations.push_back({{"axiom", "b1-no-self-loops"}, {"vertex", e.x}, {"value", e.b}});
    if (e.b < 0.0)
      violations.push_back(
          {{"axiom", "b-nonnegative"}, {"edge", {e.x, e.y}}, {"value", e.b}});
  }
  for (int x = 0; x < g.n(); ++x) {
    if (!(g.m()(x) > 0.0))
      violations.push_back({{"axiom", "m-positive"}, {"vertex", x}, {"value", g.m()(x)}});
    if (g.c()(x) < 0.0)
      violations.push_back({{"axiom", "c-nonnegative"}, {"vertex", x}, {"value", g.c()(x)}});
  }
  double max_row_sum = 0.0;
  for (int x = 0; x < g.n(); ++x) max_row_sum = std::max(max_row_sum, g.row_sum(x));
  report.worst_case = {{"violations", violations}, {"max_row_sum", max_row_sum}};
  report.max_violation = static_cast<double>(violations.size());
  report.verdict = violations.empty() ? Verdict::Pass : Verdict::Fail;
  report.notes.push_back("row sums recorded for reference; finite at finite n");
  return report;
}

/// (L~ f)(x) = (1/m(x)) sum_y b(x,y) (f(x) - f(y)) + (c(x)/m(x)) f(x).
template <typename Scalar>
Eigen::Vector<Scalar, Eigen::Dynamic> formal_laplacian_apply(
    const WeightedGraph& g, const Eigen::Vector<Scalar, Eigen::Dynamic>& f) {
  if (f.size() != g.n()) throw std::invalid_argument("function length must match vertex count");
  Eigen::Vector<Scalar, Eigen::Dynamic> out(g.n());
  for (int x = 0; x < g.n(); ++x) {
    Scalar acc{};
    for (const auto& [y, b] : g.neighbors(x)) acc += b * (f(x) - f(y));
    out(x) = (acc + g.c()(x) * f(x)) / g.m()(x);
  }
  return out;
}

inline Truncation truncate(const WeightedGraph& g, std::vector<int> interior) {
  if (interior.empty()) throw std::invalid_argument("interior set must be nonempty");
  std::sort(interior.begin(), interior.end());
  interior.erase(std::unique(interior.begin(), interior.end()), interior.end());
  if (interior.front() < 0 || interior.back() >= g.n())
    throw std::invalid_argument("interior vertex out of range");
  std::vector<bool> inside(static_cast<std::size_t>(g.n()), false);
  for (int v : interior) inside[static_cast<std::size_t>(v)] = true;
  std::vector<int> boundary;
  for (int x = 0; x < g.n(); ++x) {
    if (inside[static_cast<std::size_t>(x)]) continue;
    for (const auto& [y, b] : g.neighbors(x)) {
      if (inside[static_cast<std::size_t>(y)] && b > 0.0) {
        boundary.push_back(x);
        break;
      }
    }
  }
  return Truncation{g, std::move(interior), std::move(boundary)};
}

/// Subgraph on S with edges inside S only (reindexed by position in sorted S).
/// Edges leaving S are dropped entirely; contrast with a Dirichlet
/// restriction, which keeps their diagonal contribution.
inline WeightedGraph induced_subgraph(const WeightedGraph& g, const std::vector<int>& subset) {
  std::vector<int> s = subset;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  if (s.empty()) throw std::invalid_argument("subset must be nonempty");
  if (s.front() < 0 || s.back() >= g.n()) throw std::invalid_argument("subset vertex out of range");
  std::vector<int> position(static_cast<std::size_t>(g.n()), -1);
  for (std::size_t i = 0; i < s.size(); ++i) position[static_cast<std::size_t>(s[i])] = static_cast<int>(i);
  Eigen::VectorXd m(s.size()), c(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    m(static_cast<Eigen::Index>(i)) = g.m()(s[i]);
    c(static_cast<Eigen::Index>(i)) = g.c()(s[i]);
  }
  std::vector<Edge> edges;
  for (const auto& e : g.edges()) {
    int px = position[static_cast<std::size_t>(e.x)];
    int py = position[static_cast<std::size_t>(e.y)];
    if (px >= 0 && py >= 0) edges.push_back({px, py, e.b});
  }
  return WeightedGraph(static_cast<int>(s.size()), std::move(m), std::move(c), std::move(edges));
}

// ---------------------------------------------------------------------------
// Graph families. Infinite graphs are only ever represented as a family spec
// plus truncation sizes; nothing infinite is materialized.
// ---------------------------------------------------------------------------

enum class Family { Path, Star, BinaryTree, RandomSparse };

enum class MProfileKind { Constant, PowerDecay, GeometricDecay };

/// Vertex measure along the generation order: constant k, power decay
/// (i+1)^(-alpha), or geometric decay q^i.
struct MProfile {
  MProfileKind kind = MProfileKind::Constant;
  double value = 1.0;

  double at(int i) const {
    switch (kind) {
      case MProfileKind::Constant: return value;
      case MProfileKind::PowerDecay: return std::pow(static_cast<double>(i + 1), -value);
      case MProfileKind::GeometricDecay: return std::pow(value, static_cast<double>(i));
    }
    return value;
  }
};

struct FamilySpec {
  Family family = Family::Path;
  double edge_weight = 1.0;
  /// Geometric growth of edge weights along the generation order:
  /// b_i = edge_weight * edge_growth^i.
  double edge_growth = 1.0;
  /// Scale all edge weights by the generated size N (used to exercise
  /// unbounded-degree families like the heavy star).
  bool edge_weight_scales_with_size = false;
  MProfile m_profile{};
  double density = 0.3;    // random-sparse only
  std::uint64_t seed = 0;  // random-sparse only
};

inline FamilySpec parse_family(const std::string& name) {
  FamilySpec spec;
  if (name == "path") spec.family = Family::Path;
  else if (name == "star") spec.family = Family::Star;
  else if (name == "binary-tree") spec.family = Family::BinaryTree;
  else if (name == "random-sparse") spec.family = Family::RandomSparse;
  else throw std::invalid_argument("unknown family '" + name + "'");
  return spec;
}

/// Deterministic finite member of the family. For binary-tree, `size` is the
/// depth; otherwise it is the vertex count.
inline WeightedGraph generate_family(const FamilySpec& spec, int size) {
  if (size <= 0) throw std::invalid_argument("family size must be positive");
  if (spec.edge_weight <= 0.0) throw std::invalid_argument("edge weight must be positive");
  const double scale = spec.edge_weight_scales_with_size ? static_cast<double>(size) : 1.0;
  auto weight = [&](int i) { return scale * spec.edge_weight * std::pow(spec.edge_growth, i); };

  int n = size;
  std::vector<Edge> edges;
  switch (spec.family) {
    case Family::Path:
      for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, weight(i)});
      break;
    case Family::Star:
      for (int leaf = 1; leaf < n; ++leaf) edges.push_back({0, leaf, weight(leaf - 1)});
      break;
    case Family::BinaryTree: {
      const int depth = size;
      n = (1 << (depth + 1)) - 1;
      for (int v = 0; 2 * v + 2 < n; ++v) {
        edges.push_back({v, 2 * v + 1, weight(v)});
        edges.push_back({v, 2 * v + 2, weight(v)});
      }
      break;
    }
    case Family::RandomSparse: {
      if (!(spec.density > 0.0 && spec.density <= 1.0))
        throw std::invalid_argument("density must lie in (0, 1]");
      Rng rng(spec.seed, 0x67726170u);
      int k = 0;
      for (int x = 0; x < n; ++x)
        for (int y = x + 1; y < n; ++y, ++k)
          if (rng.uniform() < spec.density) edges.push_back({x, y, weight(0)});
      break;
    }
  }
  Eigen::VectorXd m(n), c = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) m(i) = spec.m_profile.at(i);
  return WeightedGraph(n, std::move(m), std::move(c), std::move(edges));
}

// ---------------------------------------------------------------------------
// JSON interface: { "n": int, "m": [..], "c": [..], "edges": [[x, y, b]] }
// with edges listed once per unordered pair, x <= y, duplicates rejected.
// Axiom violations (self loops, negative weights, zero measure) parse fine
// and are the business of validate_graph.
// ---------------------------------------------------------------------------

inline WeightedGraph graph_from_json(const nlohmann::json& j) {
  try {
    int n = j.at("n").get<int>();
    auto mv = j.at("m").get<std::vector<double>>();
    auto cv = j.at("c").get<std::vector<double>>();
    if (static_cast<int>(mv.size()) != n || static_cast<int>(cv.size()) != n)
      throw IoError("graph json: m and c must have n entries");
    std::vector<Edge> edges;
    for (const auto& entry : j.at("edges")) {
      if (!entry.is_array() || entry.size() != 3) throw IoError("graph json: edge must be [x, y, b]");
      int x = entry[0].get<int>();
      int y = entry[1].get<int>();
      double b = entry[2].get<double>();
      if (x > y) throw IoError("graph json: edges must be listed with x <= y");
      edges.push_back({x, y, b});
    }
    Eigen::VectorXd m = Eigen::Map<Eigen::VectorXd>(mv.data(), static_cast<Eigen::Index>(mv.size()));
    Eigen::VectorXd c = Eigen::Map<Eigen::VectorXd>(cv.data(), static_cast<Eigen::Index>(cv.size()));
    return WeightedGraph(n, std::move(m), std::move(c), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("graph json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("graph json: ") + e.what());
  }
}

inline nlohmann::json graph_to_json(const WeightedGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : g.edges()) edges.push_back({e.x, e.y, e.b});
  std::vector<double> m(g.m().data(), g.m().data() + g.n());
  std::vector<double> c(g.c().data(), g.c().data() + g.n());
  return {{"n", g.n()}, {"m", m}, {"c", c}, {"edges", edges}};
}

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("parse error in '" + path + "': " + e.what());
  }
}

inline WeightedGraph load_graph(const std::string& path) {
  return graph_from_json(load_json_file(path));
}

} // namespace formdom
