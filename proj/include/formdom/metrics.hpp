#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "formdom/config.hpp"
#include "formdom/graph.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"

namespace formdom {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Positive edge lengths sigma over the edges with b > 0, one entry per
/// unordered pair.
class EdgeLengths {
 public:
  using SigmaMap = std::map<std::pair<int, int>, double>;

  EdgeLengths(const WeightedGraph& g, SigmaMap sigma) : sigma_(std::move(sigma)) {
    std::set<std::pair<int, int>> edge_set;
    for (const auto& e : g.edges())
      if (e.b > 0.0 && e.x != e.y) edge_set.insert({e.x, e.y});
    for (const auto& [key, s] : sigma_) {
      if (!edge_set.count(key))
        throw std::invalid_argument("sigma entry on non-edge (" + std::to_string(key.first) +
                                    "," + std::to_string(key.second) + ")");
      if (!(s > 0.0)) throw std::invalid_argument("sigma must be positive on edges");
    }
    for (const auto& key : edge_set)
      if (!sigma_.count(key))
        throw std::invalid_argument("sigma missing on edge (" + std::to_string(key.first) + "," +
                                    std::to_string(key.second) + ")");
  }

  static EdgeLengths constant(const WeightedGraph& g, double s) {
    SigmaMap sigma;
    for (const auto& e : g.edges())
      if (e.b > 0.0 && e.x != e.y) sigma[{e.x, e.y}] = s;
    return EdgeLengths(g, std::move(sigma));
  }

  double at(int x, int y) const {
    if (x > y) std::swap(x, y);
    auto it = sigma_.find({x, y});
    if (it == sigma_.end()) throw std::invalid_argument("sigma queried on non-edge");
    return it->second;
  }
  const SigmaMap& stored() const { return sigma_; }

 private:
  SigmaMap sigma_;
};

/// Edge length file format: JSON array [[x, y, sigma]], one entry per
/// unordered edge with b > 0.
inline EdgeLengths edge_lengths_from_json(const nlohmann::json& j, const WeightedGraph& g) {
  try {
    EdgeLengths::SigmaMap sigma;
    for (const auto& entry : j) {
      if (!entry.is_array() || entry.size() != 3)
        throw IoError("sigma json: entry must be [x, y, sigma]");
      int x = entry[0].get<int>();
      int y = entry[1].get<int>();
      if (x > y) std::swap(x, y);
      if (!sigma.emplace(std::make_pair(x, y), entry[2].get<double>()).second)
        throw IoError("sigma json: duplicate entry");
    }
    return EdgeLengths(g, std::move(sigma));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("sigma json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("sigma json: ") + e.what());
  }
}

/// Deg(x) = (1/m(x)) (sum_y b(x,y) + c(x)).
inline Eigen::VectorXd weighted_degree(const WeightedGraph& g) {
  Eigen::VectorXd deg(g.n());
  for (int x = 0; x < g.n(); ++x) deg(x) = (g.row_sum(x) + g.c()(x)) / g.m()(x);
  return deg;
}

/// sigma(x,y) = max(Deg0(x), Deg0(y))^{-1/2} with Deg0 = (sum_y b)/m; this
/// choice is strongly intrinsic since sigma^2 <= 1/Deg0(x) at both
/// endpoints, so sum_y b sigma^2 <= sum_y b / Deg0(x) = m(x).
inline EdgeLengths intrinsic_edge_lengths(const WeightedGraph& g) {
  Eigen::VectorXd deg0(g.n());
  for (int x = 0; x < g.n(); ++x) deg0(x) = g.row_sum(x) / g.m()(x);
  EdgeLengths::SigmaMap sigma;
  for (const auto& e : g.edges())
    if (e.b > 0.0 && e.x != e.y)
      sigma[{e.x, e.y}] = 1.0 / std::sqrt(std::max(deg0(e.x), deg0(e.y)));
  return EdgeLengths(g, std::move(sigma));
}

/// Single-source shortest paths with edge costs sigma; +inf for unreachable
/// vertices.
inline Eigen::VectorXd path_metric(const WeightedGraph& g, const EdgeLengths& lengths,
                                   int source) {
  if (source < 0 || source >= g.n()) throw std::invalid_argument("source out of range");
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(g.n(), kInf);
  dist(source) = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> queue;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, x] = queue.top();
    queue.pop();
    if (d > dist(x)) continue;
    for (const auto& [y, b] : g.neighbors(x)) {
      if (b <= 0.0 || y == x) continue;
      const double nd = d + lengths.at(x, y);
      if (nd < dist(y)) {
        dist(y) = nd;
        queue.push({nd, y});
      }
    }
  }
  return dist;
}

/// Dense pseudo metric: symmetric, zero diagonal, entries in [0, +inf].
struct PseudoMetric {
  Eigen::MatrixXd d;

  explicit PseudoMetric(Eigen::MatrixXd matrix) : d(std::move(matrix)) {
    if (d.rows() != d.cols()) throw std::invalid_argument("pseudo metric must be square");
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
      if (d(i, i) != 0.0) throw std::invalid_argument("pseudo metric diagonal must vanish");
      for (Eigen::Index j = i + 1; j < d.cols(); ++j) {
        if (d(i, j) != d(j, i)) throw std::invalid_argument("pseudo metric must be symmetric");
        if (d(i, j) < 0.0) throw std::invalid_argument("pseudo metric must be nonnegative");
      }
    }
  }

  static PseudoMetric from_sigma(const WeightedGraph& g, const EdgeLengths& lengths) {
    Eigen::MatrixXd d(g.n(), g.n());
    for (int x = 0; x < g.n(); ++x) d.row(x) = path_metric(g, lengths, x).transpose();
    // Dijkstra is exact and symmetric on symmetric costs; enforce bitwise
    // symmetry against rounding-order differences.
    d = ((d + d.transpose()) / 2.0).eval();
    for (int x = 0; x < g.n(); ++x) d(x, x) = 0.0;
    return PseudoMetric(std::move(d));
  }
};

/// Triangle inequality on sampled triples (finite entries only).
inline VerificationReport check_triangle_inequality(const PseudoMetric& metric,
                                                    std::size_t samples, std::uint64_t seed,
                                                    double tol = 1e-12) {
  VerificationReport report;
  report.check = "triangle-inequality";
  report.seed = seed;
  report.samples = samples;
  const int n = static_cast<int>(metric.d.rows());
  Rng rng(seed, 0x747269u);
  for (std::size_t s = 0; s < samples; ++s) {
    const int x = static_cast<int>(rng.uniform_int(0, n - 1));
    const int y = static_cast<int>(rng.uniform_int(0, n - 1));
    const int z = static_cast<int>(rng.uniform_int(0, n - 1));
    const double lhs = metric.d(x, z), via = metric.d(x, y) + metric.d(y, z);
    if (std::isinf(lhs) || std::isinf(via)) continue;
    report.record(lhs - via, {{"triple", {x, y, z}}, {"d_xz", lhs}, {"d_xy_yz", via}});
  }
  report.finalize(tol);
  return report;
}

/// (1/m(x)) sum_y b(x,y) d(x,y)^2 <= 1 at every vertex.
inline VerificationReport check_intrinsic(const WeightedGraph& g, const PseudoMetric& metric,
                                          const Tolerances& tol = Tolerances{}) {
  if (metric.d.rows() != g.n()) throw std::invalid_argument("metric size must match vertex count");
  VerificationReport report;
  report.check = "intrinsic-metric";
  report.samples = static_cast<std::size_t>(g.n());
  for (int x = 0; x < g.n(); ++x) {
    double sum = 0.0;
    for (const auto& [y, b] : g.neighbors(x))
      if (y != x) sum += b * metric.d(x, y) * metric.d(x, y);
    const double ratio = sum / g.m()(x);
    report.record(ratio - 1.0, {{"vertex", x}, {"ratio", ratio}});
  }
  report.finalize(tol.intrinsic);
  return report;
}

/// (1/m(x)) sum_y b(x,y) sigma(x,y)^2 <= 1 at every vertex.
inline VerificationReport check_strongly_intrinsic(const WeightedGraph& g,
                                                   const EdgeLengths& lengths,
                                                   const Tolerances& tol = Tolerances{}) {
  VerificationReport report;
  report.check = "strongly-intrinsic-lengths";
  report.samples = static_cast<std::size_t>(g.n());
  for (int x = 0; x < g.n(); ++x) {
    double sum = 0.0;
    for (const auto& [y, b] : g.neighbors(x))
      if (y != x && b > 0.0) sum += b * lengths.at(x, y) * lengths.at(x, y);
    const double ratio = sum / g.m()(x);
    report.record(ratio - 1.0, {{"vertex", x}, {"ratio", ratio}});
  }
  report.finalize(tol.intrinsic);
  return report;
}

/// {x : d(x0, x) <= r}, sorted.
inline std::vector<int> distance_ball(const PseudoMetric& metric, int x0, double r) {
  if (x0 < 0 || x0 >= metric.d.rows()) throw std::invalid_argument("center out of range");
  std::vector<int> ball;
  for (int x = 0; x < metric.d.rows(); ++x)
    if (metric.d(x0, x) <= r) ball.push_back(x);
  return ball;
}

/// S together with all vertices joined to S by an edge with b > 0, sorted.
inline std::vector<int> combinatorial_neighborhood(const WeightedGraph& g,
                                                   const std::vector<int>& s) {
  std::set<int> out(s.begin(), s.end());
  for (int x : s) {
    if (x < 0 || x >= g.n()) throw std::invalid_argument("set vertex out of range");
    for (const auto& [y, b] : g.neighbors(x))
      if (b > 0.0) out.insert(y);
  }
  return std::vector<int>(out.begin(), out.end());
}

/// Least admissible jump size: max d(x,y) over edges with b > 0, skipping
/// infinite distances; 0 for edgeless graphs by convention.
inline double jump_size(const WeightedGraph& g, const PseudoMetric& metric) {
  if (metric.d.rows() != g.n()) throw std::invalid_argument("metric size must match vertex count");
  double s = 0.0;
  for (const auto& e : g.edges())
    if (e.b > 0.0 && e.x != e.y && !std::isinf(metric.d(e.x, e.y)))
      s = std::max(s, metric.d(e.x, e.y));
  return s;
}

/// Tent cutoffs eta_k(x) = min(1, max(0, 2 - d(o, x)/k)), k = 1..k_max:
/// values in [0, 1], non-decreasing in k, equal to 1 on the k-ball around o.
struct CutoffSequence {
  std::vector<Eigen::VectorXd> etas;
};

inline CutoffSequence build_cutoff_sequence(const WeightedGraph& g, const EdgeLengths& lengths,
                                            int origin, int k_max) {
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  Eigen::VectorXd dist = path_metric(g, lengths, origin);
  CutoffSequence seq;
  for (int k = 1; k <= k_max; ++k) {
    Eigen::VectorXd eta(g.n());
    for (int x = 0; x < g.n(); ++x) {
      const double v = std::isinf(dist(x)) ? 0.0 : 2.0 - dist(x) / static_cast<double>(k);
      eta(x) = std::min(1.0, std::max(0.0, v));
    }
    seq.etas.push_back(std::move(eta));
  }
  return seq;
}

/// Verbatim cutoff energy bound: (1/m(x)) sum_y b(x,y) |eta(x) - eta(y)|^2
/// <= 1/k at every vertex.
inline VerificationReport check_cutoff_inequality(const WeightedGraph& g,
                                                  const Eigen::VectorXd& eta, int k,
                                                  const Tolerances& tol = Tolerances{}) {
  if (eta.size() != g.n()) throw std::invalid_argument("cutoff length must match vertex count");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  VerificationReport report;
  report.check = "cutoff-energy-bound";
  report.samples = static_cast<std::size_t>(g.n());
  const double budget = 1.0 / static_cast<double>(k);
  for (int x = 0; x < g.n(); ++x) {
    double sum = 0.0;
    for (const auto& [y, b] : g.neighbors(x))
      if (y != x) sum += b * (eta(x) - eta(y)) * (eta(x) - eta(y));
    sum /= g.m()(x);
    report.record(sum - budget, {{"vertex", x}, {"energy", sum}, {"budget", budget}});
  }
  report.finalize(tol.intrinsic);
  return report;
}

// ---------------------------------------------------------------------------
// Uniqueness-criterion evaluation on truncation sequences. Everything here
// reports trends on finite graphs and never claims more.
// ---------------------------------------------------------------------------

enum class CriterionVerdict { Holds, Fails, Inconclusive };

inline const char* to_string(CriterionVerdict v) {
  switch (v) {
    case CriterionVerdict::Holds: return "HOLDS-ON-TRUNCATIONS";
    case CriterionVerdict::Fails: return "FAILS";
    case CriterionVerdict::Inconclusive: return "INCONCLUSIVE";
  }
  return "INCONCLUSIVE";
}

enum class SigmaMode { None, Auto, Constant };

struct CriterionOptions {
  SigmaMode sigma_mode = SigmaMode::Auto;
  double sigma_const = 1.0;
  int cutoff_k_max = 8;
  int ball_radii = 4;
  /// Trend thresholds for the degree criterion: per-radius bound growth
  /// below `stable_ratio` across the family counts as stable, above
  /// `growth_ratio` as unbounded growth.
  double stable_ratio = 1.5;
  double growth_ratio = 4.0;
};

struct CriterionReport {
  CriterionVerdict measure = CriterionVerdict::Inconclusive;
  CriterionVerdict degree = CriterionVerdict::Inconclusive;
  CriterionVerdict completeness = CriterionVerdict::Inconclusive;
  nlohmann::json tables;
  std::vector<std::string> notes;

  nlohmann::json to_json() const {
    return {{"criteria",
             {{"measure", to_string(measure)},
              {"degree", to_string(degree)},
              {"completeness", to_string(completeness)}}},
            {"tables", tables},
            {"notes", notes}};
  }
};

namespace detail {

inline std::optional<EdgeLengths> make_sigma(const WeightedGraph& g, const CriterionOptions& opt) {
  switch (opt.sigma_mode) {
    case SigmaMode::None: return std::nullopt;
    case SigmaMode::Auto: return intrinsic_edge_lengths(g);
    case SigmaMode::Constant: return EdgeLengths::constant(g, opt.sigma_const);
  }
  return std::nullopt;
}

} // namespace detail

/// Evaluates the three truncation criteria on each member of a family:
///   measure: inf m > 0 along the family (sufficient condition), with the
///     total mass trend distinguishing a genuinely summable measure (FAILS)
///     from a decaying-but-non-summable one (INCONCLUSIVE);
///   degree: Deg bounded on the combinatorial neighborhood of distance
///     balls with radii fixed from the smallest member;
///   completeness: tent cutoffs from a sigma satisfy the verbatim energy
///     bound, with the smallest admissible k tracked across sizes.
inline CriterionReport criterion_report(const std::vector<WeightedGraph>& graphs,
                                        const CriterionOptions& opt = CriterionOptions{},
                                        const Tolerances& tol = Tolerances{}) {
  if (graphs.empty()) throw std::invalid_argument("criterion report needs at least one graph");
  CriterionReport out;
  const std::size_t count = graphs.size();

  // measure criterion
  {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<double> inf_m(count), mass(count);
    for (std::size_t i = 0; i < count; ++i) {
      inf_m[i] = graphs[i].m().minCoeff();
      mass[i] = graphs[i].m().sum();
      rows.push_back({{"n", graphs[i].n()}, {"inf_m", inf_m[i]}, {"total_mass", mass[i]}});
    }
    const bool inf_stable = inf_m.back() >= 0.5 * inf_m.front();
    if (inf_stable) {
      out.measure = CriterionVerdict::Holds;
    } else if (count >= 2 &&
               mass.back() - mass[count - 2] <= 1e-3 * std::max(mass.back(), 1e-300)) {
      // total mass has converged along the exhaustion: every escaping
      // sequence has summable measure
      out.measure = CriterionVerdict::Fails;
    } else {
      out.measure = CriterionVerdict::Inconclusive;
      out.notes.push_back("measure: inf m decays but total mass keeps growing; no verdict");
    }
    out.tables["measure"] = rows;
  }

  // degree and completeness both need edge lengths
  std::optional<EdgeLengths> sigma_smallest = detail::make_sigma(graphs.front(), opt);
  if (!sigma_smallest) {
    out.degree = CriterionVerdict::Inconclusive;
    out.completeness = CriterionVerdict::Inconclusive;
    out.notes.push_back("no edge lengths supplied or derivable; metric criteria skipped");
    return out;
  }

  // radii grid from the smallest member
  std::vector<double> radii;
  {
    Eigen::VectorXd dist = path_metric(graphs.front(), *sigma_smallest, 0);
    double rmax = 0.0;
    for (int x = 0; x < graphs.front().n(); ++x)
      if (!std::isinf(dist(x))) rmax = std::max(rmax, dist(x));
    if (rmax == 0.0) radii.push_back(0.0);
    else
      for (int i = 1; i <= opt.ball_radii; ++i)
        radii.push_back(rmax * static_cast<double>(i) / static_cast<double>(opt.ball_radii));
  }

  // degree criterion
  {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<std::vector<double>> bounds(radii.size());
    for (std::size_t i = 0; i < count; ++i) {
      const WeightedGraph& g = graphs[i];
      auto sigma = detail::make_sigma(g, opt);
      PseudoMetric metric = PseudoMetric::from_sigma(g, *sigma);
      Eigen::VectorXd deg = weighted_degree(g);
      nlohmann::json per_radius = nlohmann::json::array();
      for (std::size_t r = 0; r < radii.size(); ++r) {
        std::vector<int> ball = distance_ball(metric, 0, radii[r] + 1e-12);
        std::vector<int> hood = combinatorial_neighborhood(g, ball);
        double bound = 0.0;
        for (int x : hood) bound = std::max(bound, deg(x));
        bounds[r].push_back(bound);
        per_radius.push_back({{"radius", radii[r]}, {"ball_size", ball.size()}, {"deg_bound", bound}});
      }
      rows.push_back({{"n", g.n()}, {"balls", per_radius}});
    }
    bool any_growth = false, all_stable = true;
    for (const auto& series : bounds) {
      const double first = std::max(series.front(), 1e-300);
      const double ratio = series.back() / first;
      if (ratio >= opt.growth_ratio) any_growth = true;
      if (ratio > opt.stable_ratio) all_stable = false;
    }
    out.degree = any_growth ? CriterionVerdict::Fails
                            : (all_stable ? CriterionVerdict::Holds : CriterionVerdict::Inconclusive);
    out.tables["degree"] = rows;
  }

  // completeness criterion
  {
    nlohmann::json rows = nlohmann::json::array();
    std::vector<int> best_k(count, -1);
    for (std::size_t i = 0; i < count; ++i) {
      const WeightedGraph& g = graphs[i];
      auto sigma = detail::make_sigma(g, opt);
      CutoffSequence seq = build_cutoff_sequence(g, *sigma, 0, opt.cutoff_k_max);
      std::vector<bool> ok(seq.etas.size());
      nlohmann::json per_k = nlohmann::json::array();
      for (std::size_t j = 0; j < seq.etas.size(); ++j) {
        const int k = static_cast<int>(j) + 1;
        VerificationReport r = check_cutoff_inequality(g, seq.etas[j], k, tol);
        ok[j] = r.passed();
        per_k.push_back({{"k", k}, {"max_excess", r.max_violation}, {"ok", ok[j]}});
      }
      for (int j = static_cast<int>(ok.size()) - 1; j >= 0; --j) {
        if (!ok[static_cast<std::size_t>(j)]) break;
        best_k[i] = j + 1;
      }
      rows.push_back({{"n", g.n()}, {"cutoffs", per_k}, {"best_k", best_k[i]}});
    }
    const bool all_have_k = std::all_of(best_k.begin(), best_k.end(), [](int k) { return k >= 1; });
    if (!all_have_k) {
      out.completeness = CriterionVerdict::Fails;
    } else if (best_k.back() <= best_k.front() + 1) {
      out.completeness = CriterionVerdict::Holds;
    } else {
      out.completeness = CriterionVerdict::Inconclusive;
      out.notes.push_back("completeness: admissible k drifts upward across sizes; no verdict");
    }
    out.tables["completeness"] = rows;
  }
  return out;
}

inline CriterionReport criterion_report(const FamilySpec& family, const std::vector<int>& sizes,
                                        const CriterionOptions& opt = CriterionOptions{},
                                        const Tolerances& tol = Tolerances{}) {
  if (sizes.empty()) throw std::invalid_argument("criterion report needs at least one size");
  std::vector<int> sorted = sizes;
  std::sort(sorted.begin(), sorted.end());
  std::vector<WeightedGraph> graphs;
  graphs.reserve(sorted.size());
  for (int n : sorted) graphs.push_back(generate_family(family, n));
  return criterion_report(graphs, opt, tol);
}

inline CriterionReport criterion_report(const WeightedGraph& g,
                                        const CriterionOptions& opt = CriterionOptions{},
                                        const Tolerances& tol = Tolerances{}) {
  return criterion_report(std::vector<WeightedGraph>{g}, opt, tol);
}

} // namespace formdom
