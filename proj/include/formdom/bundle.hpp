#pragma once

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <json.hpp>

#include "formdom/config.hpp"
#include "formdom/graph.hpp"
#include "formdom/hash.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"

namespace formdom {

/// Thrown when constructed data breaks a mathematical invariant (as opposed
/// to IoError for malformed files). The CLI maps this to the FAIL exit code.
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Section of the rank-d bundle: one complex fiber vector per vertex, stored
/// stacked vertex-major.
struct Section {
  int dim = 1;
  Eigen::VectorXcd values;

  Section() = default;
  Section(int d, Eigen::VectorXcd v) : dim(d), values(std::move(v)) {
    if (dim < 1) throw std::invalid_argument("fiber dimension must be >= 1");
    if (values.size() % dim != 0)
      throw std::invalid_argument("section length must be a multiple of the fiber dimension");
  }
  static Section zero(int n, int d) { return Section(d, Eigen::VectorXcd::Zero(n * d)); }

  int vertices() const { return static_cast<int>(values.size()) / dim; }
  auto fiber(int x) { return values.segment(static_cast<Eigen::Index>(x) * dim, dim); }
  auto fiber(int x) const { return values.segment(static_cast<Eigen::Index>(x) * dim, dim); }
};

/// Unitary transport maps over the edges of a weighted graph, one d x d
/// unitary per unordered edge (stored for x < y, reverse direction is the
/// adjoint). Unlisted edges carry the identity. Matrices failing unitarity
/// by more than 1e-12 are re-orthonormalized via polar projection; residuals
/// beyond 1e-8 are rejected.
class BundleConnection {
 public:
  using PhiMap = std::map<std::pair<int, int>, Eigen::MatrixXcd>;

  BundleConnection(const WeightedGraph& g, int dim, PhiMap phi = {},
                   const Tolerances& tol = Tolerances{})
      : n_(g.n()), dim_(dim), phi_(std::move(phi)) {
    if (dim_ < 1) throw std::invalid_argument("fiber dimension must be >= 1");
    std::set<std::pair<int, int>> edge_set;
    for (const auto& e : g.edges())
      if (e.b > 0.0) edge_set.insert({e.x, e.y});
    for (auto& [key, mat] : phi_) {
      if (key.first >= key.second)
        throw std::invalid_argument("connection entries must be keyed by x < y");
      if (!edge_set.count(key))
        throw std::invalid_argument("connection entry on non-edge (" +
                                    std::to_string(key.first) + "," +
                                    std::to_string(key.second) + ")");
      if (mat.rows() != dim_ || mat.cols() != dim_)
        throw std::invalid_argument("connection matrix has wrong shape");
      const double residual =
          (mat.adjoint() * mat - Eigen::MatrixXcd::Identity(dim_, dim_)).cwiseAbs().maxCoeff();
      if (residual > tol.unitarity_repair)
        throw InvariantError("transport map on edge (" + std::to_string(key.first) + "," +
                             std::to_string(key.second) + ") is not unitary (residual " +
                             std::to_string(residual) + ")");
      if (residual > tol.unitarity) {
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mat, Eigen::ComputeFullU | Eigen::ComputeFullV);
        mat = svd.matrixU() * svd.matrixV().adjoint();
      }
    }
  }

  int n() const { return n_; }
  int dim() const { return dim_; }
  const PhiMap& stored() const { return phi_; }

  /// Transport map for the directed edge (x, y); identity if unlisted.
  Eigen::MatrixXcd phi(int x, int y) const {
    if (x > y) return phi(y, x).adjoint();
    auto it = phi_.find({x, y});
    if (it == phi_.end()) return Eigen::MatrixXcd::Identity(dim_, dim_);
    return it->second;
  }

  std::uint64_t hash() const {
    HashAccumulator h;
    h.pod(n_);
    h.pod(dim_);
    for (const auto& [key, mat] : phi_) {
      h.pod(key.first);
      h.pod(key.second);
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
          h.pod(mat(i, j).real());
          h.pod(mat(i, j).imag());
        }
    }
    return h.value();
  }

 private:
  int n_;
  int dim_;
  PhiMap phi_;
};

/// Vertex-indexed field of d x d endomorphisms W(x); unlisted vertices carry
/// the zero matrix. Stored as given so that validate() can report violations
/// of hermiticity or pointwise positivity.
class EndomorphismField {
 public:
  using WMap = std::map<int, Eigen::MatrixXcd>;

  EndomorphismField(int n, int dim, WMap w = {}) : n_(n), dim_(dim), w_(std::move(w)) {
    if (dim_ < 1) throw std::invalid_argument("fiber dimension must be >= 1");
    for (const auto& [x, mat] : w_) {
      if (x < 0 || x >= n_) throw std::invalid_argument("endomorphism vertex out of range");
      if (mat.rows() != dim_ || mat.cols() != dim_)
        throw std::invalid_argument("endomorphism matrix has wrong shape");
    }
  }

  /// W(x) = c(x) * I, the scalar potential promoted to the bundle.
  static EndomorphismField from_killing_term(const WeightedGraph& g, int dim) {
    WMap w;
    for (int x = 0; x < g.n(); ++x)
      if (g.c()(x) != 0.0) w[x] = g.c()(x) * Eigen::MatrixXcd::Identity(dim, dim);
    return EndomorphismField(g.n(), dim, std::move(w));
  }

  int n() const { return n_; }
  int dim() const { return dim_; }
  const WMap& stored() const { return w_; }

  Eigen::MatrixXcd at(int x) const {
    auto it = w_.find(x);
    if (it == w_.end()) return Eigen::MatrixXcd::Zero(dim_, dim_);
    return it->second;
  }

  /// Checks W(x) = W(x)* and lambda_min(W(x)) >= -tol.endo_psd at each vertex.
  VerificationReport validate(const Tolerances& tol = Tolerances{}) const {
    VerificationReport report;
    report.check = "endomorphism-invariants";
    report.samples = w_.size();
    double worst = 0.0;
    nlohmann::json violations = nlohmann::json::array();
    for (const auto& [x, mat] : w_) {
      const double herm = (mat - mat.adjoint()).cwiseAbs().maxCoeff();
      if (herm > tol.hermiticity) {
        violations.push_back({{"invariant", "hermitian"}, {"vertex", x}, {"residual", herm}});
        worst = std::max(worst, herm);
        continue;
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(mat, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      if (lo < -tol.endo_psd) {
        violations.push_back({{"invariant", "pointwise-positive"}, {"vertex", x}, {"lambda_min", lo}});
        worst = std::max(worst, -lo);
      }
    }
    report.worst_case = {{"violations", violations}};
    report.max_violation = worst;
    report.verdict = violations.empty() ? Verdict::Pass : Verdict::Fail;
    return report;
  }

  std::uint64_t hash() const {
    HashAccumulator h;
    h.pod(n_);
    h.pod(dim_);
    for (const auto& [x, mat] : w_) {
      h.pod(x);
      for (Eigen::Index i = 0; i < mat.rows(); ++i)
        for (Eigen::Index j = 0; j < mat.cols(); ++j) {
          h.pod(mat(i, j).real());
          h.pod(mat(i, j).imag());
        }
    }
    return h.value();
  }

 private:
  int n_;
  int dim_;
  WMap w_;
};

/// Pointwise fiber norm |u|(x) = |u(x)|_x.
inline Eigen::VectorXd absolute(const Section& u) {
  const int n = u.vertices();
  Eigen::VectorXd out(n);
  for (int x = 0; x < n; ++x) out(x) = u.fiber(x).norm();
  return out;
}

/// Polar pairing: eta(x) = f(x) u(x)/|u(x)| where u(x) != 0, and f(x) e_1 at
/// zero fibers. Guarantees |eta| = f and <u(x), eta(x)> = |u(x)| |eta(x)|.
inline Section sgn_pair(const Section& u, const Eigen::VectorXd& f) {
  const int n = u.vertices();
  if (f.size() != n) throw std::invalid_argument("scalar factor length must match vertex count");
  if (f.minCoeff() < 0.0) throw std::invalid_argument("scalar factor must be nonnegative");
  Section eta = Section::zero(n, u.dim);
  for (int x = 0; x < n; ++x) {
    const double norm = u.fiber(x).norm();
    if (norm > 0.0) eta.fiber(x) = (f(x) / norm) * u.fiber(x);
    else eta.fiber(x)(0) = f(x);
  }
  return eta;
}

/// PASS iff <u(x), v(x)> = |u(x)| |v(x)| at every vertex within tol, the
/// pointwise equality case of |<xi, eta>| <= <|xi|, |eta|>.
inline VerificationReport is_paired(const Section& u, const Section& v, double tol = 1e-12) {
  if (u.dim != v.dim || u.values.size() != v.values.size())
    throw std::invalid_argument("sections must have matching shapes");
  VerificationReport report;
  report.check = "polar-pairing";
  report.samples = static_cast<std::size_t>(u.vertices());
  for (int x = 0; x < u.vertices(); ++x) {
    const std::complex<double> inner = u.fiber(x).dot(v.fiber(x));
    const double target = u.fiber(x).norm() * v.fiber(x).norm();
    report.record(std::abs(inner - std::complex<double>(target, 0.0)),
                  {{"vertex", x}, {"inner", {inner.real(), inner.imag()}}, {"norm_product", target}});
  }
  report.finalize(tol);
  return report;
}

struct SignedInequalityResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool hypothesis_ok = true;
  Verdict verdict = Verdict::Pass;
};

/// For a~ = (alpha/|a|) a (zero when a = 0) and b~ likewise, checks
/// |a~ - b~|^2 <= |alpha - beta|^2 + |a - b|^2, assuming alpha <= |a| and
/// beta <= |b|. A violated hypothesis is flagged, not counted as a failure
/// of the inequality.
inline SignedInequalityResult signed_vector_inequality_check(
    const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, double alpha, double beta,
    double tol = 1e-12) {
  if (a.size() != b.size()) throw std::invalid_argument("fiber vectors must have equal length");
  if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("scalars must be nonnegative");
  SignedInequalityResult r;
  const double na = a.norm(), nb = b.norm();
  r.hypothesis_ok = alpha <= na + tol && beta <= nb + tol;
  Eigen::VectorXcd at = na > 0.0 ? Eigen::VectorXcd((alpha / na) * a)
                                 : Eigen::VectorXcd(Eigen::VectorXcd::Zero(a.size()));
  Eigen::VectorXcd bt = nb > 0.0 ? Eigen::VectorXcd((beta / nb) * b)
                                 : Eigen::VectorXcd(Eigen::VectorXcd::Zero(b.size()));
  r.lhs = (at - bt).squaredNorm();
  r.rhs = (alpha - beta) * (alpha - beta) + (a - b).squaredNorm();
  r.verdict = (!r.hypothesis_ok || r.lhs <= r.rhs + tol) ? Verdict::Pass : Verdict::Fail;
  return r;
}

/// One Haar-style unitary per edge, deterministic under the seed. Edges are
/// visited in sorted order so the result is independent of construction path.
inline BundleConnection random_unitary_connection(const WeightedGraph& g, int dim,
                                                  std::uint64_t seed) {
  Rng rng(seed, 0x636f6e6eu);
  BundleConnection::PhiMap phi;
  for (const auto& e : g.edges())
    if (e.b > 0.0 && e.x != e.y) phi[{e.x, e.y}] = haar_unitary(dim, rng);
  return BundleConnection(g, dim, std::move(phi));
}

/// Random Hermitian field with W(x) >= c(x) * I: a seeded positive
/// semidefinite part G G*/d on top of the killing term.
inline EndomorphismField random_endomorphism_above_c(const WeightedGraph& g, int dim,
                                                     std::uint64_t seed) {
  Rng rng(seed, 0x656e646fu);
  EndomorphismField::WMap w;
  for (int x = 0; x < g.n(); ++x) {
    Eigen::MatrixXcd gauss = rng.cnormal_matrix(dim, dim);
    w[x] = g.c()(x) * Eigen::MatrixXcd::Identity(dim, dim) +
           (gauss * gauss.adjoint()) / static_cast<double>(dim);
  }
  return EndomorphismField(g.n(), dim, std::move(w));
}

// ---------------------------------------------------------------------------
// JSON interface:
//   { "dim": d, "phi": [[x, y, [[re,im], ...]]], "w": [[x, [[re,im], ...]]] }
// with matrices flattened row-major into d*d [re, im] pairs, phi listed for
// x < y only, w optional (missing vertices get the zero matrix).
// ---------------------------------------------------------------------------

inline Eigen::MatrixXcd matrix_from_json(const nlohmann::json& entries, int dim) {
  if (!entries.is_array() || static_cast<int>(entries.size()) != dim * dim)
    throw IoError("bundle json: matrix must be a row-major list of dim^2 [re, im] pairs");
  Eigen::MatrixXcd mat(dim, dim);
  int k = 0;
  for (const auto& pair : entries) {
    if (!pair.is_array() || pair.size() != 2) throw IoError("bundle json: matrix entry must be [re, im]");
    mat(k / dim, k % dim) = {pair[0].get<double>(), pair[1].get<double>()};
    ++k;
  }
  return mat;
}

inline nlohmann::json matrix_to_json(const Eigen::MatrixXcd& mat) {
  nlohmann::json entries = nlohmann::json::array();
  for (Eigen::Index i = 0; i < mat.rows(); ++i)
    for (Eigen::Index j = 0; j < mat.cols(); ++j)
      entries.push_back({mat(i, j).real(), mat(i, j).imag()});
  return entries;
}

struct BundleData {
  BundleConnection conn;
  EndomorphismField w;
};

inline BundleData bundle_from_json(const nlohmann::json& j, const WeightedGraph& g,
                                   const Tolerances& tol = Tolerances{}) {
  try {
    const int dim = j.at("dim").get<int>();
    if (dim < 1) throw IoError("bundle json: dim must be >= 1");
    BundleConnection::PhiMap phi;
    for (const auto& entry : j.at("phi")) {
      if (!entry.is_array() || entry.size() != 3) throw IoError("bundle json: phi entry must be [x, y, matrix]");
      const int x = entry[0].get<int>();
      const int y = entry[1].get<int>();
      if (x >= y) throw IoError("bundle json: phi must be listed for x < y only");
      if (!phi.emplace(std::make_pair(x, y), matrix_from_json(entry[2], dim)).second)
        throw IoError("bundle json: duplicate phi entry");
    }
    EndomorphismField::WMap w;
    if (j.contains("w")) {
      for (const auto& entry : j.at("w")) {
        if (!entry.is_array() || entry.size() != 2) throw IoError("bundle json: w entry must be [x, matrix]");
        const int x = entry[0].get<int>();
        if (!w.emplace(x, matrix_from_json(entry[1], dim)).second)
          throw IoError("bundle json: duplicate w entry");
      }
    }
    return BundleData{BundleConnection(g, dim, std::move(phi), tol),
                      EndomorphismField(g.n(), dim, std::move(w))};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bundle json: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("bundle json: ") + e.what());
  }
}

inline nlohmann::json bundle_to_json(const BundleConnection& conn, const EndomorphismField& w) {
  nlohmann::json phi = nlohmann::json::array();
  for (const auto& [key, mat] : conn.stored())
    phi.push_back({key.first, key.second, matrix_to_json(mat)});
  nlohmann::json wj = nlohmann::json::array();
  for (const auto& [x, mat] : w.stored()) wj.push_back({x, matrix_to_json(mat)});
  return {{"dim", conn.dim()}, {"phi", phi}, {"w", wj}};
}

inline BundleData load_bundle(const std::string& path, const WeightedGraph& g,
                              const Tolerances& tol = Tolerances{}) {
  return bundle_from_json(load_json_file(path), g, tol);
}

} // namespace formdom
