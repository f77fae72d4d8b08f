#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "formdom/bundle.hpp"
#include "formdom/config.hpp"
#include "formdom/forms.hpp"
#include "formdom/graph.hpp"
#include "formdom/metrics.hpp"
#include "formdom/semigroup.hpp"

namespace formdom {

/// Solves (L + z) u = f in l^2(m), i.e. (h + z M) u = M f: LDLT below the
/// dense limit, Jacobi-preconditioned conjugate gradient above it. The
/// residual ||(L+z)u - f||_m is verified against tol.resolvent * ||f||_m.
inline Eigen::VectorXcd resolvent_apply(const FormOperator& form, double z,
                                        const Eigen::VectorXcd& f,
                                        const Config& cfg = default_config()) {
  if (!(z > 0.0)) throw std::invalid_argument("resolvent shift must be positive");
  if (f.size() != form.size()) throw std::invalid_argument("section length must match form size");
  const Eigen::VectorXd& m = form.m_expanded();
  Eigen::VectorXcd rhs = m.asDiagonal() * f;
  Eigen::VectorXcd u;
  if (static_cast<std::size_t>(form.size()) <= cfg.limits.dense_limit) {
    Eigen::MatrixXcd a = form.matrix();
    a.diagonal() += (z * m).cast<std::complex<double>>();
    u = Eigen::LDLT<Eigen::MatrixXcd>(a).solve(rhs);
  } else {
    // CG on the Hermitian positive definite system (h + zM) u = M f with
    // Jacobi preconditioner.
    const Eigen::MatrixXcd& h = form.matrix();
    Eigen::VectorXd diag = h.diagonal().real() + z * m;
    auto apply = [&](const Eigen::VectorXcd& v) -> Eigen::VectorXcd {
      return h * v + (z * m.array() * v.array()).matrix();
    };
    u = Eigen::VectorXcd::Zero(f.size());
    Eigen::VectorXcd r = rhs;
    Eigen::VectorXcd p = r.cwiseQuotient(diag.cast<std::complex<double>>());
    Eigen::VectorXcd zv = p;
    double rz = r.dot(zv).real();
    const double rhs_norm = rhs.norm();
    const std::size_t max_iter = cfg.limits.cg_max_iter_factor * static_cast<std::size_t>(f.size());
    for (std::size_t it = 0; it < max_iter && r.norm() > 0.25 * cfg.tol.resolvent * rhs_norm; ++it) {
      Eigen::VectorXcd ap = apply(p);
      const double alpha = rz / p.dot(ap).real();
      u += alpha * p;
      r -= alpha * ap;
      zv = r.cwiseQuotient(diag.cast<std::complex<double>>());
      const double rz_next = r.dot(zv).real();
      p = zv + (rz_next / rz) * p;
      rz = rz_next;
    }
  }
  // defense in depth: verify the m-weighted residual regardless of solver
  Eigen::VectorXcd residual = form.generator_apply(u) + z * u - f;
  const double fnorm = form.norm_m(f);
  if (fnorm > 0.0 && form.norm_m(residual) > cfg.tol.resolvent * fnorm)
    throw ConvergenceError("resolvent solve residual " + std::to_string(form.norm_m(residual)) +
                           " exceeds " + std::to_string(cfg.tol.resolvent * fnorm));
  return u;
}
inline Section resolvent_apply(const FormOperator& form, double z, const Section& f,
                               const Config& cfg = default_config()) {
  return Section(f.dim, resolvent_apply(form, z, f.values, cfg));
}

/// Per-size observables of the exhaustion probe. Gaps compare the bottom of
/// the Dirichlet and Neumann spectra; the resolvent difference compares
/// (L+1)^{-1} delta_{x0} for the scalar pair. Both observables are artifact
/// constructs: cheap, spectrally meaningful stand-ins for form closeness.
struct ProbeResult {
  std::vector<int> sizes;
  std::vector<double> scalar_gap;
  std::vector<double> magnetic_gap;
  std::vector<double> resolvent_diff;
  double scalar_slope = 0.0;  // least-squares slope of log(gap) vs log(N)
  double magnetic_slope = 0.0;
  int x0 = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const {
    return {{"sizes", sizes},
            {"scalarGap", scalar_gap},
            {"magneticGap", magnetic_gap},
            {"resolventDiff", resolvent_diff},
            {"scalarSlope", scalar_slope},
            {"magneticSlope", magnetic_slope},
            {"probeVertex", x0},
            {"seed", seed}};
  }
};

namespace detail {

/// Interior/boundary split of a generated family member: the boundary is
/// the last ring (vertices at maximal hop distance from x0, plus anything
/// unreachable); this mimics an exhaustion by balls.
inline Truncation last_ring_truncation(const WeightedGraph& g, int x0) {
  std::vector<int> hops(static_cast<std::size_t>(g.n()), -1);
  std::vector<int> frontier{x0};
  hops[static_cast<std::size_t>(x0)] = 0;
  int rmax = 0;
  while (!frontier.empty()) {
    std::vector<int> next;
    for (int x : frontier)
      for (const auto& [y, b] : g.neighbors(x))
        if (b > 0.0 && hops[static_cast<std::size_t>(y)] < 0) {
          hops[static_cast<std::size_t>(y)] = hops[static_cast<std::size_t>(x)] + 1;
          rmax = hops[static_cast<std::size_t>(y)];
          next.push_back(y);
        }
    frontier = std::move(next);
  }
  std::vector<int> interior;
  for (int x = 0; x < g.n(); ++x)
    if (hops[static_cast<std::size_t>(x)] >= 0 && (hops[static_cast<std::size_t>(x)] < rmax || rmax == 0))
      interior.push_back(x);
  if (interior.empty()) interior.push_back(x0);
  return truncate(g, interior);
}

inline double fit_slope(const std::vector<int>& sizes, const std::vector<double>& gaps) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    if (gaps[i] > 0.0) {
      xs.push_back(std::log(static_cast<double>(sizes[i])));
      ys.push_back(std::log(gaps[i]));
    }
  if (xs.size() < 2) return 0.0;
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace detail

/// For each size: generate the family member, split off the last ring,
/// assemble scalar and magnetic Neumann forms plus their Dirichlet
/// restrictions, and record bottom-eigenvalue gaps and the scalar resolvent
/// difference at x0. The connection is seeded per size so the whole result
/// is a function of (family, sizes, dim, seed).
inline ProbeResult run_probe(const FamilySpec& family, std::vector<int> sizes, int dim,
                             std::uint64_t seed, int x0 = 0, bool random_phases = true,
                             const Config& cfg = default_config()) {
  if (sizes.empty()) throw std::invalid_argument("probe needs at least one size");
  std::sort(sizes.begin(), sizes.end());
  sizes.erase(std::unique(sizes.begin(), sizes.end()), sizes.end());
  ProbeResult result;
  result.sizes = sizes;
  result.x0 = x0;
  result.seed = seed;
  for (int n : sizes) {
    WeightedGraph g = generate_family(family, n);
    if (x0 < 0 || x0 >= g.n()) throw std::invalid_argument("probe vertex outside truncation");
    Truncation trunc = detail::last_ring_truncation(g, x0);
    const bool x0_interior =
        std::binary_search(trunc.interior.begin(), trunc.interior.end(), x0);
    if (!x0_interior) throw std::invalid_argument("probe vertex fell on the boundary ring");

    FormOperator sc_n = assemble_scalar(g, cfg.tol);
    FormOperator sc_d = dirichlet_restriction(sc_n, trunc, cfg.tol);
    const double sgap = lambda_min(sc_d) - lambda_min(sc_n);

    BundleConnection conn =
        random_phases
            ? random_unitary_connection(g, dim, seed ^ (0x9e37u + static_cast<std::uint64_t>(n)))
            : BundleConnection(g, dim);
    EndomorphismField w = EndomorphismField::from_killing_term(g, dim);
    FormOperator mag_n = assemble_magnetic(g, conn, w, cfg.tol);
    FormOperator mag_d = dirichlet_restriction(mag_n, trunc, cfg.tol);
    const double mgap = lambda_min(mag_d) - lambda_min(mag_n);

    if (sgap < -cfg.tol.spectral_gap || mgap < -cfg.tol.spectral_gap)
      throw InvariantError("Dirichlet bottom eigenvalue fell below Neumann at size " +
                           std::to_string(n));

    Eigen::VectorXcd delta = Eigen::VectorXcd::Unit(g.n(), x0);
    Eigen::VectorXcd u_n = resolvent_apply(sc_n, 1.0, delta, cfg);
    Eigen::VectorXcd delta_d(static_cast<Eigen::Index>(trunc.interior.size()));
    for (std::size_t i = 0; i < trunc.interior.size(); ++i)
      delta_d(static_cast<Eigen::Index>(i)) = trunc.interior[i] == x0 ? 1.0 : 0.0;
    Eigen::VectorXcd u_d = resolvent_apply(sc_d, 1.0, delta_d, cfg);
    Eigen::VectorXcd u_d_padded = Eigen::VectorXcd::Zero(g.n());
    for (std::size_t i = 0; i < trunc.interior.size(); ++i)
      u_d_padded(trunc.interior[i]) = u_d(static_cast<Eigen::Index>(i));
    result.resolvent_diff.push_back(sc_n.norm_m(u_d_padded - u_n));

    result.scalar_gap.push_back(sgap);
    result.magnetic_gap.push_back(mgap);
  }
  result.scalar_slope = detail::fit_slope(result.sizes, result.scalar_gap);
  result.magnetic_slope = detail::fit_slope(result.sizes, result.magnetic_gap);
  return result;
}

struct TransferThresholds {
  double slope_max = -0.5; // a decaying gap needs a log-log slope at most this
  double gap_max = 1e-2;   // and a final gap below this
};

/// Verdict on "scalar uniqueness transfers to the magnetic form" from probe
/// trends: SUPPORTED when both gaps decay, NOT_SUPPORTED when the scalar gap
/// decays but the magnetic one does not, INCONCLUSIVE when the scalar
/// premise is not observed. Never asserts the converse direction.
struct TransferEvidence {
  std::string verdict; // SUPPORTED | NOT_SUPPORTED | INCONCLUSIVE
  bool scalar_decays = false;
  bool magnetic_decays = false;
  nlohmann::json detail;

  nlohmann::json to_json() const {
    nlohmann::json j = detail;
    j["verdict"] = verdict;
    j["scalarDecays"] = scalar_decays;
    j["magneticDecays"] = magnetic_decays;
    return j;
  }
};

inline TransferEvidence transfer_evidence(const ProbeResult& result,
                                          const TransferThresholds& thresholds = {}) {
  if (result.sizes.empty()) throw std::invalid_argument("transfer evidence needs probe data");
  TransferEvidence ev;
  ev.scalar_decays = result.scalar_slope <= thresholds.slope_max &&
                     result.scalar_gap.back() <= thresholds.gap_max;
  ev.magnetic_decays = result.magnetic_slope <= thresholds.slope_max &&
                       result.magnetic_gap.back() <= thresholds.gap_max;
  if (ev.scalar_decays && ev.magnetic_decays) ev.verdict = "SUPPORTED";
  else if (ev.scalar_decays) ev.verdict = "NOT_SUPPORTED";
  else ev.verdict = "INCONCLUSIVE";
  ev.detail = {{"scalarSlope", result.scalar_slope},
               {"magneticSlope", result.magnetic_slope},
               {"finalScalarGap", result.scalar_gap.back()},
               {"finalMagneticGap", result.magnetic_gap.back()},
               {"slopeThreshold", thresholds.slope_max},
               {"gapThreshold", thresholds.gap_max}};
  return ev;
}

/// One row per size: N, scalarGap, magneticGap, resolventDiff.
inline void write_probe_csv(const ProbeResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "N,scalarGap,magneticGap,resolventDiff\n";
  out.precision(17);
  for (std::size_t i = 0; i < result.sizes.size(); ++i)
    out << result.sizes[i] << "," << result.scalar_gap[i] << "," << result.magnetic_gap[i] << ","
        << result.resolvent_diff[i] << "\n";
  if (!out) throw IoError("write failure on '" + path + "'");
}

} // namespace formdom
