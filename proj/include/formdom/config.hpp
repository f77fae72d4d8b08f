#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace formdom {

/// Central tolerance record. Every checker reads its threshold from here so
/// that CLI overrides reach all modules through one place.
struct Tolerances {
  double hermiticity = 1e-12;     // ||h - h*||_max on assembled operators
  double unitarity = 1e-12;       // ||Phi* Phi - I||_max per transport map
  double unitarity_repair = 1e-8; // residual up to which polar re-projection is attempted
  double psd = 1e-10;             // lambda_min floor for assembled forms
  double endo_psd = 1e-12;        // pointwise positivity floor for W(x)
  double pairing = 1e-12;         // |<u,v> - |u||v|| per vertex
  double signed_inequality = 1e-12; // lhs <= rhs slack in the signed-vector inequality
  double first_bd = 1e-10;        // Q(|f|) <= Q(f) slack
  double lattice = 1e-10;         // ||f^g||_q^2 <= ||f||_q^2 + ||g||_q^2 slack
  double kato = 1e-10;            // form-level domination slack
  double positivity = 1e-12;      // entrywise floor for e^{-tB} f, f >= 0
  double domination = 1e-10;      // entrywise slack for |e^{-tA}xi| <= e^{-tB}|xi|
  double contraction = 1e-10;     // ||e^{-tL}xi|| <= ||xi|| slack
  double resolvent = 1e-10;       // relative residual for (L+z)u = f
  double krylov = 1e-8;           // default relative accuracy of expm_krylov
  double intrinsic = 1e-12;       // slack in (1/m) sum b d^2 <= 1
  double spectral_gap = 1e-10;    // Dirichlet/Neumann eigenvalue ordering slack
};

/// Size/iteration limits for the numerical kernels.
struct Limits {
  std::size_t dense_limit = 2000;   // max matrix side for dense eigendecompositions
  int krylov_max_dim = 60;          // max Lanczos subspace dimension per restart cycle
  int krylov_max_restarts = 256;    // max time-substep cycles before giving up
  std::size_t cg_max_iter_factor = 10; // CG iteration cap = factor * system size
};

/// Default evaluation times for semigroup checks: spans the pre-asymptotic
/// and near-equilibrium regimes.
inline std::vector<double> default_t_grid() { return {0.01, 0.1, 1.0, 10.0}; }

/// Bundle of knobs a run is configured with.
struct Config {
  Tolerances tol;
  Limits limits;
};

inline const Config& default_config() {
  static const Config cfg{};
  return cfg;
}

} // namespace formdom
