#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "formdom/config.hpp"
#include "formdom/forms.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"

namespace formdom {

/// Thrown when an iterative method exhausts its budget; carries the last
/// residual estimate in the message.
struct ConvergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Heat semigroup e^{-tL} of a form's generator, via one cached Hermitian
/// eigendecomposition of M^{-1/2} h M^{-1/2}:
///   e^{-tL} xi = M^{-1/2} U e^{-t Lambda} U* M^{1/2} xi.
/// Amortizes the factorization across many (t, xi) evaluations.
class HeatPropagator {
 public:
  explicit HeatPropagator(const FormOperator& form)
      : sqrt_m_(form.m_expanded().cwiseSqrt()), inv_sqrt_m_(sqrt_m_.cwiseInverse()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(form.symmetrized());
    if (es.info() != Eigen::Success) throw ConvergenceError("eigendecomposition failed");
    eigenvalues_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
  }

  Eigen::Index size() const { return eigenvalues_.size(); }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }

  Eigen::VectorXcd apply(double t, const Eigen::VectorXcd& xi) const {
    if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
    if (xi.size() != size()) throw std::invalid_argument("section length must match form size");
    Eigen::VectorXcd coeffs = eigenvectors_.adjoint() * (sqrt_m_.asDiagonal() * xi).eval();
    coeffs.array() *= (-t * eigenvalues_.array()).exp();
    return inv_sqrt_m_.asDiagonal() * (eigenvectors_ * coeffs).eval();
  }

 private:
  Eigen::VectorXd sqrt_m_, inv_sqrt_m_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXcd eigenvectors_;
};

/// Dense oracle for e^{-tL} xi. For repeated evaluations on one form,
/// construct a HeatPropagator instead.
inline Eigen::VectorXcd expm_dense(const FormOperator& form, double t, const Eigen::VectorXcd& xi,
                                   const Limits& limits = Limits{}) {
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  if (static_cast<std::size_t>(form.size()) > limits.dense_limit)
    throw std::invalid_argument("form size exceeds the dense limit (" +
                                std::to_string(limits.dense_limit) + ")");
  return HeatPropagator(form).apply(t, xi);
}
inline Section expm_dense(const FormOperator& form, double t, const Section& xi,
                          const Limits& limits = Limits{}) {
  return Section(xi.dim, expm_dense(form, t, xi.values, limits));
}

/// Restarted Lanczos approximation of e^{-tL} xi in the m-weighted inner
/// product: full-reorthogonalized Lanczos on M^{-1/2} h M^{-1/2} applied to
/// w = M^{1/2} xi. Each restart cycle grows the subspace until its
/// a-posteriori error bound admits the remaining time, otherwise advances by
/// the largest substep the budget allows and restarts from the propagated
/// vector. A vanishing off-diagonal means the Krylov space is invariant and
/// the cycle is exact for any step.
///
/// The per-cycle bound is the error representation
///   || e^{-tau A} w - y_k(tau) || <= beta0 * beta_k *
///       integral_0^tau | [e^{-s T_k}]_{k,1} | ds,
/// valid with ||e^{-sA}|| <= 1 since A >= 0; the integrand is evaluated from
/// the eigendecomposition of T_k on a geometric grid that resolves its
/// s^{k-1} launch. Budgets are allocated proportionally to simulated time,
/// so the total relative error stays below tol/8 in the l^2(m) norm.
inline Eigen::VectorXcd expm_krylov(const FormOperator& form, double t, const Eigen::VectorXcd& xi,
                                    double tol = 1e-8, const Limits& limits = Limits{}) {
  if (t < 0.0) throw std::invalid_argument("time must be nonnegative");
  if (xi.size() != form.size()) throw std::invalid_argument("section length must match form size");
  if (!(tol > 0.0)) throw std::invalid_argument("tolerance must be positive");
  const Eigen::VectorXd sqrt_m = form.m_expanded().cwiseSqrt();
  const Eigen::VectorXd inv_sqrt_m = sqrt_m.cwiseInverse();
  const Eigen::MatrixXcd hs = form.symmetrized();

  Eigen::VectorXcd w = sqrt_m.asDiagonal() * xi;
  const double beta_total = w.norm();
  if (beta_total == 0.0 || t == 0.0) return xi;

  const int max_dim = static_cast<int>(std::min<Eigen::Index>(limits.krylov_max_dim, form.size()));
  const double budget = tol / 8.0; // total relative error allowance

  // integral_0^tau |[e^{-s T_k}]_{k,1}| ds via trapezoids on a geometric
  // grid; [e^{-s T_k}]_{k,1} vanishes to order k-1 at s = 0.
  auto error_integral = [](const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>& es, int k,
                           double tau) {
    const Eigen::VectorXd& lam = es.eigenvalues();
    const Eigen::VectorXd wts =
        (es.eigenvectors().row(k - 1).array() * es.eigenvectors().row(0).array()).transpose();
    const int pts = 128;
    double acc = 0.0, prev_s = 0.0;
    double prev_phi = k == 1 ? 1.0 : 0.0;
    for (int i = 0; i <= pts; ++i) {
      const double s = tau * std::pow(10.0, -12.0 * (1.0 - static_cast<double>(i) / pts));
      const double phi = (wts.array() * (-s * lam.array()).exp()).sum();
      acc += 0.5 * (std::abs(prev_phi) + std::abs(phi)) * (s - prev_s);
      prev_s = s;
      prev_phi = std::abs(phi);
    }
    return acc;
  };

  double remaining = t;
  double last_estimate = 1.0;
  for (int cycle = 0; cycle < limits.krylov_max_restarts; ++cycle) {
    const double beta0 = w.norm();
    // fully decayed: the remaining evolution only contracts further
    if (beta0 <= 0.25 * tol * beta_total) return inv_sqrt_m.asDiagonal() * w;

    Eigen::MatrixXcd v(form.size(), max_dim);
    std::vector<double> alpha, beta;
    v.col(0) = w / beta0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    double b_last = 0.0;
    int dims = 0;
    bool exact = false, accept_full = false;

    for (int k = 1; k <= max_dim; ++k) {
      Eigen::VectorXcd u = hs * v.col(k - 1);
      const double a = v.col(k - 1).dot(u).real();
      alpha.push_back(a);
      u -= a * v.col(k - 1);
      if (k > 1) u -= beta[static_cast<std::size_t>(k - 2)] * v.col(k - 2);
      // two-pass reorthogonalization keeps the basis orthonormal at long t
      for (int pass = 0; pass < 2; ++pass)
        u -= v.leftCols(k) * (v.leftCols(k).adjoint() * u).eval();
      const double b = u.norm();

      Eigen::MatrixXd tk = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) {
        tk(i, i) = alpha[static_cast<std::size_t>(i)];
        if (i + 1 < k) tk(i, i + 1) = tk(i + 1, i) = beta[static_cast<std::size_t>(i)];
      }
      es.compute(tk);
      dims = k;
      b_last = b;
      if (b <= 1e-14 * beta0) { // invariant subspace
        exact = true;
        break;
      }
      if (beta0 * b * error_integral(es, k, remaining) <= budget * beta_total * remaining / t) {
        accept_full = true;
        break;
      }
      if (k < max_dim) {
        beta.push_back(b);
        v.col(k) = u / b;
      }
    }

    double tau = remaining;
    if (!exact && !accept_full) {
      bool found = false;
      for (int h = 1; h <= 60 && !found; ++h) {
        tau = remaining * std::pow(0.5, h);
        last_estimate = beta0 * b_last * error_integral(es, dims, tau) / beta_total;
        if (last_estimate <= budget * tau / t) found = true;
      }
      if (!found)
        throw ConvergenceError(
            "Krylov exponential stalled within " + std::to_string(max_dim) +
            " dimensions: smallest substep still has relative error estimate " +
            std::to_string(last_estimate));
    }

    Eigen::VectorXd coeff =
        es.eigenvectors() * ((-tau * es.eigenvalues().array()).exp() *
                             es.eigenvectors().row(0).transpose().array())
                                .matrix();
    w = v.leftCols(dims) * (beta0 * coeff).cast<std::complex<double>>();
    remaining -= tau;
    if (remaining <= t * 1e-15) return inv_sqrt_m.asDiagonal() * w;
  }
  throw ConvergenceError("Krylov exponential exhausted " +
                         std::to_string(limits.krylov_max_restarts) +
                         " restart cycles (last relative error estimate " +
                         std::to_string(last_estimate) + ")");
}
inline Section expm_krylov(const FormOperator& form, double t, const Section& xi,
                           double tol = 1e-8, const Limits& limits = Limits{}) {
  return Section(xi.dim, expm_krylov(form, t, xi.values, tol, limits));
}

/// One evaluated semigroup action, for audit trails.
struct SemigroupSample {
  double t = 0.0;
  Section input;
  Section output;
  std::string method;
};

inline SemigroupSample sample_dense(const FormOperator& form, double t, const Section& xi,
                                    const Limits& limits = Limits{}) {
  return SemigroupSample{t, xi, expm_dense(form, t, xi, limits), "dense"};
}

/// e^{-tB} f >= 0 entrywise for f >= 0: checked on every basis vector (the
/// columns of the semigroup matrix, sufficient by linearity) and on sampled
/// random nonnegative functions across the time grid.
inline VerificationReport check_positivity_preserving(const FormOperator& form,
                                                      const std::vector<double>& t_grid,
                                                      std::size_t samples, std::uint64_t seed,
                                                      const Tolerances& tol = Tolerances{}) {
  if (form.dim() != 1) throw std::invalid_argument("positivity check needs a scalar form");
  VerificationReport report;
  report.check = "positivity-preserving";
  report.seed = seed;
  report.samples = samples + static_cast<std::size_t>(form.size());
  HeatPropagator prop(form);
  Rng rng(seed, 0x706f73u);
  const Eigen::Index n = form.size();
  auto scan = [&](const Eigen::VectorXcd& f, const nlohmann::json& label) {
    for (double t : t_grid) {
      Eigen::VectorXcd image = prop.apply(t, f);
      Eigen::Index x;
      const double min_real = image.real().minCoeff(&x);
      const double max_imag = image.imag().cwiseAbs().maxCoeff();
      nlohmann::json detail = label;
      detail["t"] = t;
      detail["vertex"] = static_cast<int>(x);
      detail["entry"] = min_real;
      report.record(std::max(-min_real, max_imag), detail);
    }
  };
  for (Eigen::Index x = 0; x < n; ++x)
    scan(Eigen::VectorXcd::Unit(n, x), {{"input", "basis"}, {"index", static_cast<int>(x)}});
  for (std::size_t s = 0; s < samples; ++s) {
    Eigen::VectorXd f = rng.normal_vector(static_cast<int>(n)).cwiseAbs();
    scan(f.cast<std::complex<double>>(), {{"input", "random"}, {"sample", s}});
  }
  report.finalize(tol.positivity);
  return report;
}

/// |e^{-tA} xi| <= e^{-tB} |xi| entrywise over sampled sections and the time
/// grid; records the worst (sample, t, vertex) triple.
inline VerificationReport check_domination(const FormOperator& mag_form,
                                           const FormOperator& sc_form,
                                           const std::vector<double>& t_grid, std::size_t samples,
                                           std::uint64_t seed,
                                           const Tolerances& tol = Tolerances{}) {
  if (sc_form.dim() != 1) throw std::invalid_argument("dominating form must be scalar");
  if (mag_form.vertices() != sc_form.vertices())
    throw std::invalid_argument("forms must share the vertex set");
  VerificationReport report;
  report.check = "semigroup-domination";
  report.seed = seed;
  report.samples = samples;
  HeatPropagator mag_prop(mag_form);
  HeatPropagator sc_prop(sc_form);
  Rng rng(seed, 0x646f6du);
  const int d = mag_form.dim();
  const int n = mag_form.vertices();
  for (std::size_t s = 0; s < samples; ++s) {
    Section xi(d, rng.cnormal_vector(n * d));
    Eigen::VectorXcd abs_xi = absolute(xi).cast<std::complex<double>>();
    for (double t : t_grid) {
      Eigen::VectorXd lhs = absolute(Section(d, mag_prop.apply(t, xi.values)));
      Eigen::VectorXd rhs = sc_prop.apply(t, abs_xi).real();
      Eigen::Index x;
      const double gap = (lhs - rhs).maxCoeff(&x);
      report.record(gap,
                    {{"sample", s}, {"t", t}, {"vertex", static_cast<int>(x)},
                     {"lhs", lhs(x)}, {"rhs", rhs(x)}});
    }
  }
  report.finalize(tol.domination);
  return report;
}

} // namespace formdom
