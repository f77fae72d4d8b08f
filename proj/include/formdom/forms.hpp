#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "formdom/bundle.hpp"
#include "formdom/config.hpp"
#include "formdom/graph.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"

namespace formdom {

enum class BoundaryTag { Neumann, Dirichlet };

/// Assembled nonnegative form on sections, represented by the Hermitian
/// stiffness matrix h with Q(u, v) = sum_i (h u)_i conj(v_i). The generator
/// in l^2(m) is M^{-1} h (self-adjoint with respect to the m-weighted inner
/// product); the standard-Hermitian conjugation M^{-1/2} h M^{-1/2} is
/// exposed for eigensolvers.
/// Provenance of an assembled operator, carried into reports.
struct FormMeta {
  std::uint64_t graph_hash = 0;
  std::uint64_t connection_hash = 0;
  std::uint64_t endomorphism_hash = 0;
};

class FormOperator {
 public:
  using Meta = FormMeta;

  FormOperator(Eigen::MatrixXcd h, Eigen::VectorXd m, int dim, BoundaryTag bc,
               std::vector<int> interior = {}, Meta meta = Meta{},
               const Tolerances& tol = Tolerances{})
      : h_(std::move(h)), m_(std::move(m)), dim_(dim), bc_(bc),
        interior_(std::move(interior)), meta_(meta) {
    if (dim_ < 1) throw std::invalid_argument("fiber dimension must be >= 1");
    if (h_.rows() != h_.cols()) throw std::invalid_argument("form matrix must be square");
    if (h_.rows() != m_.size() * dim_)
      throw std::invalid_argument("form size must equal vertex count times fiber dimension");
    const double herm = (h_ - h_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > tol.hermiticity)
      throw InvariantError("assembled form is not Hermitian (residual " + std::to_string(herm) + ")");
    if (m_.size() > 0 && !(m_.minCoeff() > 0.0))
      throw std::invalid_argument("measure must be positive");
    m_expanded_.resize(h_.rows());
    for (Eigen::Index x = 0; x < m_.size(); ++x)
      m_expanded_.segment(x * dim_, dim_).setConstant(m_(x));
  }

  int dim() const { return dim_; }
  int vertices() const { return static_cast<int>(m_.size()); }
  Eigen::Index size() const { return h_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return h_; }
  const Eigen::VectorXd& m() const { return m_; }
  const Eigen::VectorXd& m_expanded() const { return m_expanded_; }
  BoundaryTag bc() const { return bc_; }
  const std::vector<int>& interior() const { return interior_; }
  const Meta& meta() const { return meta_; }

  /// Q(u, v), linear in u and conjugate-linear in v.
  std::complex<double> evaluate(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) const {
    if (u.size() != size() || v.size() != size())
      throw std::invalid_argument("section length must match form size");
    return v.dot(h_ * u);
  }
  std::complex<double> evaluate(const Section& u, const Section& v) const {
    return evaluate(u.values, v.values);
  }
  double quadratic(const Eigen::VectorXcd& u) const { return evaluate(u, u).real(); }
  double quadratic(const Section& u) const { return quadratic(u.values); }

  /// <u, v>_{l^2(m)}, linear in u and conjugate-linear in v.
  std::complex<double> inner_m(const Eigen::VectorXcd& u, const Eigen::VectorXcd& v) const {
    return (v.array().conjugate() * m_expanded_.array().cast<std::complex<double>>() * u.array()).sum();
  }
  double norm_m(const Eigen::VectorXcd& u) const { return std::sqrt(std::abs(inner_m(u, u))); }

  /// Generator action L u = M^{-1} h u, so that <L u, v>_{l^2(m)} = Q(u, v).
  Eigen::VectorXcd generator_apply(const Eigen::VectorXcd& u) const {
    return (h_ * u).cwiseQuotient(m_expanded_.cast<std::complex<double>>());
  }
  Eigen::MatrixXcd generator_matrix() const {
    return m_expanded_.cwiseInverse().asDiagonal().toDenseMatrix().cast<std::complex<double>>() * h_;
  }
  /// M^{-1/2} h M^{-1/2}: standard Hermitian matrix similar to the generator.
  Eigen::MatrixXcd symmetrized() const {
    Eigen::VectorXd inv_sqrt = m_expanded_.cwiseSqrt().cwiseInverse();
    return inv_sqrt.asDiagonal() * h_ * inv_sqrt.asDiagonal();
  }

  std::uint64_t hash() const {
    HashAccumulator acc;
    acc.pod(dim_);
    acc.pod(static_cast<int>(bc_));
    for (Eigen::Index i = 0; i < h_.rows(); ++i)
      for (Eigen::Index j = 0; j < h_.cols(); ++j) {
        acc.pod(h_(i, j).real());
        acc.pod(h_(i, j).imag());
      }
    for (Eigen::Index i = 0; i < m_.size(); ++i) acc.pod(m_(i));
    return acc.value();
  }

 private:
  Eigen::MatrixXcd h_;
  Eigen::VectorXd m_;
  int dim_;
  BoundaryTag bc_;
  std::vector<int> interior_;
  Meta meta_;
  Eigen::VectorXd m_expanded_;
};

/// Stiffness of 1/2 sum_{x,y} b(x,y)|u(x) - Phi_{x,y} u(y)|^2 + sum_x <W(x)u(x), u(x)>,
/// accumulated in a single pass over unordered edges (both orientations of
/// the double sum contribute the same blocks).
inline FormOperator assemble_magnetic(const WeightedGraph& g, const BundleConnection& conn,
                                      const EndomorphismField& w,
                                      const Tolerances& tol = Tolerances{}) {
  if (conn.n() != g.n() || w.n() != g.n()) throw std::invalid_argument("vertex counts must match");
  if (conn.dim() != w.dim()) throw std::invalid_argument("fiber dimensions must match");
  const int d = conn.dim();
  const Eigen::Index size = static_cast<Eigen::Index>(g.n()) * d;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(size, size);
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(d, d);
  for (const auto& e : g.edges()) {
    if (e.b == 0.0 || e.x == e.y) continue;
    const Eigen::MatrixXcd phi = conn.phi(e.x, e.y);
    h.block(e.x * d, e.x * d, d, d) += e.b * id;
    h.block(e.y * d, e.y * d, d, d) += e.b * id;
    h.block(e.x * d, e.y * d, d, d) -= e.b * phi;
    h.block(e.y * d, e.x * d, d, d) -= e.b * phi.adjoint();
  }
  // A non-Hermitian W surfaces as an InvariantError from the constructor.
  for (int x = 0; x < g.n(); ++x) h.block(x * d, x * d, d, d) += w.at(x);
  FormOperator::Meta meta{g.hash(), conn.hash(), w.hash()};
  return FormOperator(std::move(h), g.m(), d, BoundaryTag::Neumann, {}, meta, tol);
}

/// Scalar form Q_{b,c}: the magnetic form with d = 1, trivial transport and
/// W = c. Its generator agrees with the formal Laplacian.
inline FormOperator assemble_scalar(const WeightedGraph& g, const Tolerances& tol = Tolerances{}) {
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(g.n(), g.n());
  for (const auto& e : g.edges()) {
    if (e.b == 0.0 || e.x == e.y) continue;
    h(e.x, e.x) += e.b;
    h(e.y, e.y) += e.b;
    h(e.x, e.y) -= e.b;
    h(e.y, e.x) -= e.b;
  }
  for (int x = 0; x < g.n(); ++x) h(x, x) += g.c()(x);
  FormOperator::Meta meta{g.hash(), 0, 0};
  return FormOperator(std::move(h), g.m(), 1, BoundaryTag::Neumann, {}, meta, tol);
}

/// Principal block submatrix on the interior vertices: the form restricted
/// to sections vanishing outside the interior, which is exact at finite
/// scale for the Dirichlet boundary condition.
inline FormOperator dirichlet_restriction(const FormOperator& form, const Truncation& t,
                                          const Tolerances& tol = Tolerances{}) {
  if (form.vertices() != t.parent.n())
    throw std::invalid_argument("form was not assembled on the truncation's parent");
  const int d = form.dim();
  const Eigen::Index size = static_cast<Eigen::Index>(t.interior.size()) * d;
  Eigen::MatrixXcd h(size, size);
  Eigen::VectorXd m(t.interior.size());
  for (std::size_t i = 0; i < t.interior.size(); ++i) {
    m(static_cast<Eigen::Index>(i)) = form.m()(t.interior[i]);
    for (std::size_t j = 0; j < t.interior.size(); ++j)
      h.block(static_cast<Eigen::Index>(i) * d, static_cast<Eigen::Index>(j) * d, d, d) =
          form.matrix().block(static_cast<Eigen::Index>(t.interior[i]) * d,
                              static_cast<Eigen::Index>(t.interior[j]) * d, d, d);
  }
  return FormOperator(std::move(h), std::move(m), d, BoundaryTag::Dirichlet, t.interior,
                      form.meta(), tol);
}

inline std::complex<double> evaluate_form(const FormOperator& form, const Section& u,
                                          const Section& v) {
  return form.evaluate(u, v);
}

/// sqrt(Q(u, u) + mu ||u||^2_{l^2(m)}); any mu > 0 is admissible since the
/// forms here are nonnegative.
inline double form_norm(const FormOperator& form, const Eigen::VectorXcd& u, double mu = 1.0) {
  if (!(mu > 0.0)) throw std::invalid_argument("shift mu must be positive");
  return std::sqrt(form.quadratic(u) + mu * std::abs(form.inner_m(u, u)));
}

/// Smallest eigenvalue of the generator in l^2(m).
inline double lambda_min(const FormOperator& form) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(form.symmetrized(), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline Section scalar_section(const Eigen::VectorXd& f) {
  return Section(1, f.cast<std::complex<double>>());
}

/// Q(|f|) <= Q(f) over sampled complex f, plus the companion Q(f+) <= Q(f)
/// for real f. Scalar forms only.
inline VerificationReport check_first_bd(const FormOperator& form, std::size_t samples,
                                         std::uint64_t seed,
                                         const Tolerances& tol = Tolerances{}) {
  if (form.dim() != 1) throw std::invalid_argument("first Beurling-Deny check needs a scalar form");
  VerificationReport report;
  report.check = "first-beurling-deny";
  report.seed = seed;
  report.samples = samples;
  Rng rng(seed, 0x62641u);
  const Eigen::Index n = form.size();
  for (std::size_t s = 0; s < samples; ++s) {
    Eigen::VectorXcd f = rng.cnormal_vector(static_cast<int>(n));
    const double qf = form.quadratic(f);
    const double qabs = form.quadratic(f.cwiseAbs().cast<std::complex<double>>().eval());
    report.record(qabs - qf, {{"kind", "modulus"}, {"sample", s}, {"q_f", qf}, {"q_abs", qabs}});

    Eigen::VectorXd r = rng.normal_vector(static_cast<int>(n));
    Eigen::VectorXd rplus = r.cwiseMax(0.0);
    const double qr = form.quadratic(r.cast<std::complex<double>>().eval());
    const double qplus = form.quadratic(rplus.cast<std::complex<double>>().eval());
    report.record(qplus - qr, {{"kind", "positive-part"}, {"sample", s}, {"q_f", qr}, {"q_plus", qplus}});
  }
  report.finalize(tol.first_bd);
  return report;
}

/// ||f ^ g||_q^2 <= ||f||_q^2 + ||g||_q^2 with mu = 1, for real f, g.
inline VerificationReport check_lattice_inequality(const FormOperator& form,
                                                   const Eigen::VectorXd& f,
                                                   const Eigen::VectorXd& g,
                                                   const Tolerances& tol = Tolerances{}) {
  if (form.dim() != 1) throw std::invalid_argument("lattice check needs a scalar form");
  if (f.size() != form.size() || g.size() != form.size())
    throw std::invalid_argument("function length must match form size");
  VerificationReport report;
  report.check = "lattice-minimum";
  report.samples = 1;
  Eigen::VectorXd fg = f.cwiseMin(g);
  auto sq = [&](const Eigen::VectorXd& v) {
    const double fn = form_norm(form, v.cast<std::complex<double>>().eval(), 1.0);
    return fn * fn;
  };
  const double lhs = sq(fg), rhs = sq(f) + sq(g);
  report.record(lhs - rhs, {{"lhs", lhs}, {"rhs", rhs}});
  report.finalize(tol.lattice);
  return report;
}

/// For 0 <= v <= |u| and u~ = sgn_pair(u, v):
///   Re Q_Phi(u, u~) >= Q_{b,c}(|u|, v)      (pairing inequality)
///   Q_Phi(u~)       <= Q_{b,c}(v) + Q_Phi(u) (domain bound)
/// Requires the magnetic and scalar forms to live over the same graph; the
/// inequalities need W(x) >= c(x) pointwise to hold.
inline VerificationReport check_kato_form_inequality(const FormOperator& mag,
                                                     const FormOperator& sc, const Section& u,
                                                     const Eigen::VectorXd& v,
                                                     const Tolerances& tol = Tolerances{}) {
  if (sc.dim() != 1) throw std::invalid_argument("comparison form must be scalar");
  if (mag.vertices() != sc.vertices()) throw std::invalid_argument("forms must share the vertex set");
  if (u.dim != mag.dim() || u.vertices() != mag.vertices())
    throw std::invalid_argument("section shape must match the magnetic form");
  Eigen::VectorXd abs_u = absolute(u);
  for (Eigen::Index x = 0; x < v.size(); ++x)
    if (v(x) < -tol.kato || v(x) > abs_u(x) + tol.kato)
      throw std::invalid_argument("precondition 0 <= v <= |u| violated at vertex " +
                                  std::to_string(x));
  Section u_tilde = sgn_pair(u, v.cwiseMax(0.0));

  VerificationReport report;
  report.check = "kato-form-inequality";
  report.samples = 1;
  const double re_pair = mag.evaluate(u.values, u_tilde.values).real();
  const double sc_pair =
      sc.evaluate(abs_u.cast<std::complex<double>>().eval(), v.cast<std::complex<double>>().eval())
          .real();
  report.record(sc_pair - re_pair,
                {{"kind", "pairing"}, {"re_q_mag", re_pair}, {"q_scalar", sc_pair}});

  const double domain_lhs = mag.quadratic(u_tilde);
  const double domain_rhs = sc.quadratic(v.cast<std::complex<double>>().eval()) + mag.quadratic(u);
  report.record(domain_lhs - domain_rhs,
                {{"kind", "domain"}, {"lhs", domain_lhs}, {"rhs", domain_rhs}});
  report.finalize(tol.kato);
  return report;
}

/// Seeded (u, v) sampling loop for check_kato_form_inequality: u complex
/// Gaussian, v a uniform pointwise fraction of |u|.
inline VerificationReport check_kato_sampled(const FormOperator& mag, const FormOperator& sc,
                                             std::size_t samples, std::uint64_t seed,
                                             const Tolerances& tol = Tolerances{}) {
  VerificationReport report;
  report.check = "kato-form-inequality";
  report.seed = seed;
  report.samples = samples;
  Rng rng(seed, 0x6b61746fu);
  const int n = mag.vertices();
  for (std::size_t s = 0; s < samples; ++s) {
    Section u(mag.dim(), rng.cnormal_vector(static_cast<Eigen::Index>(n) * mag.dim()));
    Eigen::VectorXd v = absolute(u);
    for (Eigen::Index x = 0; x < v.size(); ++x) v(x) *= rng.uniform();
    VerificationReport one = check_kato_form_inequality(mag, sc, u, v, tol);
    nlohmann::json detail = one.worst_case;
    detail["sample"] = s;
    report.record(one.max_violation, std::move(detail));
  }
  report.finalize(tol.kato);
  return report;
}

/// Matrix Market coordinate export (complex Hermitian, lower triangle) of
/// the stiffness matrix.
inline void export_matrix_market(const FormOperator& form, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  const Eigen::MatrixXcd& h = form.matrix();
  std::vector<std::tuple<Eigen::Index, Eigen::Index, std::complex<double>>> entries;
  for (Eigen::Index j = 0; j < h.cols(); ++j)
    for (Eigen::Index i = j; i < h.rows(); ++i)
      if (h(i, j) != std::complex<double>(0.0, 0.0)) entries.emplace_back(i, j, h(i, j));
  out << "%%MatrixMarket matrix coordinate complex hermitian\n";
  out << h.rows() << " " << h.cols() << " " << entries.size() << "\n";
  out.precision(17);
  for (const auto& [i, j, val] : entries)
    out << (i + 1) << " " << (j + 1) << " " << val.real() << " " << val.imag() << "\n";
  if (!out) throw IoError("write failure on '" + path + "'");
}

} // namespace formdom
