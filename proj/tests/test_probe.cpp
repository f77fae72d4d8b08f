#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "testutil.hpp"

using namespace formdom;
using Catch::Matchers::WithinAbs;

namespace {

// Bottom of the Dirichlet spectrum after cutting the far end off a unit
// path of N vertices: mixed Neumann/Dirichlet chain with N-1 free sites.
double path_dirichlet_bottom(int n_full) {
  return 2.0 - 2.0 * std::cos(M_PI / static_cast<double>(2 * n_full - 1));
}

} // namespace

TEST_CASE("resolvent solve") {
  SECTION("zero generator inverts to the identity at z = 1") {
    WeightedGraph g(4, Eigen::VectorXd::Ones(4), Eigen::VectorXd::Zero(4), {});
    FormOperator sc = assemble_scalar(g);
    auto rng = testutil::case_rng(70);
    Eigen::VectorXcd f = testutil::random_section(rng, 4, 1).values;
    CHECK((resolvent_apply(sc, 1.0, f) - f).norm() <= 1e-12 * f.norm());
  }
  SECTION("eigenvectors scale by 1/(lambda + z)") {
    WeightedGraph g = generate_family(FamilySpec{}, 6);
    FormOperator sc = assemble_scalar(g);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sc.matrix().real());
    for (int j = 0; j < 6; ++j) {
      Eigen::VectorXcd v = es.eigenvectors().col(j).cast<std::complex<double>>();
      Eigen::VectorXcd u = resolvent_apply(sc, 2.0, v);
      REQUIRE((u - v / (es.eigenvalues()(j) + 2.0)).norm() <= 1e-10);
    }
  }
  SECTION("residual meets the advertised bound on random forms") {
    auto rng = testutil::case_rng(71);
    for (int trial = 0; trial < 10; ++trial) {
      WeightedGraph g = testutil::random_graph(rng, 2, 30);
      const int d = 1 + static_cast<int>(rng.uniform_int(0, 2));
      BundleConnection conn = random_unitary_connection(g, d, 800 + trial);
      EndomorphismField w = EndomorphismField::from_killing_term(g, d);
      FormOperator mag = assemble_magnetic(g, conn, w);
      Eigen::VectorXcd f = testutil::random_section(rng, g.n(), d).values;
      const double z = rng.uniform(0.1, 3.0);
      Eigen::VectorXcd u = resolvent_apply(mag, z, f);
      REQUIRE(mag.norm_m(mag.generator_apply(u) + z * u - f) <= 1e-10 * mag.norm_m(f));
    }
  }
  SECTION("conjugate gradient agrees with the dense factorization") {
    auto rng = testutil::case_rng(72);
    Config small = default_config();
    small.limits.dense_limit = 1; // force the iterative branch
    for (int trial = 0; trial < 6; ++trial) {
      WeightedGraph g = testutil::random_graph(rng, 5, 40);
      FormOperator sc = assemble_scalar(g);
      Eigen::VectorXcd f = testutil::random_section(rng, g.n(), 1).values;
      Eigen::VectorXcd dense = resolvent_apply(sc, 1.0, f);
      Eigen::VectorXcd cg = resolvent_apply(sc, 1.0, f, small);
      REQUIRE((cg - dense).norm() <= 1e-8 * dense.norm());
    }
  }
  SECTION("section overload preserves the fiber layout") {
    WeightedGraph g = generate_family(FamilySpec{}, 3);
    BundleConnection conn(g, 2);
    EndomorphismField w(g.n(), 2);
    FormOperator mag = assemble_magnetic(g, conn, w);
    auto rng = testutil::case_rng(73);
    Section f(2, testutil::random_section(rng, 3, 2).values);
    Section u = resolvent_apply(mag, 1.5, f);
    CHECK(u.dim == 2);
    CHECK((u.values - resolvent_apply(mag, 1.5, f.values)).norm() == 0.0);
  }
  SECTION("input guards") {
    WeightedGraph g = generate_family(FamilySpec{}, 2);
    FormOperator sc = assemble_scalar(g);
    Eigen::VectorXcd f = Eigen::VectorXcd::Ones(2);
    CHECK_THROWS_AS(resolvent_apply(sc, 0.0, f), std::invalid_argument);
    CHECK_THROWS_AS(resolvent_apply(sc, -1.0, f), std::invalid_argument);
    CHECK_THROWS_AS(resolvent_apply(sc, 1.0, Eigen::VectorXcd::Ones(3)), std::invalid_argument);
  }
}

TEST_CASE("exhaustion probe on unit paths") {
  ProbeResult r = run_probe(FamilySpec{}, {10, 20, 40}, 1, 99);
  SECTION("scalar gaps match the chain spectrum") {
    REQUIRE(r.sizes == std::vector<int>{10, 20, 40});
    for (std::size_t i = 0; i < r.sizes.size(); ++i)
      REQUIRE_THAT(r.scalar_gap[i], WithinAbs(path_dirichlet_bottom(r.sizes[i]), 1e-10));
  }
  SECTION("doubling the size quarters the gap") {
    CHECK_THAT(r.scalar_gap[2] / r.scalar_gap[1], WithinAbs(0.25, 0.02));
    CHECK_THAT(r.scalar_slope, WithinAbs(-2.0, 0.2));
  }
  SECTION("phases on a tree are invisible to the spectrum") {
    for (std::size_t i = 0; i < r.sizes.size(); ++i)
      REQUIRE_THAT(r.magnetic_gap[i], WithinAbs(r.scalar_gap[i], 1e-9));
    ProbeResult r3 = run_probe(FamilySpec{}, {12}, 3, 1234);
    CHECK_THAT(r3.magnetic_gap[0], WithinAbs(r3.scalar_gap[0], 1e-9));
  }
  SECTION("truncated resolvents approach the full one") {
    for (double diff : r.resolvent_diff) REQUIRE(diff >= 0.0);
    CHECK(r.resolvent_diff.back() < 1e-8);
    CHECK(r.resolvent_diff.back() <= r.resolvent_diff.front());
  }
  SECTION("probe is a deterministic function of its arguments") {
    ProbeResult again = run_probe(FamilySpec{}, {10, 20, 40}, 1, 99);
    CHECK(again.scalar_gap == r.scalar_gap);
    CHECK(again.magnetic_gap == r.magnetic_gap);
    CHECK(again.resolvent_diff == r.resolvent_diff);
    ProbeResult other = run_probe(FamilySpec{}, {10, 20, 40}, 1, 100);
    for (std::size_t i = 0; i < r.sizes.size(); ++i) // gauge-trivial either way
      CHECK_THAT(other.magnetic_gap[i], WithinAbs(r.magnetic_gap[i], 1e-9));
  }
  SECTION("transfer verdict is supported here") {
    TransferEvidence ev = transfer_evidence(r);
    CHECK(ev.verdict == "SUPPORTED");
    CHECK(ev.scalar_decays);
    CHECK(ev.magnetic_decays);
    CHECK(ev.to_json()["finalScalarGap"].get<double>() == r.scalar_gap.back());
  }
}

TEST_CASE("exhaustion probe edge cases") {
  SECTION("single vertex family has nothing to cut") {
    ProbeResult r = run_probe(FamilySpec{}, {1}, 1, 5);
    CHECK(r.scalar_gap[0] == 0.0);
    CHECK(r.magnetic_gap[0] == 0.0);
    CHECK(r.resolvent_diff[0] <= 1e-12);
    CHECK(r.scalar_slope == 0.0); // no positive gaps to fit
  }
  SECTION("sizes are sorted and deduplicated") {
    ProbeResult r = run_probe(FamilySpec{}, {20, 10, 10}, 1, 7);
    CHECK(r.sizes == std::vector<int>{10, 20});
  }
  SECTION("random sparse members keep the spectral ordering") {
    FamilySpec spec = parse_family("random-sparse");
    spec.seed = 11;
    ProbeResult r = run_probe(spec, {12, 24}, 2, 42);
    for (double gap : r.scalar_gap) REQUIRE(gap >= -1e-10);
    for (double gap : r.magnetic_gap) REQUIRE(gap >= -1e-10);
    for (double diff : r.resolvent_diff) REQUIRE(diff >= 0.0);
  }
  SECTION("input guards") {
    CHECK_THROWS_AS(run_probe(FamilySpec{}, {}, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(run_probe(FamilySpec{}, {4}, 1, 0, 9), std::invalid_argument);
  }
}

TEST_CASE("probe negative control") {
  // Geometrically decaying measure: the gap shrinks like 1/N, far too slowly
  // to clear the decay threshold at desk sizes, so no premise is observed.
  FamilySpec spec;
  spec.m_profile = {MProfileKind::GeometricDecay, 0.5};
  ProbeResult r = run_probe(spec, {8, 12, 16, 20}, 1, 3);
  CHECK(r.scalar_gap.back() > 0.02);
  TransferEvidence ev = transfer_evidence(r);
  CHECK(ev.verdict == "INCONCLUSIVE");
  CHECK_FALSE(ev.scalar_decays);
  CHECK_FALSE(ev.magnetic_decays);
}

TEST_CASE("transfer verdict mapping") {
  ProbeResult r;
  r.sizes = {10, 20};
  r.scalar_gap = {0.1, 1e-3};
  r.magnetic_gap = {0.1, 1e-3};
  r.resolvent_diff = {0.0, 0.0};
  r.scalar_slope = -2.0;
  r.magnetic_slope = -2.0;
  SECTION("both decay") {
    CHECK(transfer_evidence(r).verdict == "SUPPORTED");
  }
  SECTION("magnetic gap persists") {
    r.magnetic_gap = {0.5, 0.5};
    r.magnetic_slope = 0.0;
    TransferEvidence ev = transfer_evidence(r);
    CHECK(ev.verdict == "NOT_SUPPORTED");
    CHECK(ev.scalar_decays);
    CHECK_FALSE(ev.magnetic_decays);
  }
  SECTION("scalar premise absent") {
    r.scalar_gap = {0.5, 0.5};
    r.scalar_slope = 0.0;
    CHECK(transfer_evidence(r).verdict == "INCONCLUSIVE");
  }
  SECTION("slope alone is not enough") {
    r.scalar_gap = {2.0, 0.2}; // steep slope but still a large final gap
    CHECK(transfer_evidence(r).verdict == "INCONCLUSIVE");
  }
  SECTION("no data") {
    ProbeResult empty;
    CHECK_THROWS_AS(transfer_evidence(empty), std::invalid_argument);
  }
}

TEST_CASE("probe csv format") {
  ProbeResult r;
  r.sizes = {2};
  r.scalar_gap = {0.5};
  r.magnetic_gap = {0.25};
  r.resolvent_diff = {0.125};
  const std::string path = "/tmp/formdom_probe_format_test.csv";
  write_probe_csv(r, path);
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  CHECK(buf.str() == "N,scalarGap,magneticGap,resolventDiff\n2,0.5,0.25,0.125\n");
  std::remove(path.c_str());
  CHECK_THROWS_AS(write_probe_csv(r, "/nonexistent-dir/probe.csv"), IoError);
}
