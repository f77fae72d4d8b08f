#include <catch2/catch_amalgamated.hpp>

#include "testutil.hpp"

using namespace formdom;
using Catch::Matchers::WithinAbs;

namespace {

WeightedGraph unit_path(int n) {
  std::vector<Edge> edges;
  for (int i = 0; i + 1 < n; ++i) edges.push_back({i, i + 1, 1.0});
  return WeightedGraph(n, Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n), edges);
}

} // namespace

TEST_CASE("graph axioms validate") {
  SECTION("unit path passes") {
    auto report = validate_graph(unit_path(3));
    CHECK(report.passed());
    CHECK(report.worst_case["violations"].empty());
  }
  SECTION("self loop fails axiom b1") {
    WeightedGraph g(2, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2), {{0, 0, 1.0}, {0, 1, 1.0}});
    auto report = validate_graph(g);
    CHECK_FALSE(report.passed());
    CHECK(report.worst_case["violations"][0]["axiom"] == "b1-no-self-loops");
    CHECK(report.worst_case["violations"][0]["vertex"] == 0);
  }
  SECTION("zero measure fails") {
    Eigen::VectorXd m = Eigen::VectorXd::Ones(3);
    m(2) = 0.0;
    WeightedGraph g(3, m, Eigen::VectorXd::Zero(3), {{0, 1, 1.0}, {1, 2, 1.0}});
    auto report = validate_graph(g);
    CHECK_FALSE(report.passed());
    CHECK(report.worst_case["violations"][0]["axiom"] == "m-positive");
    CHECK(report.worst_case["violations"][0]["vertex"] == 2);
  }
  SECTION("negative weight and killing term fail") {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
    c(1) = -0.5;
    WeightedGraph g(2, Eigen::VectorXd::Ones(2), c, {{0, 1, -2.0}});
    auto report = validate_graph(g);
    CHECK_FALSE(report.passed());
    CHECK(report.worst_case["violations"].size() == 2);
  }
  SECTION("structural misuse throws instead") {
    CHECK_THROWS_AS(WeightedGraph(2, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2),
                                  {{0, 1, 1.0}, {1, 0, 2.0}}),
                    std::invalid_argument); // same unordered pair twice
    CHECK_THROWS_AS(WeightedGraph(2, Eigen::VectorXd::Ones(2), Eigen::VectorXd::Zero(2),
                                  {{0, 5, 1.0}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(WeightedGraph(2, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(2), {}),
                    std::invalid_argument);
  }
}

TEST_CASE("formal laplacian matches hand evaluation") {
  WeightedGraph path = unit_path(3);
  SECTION("constants are harmonic when c = 0") {
    Eigen::VectorXd f = Eigen::VectorXd::Ones(3);
    CHECK(formal_laplacian_apply(path, f).norm() == 0.0);
  }
  SECTION("delta at the middle vertex") {
    Eigen::VectorXd f = Eigen::VectorXd::Zero(3);
    f(1) = 1.0;
    Eigen::VectorXd lf = formal_laplacian_apply(path, f);
    CHECK_THAT(lf(0), WithinAbs(-1.0, 1e-15));
    CHECK_THAT(lf(1), WithinAbs(2.0, 1e-15));
    CHECK_THAT(lf(2), WithinAbs(-1.0, 1e-15));
  }
  SECTION("single vertex: killing term over measure") {
    Eigen::VectorXd m(1), c(1), f(1);
    m << 2.0;
    c << 3.0;
    f << 1.0;
    WeightedGraph g(1, m, c, {});
    CHECK_THAT(formal_laplacian_apply(g, f)(0), WithinAbs(1.5, 1e-15));
  }
  SECTION("linearity on random inputs") {
    auto rng = testutil::case_rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      WeightedGraph g = testutil::random_graph(rng);
      Eigen::VectorXcd f = rng.cnormal_vector(g.n());
      Eigen::VectorXcd h = rng.cnormal_vector(g.n());
      std::complex<double> a = rng.cnormal();
      Eigen::VectorXcd lhs = formal_laplacian_apply(g, (a * f + h).eval());
      Eigen::VectorXcd rhs = a * formal_laplacian_apply(g, f) + formal_laplacian_apply(g, h);
      REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SECTION("length mismatch throws") {
    Eigen::VectorXd f = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(formal_laplacian_apply(path, f), std::invalid_argument);
  }
}

TEST_CASE("truncation boundary computation") {
  WeightedGraph path = unit_path(5);
  SECTION("interior strip") {
    Truncation t = truncate(path, {1, 2, 3});
    CHECK(t.interior == std::vector<int>{1, 2, 3});
    CHECK(t.boundary == std::vector<int>{0, 4});
  }
  SECTION("full interior has empty boundary") {
    Truncation t = truncate(path, {0, 1, 2, 3, 4});
    CHECK(t.boundary.empty());
  }
  SECTION("single vertex on a two-path") {
    Truncation t = truncate(unit_path(2), {0});
    CHECK(t.boundary == std::vector<int>{1});
  }
  SECTION("input is deduplicated and sorted") {
    Truncation t = truncate(path, {3, 1, 2, 3});
    CHECK(t.interior == std::vector<int>{1, 2, 3});
  }
  SECTION("errors") {
    CHECK_THROWS_AS(truncate(path, {}), std::invalid_argument);
    CHECK_THROWS_AS(truncate(path, {7}), std::invalid_argument);
  }
}

TEST_CASE("induced subgraph keeps inner data only") {
  WeightedGraph path = unit_path(5);
  WeightedGraph sub = induced_subgraph(path, {1, 2, 3});
  CHECK(sub.n() == 3);
  CHECK(sub.edges().size() == 2); // edges to 0 and 4 dropped
  CHECK(sub.edges()[0].x == 0);
  CHECK(sub.edges()[0].y == 1);
  CHECK(sub.m() == Eigen::VectorXd::Ones(3));
}

TEST_CASE("family generators") {
  SECTION("unit path") {
    FamilySpec spec;
    WeightedGraph g = generate_family(spec, 3);
    CHECK(g.n() == 3);
    CHECK(g.edges().size() == 2);
    CHECK(validate_graph(g).passed());
  }
  SECTION("star") {
    FamilySpec spec = parse_family("star");
    WeightedGraph g = generate_family(spec, 4);
    CHECK(g.n() == 4);
    CHECK(g.edges().size() == 3);
    for (const auto& e : g.edges()) {
      CHECK(e.x == 0);
      CHECK(e.b == 1.0);
    }
  }
  SECTION("binary tree size parameter is the depth") {
    FamilySpec spec = parse_family("binary-tree");
    WeightedGraph g = generate_family(spec, 2);
    CHECK(g.n() == 7);
    CHECK(g.edges().size() == 6);
  }
  SECTION("random sparse: deterministic under seed") {
    FamilySpec spec = parse_family("random-sparse");
    spec.density = 0.3;
    spec.seed = 7;
    WeightedGraph a = generate_family(spec, 10);
    WeightedGraph b = generate_family(spec, 10);
    CHECK(a.hash() == b.hash());
    spec.seed = 8;
    CHECK(generate_family(spec, 10).hash() != a.hash());
  }
  SECTION("edge growth profile") {
    FamilySpec spec;
    spec.edge_growth = 2.0;
    WeightedGraph g = generate_family(spec, 4);
    REQUIRE(g.edges().size() == 3);
    CHECK(g.edges()[0].b == 1.0);
    CHECK(g.edges()[1].b == 2.0);
    CHECK(g.edges()[2].b == 4.0);
  }
  SECTION("size-scaled star edges") {
    FamilySpec spec = parse_family("star");
    spec.edge_weight_scales_with_size = true;
    WeightedGraph g = generate_family(spec, 5);
    for (const auto& e : g.edges()) CHECK(e.b == 5.0);
  }
  SECTION("measure profiles") {
    FamilySpec spec;
    spec.m_profile = {MProfileKind::GeometricDecay, 0.5};
    WeightedGraph g = generate_family(spec, 3);
    CHECK(g.m()(0) == 1.0);
    CHECK(g.m()(1) == 0.5);
    CHECK(g.m()(2) == 0.25);
    spec.m_profile = {MProfileKind::PowerDecay, 1.0};
    WeightedGraph h = generate_family(spec, 3);
    CHECK_THAT(h.m()(2), WithinAbs(1.0 / 3.0, 1e-15));
  }
  SECTION("errors") {
    CHECK_THROWS_AS(parse_family("moebius"), std::invalid_argument);
    CHECK_THROWS_AS(generate_family(FamilySpec{}, 0), std::invalid_argument);
  }
}

TEST_CASE("green identity ties laplacian to the scalar form") {
  auto rng = testutil::case_rng(12);
  for (int trial = 0; trial < 25; ++trial) {
    WeightedGraph g = testutil::random_graph(rng);
    FormOperator q = assemble_scalar(g);
    Eigen::VectorXcd f = rng.cnormal_vector(g.n());
    Eigen::VectorXcd lf = formal_laplacian_apply(g, f);
    const std::complex<double> pairing = q.inner_m(lf, f);
    const double direct = q.quadratic(f);
    REQUIRE_THAT(pairing.real(), WithinAbs(direct, 1e-10 * std::max(1.0, std::abs(direct))));
    REQUIRE_THAT(pairing.imag(), WithinAbs(0.0, 1e-10 * std::max(1.0, std::abs(direct))));
  }
}

TEST_CASE("graph json io") {
  const char* text = R"({"n":3,"m":[1.0,2.0,1.0],"c":[0.0,0.5,0.0],"edges":[[0,1,1.0],[1,2,0.25]]})";
  SECTION("round trip preserves structure") {
    WeightedGraph g = graph_from_json(nlohmann::json::parse(text));
    CHECK(g.n() == 3);
    CHECK(g.m()(1) == 2.0);
    CHECK(g.c()(1) == 0.5);
    WeightedGraph again = graph_from_json(graph_to_json(g));
    CHECK(again.hash() == g.hash());
  }
  SECTION("self loops parse so validation can report them") {
    auto j = nlohmann::json::parse(R"({"n":1,"m":[1.0],"c":[0.0],"edges":[[0,0,2.0]]})");
    WeightedGraph g = graph_from_json(j);
    CHECK_FALSE(validate_graph(g).passed());
  }
  SECTION("format violations are IoError") {
    CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse(
                        R"({"n":2,"m":[1,1],"c":[0,0],"edges":[[1,0,1.0]]})")),
                    IoError); // x > y
    CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse(
                        R"({"n":2,"m":[1,1],"c":[0,0],"edges":[[0,1,1.0],[0,1,2.0]]})")),
                    IoError); // duplicate pair
    CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse(
                        R"({"n":3,"m":[1,1],"c":[0,0,0],"edges":[]})")),
                    IoError); // m length
    CHECK_THROWS_AS(graph_from_json(nlohmann::json::parse(R"({"n":1})")), IoError);
  }
  SECTION("missing file") { CHECK_THROWS_AS(load_graph("/nonexistent/g.json"), IoError); }
}
