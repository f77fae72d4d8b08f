#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "testutil.hpp"

using namespace formdom;

namespace {

const std::filesystem::path kDir = "/tmp/formdom_cli_tests";

void reset_dir() {
  std::filesystem::remove_all(kDir);
  std::filesystem::create_directories(kDir);
}

std::string file_path(const std::string& name) { return (kDir / name).string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  REQUIRE(out.good());
  out << text;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FORMDOM_BIN) + " " + args + " > " + file_path("stdout.txt") +
                          " 2> " + file_path("stderr.txt");
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

const char* kPath3 = R"({"n":3,"m":[1,1,1],"c":[0,0,0],"edges":[[0,1,1.0],[1,2,1.0]]})";
const char* kPhasePiGraph = R"({"n":2,"m":[1,1],"c":[0,0],"edges":[[0,1,1.0]]})";
const char* kPhasePiBundle = R"({"dim":1,"phi":[[0,1,[[-1,0]]]]})";
// c = 1 on both vertices with W = 0: the semigroup comparison loses its
// hypothesis W(x) >= c(x) and must be reported as a violation.
const char* kBelowCGraph = R"({"n":2,"m":[1,1],"c":[1,1],"edges":[[0,1,1.0]]})";

std::string strip_timestamp(const std::string& text) {
  std::stringstream in(text), out;
  std::string line;
  while (std::getline(in, line))
    if (line.find("\"timestamp\"") == std::string::npos) out << line << "\n";
  return out.str();
}

} // namespace

TEST_CASE("cli validate") {
  reset_dir();
  write_text(file_path("path3.json"), kPath3);
  SECTION("clean graph passes") {
    REQUIRE(run_cli("validate --graph " + file_path("path3.json") + " --out " +
                    file_path("report.json")) == 0);
    auto body = nlohmann::json::parse(slurp(file_path("report.json")));
    CHECK(body["verdict"] == "PASS");
    CHECK(body["command"] == "validate");
    CHECK(body["tool"] == "formdom");
    CHECK(body.contains("tolerances"));
    CHECK(body["inputs"].contains("graph"));
    CHECK(body["reports"].is_array());
  }
  SECTION("graph axiom violation exits 1") {
    write_text(file_path("loop.json"), R"({"n":1,"m":[1],"c":[0],"edges":[[0,0,1.0]]})");
    CHECK(run_cli("validate --graph " + file_path("loop.json")) == 1);
  }
  SECTION("malformed input exits 2") {
    write_text(file_path("broken.json"), "{ not json");
    CHECK(run_cli("validate --graph " + file_path("broken.json")) == 2);
    CHECK(run_cli("validate --graph " + file_path("missing.json")) == 2);
    CHECK(run_cli("validate") == 2); // --graph is required
  }
  SECTION("bundle invariants are part of the verdict") {
    write_text(file_path("pi.json"), kPhasePiGraph);
    write_text(file_path("pi_bundle.json"), kPhasePiBundle);
    REQUIRE(run_cli("validate --graph " + file_path("pi.json") + " --bundle " +
                    file_path("pi_bundle.json")) == 0);
    write_text(file_path("bad_bundle.json"), R"({"dim":1,"phi":[[0,1,[[2,0]]]]})");
    CHECK(run_cli("validate --graph " + file_path("pi.json") + " --bundle " +
                  file_path("bad_bundle.json")) == 1);
  }
}

TEST_CASE("cli dominate") {
  reset_dir();
  write_text(file_path("pi.json"), kPhasePiGraph);
  write_text(file_path("pi_bundle.json"), kPhasePiBundle);
  SECTION("equality fixture passes") {
    REQUIRE(run_cli("dominate --graph " + file_path("pi.json") + " --bundle " +
                    file_path("pi_bundle.json") + " --samples 10 --out " +
                    file_path("dom.json")) == 0);
    auto body = nlohmann::json::parse(slurp(file_path("dom.json")));
    CHECK(body["verdict"] == "PASS");
    CHECK(body["tGrid"].size() == 4);
    CHECK(body["reports"].size() == 3);
  }
  SECTION("missing hypothesis is caught and the witness printed") {
    write_text(file_path("below_c.json"), kBelowCGraph);
    REQUIRE(run_cli("dominate --graph " + file_path("below_c.json") + " --bundle " +
                    file_path("pi_bundle.json") + " --samples 10 --out " +
                    file_path("dom.json")) == 1);
    auto body = nlohmann::json::parse(slurp(file_path("dom.json")));
    CHECK(body["verdict"] == "FAIL");
    CHECK(slurp(file_path("stderr.txt")).find("worst case") != std::string::npos);
  }
  SECTION("missing file exits 2") {
    CHECK(run_cli("dominate --graph " + file_path("pi.json") + " --bundle " +
                  file_path("nope.json")) == 2);
  }
  SECTION("reports are byte-identical under a fixed seed, timestamp aside") {
    const std::string args = "dominate --graph " + file_path("pi.json") + " --bundle " +
                             file_path("pi_bundle.json") + " --samples 5 --seed 7 --out ";
    REQUIRE(run_cli(args + file_path("r1.json")) == 0);
    REQUIRE(run_cli(args + file_path("r2.json")) == 0);
    CHECK(strip_timestamp(slurp(file_path("r1.json"))) ==
          strip_timestamp(slurp(file_path("r2.json"))));
  }
}

TEST_CASE("cli probe") {
  reset_dir();
  SECTION("path family emits csv, json, and a verdict") {
    REQUIRE(run_cli("probe --family path --sizes 10,20,40 --out " + kDir.string()) == 0);
    CHECK(slurp(file_path("stdout.txt")) == "SUPPORTED\n");
    const std::string csv = slurp(file_path("probe.csv"));
    CHECK(csv.rfind("N,scalarGap,magneticGap,resolventDiff\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4); // header + one row per size
    auto body = nlohmann::json::parse(slurp(file_path("probe.json")));
    CHECK(body["verdict"] == "SUPPORTED");
    CHECK(body["probe"]["sizes"] == nlohmann::json({10, 20, 40}));
    CHECK(body["transfer"]["scalarDecays"] == true);
  }
  SECTION("usage errors exit 2") {
    CHECK(run_cli("probe --family path --sizes '' --out " + kDir.string()) == 2);
    CHECK(run_cli("probe --family moebius --out " + kDir.string()) == 2);
    CHECK(run_cli("probe --sizes 4,8 --out " + kDir.string()) == 2); // family required
  }
}

TEST_CASE("cli metric") {
  reset_dir();
  write_text(file_path("path3.json"), kPath3);
  SECTION("strongly intrinsic lengths pass") {
    REQUIRE(run_cli("metric --family path --sizes 8 --sigma const:0.7071067811865476 --out " +
                    file_path("metric.json")) == 0);
    auto body = nlohmann::json::parse(slurp(file_path("metric.json")));
    CHECK(body["verdict"] == "PASS");
    CHECK(body["jumpSize"].get<double>() > 0.0);
    CHECK(body["weightedDegree"]["max"].get<double>() == 2.0);
  }
  SECTION("oversized lengths fail with the worst vertex reported") {
    REQUIRE(run_cli("metric --family path --sizes 8 --sigma const:1 --out " +
                    file_path("metric.json")) == 1);
    auto body = nlohmann::json::parse(slurp(file_path("metric.json")));
    CHECK(body["verdict"] == "FAIL");
    CHECK(body["reports"][0]["worst_case"].contains("vertex"));
  }
  SECTION("sigma from file on a single graph") {
    write_text(file_path("sigma.json"), "[[0,1,0.7071067811865476],[1,2,0.7071067811865476]]");
    REQUIRE(run_cli("metric --graph " + file_path("path3.json") + " --sigma " +
                    file_path("sigma.json")) == 0);
    write_text(file_path("sigma_bad.json"), "[[0,1,0.5]]");
    CHECK(run_cli("metric --graph " + file_path("path3.json") + " --sigma " +
                  file_path("sigma_bad.json")) == 2);
  }
  SECTION("criteria without lengths stay open") {
    REQUIRE(run_cli("metric --family path --sizes 8,16 --criteria --out " +
                    file_path("metric.json")) == 0);
    auto body = nlohmann::json::parse(slurp(file_path("metric.json")));
    CHECK(body["criteria"]["criteria"]["measure"] == "HOLDS-ON-TRUNCATIONS");
    CHECK(body["criteria"]["criteria"]["completeness"] == "INCONCLUSIVE");
    CHECK(body["criteria"]["criteria"]["degree"] == "INCONCLUSIVE");
  }
  SECTION("criteria with derived lengths hold on the unit path family") {
    REQUIRE(run_cli("metric --family path --sizes 8,16 --sigma auto --criteria --out " +
                    file_path("metric.json")) == 0);
    auto body = nlohmann::json::parse(slurp(file_path("metric.json")));
    CHECK(body["criteria"]["criteria"]["degree"] == "HOLDS-ON-TRUNCATIONS");
    CHECK(body["criteria"]["criteria"]["completeness"] == "HOLDS-ON-TRUNCATIONS");
  }
  SECTION("usage errors exit 2") {
    CHECK(run_cli("metric") == 2); // needs --graph or --family
    CHECK(run_cli("metric --graph " + file_path("path3.json") + " --sigma const:oops") == 2);
  }
}
