#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "formdom/formdom.hpp"

namespace {

using namespace formdom;

std::string iso_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::json tolerances_json(const Tolerances& t) {
  return {{"hermiticity", t.hermiticity},   {"unitarity", t.unitarity},
          {"unitarity_repair", t.unitarity_repair}, {"psd", t.psd},
          {"endo_psd", t.endo_psd},         {"pairing", t.pairing},
          {"signed_inequality", t.signed_inequality},       {"first_bd", t.first_bd},
          {"lattice", t.lattice},           {"kato", t.kato},
          {"positivity", t.positivity},     {"domination", t.domination},
          {"contraction", t.contraction},   {"resolvent", t.resolvent},
          {"krylov", t.krylov},             {"intrinsic", t.intrinsic},
          {"spectral_gap", t.spectral_gap}};
}

nlohmann::json envelope(const std::string& command, std::uint64_t seed, const Config& cfg,
                        nlohmann::json inputs) {
  return {{"tool", "formdom"},     {"version", kVersion},
          {"timestamp", iso_timestamp()}, {"command", command},
          {"seed", seed},          {"tolerances", tolerances_json(cfg.tol)},
          {"inputs", std::move(inputs)}};
}

void emit(const nlohmann::json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot open '" + out_path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failure on '" + out_path + "'");
}

void summarize(const VerificationReport& r) {
  std::fprintf(stderr, "[%s] %-26s max_violation=%.3e samples=%zu\n", to_string(r.verdict),
               r.check.c_str(), r.max_violation, r.samples);
  if (!r.passed())
    std::fprintf(stderr, "        worst case: %s\n", r.worst_case.dump().c_str());
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < csv.size()) {
    std::size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    out.push_back(std::stod(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  if (out.empty()) throw CLI::ValidationError("list must not be empty");
  return out;
}

std::vector<int> parse_int_list(const std::string& csv) {
  std::vector<int> out;
  for (double v : parse_double_list(csv)) out.push_back(static_cast<int>(v));
  return out;
}

MProfile parse_m_profile(const std::string& s) {
  const std::size_t colon = s.find(':');
  const std::string kind = s.substr(0, colon);
  const double value = colon == std::string::npos ? 1.0 : std::stod(s.substr(colon + 1));
  if (kind == "const") return {MProfileKind::Constant, value};
  if (kind == "power") return {MProfileKind::PowerDecay, value};
  if (kind == "geom") return {MProfileKind::GeometricDecay, value};
  throw CLI::ValidationError("m-profile must be const:K, power:ALPHA or geom:Q");
}

int cmd_validate(const std::string& graph_path, const std::string& bundle_path,
                 const std::string& out_path, const Config& cfg) {
  WeightedGraph g = load_graph(graph_path);
  nlohmann::json inputs{{"graph", hash_hex(g.hash())}};
  std::vector<VerificationReport> reports;
  reports.push_back(validate_graph(g));

  if (!bundle_path.empty()) {
    try {
      BundleData bundle = load_bundle(bundle_path, g, cfg.tol);
      VerificationReport conn_report;
      conn_report.check = "connection-unitarity";
      conn_report.samples = bundle.conn.stored().size();
      double worst = 0.0;
      for (const auto& [key, mat] : bundle.conn.stored())
        worst = std::max(worst, (mat.adjoint() * mat -
                                 Eigen::MatrixXcd::Identity(mat.rows(), mat.cols()))
                                    .cwiseAbs()
                                    .maxCoeff());
      conn_report.max_violation = worst;
      conn_report.finalize(cfg.tol.unitarity);
      reports.push_back(conn_report);
      reports.push_back(bundle.w.validate(cfg.tol));
      inputs["bundle"] = hash_hex(bundle.conn.hash() ^ bundle.w.hash());
    } catch (const InvariantError& e) {
      VerificationReport broken;
      broken.check = "connection-unitarity";
      broken.verdict = Verdict::Fail;
      broken.max_violation = 1.0;
      broken.notes.push_back(e.what());
      reports.push_back(broken);
    }
  }

  bool all_pass = true;
  nlohmann::json body = envelope("validate", 0, cfg, inputs);
  body["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    summarize(r);
    body["reports"].push_back(r.to_json());
    all_pass = all_pass && r.passed();
  }
  body["verdict"] = all_pass ? "PASS" : "FAIL";
  emit(body, out_path);
  return all_pass ? 0 : 1;
}

int cmd_dominate(const std::string& graph_path, const std::string& bundle_path,
                 const std::vector<double>& t_grid, std::size_t samples, std::uint64_t seed,
                 const std::string& out_path, const Config& cfg) {
  WeightedGraph g = load_graph(graph_path);
  BundleData bundle = load_bundle(bundle_path, g, cfg.tol);
  FormOperator sc = assemble_scalar(g, cfg.tol);
  FormOperator mag = assemble_magnetic(g, bundle.conn, bundle.w, cfg.tol);

  std::vector<VerificationReport> reports;
  reports.push_back(check_domination(mag, sc, t_grid, samples, seed, cfg.tol));
  reports.push_back(check_kato_sampled(mag, sc, samples, seed, cfg.tol));
  reports.push_back(check_first_bd(sc, samples, seed, cfg.tol));

  bool all_pass = true;
  nlohmann::json body = envelope("dominate", seed, cfg,
                                 {{"graph", hash_hex(g.hash())},
                                  {"bundle", hash_hex(bundle.conn.hash() ^ bundle.w.hash())}});
  body["tGrid"] = t_grid;
  body["reports"] = nlohmann::json::array();
  for (const auto& r : reports) {
    summarize(r);
    body["reports"].push_back(r.to_json());
    all_pass = all_pass && r.passed();
  }
  body["verdict"] = all_pass ? "PASS" : "FAIL";
  emit(body, out_path);
  return all_pass ? 0 : 1;
}

int cmd_probe(const FamilySpec& family, const std::string& family_name,
              const std::vector<int>& sizes, int dim, bool phases, std::uint64_t seed,
              const std::string& out_dir, const Config& cfg) {
  ProbeResult result = run_probe(family, sizes, dim, seed, 0, phases, cfg);
  TransferEvidence evidence = transfer_evidence(result);

  std::filesystem::path dir(out_dir.empty() ? "." : out_dir);
  std::filesystem::create_directories(dir);
  write_probe_csv(result, (dir / "probe.csv").string());

  nlohmann::json body = envelope("probe", seed, cfg,
                                 {{"family", family_name}, {"dim", dim}, {"phases", phases}});
  body["probe"] = result.to_json();
  body["transfer"] = evidence.to_json();
  body["verdict"] = evidence.verdict;
  emit(body, (dir / "probe.json").string());

  std::fprintf(stderr, "sizes:");
  for (std::size_t i = 0; i < result.sizes.size(); ++i)
    std::fprintf(stderr, " %d(s=%.3e,m=%.3e)", result.sizes[i], result.scalar_gap[i],
                 result.magnetic_gap[i]);
  std::fprintf(stderr, "\nscalar slope %.3f, magnetic slope %.3f -> %s\n", result.scalar_slope,
               result.magnetic_slope, evidence.verdict.c_str());
  std::printf("%s\n", evidence.verdict.c_str());
  return 0;
}

int cmd_metric(const std::string& graph_path, const FamilySpec& family,
               const std::string& family_name, const std::vector<int>& sizes,
               const std::string& sigma_spec, bool criteria, const std::string& out_path,
               const Config& cfg) {
  const bool family_mode = !family_name.empty();
  std::vector<WeightedGraph> graphs;
  if (family_mode) {
    std::vector<int> sorted = sizes;
    std::sort(sorted.begin(), sorted.end());
    for (int n : sorted) graphs.push_back(generate_family(family, n));
  } else {
    graphs.push_back(load_graph(graph_path));
  }
  const WeightedGraph& g = graphs.back(); // largest member carries the point checks

  CriterionOptions opt;
  std::optional<EdgeLengths> sigma;
  if (sigma_spec.empty()) {
    opt.sigma_mode = SigmaMode::None;
  } else if (sigma_spec == "auto") {
    opt.sigma_mode = SigmaMode::Auto;
    sigma = intrinsic_edge_lengths(g);
  } else if (sigma_spec.rfind("const:", 0) == 0) {
    opt.sigma_mode = SigmaMode::Constant;
    opt.sigma_const = std::stod(sigma_spec.substr(6));
    sigma = EdgeLengths::constant(g, opt.sigma_const);
  } else {
    if (family_mode)
      throw std::invalid_argument("sigma files apply to a single graph, not a family");
    opt.sigma_mode = SigmaMode::None; // criteria fall back to auto only on request
    sigma = edge_lengths_from_json(load_json_file(sigma_spec), g);
  }

  nlohmann::json body = envelope("metric", 0, cfg,
                                 family_mode ? nlohmann::json{{"family", family_name}}
                                             : nlohmann::json{{"graph", hash_hex(g.hash())}});
  bool all_pass = true;
  body["reports"] = nlohmann::json::array();
  if (sigma) {
    PseudoMetric metric = PseudoMetric::from_sigma(g, *sigma);
    for (VerificationReport r : {check_strongly_intrinsic(g, *sigma, cfg.tol),
                                 check_intrinsic(g, metric, cfg.tol)}) {
      summarize(r);
      body["reports"].push_back(r.to_json());
      all_pass = all_pass && r.passed();
    }
    body["jumpSize"] = jump_size(g, metric);
  }
  Eigen::VectorXd deg = weighted_degree(g);
  body["weightedDegree"] = {{"min", deg.minCoeff()}, {"max", deg.maxCoeff()}};

  if (criteria) {
    CriterionReport cr = criterion_report(graphs, opt, cfg.tol);
    body["criteria"] = cr.to_json();
    std::fprintf(stderr, "criteria: measure=%s degree=%s completeness=%s\n",
                 to_string(cr.measure), to_string(cr.degree), to_string(cr.completeness));
  }
  body["verdict"] = all_pass ? "PASS" : "FAIL";
  emit(body, out_path);
  return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"weighted-graph Schrodinger forms: assembly, semigroups, domination checks"};
  app.set_version_flag("--version", formdom::kVersion);
  app.require_subcommand(1);

  Config cfg = default_config();
  std::uint64_t seed = 0;
  std::size_t samples = 25;
  std::string t_grid_csv = "0.01,0.1,1,10";
  std::string out_path;

  std::string graph_path, bundle_path, sigma_spec;
  std::string family_name, sizes_csv = "25,50,100,200,400", m_profile = "const:1";
  int dim = 1;
  bool phases = true, criteria = false, scale_edges = false;
  double edge_weight = 1.0, edge_growth = 1.0, density = 0.3;

  auto add_tolerance_flags = [&](CLI::App* cmd) {
    cmd->add_option("--tol-domination", cfg.tol.domination, "entrywise domination slack");
    cmd->add_option("--seed", seed, "RNG seed");
  };

  CLI::App* validate = app.add_subcommand("validate", "check graph/bundle axioms");
  validate->add_option("--graph", graph_path, "graph JSON file")->required();
  validate->add_option("--bundle", bundle_path, "bundle JSON file");
  validate->add_option("--out", out_path, "write report JSON here instead of stdout");

  CLI::App* dominate = app.add_subcommand("dominate", "semigroup domination and form inequalities");
  dominate->add_option("--graph", graph_path, "graph JSON file")->required();
  dominate->add_option("--bundle", bundle_path, "bundle JSON file")->required();
  dominate->add_option("--t-grid", t_grid_csv, "comma-separated times");
  dominate->add_option("--samples", samples, "sections per check");
  dominate->add_option("--out", out_path, "write report JSON here instead of stdout");
  add_tolerance_flags(dominate);

  CLI::App* probe = app.add_subcommand("probe", "Dirichlet/Neumann exhaustion probe");
  probe->add_option("--family", family_name, "path | star | binary-tree | random-sparse")->required();
  probe->add_option("--sizes", sizes_csv, "comma-separated truncation sizes");
  probe->add_option("--dim", dim, "fiber dimension");
  probe->add_flag("--phases,!--no-phases", phases, "random unitary phases (default on)");
  probe->add_option("--edge-weight", edge_weight, "base edge weight");
  probe->add_option("--edge-growth", edge_growth, "geometric edge weight growth");
  probe->add_flag("--scale-edges", scale_edges, "scale edge weights by the family size");
  probe->add_option("--m-profile", m_profile, "const:K | power:ALPHA | geom:Q");
  probe->add_option("--density", density, "random-sparse edge density");
  probe->add_option("--out", out_path, "output directory (probe.csv, probe.json)");
  add_tolerance_flags(probe);

  CLI::App* metric = app.add_subcommand("metric", "intrinsic metrics and uniqueness criteria");
  auto* metric_graph = metric->add_option("--graph", graph_path, "graph JSON file");
  metric->add_option("--family", family_name, "evaluate on a family instead of a file")
      ->excludes(metric_graph);
  metric->add_option("--sizes", sizes_csv, "family truncation sizes");
  metric->add_option("--sigma", sigma_spec, "auto | const:VALUE | file path");
  metric->add_flag("--criteria", criteria, "evaluate truncation criteria");
  metric->add_option("--edge-weight", edge_weight, "family base edge weight");
  metric->add_option("--edge-growth", edge_growth, "family edge weight growth");
  metric->add_flag("--scale-edges", scale_edges, "scale family edge weights by size");
  metric->add_option("--m-profile", m_profile, "const:K | power:ALPHA | geom:Q");
  metric->add_option("--out", out_path, "write report JSON here instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    FamilySpec family;
    if (!family_name.empty()) {
      family = parse_family(family_name);
      family.edge_weight = edge_weight;
      family.edge_growth = edge_growth;
      family.edge_weight_scales_with_size = scale_edges;
      family.m_profile = parse_m_profile(m_profile);
      family.density = density;
      family.seed = seed;
    }
    if (app.got_subcommand(validate))
      return cmd_validate(graph_path, bundle_path, out_path, cfg);
    if (app.got_subcommand(dominate))
      return cmd_dominate(graph_path, bundle_path, parse_double_list(t_grid_csv), samples, seed,
                          out_path, cfg);
    if (app.got_subcommand(probe))
      return cmd_probe(family, family_name, parse_int_list(sizes_csv), dim, phases, seed,
                       out_path, cfg);
    if (app.got_subcommand(metric)) {
      if (family_name.empty() && graph_path.empty())
        throw std::invalid_argument("metric needs --graph or --family");
      return cmd_metric(graph_path, family, family_name, parse_int_list(sizes_csv), sigma_spec,
                        criteria, out_path, cfg);
    }
  } catch (const formdom::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const formdom::InvariantError& e) {
    std::fprintf(stderr, "FAIL: %s\n", e.what());
    return 1;
  } catch (const formdom::ConvergenceError& e) {
    std::fprintf(stderr, "FAIL: %s\n", e.what());
    return 1;
  } catch (const CLI::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
