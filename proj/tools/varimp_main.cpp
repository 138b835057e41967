// Command-line front end for the variable-importance benchmark library.
//
// Subcommands:
//   generate    draw one synthetic dataset and write it as CSV + metadata
//   truth       prebuild the reference importance vectors for a config
//   run         execute the full experiment grid of a config
//   summarize   aggregate a report into grouped summary statistics
//   decompose   split per-feature estimation error into bias^2 + variance
//   sage-check  compare sampled Shapley scores against exact enumeration
//
// Exit codes: 0 on success, 1 on configuration/usage errors, 2 when the run
// completed but some cells (or check instances) failed.

#include <cmath>
#include <cstdio>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "varimp/bench.hpp"

namespace {

using namespace varimp;

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double parse_snr(const std::string& s) {
  if (s == "noiseless") return kNoiseless;
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size() || v <= 0.0) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("--snr expects a positive number or 'noiseless', got '" + s +
                       "'");
  }
}

int cmd_generate(const std::string& dgp_name, std::size_t n, double rho,
                 const std::string& snr_str, std::uint64_t seed,
                 const std::string& out) {
  const Dgp dgp = dgp_from_name(dgp_name);
  const double use_rho = std::isnan(rho) ? dgp_info(dgp).default_rho : rho;
  const Dataset ds = generate(dgp, n, use_rho, parse_snr(snr_str), seed);
  const std::string csv = out + ".csv";
  const std::string meta = out + ".meta.json";
  write_dataset_csv(ds, csv);
  write_dataset_meta_json(ds, meta);
  std::printf("wrote %s (%zu rows x %zu columns)\n", csv.c_str(), ds.X.rows(),
              ds.X.cols());
  std::printf("wrote %s\n", meta.c_str());
  return 0;
}

int cmd_truth(const ExperimentConfig& cfg) {
  if (cfg.truth_source == "none") {
    std::fprintf(stderr, "config has truth_source 'none'; nothing to build\n");
    return 0;
  }
  std::set<std::string> done;
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di)
    for (std::size_t mi = 0; mi < cfg.models.size(); ++mi)
      for (std::size_t ki = 0; ki < cfg.ensembling.size(); ++ki)
        for (std::size_t mei = 0; mei < cfg.methods.size(); ++mei) {
          CellCoord c;
          c.dataset = di;
          c.model = mi;
          c.kind = ki;
          c.method = mei;
          const std::string key = TruthStore::key_of(cfg, c);
          if (!done.insert(key).second) continue;
          if (cfg.truth_source == "asymptotic") {
            const TruthRequest req = truth_request_for(cfg, c);
            const GroundTruth gt = asymptotic_importance(req, truth_cache_dir(cfg));
            std::printf("%s -> %s (n=%zu, %s)\n", key.c_str(),
                        truth_cache_path(truth_cache_dir(cfg), req).c_str(),
                        gt.n_used, gt.provenance.c_str());
          } else {
            const DatasetSpec& spec = cfg.datasets[di];
            GroundTruth gt = montecarlo_total_sobol(spec.dgp, resolved_rho(spec),
                                                    cfg.truth_mc_outer,
                                                    cfg.truth_mc_inner, cfg.truth_seed);
            std::printf("%s computed in memory (%s)\n", key.c_str(),
                        gt.provenance.c_str());
          }
        }
  return 0;
}

int cmd_run(ExperimentConfig cfg) {
  const RunResult res = run_experiment(cfg, /*quiet=*/false);
  const std::string csv = cfg.output_dir + "/report.csv";
  const std::string js = cfg.output_dir + "/report.json";
  const std::string manifest = cfg.output_dir + "/run_manifest.json";
  write_report_csv(res.report, csv);
  write_report_json(res.report, js);
  write_run_manifest(cfg, res, manifest);
  std::printf("cells: %zu total, %zu reused, %zu failed\n", res.cells_total,
              res.cells_reused, res.cells_failed);
  std::printf("rows: %zu\n", res.report.rows.size());
  std::printf("wrote %s\n", csv.c_str());
  std::printf("wrote %s\n", js.c_str());
  std::printf("wrote %s\n", manifest.c_str());
  for (const auto& [key, msg] : res.errors)
    std::fprintf(stderr, "failed cell %s: %s\n", key.c_str(), msg.c_str());
  return res.cells_failed > 0 ? 2 : 0;
}

ExperimentReport load_report_any(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json")
    return load_report_json(path);
  return parse_report_csv(path);
}

int cmd_summarize(const std::string& report_path, const std::string& group,
                  const std::string& out) {
  const ExperimentReport report = load_report_any(report_path);
  const SummaryTable table = summarize(report, split_commas(group));
  if (out.empty()) {
    std::fputs(summary_csv_text(table).c_str(), stdout);
    return 0;
  }
  write_summary_csv(table, out + ".csv");
  write_summary_json(table, out + ".json");
  std::printf("wrote %s.csv\n", out.c_str());
  std::printf("wrote %s.json\n", out.c_str());
  return 0;
}

int cmd_decompose(const std::string& report_path, const std::string& out) {
  const ExperimentReport report = load_report_any(report_path);
  const DecompositionTable table = decompose(report);
  if (out.empty()) {
    std::fputs(decomposition_csv_text(table).c_str(), stdout);
    return 0;
  }
  write_decomposition_csv(table, out + ".csv");
  write_decomposition_json(table, out + ".json");
  std::printf("wrote %s.csv\n", out.c_str());
  std::printf("wrote %s.json\n", out.c_str());
  return 0;
}

int cmd_sage_check(std::uint64_t seed, std::size_t orderings,
                   const std::string& out) {
  const SageCheckResult res = sage_check(seed, orderings, /*quiet=*/false);
  if (!out.empty()) {
    nlohmann::json instances = nlohmann::json::array();
    for (const auto& inst : res.instances)
      instances.push_back({{"index", inst.index},
                           {"model", inst.model_type},
                           {"max_gap_in_3se", inst.max_gap_in_3se},
                           {"efficiency_gap", inst.efficiency_gap},
                           {"v_full", inst.v_full},
                           {"pass", inst.pass}});
    const nlohmann::json j = {{"schema", "varimp.sage_check.v1"},
                              {"seed", seed},
                              {"n_orderings", res.n_orderings},
                              {"all_pass", res.all_pass},
                              {"instances", instances}};
    std::ofstream f(out);
    if (!f) throw config_error("cannot open " + out + " for writing");
    f << j.dump(2) << "\n";
    std::printf("wrote %s\n", out.c_str());
  }
  std::printf("sage-check: %s (%zu orderings)\n",
              res.all_pass ? "all instances pass" : "FAILURES", res.n_orderings);
  return res.all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "varimp: variable-importance benchmarking for ensembles\n"
      "Compares scoring a combined ensemble against averaging per-member "
      "scores, for refit, permute, and Shapley-style importance methods."};
  app.require_subcommand(1);

  // generate
  std::string g_dgp = "friedman1", g_snr = "1.0", g_out = "dataset";
  std::size_t g_n = 1000;
  double g_rho = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t g_seed = 1;
  CLI::App* generate = app.add_subcommand(
      "generate", "Draw one synthetic dataset and write CSV + metadata");
  generate->add_option("--dgp", g_dgp, "friedman1 | gfunction | ishigami");
  generate->add_option("--n", g_n, "Number of rows")->required();
  generate->add_option("--rho", g_rho, "Input correlation (default: generator's own)");
  generate->add_option("--snr", g_snr, "Signal-to-noise ratio, or 'noiseless'");
  generate->add_option("--seed", g_seed, "Random seed");
  generate->add_option("--out", g_out, "Output path prefix")->required();

  // shared config-driven options
  std::string config_path, out_override;
  std::uint64_t seed_override = 0;
  std::size_t par_override = 0;

  CLI::App* truth = app.add_subcommand(
      "truth", "Prebuild the reference importance vectors for a config");
  truth->add_option("--config", config_path, "Experiment config JSON")->required();

  CLI::App* run = app.add_subcommand("run", "Execute the experiment grid");
  run->add_option("--config", config_path, "Experiment config JSON")->required();
  run->add_option("--seed", seed_override, "Override the config's base seed");
  run->add_option("--parallelism", par_override, "Override the worker count");
  run->add_option("--out", out_override, "Override the output directory");

  // summarize
  std::string s_report, s_group = "method,strategy,n", s_out;
  CLI::App* summarize_cmd =
      app.add_subcommand("summarize", "Aggregate a report into grouped statistics");
  summarize_cmd->add_option("--report", s_report, "report.csv or report.json")
      ->required();
  summarize_cmd->add_option("--group", s_group,
                            "Comma-separated grouping columns (may be empty)");
  summarize_cmd->add_option("--out", s_out,
                            "Output path prefix (default: CSV to stdout)");

  // decompose
  std::string d_report, d_out;
  CLI::App* decompose_cmd = app.add_subcommand(
      "decompose", "Split per-feature error into bias^2 and variance");
  decompose_cmd->add_option("--report", d_report, "report.csv or report.json")
      ->required();
  decompose_cmd->add_option("--out", d_out,
                            "Output path prefix (default: CSV to stdout)");

  // sage-check
  std::uint64_t c_seed = 2026;
  std::size_t c_orderings = 512;
  std::string c_out;
  CLI::App* check = app.add_subcommand(
      "sage-check", "Compare sampled Shapley scores with exact enumeration");
  check->add_option("--seed", c_seed, "Seed for the check instances");
  check->add_option("--orderings", c_orderings, "Sampled permutation count");
  check->add_option("--out", c_out, "Optional JSON result path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed())
      return cmd_generate(g_dgp, g_n, g_rho, g_snr, g_seed, g_out);
    if (truth->parsed()) return cmd_truth(load_experiment_config(config_path));
    if (run->parsed()) {
      ExperimentConfig cfg = load_experiment_config(config_path);
      if (run->count("--seed") > 0) cfg.base_seed = seed_override;
      if (run->count("--parallelism") > 0) cfg.parallelism = par_override;
      if (run->count("--out") > 0) cfg.output_dir = out_override;
      validate(cfg);
      return cmd_run(std::move(cfg));
    }
    if (summarize_cmd->parsed()) return cmd_summarize(s_report, s_group, s_out);
    if (decompose_cmd->parsed()) return cmd_decompose(d_report, d_out);
    if (check->parsed()) return cmd_sage_check(c_seed, c_orderings, c_out);
  } catch (const config_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
