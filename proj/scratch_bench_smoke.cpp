#include <cstdio>

#include "varimp/bench.hpp"

using namespace varimp;

int main() {
  nlohmann::json j = {
      {"datasets", {{{"dgp", "friedman1"}, {"rho", 0.0}}}},
      {"models", {{{"type", "linear"}}, {{"type", "tree"}, {"max_depth", 4}}}},
      {"methods", {"loco", "cfi"}},
      {"n_grid", {96}},
      {"B", 3},
      {"seeds", 2},
      {"truth_source", "montecarlo"},
      {"truth", {{"mc_outer", 200}, {"mc_inner", 50}}},
      {"output_dir", "/tmp/bench_smoke"},
      {"parallelism", 1},
  };
  ExperimentConfig cfg = experiment_config_from_json(j);
  std::printf("datasets=%zu models=%zu (%s,%s) cells expected=%zu\n",
              cfg.datasets.size(), cfg.models.size(), cfg.model_names[0].c_str(),
              cfg.model_names[1].c_str(), enumerate_cells(cfg).size());
  RunResult res = run_experiment(cfg, /*quiet=*/false);
  std::printf("rows=%zu total=%zu failed=%zu reused=%zu\n", res.report.rows.size(),
              res.cells_total, res.cells_failed, res.cells_reused);
  write_report_csv(res.report, "/tmp/bench_smoke/report.csv");
  ExperimentReport back = parse_report_csv("/tmp/bench_smoke/report.csv");
  std::printf("roundtrip=%s\n", back.rows == res.report.rows ? "ok" : "MISMATCH");
  SummaryTable table = summarize(res.report, {"strategy", "n"});
  for (const SummaryRow& r : table.rows)
    std::printf("  %s n=%s cells=%zu mse=%.4f auc=%.4f bv(b2=%.4f v=%.4f)\n",
                r.group[0].c_str(), r.group[1].c_str(), r.cells, r.mse_mean,
                r.auc_mean, r.bv_bias_sq, r.bv_variance);
  DecompositionTable dec = decompose(res.report);
  std::printf("decomp rows=%zu\n", dec.rows.size());
  // Rerun to exercise the reuse path.
  RunResult res2 = run_experiment(cfg, true);
  std::printf("rerun reused=%zu identical=%s\n", res2.cells_reused,
              res2.report.rows == res.report.rows ? "ok" : "MISMATCH");
  return 0;
}
