#pragma once
// Experiment grid runner. A declarative JSON config expands into a grid of
// (dataset x model x ensembling x method x n x replicate) cells; each cell
// trains one ensemble, scores feature importance under both aggregation
// strategies, and is written to a per-cell manifest file so interrupted runs
// resume by recomputing only what is missing. Results are emitted as
// schema-versioned CSV/JSON tables whose bytes are independent of the worker
// count.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <unistd.h>

#include "varimp/metrics.hpp"
#include "varimp/oracle.hpp"

namespace varimp {

// ---------------------------------------------------------------------------
// Experiment configuration

struct DatasetSpec {
  Dgp dgp = Dgp::friedman1;
  double rho = std::numeric_limits<double>::quiet_NaN();  // NaN = DGP default
  double snr = 1.0;  // infinity = noiseless
  std::string name;  // unique within one config: "friedman1", "friedman1#2", ...
};

inline double resolved_rho(const DatasetSpec& spec) {
  return std::isnan(spec.rho) ? dgp_info(spec.dgp).default_rho : spec.rho;
}

struct ExperimentConfig {
  std::vector<DatasetSpec> datasets;
  std::vector<LearnerConfig> models;
  std::vector<std::string> model_names;  // unique: "mlp", "tree", "mlp#2", ...
  std::vector<EnsembleKind> ensembling{EnsembleKind::bagging};
  std::vector<Method> methods;
  std::vector<Strategy> strategies{Strategy::ensemble, Strategy::sub_models};
  std::vector<std::size_t> n_grid;
  std::size_t B = 10;
  std::size_t seeds = 30;  // replicate count R
  std::uint64_t base_seed = 1;
  std::string truth_source = "asymptotic";  // asymptotic | montecarlo | none
  std::string output_dir = "results";
  std::size_t parallelism = 1;

  // Per-cell estimator knobs.
  std::size_t cfi_n_perm = 10;
  std::size_t sage_n_outer = 128;
  std::size_t sage_n_cal = 16;
  std::size_t sage_background = 128;
  std::size_t sage_test_cap = 1024;

  // Reference-vector ("truth") knobs.
  std::size_t truth_n = TruthRequest{}.n;
  std::uint64_t truth_seed = TruthRequest{}.seed;
  std::size_t truth_cfi_n_perm = TruthRequest{}.n_perm;
  std::size_t truth_sage_n_outer = TruthRequest{}.sage_n_outer;
  std::size_t truth_sage_n_cal = TruthRequest{}.sage_n_cal;
  std::size_t truth_sage_background = TruthRequest{}.sage_background;
  std::size_t truth_sage_test_cap = TruthRequest{}.sage_test_cap;
  std::size_t truth_mc_outer = 4000;
  std::size_t truth_mc_inner = 400;
};

namespace bench_detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                const std::vector<std::string>& known,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(known.begin(), known.end(), it.key()) == known.end())
      throw config_error(where + ": unknown key '" + it.key() + "'");
}

// "name", "name#2", "name#3", ... for repeated base names, in listing order.
inline std::vector<std::string> dedupe_names(const std::vector<std::string>& base) {
  std::map<std::string, std::size_t> seen;
  std::vector<std::string> out;
  for (const std::string& b : base) {
    const std::size_t k = ++seen[b];
    out.push_back(k == 1 ? b : b + "#" + std::to_string(k));
  }
  return out;
}

}  // namespace bench_detail

// Model entries list a learner type plus only the fields they override;
// unknown fields are rejected rather than ignored.
inline LearnerConfig learner_config_from_lenient_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type"))
    throw config_error("model entry must be an object with a 'type' field");
  const std::string type = j.at("type").get<std::string>();
  nlohmann::json full;
  if (type == "mlp")
    full = config_to_json(MlpConfig{});
  else if (type == "tree")
    full = config_to_json(TreeConfig{});
  else if (type == "linear")
    full = config_to_json(LinearConfig{});
  else
    throw config_error("unknown learner type '" + type + "'");
  std::vector<std::string> known;
  for (auto it = full.begin(); it != full.end(); ++it) known.push_back(it.key());
  bench_detail::reject_unknown_keys(j, known, "model '" + type + "'");
  for (auto it = j.begin(); it != j.end(); ++it) full[it.key()] = it.value();
  return config_from_json(full);
}

inline DatasetSpec dataset_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("dgp"))
    throw config_error("dataset entry must be an object with a 'dgp' field");
  bench_detail::reject_unknown_keys(j, {"dgp", "rho", "snr"}, "dataset");
  DatasetSpec spec;
  spec.dgp = dgp_from_name(j.at("dgp").get<std::string>());
  if (j.contains("rho")) spec.rho = j.at("rho").get<double>();
  if (j.contains("snr")) {
    if (j.at("snr").is_string()) {
      if (j.at("snr").get<std::string>() != "noiseless")
        throw config_error("dataset snr: expected a number or \"noiseless\"");
      spec.snr = kNoiseless;
    } else {
      spec.snr = j.at("snr").get<double>();
      if (spec.snr <= 0.0) throw config_error("dataset snr must be positive");
    }
  }
  if (!std::isnan(spec.rho) && (spec.rho < 0.0 || spec.rho >= 1.0))
    throw config_error("dataset rho must lie in [0, 1)");
  return spec;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.datasets.empty()) throw config_error("config: datasets must be nonempty");
  if (cfg.models.empty()) throw config_error("config: models must be nonempty");
  if (cfg.ensembling.empty())
    throw config_error("config: ensembling must be nonempty");
  if (cfg.methods.empty()) throw config_error("config: methods must be nonempty");
  if (cfg.strategies.empty())
    throw config_error("config: strategies must be nonempty");
  if (cfg.n_grid.empty()) throw config_error("config: n_grid must be nonempty");
  for (std::size_t n : cfg.n_grid)
    if (n < 3) throw config_error("config: n_grid entries must be >= 3");
  if (cfg.B < 1) throw config_error("config: B must be >= 1");
  if (cfg.seeds < 1) throw config_error("config: seeds must be >= 1");
  if (cfg.parallelism < 1) throw config_error("config: parallelism must be >= 1");
  if (cfg.truth_source != "asymptotic" && cfg.truth_source != "montecarlo" &&
      cfg.truth_source != "none")
    throw config_error("config: truth_source must be asymptotic, montecarlo, or none");
  if (cfg.truth_source == "montecarlo") {
    for (const DatasetSpec& spec : cfg.datasets)
      if (resolved_rho(spec) != 0.0)
        throw config_error(
            "config: montecarlo truth requires independent inputs (rho = 0)");
    for (Method m : cfg.methods)
      if (m == Method::sage)
        throw config_error("config: montecarlo truth covers loco/cfi only");
  }
  if (cfg.model_names.size() != cfg.models.size())
    throw config_error("config: model name list out of sync");
}

inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("config: expected a JSON object");
  bench_detail::reject_unknown_keys(
      j,
      {"datasets", "models", "ensembling", "methods", "strategies", "n_grid", "B",
       "seeds", "base_seed", "truth_source", "output_dir", "parallelism",
       "cfi_n_perm", "sage", "truth"},
      "config");
  ExperimentConfig cfg;
  for (const auto& d : j.at("datasets")) cfg.datasets.push_back(dataset_spec_from_json(d));
  {
    std::vector<std::string> names;
    for (const DatasetSpec& spec : cfg.datasets) names.push_back(to_string(spec.dgp));
    names = bench_detail::dedupe_names(names);
    for (std::size_t i = 0; i < names.size(); ++i) cfg.datasets[i].name = names[i];
  }
  for (const auto& m : j.at("models"))
    cfg.models.push_back(learner_config_from_lenient_json(m));
  {
    std::vector<std::string> names;
    for (const LearnerConfig& m : cfg.models) names.push_back(learner_type_name(m));
    cfg.model_names = bench_detail::dedupe_names(names);
  }
  if (j.contains("ensembling")) {
    cfg.ensembling.clear();
    for (const auto& k : j.at("ensembling"))
      cfg.ensembling.push_back(ensemble_kind_from_name(k.get<std::string>()));
  }
  cfg.methods.clear();
  for (const auto& m : j.at("methods"))
    cfg.methods.push_back(method_from_name(m.get<std::string>()));
  if (j.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : j.at("strategies"))
      cfg.strategies.push_back(strategy_from_name(s.get<std::string>()));
  }
  cfg.n_grid.clear();
  for (const auto& n : j.at("n_grid")) cfg.n_grid.push_back(n.get<std::size_t>());
  if (j.contains("B")) cfg.B = j.at("B").get<std::size_t>();
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::size_t>();
  if (j.contains("base_seed")) cfg.base_seed = j.at("base_seed").get<std::uint64_t>();
  if (j.contains("truth_source"))
    cfg.truth_source = j.at("truth_source").get<std::string>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("parallelism"))
    cfg.parallelism = j.at("parallelism").get<std::size_t>();
  if (j.contains("cfi_n_perm")) cfg.cfi_n_perm = j.at("cfi_n_perm").get<std::size_t>();
  if (j.contains("sage")) {
    const auto& s = j.at("sage");
    bench_detail::reject_unknown_keys(s, {"n_outer", "n_cal", "background", "test_cap"},
                                      "config.sage");
    if (s.contains("n_outer")) cfg.sage_n_outer = s.at("n_outer").get<std::size_t>();
    if (s.contains("n_cal")) cfg.sage_n_cal = s.at("n_cal").get<std::size_t>();
    if (s.contains("background"))
      cfg.sage_background = s.at("background").get<std::size_t>();
    if (s.contains("test_cap")) cfg.sage_test_cap = s.at("test_cap").get<std::size_t>();
  }
  if (j.contains("truth")) {
    const auto& t = j.at("truth");
    bench_detail::reject_unknown_keys(
        t,
        {"n", "seed", "cfi_n_perm", "sage_n_outer", "sage_n_cal", "sage_background",
         "sage_test_cap", "mc_outer", "mc_inner"},
        "config.truth");
    if (t.contains("n")) cfg.truth_n = t.at("n").get<std::size_t>();
    if (t.contains("seed")) cfg.truth_seed = t.at("seed").get<std::uint64_t>();
    if (t.contains("cfi_n_perm"))
      cfg.truth_cfi_n_perm = t.at("cfi_n_perm").get<std::size_t>();
    if (t.contains("sage_n_outer"))
      cfg.truth_sage_n_outer = t.at("sage_n_outer").get<std::size_t>();
    if (t.contains("sage_n_cal"))
      cfg.truth_sage_n_cal = t.at("sage_n_cal").get<std::size_t>();
    if (t.contains("sage_background"))
      cfg.truth_sage_background = t.at("sage_background").get<std::size_t>();
    if (t.contains("sage_test_cap"))
      cfg.truth_sage_test_cap = t.at("sage_test_cap").get<std::size_t>();
    if (t.contains("mc_outer")) cfg.truth_mc_outer = t.at("mc_outer").get<std::size_t>();
    if (t.contains("mc_inner")) cfg.truth_mc_inner = t.at("mc_inner").get<std::size_t>();
  }
  validate(cfg);
  return cfg;
}

inline nlohmann::json experiment_config_json(const ExperimentConfig& cfg) {
  nlohmann::json datasets = nlohmann::json::array();
  for (const DatasetSpec& spec : cfg.datasets) {
    nlohmann::json d = {{"dgp", to_string(spec.dgp)}, {"rho", resolved_rho(spec)}};
    if (std::isinf(spec.snr))
      d["snr"] = "noiseless";
    else
      d["snr"] = spec.snr;
    datasets.push_back(d);
  }
  nlohmann::json models = nlohmann::json::array();
  for (const LearnerConfig& m : cfg.models) models.push_back(config_to_json(m));
  nlohmann::json ensembling = nlohmann::json::array();
  for (EnsembleKind k : cfg.ensembling) ensembling.push_back(to_string(k));
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : cfg.methods) methods.push_back(to_string(m));
  nlohmann::json strategies = nlohmann::json::array();
  for (Strategy s : cfg.strategies) strategies.push_back(to_string(s));
  return {{"datasets", datasets},
          {"models", models},
          {"ensembling", ensembling},
          {"methods", methods},
          {"strategies", strategies},
          {"n_grid", cfg.n_grid},
          {"B", cfg.B},
          {"seeds", cfg.seeds},
          {"base_seed", cfg.base_seed},
          {"truth_source", cfg.truth_source},
          {"output_dir", cfg.output_dir},
          {"parallelism", cfg.parallelism},
          {"cfi_n_perm", cfg.cfi_n_perm},
          {"sage",
           {{"n_outer", cfg.sage_n_outer},
            {"n_cal", cfg.sage_n_cal},
            {"background", cfg.sage_background},
            {"test_cap", cfg.sage_test_cap}}},
          {"truth",
           {{"n", cfg.truth_n},
            {"seed", cfg.truth_seed},
            {"cfi_n_perm", cfg.truth_cfi_n_perm},
            {"sage_n_outer", cfg.truth_sage_n_outer},
            {"sage_n_cal", cfg.truth_sage_n_cal},
            {"sage_background", cfg.truth_sage_background},
            {"sage_test_cap", cfg.truth_sage_test_cap},
            {"mc_outer", cfg.truth_mc_outer},
            {"mc_inner", cfg.truth_mc_inner}}}};
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config file " + path + " is not valid JSON: " + e.what());
  }
  return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Report rows

inline constexpr const char* kReportSchema = "varimp.report.v1";

struct ReportRow {
  std::string dataset, model, ensembling, method, strategy;
  std::size_t n = 0, B = 0, seed = 0, feature = 0;
  double score = 0.0, truth = 0.0, r2_full = 0.0, runtime_ms = 0.0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
};

namespace bench_detail {

inline bool doubles_match(double a, double b) {
  return a == b || (std::isnan(a) && std::isnan(b));
}

}  // namespace bench_detail

inline bool operator==(const ReportRow& a, const ReportRow& b) {
  return a.dataset == b.dataset && a.model == b.model &&
         a.ensembling == b.ensembling && a.method == b.method &&
         a.strategy == b.strategy && a.n == b.n && a.B == b.B && a.seed == b.seed &&
         a.feature == b.feature && bench_detail::doubles_match(a.score, b.score) &&
         bench_detail::doubles_match(a.truth, b.truth) &&
         bench_detail::doubles_match(a.r2_full, b.r2_full) &&
         bench_detail::doubles_match(a.runtime_ms, b.runtime_ms);
}

inline std::string report_header() {
  return "dataset,model,ensembling,method,strategy,n,B,seed,feature,score,truth,"
         "r2_full,runtime_ms";
}

namespace bench_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline void check_no_comma(const std::string& s) {
  if (s.find(',') != std::string::npos)
    throw config_error("CSV field contains a comma: '" + s + "'");
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw config_error("cannot parse " + what + " from '" + s + "'");
  }
}

inline std::size_t parse_count(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw config_error("cannot parse " + what + " from '" + s + "'");
  }
}

inline void atomic_write_text(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp);
    if (!out) throw config_error("cannot open " + tmp + " for writing");
    out << text;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw config_error("cannot move " + tmp + " into place at " + path);
  }
}

}  // namespace bench_detail

inline void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ostringstream out;
  out << "# schema=" << kReportSchema << "\n" << report_header() << "\n";
  for (const ReportRow& r : report.rows) {
    bench_detail::check_no_comma(r.dataset);
    bench_detail::check_no_comma(r.model);
    out << r.dataset << ',' << r.model << ',' << r.ensembling << ',' << r.method
        << ',' << r.strategy << ',' << r.n << ',' << r.B << ',' << r.seed << ','
        << r.feature << ',' << format_double(r.score) << ','
        << format_double(r.truth) << ',' << format_double(r.r2_full) << ','
        << format_double(r.runtime_ms) << "\n";
  }
  bench_detail::atomic_write_text(path, out.str());
}

inline ExperimentReport parse_report_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open report file " + path);
  std::string line;
  if (!std::getline(in, line)) throw config_error("report file " + path + " is empty");
  if (!line.empty() && line[0] == '#') {
    if (line.find(kReportSchema) == std::string::npos)
      throw config_error("report file " + path + " has an unsupported schema line: " +
                         line);
    if (!std::getline(in, line))
      throw config_error("report file " + path + " has no header");
  }
  if (line != report_header())
    throw config_error("report file " + path + " has an unexpected header: " + line);
  ExperimentReport report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = bench_detail::split_csv_line(line);
    if (f.size() != 13)
      throw config_error("report row has " + std::to_string(f.size()) +
                         " fields, expected 13: " + line);
    ReportRow r;
    r.dataset = f[0];
    r.model = f[1];
    r.ensembling = f[2];
    r.method = f[3];
    r.strategy = f[4];
    r.n = bench_detail::parse_count(f[5], "n");
    r.B = bench_detail::parse_count(f[6], "B");
    r.seed = bench_detail::parse_count(f[7], "seed");
    r.feature = bench_detail::parse_count(f[8], "feature");
    r.score = bench_detail::parse_double(f[9], "score");
    r.truth = bench_detail::parse_double(f[10], "truth");
    r.r2_full = bench_detail::parse_double(f[11], "r2_full");
    r.runtime_ms = bench_detail::parse_double(f[12], "runtime_ms");
    report.rows.push_back(std::move(r));
  }
  return report;
}

namespace bench_detail {

// JSON-safe double: NaN/inf are not representable in strict JSON, so mirror
// them as strings that the reader converts back.
inline nlohmann::json json_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double double_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw config_error("unexpected numeric string '" + s + "'");
  }
  return j.get<double>();
}

}  // namespace bench_detail

inline nlohmann::json report_json(const ExperimentReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : report.rows)
    rows.push_back({{"dataset", r.dataset},
                    {"model", r.model},
                    {"ensembling", r.ensembling},
                    {"method", r.method},
                    {"strategy", r.strategy},
                    {"n", r.n},
                    {"B", r.B},
                    {"seed", r.seed},
                    {"feature", r.feature},
                    {"score", bench_detail::json_double(r.score)},
                    {"truth", bench_detail::json_double(r.truth)},
                    {"r2_full", bench_detail::json_double(r.r2_full)},
                    {"runtime_ms", bench_detail::json_double(r.runtime_ms)}});
  return {{"schema", kReportSchema}, {"rows", rows}};
}

inline ExperimentReport report_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<std::string>() != kReportSchema)
    throw config_error("unsupported report schema " + j.at("schema").dump());
  ExperimentReport report;
  for (const auto& jr : j.at("rows")) {
    ReportRow r;
    r.dataset = jr.at("dataset").get<std::string>();
    r.model = jr.at("model").get<std::string>();
    r.ensembling = jr.at("ensembling").get<std::string>();
    r.method = jr.at("method").get<std::string>();
    r.strategy = jr.at("strategy").get<std::string>();
    r.n = jr.at("n").get<std::size_t>();
    r.B = jr.at("B").get<std::size_t>();
    r.seed = jr.at("seed").get<std::size_t>();
    r.feature = jr.at("feature").get<std::size_t>();
    r.score = bench_detail::double_from_json(jr.at("score"));
    r.truth = bench_detail::double_from_json(jr.at("truth"));
    r.r2_full = bench_detail::double_from_json(jr.at("r2_full"));
    r.runtime_ms = bench_detail::double_from_json(jr.at("runtime_ms"));
    report.rows.push_back(std::move(r));
  }
  return report;
}

inline void write_report_json(const ExperimentReport& report, const std::string& path) {
  bench_detail::atomic_write_text(path, report_json(report).dump(2) + "\n");
}

inline ExperimentReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open report file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw config_error("report file " + path + " is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

// ---------------------------------------------------------------------------
// Cells

struct CellCoord {
  std::size_t dataset = 0;  // index into cfg.datasets
  std::size_t model = 0;    // index into cfg.models
  std::size_t kind = 0;     // index into cfg.ensembling
  std::size_t method = 0;   // index into cfg.methods
  std::size_t n = 0;        // sample count (value, not an index)
  std::size_t rep = 0;      // replicate number in [0, seeds)
};

// One seed per cell, derived from named coordinates so adding entries to an
// axis never changes existing cells. Both strategies are read off one fitted
// ensemble, so the strategy axis does not enter the derivation.
inline std::uint64_t cell_seed(const ExperimentConfig& cfg, const CellCoord& c) {
  return RngKey(cfg.base_seed)
      .child(cfg.datasets[c.dataset].name)
      .child(cfg.model_names[c.model])
      .child(to_string(cfg.ensembling[c.kind]))
      .child(to_string(cfg.methods[c.method]))
      .child("n", c.n)
      .child("r", c.rep)
      .key;
}

// Datasets are shared by every (model, ensembling, method) combination at the
// same (dataset, n, replicate), so their seeds must not depend on those axes.
inline std::uint64_t dataset_seed(const ExperimentConfig& cfg, std::size_t ds_idx,
                                  std::size_t n, std::size_t rep) {
  return RngKey(cfg.base_seed)
      .child(cfg.datasets[ds_idx].name)
      .child("data")
      .child("n", n)
      .child("r", rep)
      .key;
}

inline std::string cell_key(const ExperimentConfig& cfg, const CellCoord& c) {
  return cfg.datasets[c.dataset].name + "~" + cfg.model_names[c.model] + "~" +
         to_string(cfg.ensembling[c.kind]) + "~" + to_string(cfg.methods[c.method]) +
         "~n" + std::to_string(c.n) + "~r" + std::to_string(c.rep);
}

// Everything that determines a cell's numbers. A stored cell whose signature
// no longer matches the config is recomputed instead of reused.
inline nlohmann::json cell_signature_json(const ExperimentConfig& cfg,
                                          const CellCoord& c) {
  const DatasetSpec& spec = cfg.datasets[c.dataset];
  nlohmann::json j = {
      {"dataset",
       {{"dgp", to_string(spec.dgp)},
        {"rho", resolved_rho(spec)},
        {"snr", std::isinf(spec.snr) ? -1.0 : spec.snr}}},
      {"model", config_to_json(cfg.models[c.model])},
      {"ensembling", to_string(cfg.ensembling[c.kind])},
      {"method", to_string(cfg.methods[c.method])},
      {"n", c.n},
      {"B", cfg.B},
      {"replicate", c.rep},
      {"cell_seed", cell_seed(cfg, c)},
      {"data_seed", dataset_seed(cfg, c.dataset, c.n, c.rep)}};
  if (cfg.methods[c.method] == Method::cfi) j["n_perm"] = cfg.cfi_n_perm;
  if (cfg.methods[c.method] == Method::sage)
    j["sage"] = {{"n_outer", cfg.sage_n_outer},
                 {"n_cal", cfg.sage_n_cal},
                 {"background", cfg.sage_background},
                 {"test_cap", cfg.sage_test_cap}};
  return j;
}

inline std::string cell_signature(const ExperimentConfig& cfg, const CellCoord& c) {
  return hex16(config_hash(cell_signature_json(cfg, c)));
}

struct StrategyCellResult {
  std::vector<double> scores, se;
  double r2_full = 0.0;
};

struct CellOutcome {
  std::string key;
  std::uint64_t seed = 0;
  std::string signature;
  std::string status;  // "ok" or "error"
  std::string error;
  double runtime_ms = 0.0;
  std::map<std::string, StrategyCellResult> strategies;
};

inline CellOutcome run_cell(const ExperimentConfig& cfg, const CellCoord& c,
                            const Dataset& ds) {
  CellOutcome out;
  out.key = cell_key(cfg, c);
  out.seed = cell_seed(cfg, c);
  out.signature = cell_signature(cfg, c);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const RngKey root(out.seed);
    const DataSplit split = train_test_split(ds);
    const LearnerConfig& learner = cfg.models[c.model];
    const EnsembleModel ens =
        fit_ensemble(member_fit_fn(learner), cfg.ensembling[c.kind], learner, cfg.B,
                     split.X_train, split.y_train, root.child("fit").key);

    const auto member_preds =
        importance_detail::predict_members(ens, split.X_test);
    const auto risks = importance_detail::risks_of(member_preds, split.y_test);
    const double r2_ens =
        importance_detail::r2_of_risk(risks.ensemble, split.y_test);
    const double r2_sub =
        importance_detail::r2_of_risk(mean(risks.member), split.y_test);

    StrategyPair pair;
    switch (cfg.methods[c.method]) {
      case Method::loco:
        pair = loco_pair(restricted_fit_fn(member_fit_fn(learner)), split.X_train,
                         split.y_train, split.X_test, split.y_test, ens);
        break;
      case Method::cfi: {
        const auto samplers =
            fit_all_samplers(split.X_train, root.child("sampler").key);
        pair = cfi_pair(ens, split.X_test, split.y_test, samplers, cfg.cfi_n_perm,
                        root.child("perm").key);
        break;
      }
      case Method::sage: {
        const std::size_t n_test = std::min(cfg.sage_test_cap, split.X_test.rows());
        const Matrix X_test = split.X_test.slice_rows(0, n_test);
        const std::vector<double> y_test(
            split.y_test.begin(),
            split.y_test.begin() + static_cast<std::ptrdiff_t>(n_test));
        RngStream bg(root.child("background").key);
        const std::size_t m = std::min(cfg.sage_background, split.X_train.rows());
        const Matrix background = split.X_train.select_rows(
            bg.sample_without_replacement(split.X_train.rows(), m));
        pair = sage_pair(ens, X_test, y_test, background, cfg.sage_n_outer,
                         std::min(cfg.sage_n_cal, m), root.child("orderings").key);
        break;
      }
    }
    out.strategies["ensemble"] =
        StrategyCellResult{pair.ensemble.scores, pair.ensemble.se, r2_ens};
    out.strategies["sub_models"] =
        StrategyCellResult{pair.sub_models.scores, pair.sub_models.se, r2_sub};
    out.status = "ok";
  } catch (const std::exception& e) {
    out.status = "error";
    out.error = e.what();
    out.strategies.clear();
  }
  out.runtime_ms = std::chrono::duration<double, std::milli>(
                       std::chrono::steady_clock::now() - t0)
                       .count();
  return out;
}

inline std::string cell_file_path(const ExperimentConfig& cfg, const CellCoord& c) {
  return cfg.output_dir + "/cells/" + cell_key(cfg, c) + ".json";
}

inline void write_cell_file(const ExperimentConfig& cfg, const CellCoord& c,
                            const CellOutcome& out) {
  nlohmann::json strategies;
  for (const auto& [name, r] : out.strategies)
    strategies[name] = {{"scores", r.scores},
                        {"se", r.se},
                        {"r2_full", bench_detail::json_double(r.r2_full)}};
  const nlohmann::json j = {{"key", out.key},
                            {"seed", out.seed},
                            {"signature", out.signature},
                            {"status", out.status},
                            {"error", out.error},
                            {"runtime_ms", out.runtime_ms},
                            {"strategies", strategies}};
  bench_detail::atomic_write_text(cell_file_path(cfg, c), j.dump(2) + "\n");
}

// A stored outcome is reusable only when it parses, carries the current
// signature, and finished successfully; anything else is recomputed.
inline std::optional<CellOutcome> load_cell_file(const ExperimentConfig& cfg,
                                                 const CellCoord& c) {
  std::ifstream in(cell_file_path(cfg, c));
  if (!in) return std::nullopt;
  try {
    nlohmann::json j;
    in >> j;
    CellOutcome out;
    out.key = j.at("key").get<std::string>();
    out.seed = j.at("seed").get<std::uint64_t>();
    out.signature = j.at("signature").get<std::string>();
    out.status = j.at("status").get<std::string>();
    out.error = j.at("error").get<std::string>();
    out.runtime_ms = j.at("runtime_ms").get<double>();
    for (const auto& [name, r] : j.at("strategies").items()) {
      StrategyCellResult s;
      s.scores = r.at("scores").get<std::vector<double>>();
      s.se = r.at("se").get<std::vector<double>>();
      s.r2_full = bench_detail::double_from_json(r.at("r2_full"));
      out.strategies[name] = std::move(s);
    }
    if (out.status != "ok" || out.signature != cell_signature(cfg, c))
      return std::nullopt;
    return out;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ---------------------------------------------------------------------------
// Truth store

// Reference importance vectors per (dataset, model, ensembling, method). The
// stored target is the large-n value of the combined-model estimand, which
// serves as the reference for both aggregation strategies.
struct TruthStore {
  std::map<std::string, std::vector<double>> by_key;

  static std::string key_of(const ExperimentConfig& cfg, const CellCoord& c) {
    return cfg.datasets[c.dataset].name + "~" + cfg.model_names[c.model] + "~" +
           to_string(cfg.ensembling[c.kind]) + "~" + to_string(cfg.methods[c.method]);
  }

  std::vector<double> lookup(const ExperimentConfig& cfg, const CellCoord& c,
                             std::size_t d) const {
    const auto it = by_key.find(key_of(cfg, c));
    if (it == by_key.end())
      return std::vector<double>(d, std::numeric_limits<double>::quiet_NaN());
    return it->second;
  }
};

inline TruthRequest truth_request_for(const ExperimentConfig& cfg,
                                      const CellCoord& c) {
  const DatasetSpec& spec = cfg.datasets[c.dataset];
  TruthRequest req;
  req.method = cfg.methods[c.method];
  req.dgp = spec.dgp;
  req.model = EnsembleSpec{cfg.models[c.model], cfg.ensembling[c.kind], cfg.B};
  req.strategy = Strategy::ensemble;
  req.n = cfg.truth_n;
  req.rho = spec.rho;
  req.snr = spec.snr;
  req.seed = cfg.truth_seed;
  req.n_perm = cfg.truth_cfi_n_perm;
  req.sage_n_outer = cfg.truth_sage_n_outer;
  req.sage_n_cal = cfg.truth_sage_n_cal;
  req.sage_background = cfg.truth_sage_background;
  req.sage_test_cap = cfg.truth_sage_test_cap;
  return req;
}

inline std::string truth_cache_dir(const ExperimentConfig& cfg) {
  return cfg.output_dir + "/truth";
}

// Builds (or loads from cache) every reference vector the grid needs. With
// truth_source "none" the store stays empty and truth columns read NaN.
inline TruthStore build_truth_store(const ExperimentConfig& cfg) {
  TruthStore store;
  if (cfg.truth_source == "none") return store;
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
          if (store.by_key.count(key)) continue;
          if (cfg.truth_source == "asymptotic") {
            const GroundTruth gt =
                asymptotic_importance(truth_request_for(cfg, c), truth_cache_dir(cfg));
            store.by_key[key] = gt.scores;
          } else {  // montecarlo
            const DatasetSpec& spec = cfg.datasets[di];
            GroundTruth gt = montecarlo_total_sobol(
                spec.dgp, resolved_rho(spec), cfg.truth_mc_outer, cfg.truth_mc_inner,
                cfg.truth_seed);
            // A conditional-resampling redraw doubles the perturbation energy
            // of an independent feature, so its large-n target is twice the
            // unnormalized total Sobol index; the refit target equals it.
            if (cfg.methods[mei] == Method::cfi)
              for (double& v : gt.scores) v *= 2.0;
            store.by_key[key] = gt.scores;
          }
        }
  return store;
}

// ---------------------------------------------------------------------------
// Grid execution

struct RunResult {
  ExperimentReport report;
  std::size_t cells_total = 0;
  std::size_t cells_failed = 0;
  std::size_t cells_reused = 0;
  std::vector<std::pair<std::string, std::string>> errors;  // (cell key, message)
};

inline std::vector<CellCoord> enumerate_cells(const ExperimentConfig& cfg) {
  std::vector<CellCoord> coords;
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di)
    for (std::size_t mi = 0; mi < cfg.models.size(); ++mi)
      for (std::size_t ki = 0; ki < cfg.ensembling.size(); ++ki)
        for (std::size_t mei = 0; mei < cfg.methods.size(); ++mei)
          for (std::size_t n : cfg.n_grid)
            for (std::size_t rep = 0; rep < cfg.seeds; ++rep) {
              CellCoord c;
              c.dataset = di;
              c.model = mi;
              c.kind = ki;
              c.method = mei;
              c.n = n;
              c.rep = rep;
              coords.push_back(c);
            }
  return coords;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, bool quiet = false) {
  validate(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir + "/cells");

  const TruthStore truth = build_truth_store(cfg);

  // Shared immutable dataset cache: one realization per (dataset, n, replicate).
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, Dataset> data;
  for (std::size_t di = 0; di < cfg.datasets.size(); ++di)
    for (std::size_t n : cfg.n_grid)
      for (std::size_t rep = 0; rep < cfg.seeds; ++rep) {
        const DatasetSpec& spec = cfg.datasets[di];
        data.emplace(std::make_tuple(di, n, rep),
                     generate(spec.dgp, n, resolved_rho(spec), spec.snr,
                              dataset_seed(cfg, di, n, rep)));
      }

  const std::vector<CellCoord> coords = enumerate_cells(cfg);
  std::vector<CellOutcome> outcomes(coords.size());
  std::vector<std::size_t> todo;
  std::size_t reused = 0;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (auto cached = load_cell_file(cfg, coords[i])) {
      outcomes[i] = std::move(*cached);
      ++reused;
    } else {
      todo.push_back(i);
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex io_mu;
  const auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= todo.size()) break;
      const std::size_t i = todo[t];
      const CellCoord& c = coords[i];
      CellOutcome out = run_cell(cfg, c, data.at(std::make_tuple(c.dataset, c.n, c.rep)));
      {
        std::lock_guard<std::mutex> lock(io_mu);
        write_cell_file(cfg, c, out);
        const std::size_t k = ++done;
        if (!quiet)
          std::fprintf(stderr, "[%zu/%zu] %s %s\n", k, todo.size(), out.key.c_str(),
                       out.status.c_str());
      }
      outcomes[i] = std::move(out);
    }
  };
  if (cfg.parallelism <= 1 || todo.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const std::size_t workers = std::min(cfg.parallelism, todo.size());
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  // Assembly in deterministic coordinate order, independent of scheduling.
  RunResult res;
  res.cells_total = coords.size();
  res.cells_reused = reused;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const CellCoord& c = coords[i];
    const CellOutcome& out = outcomes[i];
    if (out.status != "ok") {
      ++res.cells_failed;
      res.errors.emplace_back(out.key, out.error);
      continue;
    }
    const std::size_t d = out.strategies.begin()->second.scores.size();
    const std::vector<double> tv = truth.lookup(cfg, c, d);
    for (Strategy s : cfg.strategies) {
      const auto& sc = out.strategies.at(to_string(s));
      for (std::size_t j = 0; j < sc.scores.size(); ++j) {
        ReportRow r;
        r.dataset = cfg.datasets[c.dataset].name;
        r.model = cfg.model_names[c.model];
        r.ensembling = to_string(cfg.ensembling[c.kind]);
        r.method = to_string(cfg.methods[c.method]);
        r.strategy = to_string(s);
        r.n = c.n;
        r.B = cfg.B;
        r.seed = c.rep;
        r.feature = j;
        r.score = sc.scores[j];
        r.truth = j < tv.size() ? tv[j] : std::numeric_limits<double>::quiet_NaN();
        r.r2_full = sc.r2_full;
        r.runtime_ms = out.runtime_ms;
        res.report.rows.push_back(std::move(r));
      }
    }
  }
  return res;
}

inline void write_run_manifest(const ExperimentConfig& cfg, const RunResult& res,
                               const std::string& path) {
  nlohmann::json errors = nlohmann::json::array();
  for (const auto& [key, msg] : res.errors)
    errors.push_back({{"cell", key}, {"error", msg}});
  const nlohmann::json j = {{"schema", "varimp.run.v1"},
                            {"config", experiment_config_json(cfg)},
                            {"cells_total", res.cells_total},
                            {"cells_failed", res.cells_failed},
                            {"cells_reused", res.cells_reused},
                            {"errors", errors}};
  bench_detail::atomic_write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Summaries

namespace bench_detail {

// One cell reassembled from report rows: per-feature scores and the shared
// truth vector, plus the cell-constant columns.
struct CellAgg {
  std::vector<double> scores, truth;
  double r2_full = 0.0, runtime_ms = 0.0;
};

using CellId = std::tuple<std::string, std::string, std::string, std::string,
                          std::string, std::size_t, std::size_t, std::size_t>;

inline CellId cell_id_of(const ReportRow& r) {
  return {r.dataset, r.model, r.ensembling, r.method, r.strategy, r.n, r.B, r.seed};
}

inline std::map<CellId, CellAgg> collect_cells(const ExperimentReport& report) {
  std::map<CellId, std::map<std::size_t, std::pair<double, double>>> raw;
  std::map<CellId, std::pair<double, double>> extras;
  for (const ReportRow& r : report.rows) {
    const CellId id = cell_id_of(r);
    auto [it, inserted] = raw[id].emplace(r.feature, std::make_pair(r.score, r.truth));
    if (!inserted)
      throw config_error("report has duplicate rows for one (cell, feature)");
    extras[id] = {r.r2_full, r.runtime_ms};
  }
  std::map<CellId, CellAgg> cells;
  for (auto& [id, features] : raw) {
    CellAgg agg;
    std::size_t expect = 0;
    for (const auto& [j, sv] : features) {
      if (j != expect)
        throw config_error("report cell is missing feature " + std::to_string(expect));
      agg.scores.push_back(sv.first);
      agg.truth.push_back(sv.second);
      ++expect;
    }
    agg.r2_full = extras[id].first;
    agg.runtime_ms = extras[id].second;
    cells.emplace(id, std::move(agg));
  }
  return cells;
}

inline std::string cell_id_field(const CellId& id, std::size_t col) {
  switch (col) {
    case 0: return std::get<0>(id);
    case 1: return std::get<1>(id);
    case 2: return std::get<2>(id);
    case 3: return std::get<3>(id);
    case 4: return std::get<4>(id);
    case 5: return std::to_string(std::get<5>(id));
    case 6: return std::to_string(std::get<6>(id));
    default: return std::to_string(std::get<7>(id));
  }
}

inline double sd_of(const std::vector<double>& v) {
  return v.size() < 2 ? 0.0 : std::sqrt(population_variance(v));
}

inline double mean_or_nan(const std::vector<double>& v) {
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : mean(v);
}

inline bool finite_all(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace bench_detail

inline constexpr const char* kSummarySchema = "varimp.summary.v1";

struct SummaryRow {
  std::vector<std::string> group;  // values aligned with SummaryTable::group_cols
  std::size_t cells = 0;
  double score_mean = 0.0, score_sd = 0.0;
  double mse_mean = 0.0, mse_sd = 0.0;
  double auc_mean = 0.0, auc_sd = 0.0;
  // Decomposition of the per-feature estimation error into squared bias and
  // variance across replicates, averaged over truth-relevant features.
  double bv_mse = 0.0, bv_bias_sq = 0.0, bv_variance = 0.0;
};

struct SummaryTable {
  std::vector<std::string> group_cols;
  std::vector<SummaryRow> rows;
};

inline SummaryTable summarize(const ExperimentReport& report,
                              const std::vector<std::string>& grouping) {
  static const std::vector<std::string> kGroupable = {
      "dataset", "model", "ensembling", "method", "strategy", "n", "B"};
  std::vector<std::size_t> cols;
  for (const std::string& g : grouping) {
    const auto it = std::find(kGroupable.begin(), kGroupable.end(), g);
    if (it == kGroupable.end())
      throw config_error("summarize: unknown grouping key '" + g + "'");
    cols.push_back(static_cast<std::size_t>(it - kGroupable.begin()));
  }
  if (report.rows.empty()) throw config_error("summarize: empty report");

  const auto cells = bench_detail::collect_cells(report);

  // Numeric columns (n, B) sort by value, name columns lexicographically.
  const auto key_less = [&](const std::vector<std::string>& a,
                            const std::vector<std::string>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const bool numeric = cols[i] == 5 || cols[i] == 6;
      if (numeric) {
        const unsigned long long x = std::stoull(a[i]), y = std::stoull(b[i]);
        if (x != y) return x < y;
      } else if (a[i] != b[i]) {
        return a[i] < b[i];
      }
    }
    return false;
  };
  std::map<std::vector<std::string>, std::vector<bench_detail::CellId>,
           decltype(key_less)>
      groups(key_less);
  for (const auto& [id, agg] : cells) {
    std::vector<std::string> key;
    for (std::size_t c : cols) key.push_back(bench_detail::cell_id_field(id, c));
    groups[key].push_back(id);
  }

  SummaryTable table;
  table.group_cols = grouping;
  for (const auto& [key, ids] : groups) {
    SummaryRow row;
    row.group = key;
    row.cells = ids.size();
    std::vector<double> all_scores, mses, aucs;
    for (const bench_detail::CellId& id : ids) {
      const bench_detail::CellAgg& agg = cells.at(id);
      all_scores.insert(all_scores.end(), agg.scores.begin(), agg.scores.end());
      if (bench_detail::finite_all(agg.truth)) {
        const std::vector<int> every(agg.scores.size(), 1);
        mses.push_back(
            importance_mse(agg.scores, agg.truth, every, FeatureSubset::all));
        aucs.push_back(roc_auc(
            agg.scores,
            relevance_labels(agg.truth, relevance_epsilon(agg.truth))));
      }
    }
    row.score_mean = bench_detail::mean_or_nan(all_scores);
    row.score_sd = bench_detail::sd_of(all_scores);
    row.mse_mean = bench_detail::mean_or_nan(mses);
    row.mse_sd = bench_detail::sd_of(mses);
    row.auc_mean = bench_detail::mean_or_nan(aucs);
    row.auc_sd = bench_detail::sd_of(aucs);

    // Replicate sub-groups: identical cells except for the seed column.
    std::map<bench_detail::CellId, std::vector<bench_detail::CellId>> runs;
    for (const bench_detail::CellId& id : ids) {
      bench_detail::CellId base = id;
      std::get<7>(base) = 0;
      runs[base].push_back(id);
    }
    std::vector<double> bv_m, bv_b, bv_v;
    for (auto& [base, members] : runs) {
      if (members.size() < 2) continue;
      std::sort(members.begin(), members.end());
      const bench_detail::CellAgg& first = cells.at(members.front());
      if (!bench_detail::finite_all(first.truth)) continue;
      const std::size_t d = first.scores.size();
      Matrix est(members.size(), d);
      for (std::size_t r = 0; r < members.size(); ++r)
        for (std::size_t j = 0; j < d; ++j) est(r, j) = cells.at(members[r]).scores[j];
      const DecompositionResult dec = bias_variance(est, first.truth);
      const std::vector<bool> labels =
          relevance_labels(first.truth, relevance_epsilon(first.truth));
      std::vector<double> ms, bs, vs;
      for (std::size_t j = 0; j < d; ++j) {
        if (!labels[j]) continue;
        ms.push_back(dec.mse[j]);
        bs.push_back(dec.bias_sq[j]);
        vs.push_back(dec.variance[j]);
      }
      if (ms.empty()) continue;
      bv_m.push_back(mean(ms));
      bv_b.push_back(mean(bs));
      bv_v.push_back(mean(vs));
    }
    row.bv_mse = bench_detail::mean_or_nan(bv_m);
    row.bv_bias_sq = bench_detail::mean_or_nan(bv_b);
    row.bv_variance = bench_detail::mean_or_nan(bv_v);
    table.rows.push_back(std::move(row));
  }
  return table;
}

inline std::string summary_header(const SummaryTable& table) {
  std::string h;
  for (const std::string& g : table.group_cols) h += g + ",";
  h +=
      "cells,score_mean,score_sd,mse_mean,mse_sd,auc_mean,auc_sd,bv_mse,"
      "bv_bias_sq,bv_variance";
  return h;
}

inline std::string summary_csv_text(const SummaryTable& table) {
  std::ostringstream out;
  out << "# schema=" << kSummarySchema << "\n" << summary_header(table) << "\n";
  for (const SummaryRow& r : table.rows) {
    for (const std::string& g : r.group) {
      bench_detail::check_no_comma(g);
      out << g << ',';
    }
    out << r.cells << ',' << format_double(r.score_mean) << ','
        << format_double(r.score_sd) << ',' << format_double(r.mse_mean) << ','
        << format_double(r.mse_sd) << ',' << format_double(r.auc_mean) << ','
        << format_double(r.auc_sd) << ',' << format_double(r.bv_mse) << ','
        << format_double(r.bv_bias_sq) << ',' << format_double(r.bv_variance)
        << "\n";
  }
  return out.str();
}

inline void write_summary_csv(const SummaryTable& table, const std::string& path) {
  bench_detail::atomic_write_text(path, summary_csv_text(table));
}

inline nlohmann::json summary_json(const SummaryTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const SummaryRow& r : table.rows) {
    nlohmann::json jr;
    for (std::size_t i = 0; i < table.group_cols.size(); ++i)
      jr[table.group_cols[i]] = r.group[i];
    jr["cells"] = r.cells;
    jr["score_mean"] = bench_detail::json_double(r.score_mean);
    jr["score_sd"] = bench_detail::json_double(r.score_sd);
    jr["mse_mean"] = bench_detail::json_double(r.mse_mean);
    jr["mse_sd"] = bench_detail::json_double(r.mse_sd);
    jr["auc_mean"] = bench_detail::json_double(r.auc_mean);
    jr["auc_sd"] = bench_detail::json_double(r.auc_sd);
    jr["bv_mse"] = bench_detail::json_double(r.bv_mse);
    jr["bv_bias_sq"] = bench_detail::json_double(r.bv_bias_sq);
    jr["bv_variance"] = bench_detail::json_double(r.bv_variance);
    rows.push_back(std::move(jr));
  }
  return {{"schema", kSummarySchema},
          {"grouping", table.group_cols},
          {"rows", rows}};
}

inline void write_summary_json(const SummaryTable& table, const std::string& path) {
  bench_detail::atomic_write_text(path, summary_json(table).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Per-feature bias-variance decomposition

inline constexpr const char* kDecompositionSchema = "varimp.decomposition.v1";

struct DecompositionRow {
  std::string dataset, model, ensembling, method, strategy;
  std::size_t n = 0, B = 0, feature = 0, n_runs = 0;
  double truth = 0.0, mean_score = 0.0, mse = 0.0, bias_sq = 0.0, variance = 0.0;
};

struct DecompositionTable {
  std::vector<DecompositionRow> rows;
};

// Decomposes per-feature estimation error across replicates. Groups with a
// single replicate carry no variance information and are skipped.
inline DecompositionTable decompose(const ExperimentReport& report) {
  if (report.rows.empty()) throw config_error("decompose: empty report");
  const auto cells = bench_detail::collect_cells(report);
  std::map<bench_detail::CellId, std::vector<bench_detail::CellId>> runs;
  for (const auto& [id, agg] : cells) {
    bench_detail::CellId base = id;
    std::get<7>(base) = 0;
    runs[base].push_back(id);
  }
  DecompositionTable table;
  for (auto& [base, members] : runs) {
    if (members.size() < 2) continue;
    std::sort(members.begin(), members.end());
    const bench_detail::CellAgg& first = cells.at(members.front());
    if (!bench_detail::finite_all(first.truth)) continue;
    const std::size_t d = first.scores.size();
    Matrix est(members.size(), d);
    for (std::size_t r = 0; r < members.size(); ++r)
      for (std::size_t j = 0; j < d; ++j) est(r, j) = cells.at(members[r]).scores[j];
    const DecompositionResult dec = bias_variance(est, first.truth);
    for (std::size_t j = 0; j < d; ++j) {
      DecompositionRow row;
      row.dataset = std::get<0>(base);
      row.model = std::get<1>(base);
      row.ensembling = std::get<2>(base);
      row.method = std::get<3>(base);
      row.strategy = std::get<4>(base);
      row.n = std::get<5>(base);
      row.B = std::get<6>(base);
      row.feature = j;
      row.n_runs = members.size();
      row.truth = first.truth[j];
      row.mean_score = mean(est.column(j));
      row.mse = dec.mse[j];
      row.bias_sq = dec.bias_sq[j];
      row.variance = dec.variance[j];
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

inline std::string decomposition_header() {
  return "dataset,model,ensembling,method,strategy,n,B,feature,n_runs,truth,"
         "mean_score,mse,bias_sq,variance";
}

inline std::string decomposition_csv_text(const DecompositionTable& table) {
  std::ostringstream out;
  out << "# schema=" << kDecompositionSchema << "\n" << decomposition_header() << "\n";
  for (const DecompositionRow& r : table.rows)
    out << r.dataset << ',' << r.model << ',' << r.ensembling << ',' << r.method
        << ',' << r.strategy << ',' << r.n << ',' << r.B << ',' << r.feature << ','
        << r.n_runs << ',' << format_double(r.truth) << ','
        << format_double(r.mean_score) << ',' << format_double(r.mse) << ','
        << format_double(r.bias_sq) << ',' << format_double(r.variance) << "\n";
  return out.str();
}

inline void write_decomposition_csv(const DecompositionTable& table,
                                    const std::string& path) {
  bench_detail::atomic_write_text(path, decomposition_csv_text(table));
}

inline nlohmann::json decomposition_json(const DecompositionTable& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const DecompositionRow& r : table.rows)
    rows.push_back({{"dataset", r.dataset},
                    {"model", r.model},
                    {"ensembling", r.ensembling},
                    {"method", r.method},
                    {"strategy", r.strategy},
                    {"n", r.n},
                    {"B", r.B},
                    {"feature", r.feature},
                    {"n_runs", r.n_runs},
                    {"truth", bench_detail::json_double(r.truth)},
                    {"mean_score", bench_detail::json_double(r.mean_score)},
                    {"mse", bench_detail::json_double(r.mse)},
                    {"bias_sq", bench_detail::json_double(r.bias_sq)},
                    {"variance", bench_detail::json_double(r.variance)}});
  return {{"schema", kDecompositionSchema}, {"rows", rows}};
}

inline void write_decomposition_json(const DecompositionTable& table,
                                     const std::string& path) {
  bench_detail::atomic_write_text(path, decomposition_json(table).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Shapley sampling self-check

struct SageCheckInstance {
  std::size_t index = 0;
  std::string model_type;
  // Worst per-feature |sampled - enumerated| over both strategies, in units
  // of three convergence standard errors (pass requires <= 1).
  double max_gap_in_3se = 0.0;
  // |sum of sampled scores - independently computed full-coalition value|.
  double efficiency_gap = 0.0;
  double v_full = 0.0;
  bool pass = false;
};

struct SageCheckResult {
  std::vector<SageCheckInstance> instances;
  std::size_t n_orderings = 0;
  bool all_pass = false;
};

// Ten small randomized instances (five tree ensembles, five MLP ensembles) on
// six input columns: the permutation-sampling Shapley estimator must agree
// with exact subset enumeration within ordering-sampling error, and its
// scores must sum to the full-coalition value.
inline SageCheckResult sage_check(std::uint64_t seed, std::size_t n_orderings = 512,
                                  bool quiet = true) {
  constexpr std::size_t d = 6, n_train = 320, n_test = 96, n_bg = 48, n_cal = 12;
  SageCheckResult result;
  result.n_orderings = n_orderings;
  result.all_pass = true;
  for (std::size_t i = 0; i < 10; ++i) {
    const RngKey key = RngKey(seed).child("sagecheck", i);
    RngStream xs(key.child("x").key);
    RngStream noise(key.child("noise").key);
    Matrix X(n_train + n_test, d);
    for (std::size_t r = 0; r < X.rows(); ++r)
      for (std::size_t j = 0; j < d; ++j) X(r, j) = xs.next_double();
    std::vector<double> y(X.rows());
    constexpr double pi = 3.14159265358979323846;
    for (std::size_t r = 0; r < X.rows(); ++r)
      y[r] = 10.0 * std::sin(pi * X(r, 0) * X(r, 1)) +
             20.0 * (X(r, 2) - 0.5) * (X(r, 2) - 0.5) + 10.0 * X(r, 3) +
             5.0 * X(r, 4) + 0.5 * noise.next_normal();

    const Matrix X_train = X.slice_rows(0, n_train);
    const Matrix X_test = X.slice_rows(n_train, X.rows());
    const std::vector<double> y_train(y.begin(), y.begin() + n_train);
    const std::vector<double> y_test(y.begin() + n_train, y.end());

    LearnerConfig learner;
    std::size_t B = 0;
    if (i < 5) {
      TreeConfig tree;
      tree.min_samples_leaf = 5;
      learner = tree;
      B = 3;
    } else {
      MlpConfig mlp;
      mlp.hidden = {16, 8};
      mlp.batch_size = 32;
      mlp.max_epochs = 150;
      learner = mlp;
      B = 2;
    }
    const EnsembleModel ens =
        fit_bagging(learner, B, X_train, y_train, key.child("fit").key);
    const Matrix background = X_train.slice_rows(0, n_bg);
    const std::uint64_t est_seed = key.child("est").key;

    const StrategyPair sampled =
        sage_pair(ens, X_test, y_test, background, n_orderings, n_cal, est_seed);
    const ExactSageScores exact =
        exact_sage_pair(ens, X_test, y_test, background, n_cal, est_seed);
    std::vector<std::size_t> full(d);
    std::iota(full.begin(), full.end(), 0);
    const double v_full = sage_value(ens, full, X_test, y_test, background, n_cal,
                                     sage_value_seed(est_seed));

    SageCheckInstance inst;
    inst.index = i;
    inst.model_type = learner_type_name(learner);
    inst.v_full = v_full;
    for (std::size_t j = 0; j < d; ++j) {
      const double gap_ens = std::fabs(sampled.ensemble.scores[j] - exact.ensemble[j]);
      const double gap_sub =
          std::fabs(sampled.sub_models.scores[j] - exact.sub_models[j]);
      const double lim_ens = 3.0 * sampled.ensemble.se[j] + 1e-12;
      const double lim_sub = 3.0 * sampled.sub_models.se[j] + 1e-12;
      inst.max_gap_in_3se =
          std::max({inst.max_gap_in_3se, gap_ens / lim_ens, gap_sub / lim_sub});
    }
    double sum_sampled = 0.0;
    for (double v : sampled.ensemble.scores) sum_sampled += v;
    inst.efficiency_gap = std::fabs(sum_sampled - v_full);
    const double eff_tol = 1e-9 * std::max(1.0, std::fabs(v_full));
    inst.pass = inst.max_gap_in_3se <= 1.0 && inst.efficiency_gap <= eff_tol;
    result.all_pass = result.all_pass && inst.pass;
    if (!quiet)
      std::fprintf(stderr, "sage-check %zu (%s): gap/3se=%.3f eff=%.3g %s\n", i,
                   inst.model_type.c_str(), inst.max_gap_in_3se,
                   inst.efficiency_gap, inst.pass ? "ok" : "FAIL");
    result.instances.push_back(std::move(inst));
  }
  return result;
}

}  // namespace varimp
