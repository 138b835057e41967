#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "varimp/core.hpp"
#include "varimp/rng.hpp"

namespace varimp {

constexpr std::size_t kBenchmarkDims = 20;

enum class Dgp { friedman1, gfunction, ishigami };

inline std::string to_string(Dgp d) {
  switch (d) {
    case Dgp::friedman1: return "friedman1";
    case Dgp::gfunction: return "gfunction";
    case Dgp::ishigami: return "ishigami";
  }
  return "?";
}

inline Dgp dgp_from_name(const std::string& name) {
  if (name == "friedman1") return Dgp::friedman1;
  if (name == "gfunction") return Dgp::gfunction;
  if (name == "ishigami") return Dgp::ishigami;
  throw config_error("unknown dgp: " + name);
}

/// Input domain and default input correlation of a generator.
struct DgpInfo {
  double lo = 0.0;
  double hi = 1.0;
  double default_rho = 0.0;
  std::size_t support_count = 0;
};

inline DgpInfo dgp_info(Dgp d) {
  constexpr double pi = 3.14159265358979323846;
  switch (d) {
    case Dgp::friedman1: return {0.0, 1.0, 0.0, 5};
    case Dgp::gfunction: return {0.0, 1.0, 0.3, 5};
    case Dgp::ishigami: return {-pi, pi, 0.3, 3};
  }
  return {};
}

inline std::vector<std::uint8_t> dgp_support(Dgp d, std::size_t dims = kBenchmarkDims) {
  std::vector<std::uint8_t> s(dims, 0);
  const std::size_t k = dgp_info(d).support_count;
  for (std::size_t j = 0; j < k && j < dims; ++j) s[j] = 1;
  return s;
}

/// Noiseless response f*(x). Padding columns are inert by construction.
inline double eval_dgp(Dgp d, const double* x, std::size_t dims) {
  constexpr double pi = 3.14159265358979323846;
  switch (d) {
    case Dgp::friedman1: {
      if (dims < 5) throw shape_error("friedman1 needs at least 5 columns");
      const double a = x[2] - 0.5;
      return 10.0 * std::sin(pi * x[0] * x[1]) + 20.0 * a * a + 10.0 * x[3] + 5.0 * x[4];
    }
    case Dgp::gfunction: {
      // a_j = j for the five support columns (1-based); spurious columns do
      // not enter the product so the support mask is exact.
      if (dims < 5) throw shape_error("gfunction needs at least 5 columns");
      double prod = 1.0;
      for (std::size_t j = 0; j < 5; ++j) {
        const double a = static_cast<double>(j + 1);
        prod *= (std::fabs(4.0 * x[j] - 2.0) + a) / (1.0 + a);
      }
      return prod;
    }
    case Dgp::ishigami: {
      if (dims < 3) throw shape_error("ishigami needs at least 3 columns");
      const double s1 = std::sin(x[1]);
      return std::sin(x[0]) + 7.0 * s1 * s1 + 0.1 * x[2] * x[2] * x[2] * x[2] * std::sin(x[0]);
    }
  }
  throw config_error("eval_dgp: bad dgp");
}

inline double eval_dgp(Dgp d, const std::vector<double>& x) {
  return eval_dgp(d, x.data(), x.size());
}

inline double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z * 0.7071067811865475244);
}

/// Rows i.i.d.; each column uniform on [lo, hi]; equicorrelated Gaussian
/// copula with latent pairwise correlation rho.
inline Matrix correlated_uniforms(std::size_t n, std::size_t d, double rho, double lo, double hi,
                                  std::uint64_t seed) {
  if (rho < 0.0 || rho >= 1.0) throw config_error("correlated_uniforms: rho must be in [0, 1)");
  Matrix out(n, d);
  RngStream rng(RngKey(seed).child("copula").child(n).child(d));
  const double sr = std::sqrt(rho);
  const double sq = std::sqrt(1.0 - rho);
  for (std::size_t i = 0; i < n; ++i) {
    const double shared = (rho > 0.0) ? rng.next_normal() : 0.0;
    double* row = out.row_ptr(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double z = sr * shared + sq * rng.next_normal();
      row[j] = lo + (hi - lo) * std_normal_cdf(z);
    }
  }
  return out;
}

struct SnrSpec {
  double target_snr = 1.0;
  double signal_variance = 0.0;
  double noise_sigma() const {
    if (std::isinf(target_snr)) return 0.0;
    return std::sqrt(signal_variance / target_snr);
  }
};

/// Monte-Carlo estimate of Var(f*) over fresh inputs; sigma follows from
/// the target signal-to-noise ratio.
inline SnrSpec calibrate_noise(Dgp dgp, double rho, double snr, std::size_t n_mc,
                               std::uint64_t seed) {
  if (!(snr > 0.0)) throw config_error("calibrate_noise: snr must be positive");
  const DgpInfo info = dgp_info(dgp);
  Matrix x = correlated_uniforms(n_mc, kBenchmarkDims, rho, info.lo, info.hi, seed);
  std::vector<double> f(n_mc);
  for (std::size_t i = 0; i < n_mc; ++i) f[i] = eval_dgp(dgp, x.row_ptr(i), kBenchmarkDims);
  const double var = sample_variance(f);
  if (!(var > 0.0)) throw calibration_error("calibrate_noise: degenerate signal variance");
  return SnrSpec{snr, var};
}

namespace detail {
// Calibration is deterministic per (dgp, rho): fixed dedicated seed and
// n_mc = 1e6, cached for the lifetime of the process.
inline double cached_signal_variance(Dgp dgp, double rho) {
  static std::mutex mu;
  static std::map<std::pair<int, double>, double> cache;
  const auto key = std::make_pair(static_cast<int>(dgp), rho);
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const std::uint64_t seed = hash_str(0x5eed0c0de, to_string(dgp)) ^ 0xca11b7a7e0ULL;
  const SnrSpec spec = calibrate_noise(dgp, rho, 1.0, 1000000, seed);
  cache.emplace(key, spec.signal_variance);
  return spec.signal_variance;
}
}  // namespace detail

struct DatasetMeta {
  std::string dgp_name;
  double rho = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t d = 0;
  std::size_t n = 0;
};

struct Dataset {
  Matrix X;
  std::vector<double> y;
  std::vector<std::uint8_t> support;
  DatasetMeta meta;
};

constexpr double kNoiseless = std::numeric_limits<double>::infinity();

inline Dataset generate(Dgp dgp, std::size_t n, double rho, double snr, std::uint64_t seed) {
  if (n < 1) throw config_error("generate: n must be at least 1");
  const DgpInfo info = dgp_info(dgp);
  RngKey root = RngKey(seed).child(to_string(dgp)).child(n);

  Dataset ds;
  ds.X = correlated_uniforms(n, kBenchmarkDims, rho, info.lo, info.hi, root.child("x").key);
  ds.y.resize(n);

  double sigma = 0.0;
  if (!std::isinf(snr)) {
    SnrSpec spec{snr, detail::cached_signal_variance(dgp, rho)};
    sigma = spec.noise_sigma();
  }
  RngStream noise(root.child("noise"));
  for (std::size_t i = 0; i < n; ++i) {
    ds.y[i] = eval_dgp(dgp, ds.X.row_ptr(i), kBenchmarkDims);
    if (sigma > 0.0) ds.y[i] += noise.next_normal(0.0, sigma);
  }

  ds.support = dgp_support(dgp);
  ds.meta = DatasetMeta{to_string(dgp), rho, sigma, seed, kBenchmarkDims, n};
  return ds;
}

inline Dataset generate(Dgp dgp, std::size_t n, std::uint64_t seed) {
  return generate(dgp, n, dgp_info(dgp).default_rho, 1.0, seed);
}

struct DataSplit {
  Matrix X_train;
  std::vector<double> y_train;
  Matrix X_test;
  std::vector<double> y_test;
};

/// First 2/3 of rows train, remaining 1/3 test. Rows are i.i.d. by
/// construction so no shuffling is involved.
inline DataSplit train_test_split(const Dataset& ds) {
  const std::size_t n = ds.X.rows();
  const std::size_t n_train = (2 * n) / 3;
  DataSplit s;
  s.X_train = ds.X.slice_rows(0, n_train);
  s.y_train.assign(ds.y.begin(), ds.y.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.X_test = ds.X.slice_rows(n_train, n);
  s.y_test.assign(ds.y.begin() + static_cast<std::ptrdiff_t>(n_train), ds.y.end());
  return s;
}

inline void write_dataset_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  for (std::size_t j = 0; j < ds.X.cols(); ++j) out << "x" << j << ",";
  out << "y\n";
  char buf[32];
  for (std::size_t i = 0; i < ds.X.rows(); ++i) {
    for (std::size_t j = 0; j < ds.X.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", ds.X(i, j));
      out << buf << ",";
    }
    std::snprintf(buf, sizeof(buf), "%.17g", ds.y[i]);
    out << buf << "\n";
  }
}

inline void write_dataset_meta_json(const Dataset& ds, const std::string& path) {
  nlohmann::json j;
  j["dgp"] = ds.meta.dgp_name;
  j["n"] = ds.meta.n;
  j["d"] = ds.meta.d;
  j["rho"] = ds.meta.rho;
  j["noise_sigma"] = ds.meta.noise_sigma;
  j["seed"] = ds.meta.seed;
  j["support"] = std::vector<int>(ds.support.begin(), ds.support.end());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << "\n";
}

}  // namespace varimp
