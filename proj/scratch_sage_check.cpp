#include <chrono>
#include <cstdio>

#include "varimp/bench.hpp"

int main(int argc, char** argv) {
  const std::size_t orderings = argc > 1 ? std::stoul(argv[1]) : 64;
  const std::uint64_t seed = argc > 2 ? std::stoull(argv[2]) : 2026;
  const auto t0 = std::chrono::steady_clock::now();
  varimp::SageCheckResult res = varimp::sage_check(seed, orderings, false);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("orderings=%zu seed=%llu all_pass=%d time=%.1fs\n", orderings,
              (unsigned long long)seed, (int)res.all_pass, secs);
  for (const auto& inst : res.instances)
    std::printf("  [%zu] %s gap/3se=%.3f eff=%.3g vfull=%.4f\n", inst.index,
                inst.model_type.c_str(), inst.max_gap_in_3se, inst.efficiency_gap,
                inst.v_full);
  return res.all_pass ? 0 : 1;
}
