#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgraconv/kernels.hpp"
#include "cgraconv/tensor.hpp"

namespace cgraconv {

struct Metrics {
  int64_t mac_count = 0;
  int64_t cycles = 0;  // total latency incl. host model
  double mac_per_cycle = 0.0;
  double utilization_main = 0.0;    // WP "main" region / parallel "inner" loop
  double utilization_border = 0.0;  // WP only; 0 elsewhere
  std::map<std::string, double> utilization;
  int64_t footprint_bytes = 0;
  int64_t loads = 0;
  int64_t stores = 0;
  int64_t conflict_cycles = 0;
};

Metrics compute_metrics(const KernelPlan& plan, const RunReport& report,
                        const ConvParams& p, const HostModel& host);

struct SweepSpec {
  std::vector<int> O_values;  // Ox = Oy tied
  std::vector<int> C_values;
  std::vector<int> K_values;
  std::vector<Strategy> strategies = {Strategy::WP, Strategy::IM2COL_IP,
                                      Strategy::CONV_OP, Strategy::IM2COL_OP};
  int64_t mem_cap_bytes = 512 * 1024;
  bool one_at_a_time = true;  // vary each axis from the baseline
  ConvParams baseline;        // C=K=Ox=Oy=16, 3x3
  TimingModel timing;
  HostModel host;
  int threads = 0;  // 0 = hardware default / CGRA_CONVBENCH_THREADS
  uint32_t seed = 1;

  // Default sweep protocol: unit steps up to 32, then steps of 16.
  static std::vector<int> default_steps(int lo, int hi);
  static SweepSpec defaults();
};

struct SweepRow {
  ConvParams params;
  Strategy strategy = Strategy::WP;
  bool skipped = false;
  std::string skip_reason;
  Metrics metrics;
  bool pareto = false;
};

// Deterministic row order (lexicographic by params, then strategy); points
// whose footprint exceeds the cap are recorded as skipped, not dropped.
std::vector<SweepRow> sweep(const SweepSpec& spec);

// Flags every row not dominated on (footprint ascending, mac/cycle
// descending); a row is dominated iff some other row has footprint <= and
// mac/cycle >= with at least one strict.
void pareto_front(std::vector<SweepRow>& rows);

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_json(const std::vector<SweepRow>& rows);

// Seeded test tensors with values in [-128, 127] so 32-bit accumulation
// stays far from wrap at benchmark scales.
Tensor random_input(const ConvParams& p, uint32_t seed);
Tensor random_weights(const ConvParams& p, uint32_t seed);

int sweep_thread_cap();

}  // namespace cgraconv
