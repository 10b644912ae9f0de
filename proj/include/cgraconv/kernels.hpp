#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cgraconv/isa.hpp"
#include "cgraconv/machine.hpp"
#include "cgraconv/tensor.hpp"

namespace cgraconv {

// Host-side cost knobs: documented defaults, not measured platform values.
struct HostModel {
  int64_t im2col_cycles_per_word = 2;
  int64_t launch_overhead_cycles = 100;
};

struct MemRegion {
  std::string name;
  uint32_t offset = 0;  // word address
  uint32_t words = 0;
};

struct HostTask {
  enum Kind { IM2COL_BUILD, LAUNCH } kind;
  int64_t words_moved = 0;
  bool overlap_eligible = false;
};

struct TripCounts {
  int64_t main_iters = 0;
  int64_t border_iters = 0;
  int main_len = 0;
  int border_len = 0;
};

// One launch of the generated program: parameter words the host writes
// before the run, plus the patch build (if any) that precedes it.
struct LaunchSpec {
  std::vector<std::pair<uint32_t, uint32_t>> param_writes;
  // Patch build into [buffer_offset]: gathered from the input at output
  // position (x, y), or absent for direct strategies / reused patches.
  bool build = false;
  int build_x = 0;
  int build_y = 0;
  uint32_t build_buffer = 0;
};

struct KernelPlan {
  Strategy strategy = Strategy::WP;
  ConvParams params;
  CgraProgram program;
  std::vector<MemRegion> mem_map;
  std::vector<HostTask> host_tasks;
  TripCounts predicted;

  // Driver schedule (one entry per LAUNCH task, in order).
  std::vector<LaunchSpec> launches;
  uint32_t required_words = 0;

  const MemRegion& region(const std::string& name) const;
  std::string to_json() const;
};

// Closed-form trip counts for the steady-state regions. The /16 division
// applies ceiling on the parallel dimension; see the generators.
TripCounts predicted_trip_counts(Strategy s, const ConvParams& p);

KernelPlan gen_conv_wp(const ConvParams& p);
KernelPlan gen_im2col_ip(const ConvParams& p);
KernelPlan gen_conv_op(const ConvParams& p);
KernelPlan gen_im2col_op(const ConvParams& p);
KernelPlan generate(Strategy s, const ConvParams& p);

struct ExecResult {
  RunReport report;             // merged over all launches
  Tensor output;                // CHW [K, Ox, Oy]
  int64_t total_latency = 0;    // CGRA cycles + host model
  int64_t launches = 0;
  int64_t host_build_cycles = 0;
};

// Runs a plan end to end: loads input/weights into the plan's memory map,
// performs the host tasks (patch builds, parameter writes, launches) and
// merges the per-launch reports. Inputs are CHW regardless of strategy;
// conversion to the strategy's layout happens here.
ExecResult execute_plan(const KernelPlan& plan, const MachineConfig& config,
                        const Tensor& input_chw, const Tensor& weights,
                        const HostModel& host);

// Combines CGRA cycles with host im2col/launch costs. Overlap-eligible
// builds hide under concurrent CGRA execution of the previous launch; the
// first build and any non-hidden remainder add, as does the per-launch
// overhead. Plans with no host tasks cost exactly report.total_cycles.
int64_t total_latency(const KernelPlan& plan, const RunReport& report,
                      const HostModel& host);

}  // namespace cgraconv
