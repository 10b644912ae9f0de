#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "cgraconv/isa.hpp"

namespace cgraconv {

// Latency knobs. The cost of one lockstep instruction is the maximum over
// the 16 PEs and the 4 column memory ports of that slot's cost.
struct TimingModel {
  int64_t alu_cycles = 1;
  // Calibrated once against the weight-parallel peak throughput point and
  // committed here; see bench docs.
  int64_t mem_base_cycles = 6;
  bool port_serialization = true;
  int64_t branch_cycles = 1;
};

struct MachineConfig {
  int rows = kGridRows;
  int cols = kGridCols;
  int rf_size = kRfSize;
  int prog_mem = kProgMemWords;
  // 131072 words * 4 bytes = 512 KiB.
  size_t mem_words = 131072;
  TimingModel timing;
};

struct RunReport {
  int64_t total_cycles = 0;
  int64_t instructions_issued = 0;  // lockstep slots
  std::array<int64_t, kNumPEs> per_pe_nonnop{};
  std::map<std::string, int64_t> per_region_slots;
  std::map<std::string, int64_t> per_region_nonnop;
  int64_t loads = 0;
  int64_t stores = 0;
  int64_t port_conflict_extra_cycles = 0;
  bool halted_normally = false;

  // per_region_nonnop / (16 * per_region_slots), in [0, 1].
  double utilization(const std::string& region) const;
  std::string to_json() const;
  void merge(const RunReport& other);
};

struct MachineState {
  std::array<uint32_t, kNumPEs> out{};
  std::array<std::array<uint32_t, kRfSize>, kNumPEs> rf{};
  int pc = 0;
  bool halted = false;
  std::vector<uint32_t> memory;

  CgraProgram program;
  MachineConfig config;
  RunReport counters;

  // Interned per-slot region ids; region totals accumulate here and fold
  // into counters' maps via sync_region_counters().
  std::vector<int> region_of_slot;
  std::vector<std::string> region_names;
  std::vector<int64_t> region_slots;
  std::vector<int64_t> region_nonnop;
  void sync_region_counters();

  // Slot-major decoded copy of the program, dense for the stepping loop.
  struct DecodedIns {
    uint8_t op, dst, srcA, srcB;
    int32_t imm;
  };
  std::vector<DecodedIns> code;  // [pc * kNumPEs + pe]
};

class SimError : public std::exception {
 public:
  explicit SimError(std::string msg) : msg_(std::move(msg)) {}
  const char* what() const noexcept override { return msg_.c_str(); }

 private:
  std::string msg_;
};

// Watchdog expiry; carries the partial report accumulated so far.
class WatchdogError : public SimError {
 public:
  WatchdogError(std::string msg, RunReport partial)
      : SimError(std::move(msg)), partial_(std::move(partial)) {}
  const RunReport& partial() const { return partial_; }

 private:
  RunReport partial_;
};

// Torus wraparound neighbor on the 4x4 grid. dir: 0=N 1=S 2=E 3=W.
std::pair<int, int> torus_neighbor(int row, int col, int dir);

// PC = program entry, registers zeroed, memory image loaded (zero-extended
// to mem_words). Throws SimError on an invalid program or oversized image.
MachineState reset(const MachineConfig& config, const CgraProgram& program,
                   const std::vector<uint32_t>& memory_image);

// Executes one lockstep slot on all 16 PEs; returns its cycle cost and
// updates state.counters. Faults (out-of-range access, conflicting branch
// decisions) throw SimError with PE coordinates and PC.
int64_t step(MachineState& state);

// Steps until EXIT or the watchdog trips. Deterministic: identical inputs
// give identical reports bit-for-bit.
std::pair<RunReport, std::vector<uint32_t>> run(
    const MachineConfig& config, const CgraProgram& program,
    const std::vector<uint32_t>& memory_image, int64_t max_cycles);

// Flat little-endian 32-bit word image files.
std::vector<uint32_t> load_memory_image(const std::string& path);
void save_memory_image(const std::string& path,
                       const std::vector<uint32_t>& words);

}  // namespace cgraconv
