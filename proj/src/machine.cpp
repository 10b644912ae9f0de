#include "cgraconv/machine.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cgraconv {

double RunReport::utilization(const std::string& region) const {
  auto it = per_region_slots.find(region);
  if (it == per_region_slots.end() || it->second == 0) return 0.0;
  auto nn = per_region_nonnop.count(region) ? per_region_nonnop.at(region) : 0;
  return static_cast<double>(nn) /
         (static_cast<double>(kNumPEs) * static_cast<double>(it->second));
}

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["total_cycles"] = total_cycles;
  j["instructions_issued"] = instructions_issued;
  j["per_pe_nonnop"] = per_pe_nonnop;
  j["per_region_slots"] = per_region_slots;
  j["per_region_nonnop"] = per_region_nonnop;
  j["loads"] = loads;
  j["stores"] = stores;
  j["port_conflict_extra_cycles"] = port_conflict_extra_cycles;
  j["halted_normally"] = halted_normally;
  return j.dump(2);
}

void RunReport::merge(const RunReport& o) {
  total_cycles += o.total_cycles;
  instructions_issued += o.instructions_issued;
  for (int i = 0; i < kNumPEs; ++i) per_pe_nonnop[i] += o.per_pe_nonnop[i];
  for (auto& [k, v] : o.per_region_slots) per_region_slots[k] += v;
  for (auto& [k, v] : o.per_region_nonnop) per_region_nonnop[k] += v;
  loads += o.loads;
  stores += o.stores;
  port_conflict_extra_cycles += o.port_conflict_extra_cycles;
  halted_normally = halted_normally && o.halted_normally;
}

std::pair<int, int> torus_neighbor(int row, int col, int dir) {
  switch (dir) {
    case 0: return {(row + kGridRows - 1) % kGridRows, col};  // N
    case 1: return {(row + 1) % kGridRows, col};              // S
    case 2: return {row, (col + 1) % kGridCols};              // E
    case 3: return {row, (col + kGridCols - 1) % kGridCols};  // W
  }
  return {row, col};
}

MachineState reset(const MachineConfig& config, const CgraProgram& program,
                   const std::vector<uint32_t>& memory_image) {
  if (config.rows != kGridRows || config.cols != kGridCols ||
      config.rf_size != kRfSize || config.prog_mem != kProgMemWords)
    throw SimError("only the 4x4 configuration is supported");
  auto violations = validate(program);
  if (!violations.empty())
    throw SimError("invalid program: " + violations.front());
  if (memory_image.size() > config.mem_words)
    throw SimError("memory image too large (" +
                   std::to_string(memory_image.size()) + " > " +
                   std::to_string(config.mem_words) + " words)");
  MachineState st;
  st.program = program;
  st.program.pad();
  st.config = config;
  st.pc = program.entry;
  st.memory.assign(config.mem_words, 0);
  std::copy(memory_image.begin(), memory_image.end(), st.memory.begin());

  st.region_of_slot.assign(st.program.length(), -1);
  for (size_t s = 0; s < st.program.length(); ++s) {
    const std::string& r = st.program.grid[0][s].region;
    if (r.empty()) continue;
    auto it = std::find(st.region_names.begin(), st.region_names.end(), r);
    if (it == st.region_names.end()) {
      st.region_names.push_back(r);
      st.region_slots.push_back(0);
      st.region_nonnop.push_back(0);
      st.region_of_slot[s] = static_cast<int>(st.region_names.size()) - 1;
    } else {
      st.region_of_slot[s] =
          static_cast<int>(it - st.region_names.begin());
    }
  }

  st.code.resize(st.program.length() * kNumPEs);
  for (size_t s = 0; s < st.program.length(); ++s)
    for (int pe = 0; pe < kNumPEs; ++pe) {
      const PEInstruction& i = st.program.grid[pe][s];
      st.code[s * kNumPEs + pe] = {static_cast<uint8_t>(i.opcode),
                                   static_cast<uint8_t>(i.dst),
                                   static_cast<uint8_t>(i.srcA),
                                   static_cast<uint8_t>(i.srcB), i.imm};
    }
  return st;
}

void MachineState::sync_region_counters() {
  for (size_t i = 0; i < region_names.size(); ++i) {
    counters.per_region_slots[region_names[i]] = region_slots[i];
    counters.per_region_nonnop[region_names[i]] = region_nonnop[i];
  }
}

namespace {

struct PendingStore {
  size_t addr;
  uint32_t value;
};


}  // namespace

namespace {
struct NeighborTable {
  uint8_t at[kNumPEs][4];
  NeighborTable() {
    for (int r = 0; r < kGridRows; ++r)
      for (int c = 0; c < kGridCols; ++c)
        for (int d = 0; d < 4; ++d) {
          auto [nr, nc] = torus_neighbor(r, c, d);
          at[r * kGridCols + c][d] = static_cast<uint8_t>(nr * kGridCols + nc);
        }
  }
};
const NeighborTable kNbr;
}  // namespace

int64_t step(MachineState& st) {
  if (st.halted) throw SimError("step on a halted machine");
  const size_t len = st.program.length();
  if (st.pc < 0 || static_cast<size_t>(st.pc) >= len)
    throw SimError("pc out of range: " + std::to_string(st.pc));

  const std::array<uint32_t, kNumPEs> prev_out = st.out;
  const TimingModel& t = st.config.timing;
  const MachineState::DecodedIns* slot_code = &st.code[st.pc * kNumPEs];

  auto value_of = [&](int pe, const MachineState::DecodedIns& ins,
                      uint8_t sel) -> uint32_t {
    switch (static_cast<OperandSel>(sel)) {
      case OperandSel::RF0:
      case OperandSel::RF1:
      case OperandSel::RF2:
      case OperandSel::RF3:
        return st.rf[pe][sel];
      case OperandSel::SELF:
        return prev_out[pe];
      case OperandSel::NBR_N:
        return prev_out[kNbr.at[pe][0]];
      case OperandSel::NBR_S:
        return prev_out[kNbr.at[pe][1]];
      case OperandSel::NBR_E:
        return prev_out[kNbr.at[pe][2]];
      case OperandSel::NBR_W:
        return prev_out[kNbr.at[pe][3]];
      case OperandSel::IMM:
        return static_cast<uint32_t>(ins.imm);
      case OperandSel::ZERO:
        return 0;
    }
    return 0;
  };

  auto where = [&](int pe) {
    return "pe(" + std::to_string(pe / kGridCols) + "," +
           std::to_string(pe % kGridCols) + ") pc=" + std::to_string(st.pc);
  };

  auto check_addr = [&](uint32_t addr, int pe) -> size_t {
    if (addr >= st.memory.size())
      throw SimError("memory address out of range (" + std::to_string(addr) +
                     ") at " + where(pe));
    return addr;
  };

  std::array<PendingStore, kNumPEs> stores;
  int n_stores = 0;
  std::array<int, kGridCols> col_mem{};
  bool taken = false;
  int taken_target = 0;
  bool exit_seen = false;
  int64_t pe_cost_max = t.alu_cycles;
  int nonnop_this_slot = 0;

  for (int pe = 0; pe < kNumPEs; ++pe) {
    const MachineState::DecodedIns& ins = slot_code[pe];
    const Opcode op = static_cast<Opcode>(ins.op);
    int col = pe % kGridCols;
    if (op != Opcode::NOP) {
      ++st.counters.per_pe_nonnop[pe];
      ++nonnop_this_slot;
    }

    uint32_t result = 0;
    bool writes = opcode_writes_dst(op);
    int64_t pe_cost = t.alu_cycles;

    switch (op) {
      case Opcode::NOP:
        break;
      case Opcode::MOV:
        result = value_of(pe, ins, ins.srcA);
        break;
      case Opcode::ADD:
        result = value_of(pe, ins, ins.srcA) + value_of(pe, ins, ins.srcB);
        break;
      case Opcode::SUB:
        result = value_of(pe, ins, ins.srcA) - value_of(pe, ins, ins.srcB);
        break;
      case Opcode::MUL:
        result = value_of(pe, ins, ins.srcA) * value_of(pe, ins, ins.srcB);
        break;
      case Opcode::LWD: {
        uint32_t addr =
            value_of(pe, ins, ins.srcA) + value_of(pe, ins, ins.srcB);
        result = st.memory[check_addr(addr, pe)];
        ++st.counters.loads;
        ++col_mem[col];
        pe_cost = t.mem_base_cycles;
        break;
      }
      case Opcode::LWI: {
        uint32_t addr = st.rf[pe][ins.srcA];
        result = st.memory[check_addr(addr, pe)];
        st.rf[pe][ins.srcA] = addr + static_cast<uint32_t>(ins.imm);
        ++st.counters.loads;
        ++col_mem[col];
        pe_cost = t.mem_base_cycles;
        break;
      }
      case Opcode::SWD: {
        uint32_t addr = value_of(pe, ins, ins.srcB);
        stores[n_stores++] = {check_addr(addr, pe), value_of(pe, ins, ins.srcA)};
        ++st.counters.stores;
        ++col_mem[col];
        pe_cost = t.mem_base_cycles;
        break;
      }
      case Opcode::SWI: {
        uint32_t addr = st.rf[pe][ins.srcB];
        stores[n_stores++] = {check_addr(addr, pe), value_of(pe, ins, ins.srcA)};
        st.rf[pe][ins.srcB] = addr + static_cast<uint32_t>(ins.imm);
        ++st.counters.stores;
        ++col_mem[col];
        pe_cost = t.mem_base_cycles;
        break;
      }
      case Opcode::BEQ:
      case Opcode::BNE:
      case Opcode::BLT: {
        uint32_t a = value_of(pe, ins, ins.srcA);
        uint32_t b = value_of(pe, ins, ins.srcB);
        bool cond = false;
        if (op == Opcode::BEQ) cond = (a == b);
        if (op == Opcode::BNE) cond = (a != b);
        if (op == Opcode::BLT)
          cond = (static_cast<int32_t>(a) < static_cast<int32_t>(b));
        pe_cost = t.branch_cycles;
        if (cond) {
          if (taken && taken_target != ins.imm)
            throw SimError("conflicting branch decisions at " + where(pe));
          taken = true;
          taken_target = ins.imm;
        }
        break;
      }
      case Opcode::JMP:
        pe_cost = t.branch_cycles;
        if (taken && taken_target != ins.imm)
          throw SimError("conflicting branch decisions at " + where(pe));
        taken = true;
        taken_target = ins.imm;
        break;
      case Opcode::EXIT:
        exit_seen = true;
        break;
    }

    if (writes) {
      if (ins.dst == 0)
        st.out[pe] = result;
      else
        st.rf[pe][ins.dst - 1] = result;
    }
    pe_cost_max = std::max(pe_cost_max, pe_cost);
  }

  for (int i = 0; i < n_stores; ++i) st.memory[stores[i].addr] = stores[i].value;

  // Slot cost: slowest PE, with per-column port serialization. k accesses
  // issued within one column in one slot cost k * mem_base on that port.
  int64_t cost = pe_cost_max;
  int64_t serialized_max = 0;
  int64_t unserialized_max = 0;
  for (int c = 0; c < kGridCols; ++c) {
    if (col_mem[c] == 0) continue;
    int64_t ser = st.config.timing.port_serialization
                      ? col_mem[c] * t.mem_base_cycles
                      : t.mem_base_cycles;
    serialized_max = std::max(serialized_max, ser);
    unserialized_max = std::max(unserialized_max, t.mem_base_cycles);
  }
  cost = std::max(cost, serialized_max);
  int64_t base = std::max(pe_cost_max, unserialized_max);
  st.counters.port_conflict_extra_cycles += std::max<int64_t>(0, cost - base);

  // Region accounting keys off PE(0,0)'s instruction at this slot; the
  // generators tag all 16 lanes of a slot identically.
  int region_id = st.region_of_slot[st.pc];
  if (region_id >= 0) {
    st.region_slots[region_id] += 1;
    st.region_nonnop[region_id] += nonnop_this_slot;
  }
  st.counters.instructions_issued += 1;
  st.counters.total_cycles += cost;

  if (exit_seen) {
    st.halted = true;
    st.counters.halted_normally = true;
  } else {
    st.pc = taken ? taken_target : st.pc + 1;
  }
  return cost;
}

std::pair<RunReport, std::vector<uint32_t>> run(
    const MachineConfig& config, const CgraProgram& program,
    const std::vector<uint32_t>& memory_image, int64_t max_cycles) {
  MachineState st = reset(config, program, memory_image);
  while (!st.halted) {
    step(st);
    if (st.counters.total_cycles > max_cycles) {
      st.sync_region_counters();
      throw WatchdogError(
          "watchdog exceeded after " + std::to_string(st.counters.total_cycles) +
              " cycles",
          st.counters);
    }
  }
  st.sync_region_counters();
  return {st.counters, std::move(st.memory)};
}

std::vector<uint32_t> load_memory_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError("cannot open memory image: " + path);
  std::vector<uint32_t> words;
  unsigned char b[4];
  while (in.read(reinterpret_cast<char*>(b), 4)) {
    words.push_back(static_cast<uint32_t>(b[0]) |
                    (static_cast<uint32_t>(b[1]) << 8) |
                    (static_cast<uint32_t>(b[2]) << 16) |
                    (static_cast<uint32_t>(b[3]) << 24));
  }
  return words;
}

void save_memory_image(const std::string& path,
                       const std::vector<uint32_t>& words) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SimError("cannot open memory image for write: " + path);
  for (uint32_t w : words) {
    unsigned char b[4] = {static_cast<unsigned char>(w & 0xff),
                          static_cast<unsigned char>((w >> 8) & 0xff),
                          static_cast<unsigned char>((w >> 16) & 0xff),
                          static_cast<unsigned char>((w >> 24) & 0xff)};
    out.write(reinterpret_cast<char*>(b), 4);
  }
}

}  // namespace cgraconv
