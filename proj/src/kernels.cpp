#include "cgraconv/kernels.hpp"

#include <algorithm>

#include "json.hpp"

namespace cgraconv {

namespace {

PEInstruction ins(Opcode op, Dest dst, OperandSel a, OperandSel b,
                  int32_t imm = 0) {
  PEInstruction i;
  i.opcode = op;
  i.dst = dst;
  i.srcA = a;
  i.srcB = b;
  i.imm = imm;
  return i;
}

PEInstruction mov_imm(Dest dst, int32_t v) {
  return ins(Opcode::MOV, dst, OperandSel::IMM, OperandSel::ZERO, v);
}

// Slot-oriented program assembler. Every slot carries one region label that
// is applied to all 16 lanes (including the padding NOPs), which is what the
// machine's region accounting expects.
class SlotBuilder {
 public:
  int slot(const std::string& region) {
    slots_.push_back(Slot{region, {}});
    return static_cast<int>(slots_.size()) - 1;
  }
  void put(int slot, int r, int c, PEInstruction i) {
    auto& cell = slots_[slot].lane[r * kGridCols + c];
    if (cell.has_value())
      throw SimError("slot builder: lane assigned twice in slot " +
                     std::to_string(slot));
    cell = std::move(i);
  }
  // Branch whose target is a label resolved at finish() time.
  void put_branch(int slot, int r, int c, Opcode op, OperandSel a,
                  OperandSel b, const std::string& label) {
    put(slot, r, c, ins(op, Dest::OUT, a, b, 0));
    fixups_.push_back({slot, r * kGridCols + c, label});
  }
  void label(const std::string& name) {
    labels_[name] = static_cast<int>(slots_.size());
  }
  CgraProgram finish() {
    if (slots_.size() > kProgMemWords)
      throw SimError("generated program exceeds the 32-word program memory (" +
                     std::to_string(slots_.size()) + " slots)");
    for (const auto& f : fixups_) {
      auto it = labels_.find(f.label);
      if (it == labels_.end()) throw SimError("unresolved label " + f.label);
      slots_[f.slot].lane[f.pe]->imm = it->second;
    }
    CgraProgram prog;
    for (size_t s = 0; s < slots_.size(); ++s) {
      for (int pe = 0; pe < kNumPEs; ++pe) {
        PEInstruction i =
            slots_[s].lane[pe].has_value() ? *slots_[s].lane[pe] : PEInstruction{};
        i.region = slots_[s].region;
        prog.grid[pe].push_back(std::move(i));
      }
    }
    return prog;
  }

 private:
  struct Slot {
    std::string region;
    std::array<std::optional<PEInstruction>, kNumPEs> lane;
  };
  struct Fixup {
    int slot;
    int pe;
    std::string label;
  };
  std::vector<Slot> slots_;
  std::vector<Fixup> fixups_;
  std::map<std::string, int> labels_;
};

constexpr const char* kSetup = "setup";
constexpr const char* kWeights = "weights";
constexpr const char* kOuter = "outer";
constexpr const char* kBorder = "border";
constexpr const char* kMain = "main";
constexpr const char* kInner = "inner";
constexpr const char* kUpdate = "update";
constexpr const char* kReduce = "reduce";

int ceil_div16(int v) { return (v + 15) / 16; }

using S = OperandSel;
using D = Dest;

}  // namespace

const MemRegion& KernelPlan::region(const std::string& name) const {
  for (const auto& r : mem_map)
    if (r.name == name) return r;
  throw SimError("no such memory region: " + name);
}

std::string KernelPlan::to_json() const {
  nlohmann::json j;
  j["strategy"] = strategy_name(strategy);
  j["params"] = {{"C", params.C}, {"K", params.K}, {"Ox", params.Ox},
                 {"Oy", params.Oy}, {"Fx", params.Fx}, {"Fy", params.Fy}};
  for (const auto& r : mem_map)
    j["mem_map"].push_back({{"name", r.name}, {"offset", r.offset},
                            {"words", r.words}});
  nlohmann::json tasks = nlohmann::json::array();
  for (const auto& t : host_tasks)
    tasks.push_back({{"kind", t.kind == HostTask::IM2COL_BUILD ? "im2col_build"
                                                               : "launch"},
                     {"words_moved", t.words_moved},
                     {"overlap_eligible", t.overlap_eligible}});
  j["host_tasks_total"] = host_tasks.size();
  j["host_tasks"] = std::move(tasks);
  j["predicted"] = {{"main_iters", predicted.main_iters},
                    {"border_iters", predicted.border_iters},
                    {"main_len", predicted.main_len},
                    {"border_len", predicted.border_len}};
  return j.dump(2);
}

TripCounts predicted_trip_counts(Strategy s, const ConvParams& p) {
  TripCounts t;
  if (s == Strategy::WP) {
    t.main_iters = static_cast<int64_t>(p.Ox) * p.Oy * p.C * p.K;
    t.border_iters = static_cast<int64_t>(p.Oy) * p.C * p.K;
    t.main_len = 4;
    t.border_len = 5;
    return t;
  }
  // Parallel dimension split over the 16 PEs with ceiling division; surplus
  // lanes run zero-padded work and still occupy slots.
  int64_t ff = static_cast<int64_t>(p.Fx) * p.Fy;
  if (s == Strategy::IM2COL_IP)
    t.main_iters = ff * p.Ox * p.Oy * p.K * ceil_div16(p.C);
  else
    t.main_iters = ff * p.Ox * p.Oy * p.C * ceil_div16(p.K);
  t.border_iters = 0;
  t.main_len = 9;
  t.border_len = 0;
  return t;
}

// ---------------------------------------------------------------------------
// Weight-parallel direct convolution.
//
// Nine weights sit pinned on the 3x3 multiplier sub-grid. The final row
// loads one fresh input triplet per output pixel while the two reused rows
// shift through the grid; the last column runs a software-pipelined
// reduction (two iterations deep) and the last PE accumulates into the
// output in place. Outputs per k are stored behind two per-k guard words
// that absorb the pipeline's warm-up stores.
// ---------------------------------------------------------------------------
KernelPlan gen_conv_wp(const ConvParams& p) {
  if (p.Fx != 3 || p.Fy != 3) throw SimError("WP requires 3x3");

  const int Ix = p.Ix(), Iy = p.Iy();
  const int64_t ixiy = static_cast<int64_t>(Ix) * Iy;
  const int64_t N = static_cast<int64_t>(p.Ox) * p.Oy;

  KernelPlan plan;
  plan.strategy = Strategy::WP;
  plan.params = p;
  plan.predicted = predicted_trip_counts(Strategy::WP, p);

  // Output walk layout per output channel: one word per store of the
  // software-pipelined reduction. Each sweep contributes Ox real cells plus
  // one pad that absorbs the pipeline's sweep-crossing garbage step; two
  // more pads take the warm-up stores at the head of every pass.
  const int64_t W = N + p.Oy + 2;
  const uint32_t IN = 0;
  const uint32_t WT = IN + static_cast<uint32_t>(p.C * ixiy);
  const uint32_t OUT = WT + static_cast<uint32_t>(p.K) * p.C * 9;
  const uint32_t out_words = static_cast<uint32_t>(p.K * W);
  plan.mem_map = {{"inputs", IN, static_cast<uint32_t>(p.C * ixiy)},
                  {"weights", WT, static_cast<uint32_t>(p.K) * p.C * 9},
                  {"outputs", OUT, out_words}};
  plan.required_words = OUT + out_words;

  // Pointer fix constants (all generation-time).
  const int32_t dL_border = static_cast<int32_t>(1 - (p.Ox + 2) * Iy);
  const int32_t dL_chead = static_cast<int32_t>(ixiy - p.Oy);
  const int32_t dL_kpath = static_cast<int32_t>(-p.C * ixiy);
  const int32_t dStore_chead = static_cast<int32_t>(-W);
  const int32_t dPrev_chead = static_cast<int32_t>(-(W - 1));
  const int32_t dStore_kpath = static_cast<int32_t>(W);
  const int32_t dPrev_kpath = static_cast<int32_t>(W);

  SlotBuilder b;

  // slot 0/1: absolute pointer and counter initialisation
  int s0 = b.slot(kSetup);
  for (int c = 0; c < 3; ++c) {
    int32_t init = static_cast<int32_t>(IN) + c - 1 + (p.Ox + 2) * Iy - dL_chead;
    b.put(s0, 3, c, mov_imm(D::RF0, init));
  }
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(s0, r, c, mov_imm(D::RF2, static_cast<int32_t>(WT) + (2 - r) * 3 + c));
  b.put(s0, 3, 3, mov_imm(D::RF0, static_cast<int32_t>(OUT + W)));
  b.put(s0, 1, 3, mov_imm(D::RF2, p.K));
  int s1 = b.slot(kSetup);
  b.put(s1, 3, 3, mov_imm(D::RF2, static_cast<int32_t>(OUT + W)));
  b.put(s1, 1, 3, mov_imm(D::RF3, p.C));

  // Per-(channel, output-channel) pass head: refresh the nine stationary
  // weights and rewind the walking pointers.
  b.label("CK_HEAD");
  int h0 = b.slot(kWeights);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(h0, r, c, ins(Opcode::LWD, D::RF3, S::RF2, S::ZERO));
  for (int c = 0; c < 3; ++c)
    b.put(h0, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, dL_chead));
  int h1 = b.slot(kWeights);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(h1, r, c, ins(Opcode::ADD, D::RF2, S::RF2, S::IMM, 9));
  b.put(h1, 3, 3, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, dStore_chead));
  int h2 = b.slot(kWeights);
  b.put(h2, 3, 3, ins(Opcode::ADD, D::RF2, S::RF2, S::IMM, dPrev_chead));
  b.put(h2, 2, 2, mov_imm(D::RF1, p.Oy));

  b.label("YHEAD");
  int yh = b.slot(kOuter);
  b.put_branch(yh, 2, 2, Opcode::BEQ, S::RF1, S::ZERO, "CK_EPI");

  // Border: refresh the 2x3 reused window rows for the next sweep while the
  // last column runs the reduction step for the sweep's final pixel (its
  // multiplier outputs would otherwise be clobbered by the shift exposes).
  int b1 = b.slot(kBorder);
  for (int c = 0; c < 3; ++c)
    b.put(b1, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, dL_border));
  b.put(b1, 2, 2, ins(Opcode::SUB, D::RF1, S::RF1, S::IMM, 1));
  b.put(b1, 0, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(b1, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(b1, 2, 3, ins(Opcode::ADD, D::RF1, S::NBR_E, S::NBR_W));
  int b2 = b.slot(kBorder);
  for (int c = 0; c < 3; ++c)
    b.put(b2, 3, c, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO));
  b.put(b2, 0, 3, mov_imm(D::RF2, p.Ox));
  b.put(b2, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::SELF));
  b.put(b2, 3, 3, ins(Opcode::LWI, D::OUT, S::RF2, S::ZERO, 1));
  int b3 = b.slot(kBorder);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(b3, r, c, ins(Opcode::MOV, D::RF0, S::NBR_N, S::ZERO));
  for (int c = 0; c < 3; ++c)
    b.put(b3, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, Iy));
  b.put(b3, 2, 3, ins(Opcode::ADD, D::RF1, S::RF1, S::NBR_S));
  b.put(b3, 3, 3, ins(Opcode::SWI, D::OUT, S::NBR_N, S::RF0, 1));
  int b4 = b.slot(kBorder);
  for (int c = 0; c < 3; ++c) {
    b.put(b4, 3, c, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO));
    b.put(b4, 0, c, ins(Opcode::MOV, D::OUT, S::RF0, S::ZERO));
  }
  b.put(b4, 2, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::RF1));
  int b5 = b.slot(kBorder);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(b5, r, c, ins(Opcode::MOV, D::RF0, S::NBR_N, S::ZERO));
  for (int c = 0; c < 3; ++c)
    b.put(b5, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, Iy));

  // Steady state: 4 lockstep slots per output pixel.
  b.label("MAIN");
  int m1 = b.slot(kMain);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(m1, r, c, ins(Opcode::MOV, D::OUT, S::RF0, S::ZERO));
  for (int c = 0; c < 3; ++c)
    b.put(m1, 3, c, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO));
  b.put(m1, 0, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(m1, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(m1, 2, 3, ins(Opcode::ADD, D::RF1, S::NBR_E, S::NBR_W));
  b.put(m1, 3, 3, ins(Opcode::SWI, D::OUT, S::NBR_N, S::RF0, 1));
  int m2 = b.slot(kMain);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(m2, r, c, ins(Opcode::MOV, D::RF0, S::NBR_N, S::ZERO));
  for (int c = 0; c < 3; ++c)
    b.put(m2, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, Iy));
  b.put(m2, 0, 3, ins(Opcode::SUB, D::RF2, S::RF2, S::IMM, 1));
  b.put(m2, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::SELF));
  b.put(m2, 3, 3, ins(Opcode::LWI, D::OUT, S::RF2, S::ZERO, 1));
  int m3 = b.slot(kMain);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      b.put(m3, r, c, ins(Opcode::MUL, D::OUT, S::RF0, S::RF3));
  b.put(m3, 0, 3, ins(Opcode::MOV, D::OUT, S::RF2, S::ZERO));
  b.put(m3, 2, 3, ins(Opcode::ADD, D::RF1, S::RF1, S::NBR_S));
  int m4 = b.slot(kMain);
  for (int r = 0; r < 3; ++r)
    b.put(m4, r, 0, ins(Opcode::ADD, D::OUT, S::SELF, S::NBR_E));
  b.put(m4, 0, 3, ins(Opcode::MOV, D::RF1, S::NBR_W, S::ZERO));
  b.put(m4, 1, 3, ins(Opcode::MOV, D::RF1, S::NBR_W, S::ZERO));
  b.put(m4, 2, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::RF1));
  b.put_branch(m4, 3, 3, Opcode::BNE, S::NBR_S, S::ZERO, "MAIN");

  int jm = b.slot(kOuter);
  b.put_branch(jm, 3, 3, Opcode::JMP, S::ZERO, S::ZERO, "YHEAD");

  // Pass tail: finish the two in-flight outputs, then advance (c, k).
  b.label("CK_EPI");
  int t1 = b.slot(kOuter);
  b.put(t1, 3, 3, ins(Opcode::SWI, D::OUT, S::NBR_N, S::RF0, 1));
  b.put(t1, 0, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(t1, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_E, S::RF1));
  b.put(t1, 2, 3, ins(Opcode::ADD, D::RF1, S::NBR_E, S::NBR_W));
  int t2 = b.slot(kOuter);
  b.put(t2, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::SELF));
  b.put(t2, 3, 3, ins(Opcode::LWI, D::OUT, S::RF2, S::ZERO, 1));
  int t3 = b.slot(kOuter);
  b.put(t3, 2, 3, ins(Opcode::ADD, D::RF1, S::RF1, S::NBR_S));
  int t4 = b.slot(kOuter);
  b.put(t4, 2, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::RF1));
  int t5 = b.slot(kOuter);
  b.put(t5, 3, 3, ins(Opcode::SWI, D::OUT, S::NBR_N, S::RF0, 1));
  b.put(t5, 1, 3, ins(Opcode::SUB, D::RF3, S::RF3, S::IMM, 1));
  int t6 = b.slot(kOuter);
  b.put_branch(t6, 1, 3, Opcode::BNE, S::RF3, S::ZERO, "CK_HEAD");
  int t7 = b.slot(kOuter);
  b.put(t7, 1, 3, ins(Opcode::SUB, D::RF2, S::RF2, S::IMM, 1));
  b.put(t7, 3, 3, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, dStore_kpath));
  for (int c = 0; c < 3; ++c)
    b.put(t7, 3, c, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, dL_kpath));
  int t8 = b.slot(kOuter);
  b.put(t8, 1, 3, mov_imm(D::RF3, p.C));
  b.put(t8, 3, 3, ins(Opcode::ADD, D::RF2, S::RF2, S::IMM, dPrev_kpath));
  int t9 = b.slot(kOuter);
  b.put_branch(t9, 1, 3, Opcode::BNE, S::RF2, S::ZERO, "CK_HEAD");
  int tX = b.slot(kOuter);
  b.put(tX, 3, 3, ins(Opcode::EXIT, D::OUT, S::ZERO, S::ZERO));

  plan.program = b.finish();
  // Single kernel invocation; instruction pre-load time is neglected,
  // matching the latency definition.
  plan.launches.push_back(LaunchSpec{});
  plan.required_words = OUT + out_words;
  return plan;
}

// ---------------------------------------------------------------------------
// Shared pieces for the 16-lane parallel kernels.
// ---------------------------------------------------------------------------
namespace {

// Parameter block: three words the host rewrites before every launch.
struct ParamAddrs {
  uint32_t in, wt, out;
};

void put_all(SlotBuilder& b, int slot, PEInstruction i,
             const std::vector<int>& skip = {}) {
  for (int pe = 0; pe < kNumPEs; ++pe) {
    if (std::find(skip.begin(), skip.end(), pe) != skip.end()) continue;
    b.put(slot, pe / kGridCols, pe % kGridCols, i);
  }
}

}  // namespace

// Input-channel parallelism over the im2col patch. Each PE covers the
// padded-channel lanes congruent to its index mod 16; lane 15 doubles as
// the loop controller with its accumulator parked on lane 14.
KernelPlan gen_im2col_ip(const ConvParams& p) {
  const int Cp = 16 * ceil_div16(p.C);
  const int ff = p.Fx * p.Fy;
  const int64_t N = static_cast<int64_t>(p.Ox) * p.Oy;
  const int patch_words = ff * Cp;
  const int n_inner = ff * Cp / 16;

  KernelPlan plan;
  plan.strategy = Strategy::IM2COL_IP;
  plan.params = p;
  plan.predicted = predicted_trip_counts(Strategy::IM2COL_IP, p);

  const uint32_t PATCH_A = 0;
  const uint32_t PATCH_B = PATCH_A + patch_words;
  const uint32_t WT = PATCH_B + patch_words;
  const uint32_t OUT = WT + static_cast<uint32_t>(p.K) * patch_words;
  const uint32_t PRM = OUT + static_cast<uint32_t>(p.K * N);
  plan.mem_map = {
      {"patch_a", PATCH_A, static_cast<uint32_t>(patch_words)},
      {"patch_b", PATCH_B, static_cast<uint32_t>(patch_words)},
      {"weights", WT, static_cast<uint32_t>(p.K) * patch_words},
      {"outputs", OUT, static_cast<uint32_t>(p.K * N)},
      {"params", PRM, 3}};
  plan.required_words = PRM + 3;
  ParamAddrs prm{PRM, PRM + 1, PRM + 2};

  SlotBuilder b;
  const int ctrl = 15, parker = 14;

  int s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF0, S::ZERO, S::IMM, prm.in));
  s = b.slot(kSetup);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, pe));
  s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF1, S::ZERO, S::IMM, prm.wt));
  s = b.slot(kSetup);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, pe));
  s = b.slot(kSetup);
  put_all(b, s, mov_imm(D::RF2, 0), {ctrl});
  b.put(s, 3, 3, mov_imm(D::RF2, n_inner));

  b.label("INNER");
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::RF3, S::RF1, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::MUL, D::RF3, S::SELF, S::RF3), {ctrl});
  b.put(s, 3, 3, ins(Opcode::MUL, D::OUT, S::SELF, S::RF3));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3), {ctrl});
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, 16), {parker});
  b.put(s, 3, 2, ins(Opcode::ADD, D::RF2, S::RF2, S::NBR_E));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, 16), {parker});
  b.put(s, 3, 2, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, 16));
  s = b.slot(kInner);
  b.put(s, 3, 2, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, 16));
  b.put(s, 3, 3, ins(Opcode::SUB, D::RF2, S::RF2, S::IMM, 1));
  s = b.slot(kInner);
  (void)s;
  s = b.slot(kInner);
  b.put_branch(s, 3, 3, Opcode::BNE, S::RF2, S::ZERO, "INNER");

  // Tree reduction of the 16 partial sums, then one store.
  s = b.slot(kReduce);
  put_all(b, s, ins(Opcode::MOV, D::OUT, S::RF2, S::ZERO), {ctrl});
  b.put(s, 3, 3, ins(Opcode::MOV, D::OUT, S::ZERO, S::ZERO));
  s = b.slot(kReduce);
  for (int r = 0; r < 4; ++r) {
    b.put(s, r, 1, ins(Opcode::ADD, D::OUT, S::NBR_W, S::SELF));
    b.put(s, r, 3, ins(Opcode::ADD, D::OUT, S::NBR_W, S::SELF));
  }
  s = b.slot(kReduce);
  for (int r = 0; r < 4; ++r)
    b.put(s, r, 2, ins(Opcode::MOV, D::OUT, S::NBR_W, S::ZERO));
  s = b.slot(kReduce);
  for (int r = 0; r < 4; ++r)
    b.put(s, r, 3, ins(Opcode::ADD, D::OUT, S::NBR_W, S::SELF));
  s = b.slot(kReduce);
  b.put(s, 1, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::SELF));
  b.put(s, 3, 3, ins(Opcode::ADD, D::OUT, S::NBR_N, S::SELF));
  s = b.slot(kReduce);
  b.put(s, 2, 3, ins(Opcode::MOV, D::OUT, S::NBR_N, S::ZERO));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::ADD, D::RF3, S::NBR_N, S::SELF));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::LWD, D::RF0, S::ZERO, S::IMM, prm.out));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::SWD, D::OUT, S::RF3, S::RF0));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::EXIT, D::OUT, S::ZERO, S::ZERO));

  plan.program = b.finish();

  // One patch rebuild and one launch per (k, x, y): the reorder is repeated
  // for every output channel.
  int64_t idx = 0;
  for (int k = 0; k < p.K; ++k)
    for (int x = 0; x < p.Ox; ++x)
      for (int y = 0; y < p.Oy; ++y, ++idx) {
        uint32_t buf = (idx % 2 == 0) ? PATCH_A : PATCH_B;
        LaunchSpec L;
        L.build = true;
        L.build_x = x;
        L.build_y = y;
        L.build_buffer = buf;
        L.param_writes = {{prm.in, buf},
                          {prm.wt, WT + static_cast<uint32_t>(k) * patch_words},
                          {prm.out, OUT + static_cast<uint32_t>(k * N + x * p.Oy + y)}};
        plan.launches.push_back(std::move(L));
        plan.host_tasks.push_back(
            {HostTask::IM2COL_BUILD, static_cast<int64_t>(ff) * p.C, true});
        plan.host_tasks.push_back({HostTask::LAUNCH, 0, false});
      }
  return plan;
}

// Output-channel parallelism over the im2col patch: all 16 PEs stream the
// same patch sequentially against their own weight row. One patch build
// serves every output-channel block at that spatial position.
KernelPlan gen_im2col_op(const ConvParams& p) {
  const int ff = p.Fx * p.Fy;
  const int Kp = 16 * ceil_div16(p.K);
  const int64_t N = static_cast<int64_t>(p.Ox) * p.Oy;
  const int patch_words = ff * p.C;
  const int row_words = patch_words;

  KernelPlan plan;
  plan.strategy = Strategy::IM2COL_OP;
  plan.params = p;
  plan.predicted = predicted_trip_counts(Strategy::IM2COL_OP, p);

  const uint32_t PATCH_A = 0;
  const uint32_t PATCH_B = PATCH_A + patch_words;
  const uint32_t WT = PATCH_B + patch_words;
  const uint32_t OUT = WT + static_cast<uint32_t>(Kp) * row_words;
  const uint32_t PRM = OUT + static_cast<uint32_t>(Kp * N);
  plan.mem_map = {
      {"patch_a", PATCH_A, static_cast<uint32_t>(patch_words)},
      {"patch_b", PATCH_B, static_cast<uint32_t>(patch_words)},
      {"weights", WT, static_cast<uint32_t>(Kp) * row_words},
      {"outputs", OUT, static_cast<uint32_t>(Kp * N)},
      {"params", PRM, 3}};
  plan.required_words = PRM + 3;
  ParamAddrs prm{PRM, PRM + 1, PRM + 2};

  SlotBuilder b;
  const int ctrl = 15;

  int s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF0, S::ZERO, S::IMM, prm.in), {ctrl});
  s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF1, S::ZERO, S::IMM, prm.wt));
  s = b.slot(kSetup);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4,
          ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, pe * row_words));
  s = b.slot(kSetup);
  put_all(b, s, mov_imm(D::RF2, 0));
  s = b.slot(kSetup);
  b.put(s, 3, 3, mov_imm(D::RF0, ff * p.C));

  b.label("INNER");
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO), {ctrl});
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::RF3, S::RF1, S::ZERO), {ctrl});
  b.put(s, 3, 3, ins(Opcode::MOV, D::RF3, S::NBR_W, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::MUL, D::RF3, S::SELF, S::RF3), {ctrl});
  b.put(s, 3, 3, ins(Opcode::LWD, D::OUT, S::RF1, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3), {ctrl});
  b.put(s, 3, 3, ins(Opcode::MUL, D::RF3, S::RF3, S::SELF));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, 1), {ctrl});
  b.put(s, 3, 3, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, 1));
  s = b.slot(kInner);
  b.put(s, 3, 3, ins(Opcode::SUB, D::RF0, S::RF0, S::IMM, 1));
  s = b.slot(kInner);
  (void)s;
  s = b.slot(kInner);
  b.put_branch(s, 3, 3, Opcode::BNE, S::RF0, S::ZERO, "INNER");

  s = b.slot(kReduce);
  put_all(b, s, ins(Opcode::LWD, D::RF3, S::ZERO, S::IMM, prm.out));
  s = b.slot(kReduce);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4,
          ins(Opcode::ADD, D::RF3, S::RF3, S::IMM, static_cast<int32_t>(pe * N)));
  s = b.slot(kReduce);
  put_all(b, s, ins(Opcode::SWD, D::OUT, S::RF2, S::RF3));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::EXIT, D::OUT, S::ZERO, S::ZERO));

  plan.program = b.finish();

  const int blocks = ceil_div16(p.K);
  int64_t pos = 0;
  for (int x = 0; x < p.Ox; ++x)
    for (int y = 0; y < p.Oy; ++y, ++pos) {
      uint32_t buf = (pos % 2 == 0) ? PATCH_A : PATCH_B;
      plan.host_tasks.push_back(
          {HostTask::IM2COL_BUILD, static_cast<int64_t>(ff) * p.C, true});
      for (int blk = 0; blk < blocks; ++blk) {
        LaunchSpec L;
        if (blk == 0) {
          L.build = true;
          L.build_x = x;
          L.build_y = y;
          L.build_buffer = buf;
        }
        L.param_writes = {
            {prm.in, buf},
            {prm.wt, WT + static_cast<uint32_t>(blk) * 16 * row_words},
            {prm.out,
             OUT + static_cast<uint32_t>(blk) * 16 * static_cast<uint32_t>(N) +
                 static_cast<uint32_t>(x * p.Oy + y)}};
        plan.launches.push_back(std::move(L));
        plan.host_tasks.push_back({HostTask::LAUNCH, 0, false});
      }
    }
  return plan;
}

// Output-channel parallelism with direct input access. The inner loop walks
// input channels; the filter window walk is an unrolled dispatch ladder on
// a segment counter. Two lanes double as loop controllers.
KernelPlan gen_conv_op(const ConvParams& p) {
  const int Ix = p.Ix(), Iy = p.Iy();
  const int64_t ixiy = static_cast<int64_t>(Ix) * Iy;
  const int ff = p.Fx * p.Fy;
  const int Kp = 16 * ceil_div16(p.K);
  const int64_t N = static_cast<int64_t>(p.Ox) * p.Oy;

  KernelPlan plan;
  plan.strategy = Strategy::CONV_OP;
  plan.params = p;
  plan.predicted = predicted_trip_counts(Strategy::CONV_OP, p);

  const uint32_t IN = 0;
  const uint32_t WT = IN + static_cast<uint32_t>(p.C * ixiy);
  const uint32_t OUT = WT + static_cast<uint32_t>(Kp) * p.C * ff;
  const uint32_t PRM = OUT + static_cast<uint32_t>(Kp * N);
  plan.mem_map = {{"inputs", IN, static_cast<uint32_t>(p.C * ixiy)},
                  {"weights", WT, static_cast<uint32_t>(Kp) * p.C * ff},
                  {"outputs", OUT, static_cast<uint32_t>(Kp * N)},
                  {"params", PRM, 3}};
  plan.required_words = PRM + 3;
  ParamAddrs prm{PRM, PRM + 1, PRM + 2};

  const int row_words = p.C * ff;
  // Segment fixes rewind a full channel sweep and step one filter tap.
  const int32_t d_wt_seg = static_cast<int32_t>(1 - ff * p.C);
  const int32_t d_in_j = static_cast<int32_t>(1 - p.C * ixiy);
  const int32_t d_in_i = static_cast<int32_t>(Iy - (p.Fy - 1) - p.C * ixiy);

  SlotBuilder b;
  const int ctrl1 = 15;  // channel-loop counter + branch
  const int ctrl2 = 13;  // segment ladder

  int s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF0, S::ZERO, S::IMM, prm.in),
          {ctrl1, ctrl2});
  s = b.slot(kSetup);
  put_all(b, s, ins(Opcode::LWD, D::RF1, S::ZERO, S::IMM, prm.wt));
  s = b.slot(kSetup);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4,
          ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, pe * row_words));
  s = b.slot(kSetup);
  put_all(b, s, mov_imm(D::RF2, 0));
  s = b.slot(kSetup);
  b.put(s, 3, 3, mov_imm(D::RF0, p.C));
  b.put(s, 3, 1, mov_imm(D::RF0, ff));

  b.label("BODY");
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::OUT, S::RF0, S::ZERO), {ctrl1, ctrl2});
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::LWD, D::RF3, S::RF1, S::ZERO), {ctrl1, ctrl2});
  b.put(s, 3, 3, ins(Opcode::MOV, D::RF3, S::NBR_W, S::ZERO));
  b.put(s, 3, 1, ins(Opcode::MOV, D::RF3, S::NBR_W, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::MUL, D::RF3, S::SELF, S::RF3), {ctrl1, ctrl2});
  b.put(s, 3, 3, ins(Opcode::LWD, D::OUT, S::RF1, S::ZERO));
  b.put(s, 3, 1, ins(Opcode::LWD, D::OUT, S::RF1, S::ZERO));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3), {ctrl1, ctrl2});
  b.put(s, 3, 3, ins(Opcode::MUL, D::RF3, S::RF3, S::SELF));
  b.put(s, 3, 1, ins(Opcode::MUL, D::RF3, S::RF3, S::SELF));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM,
                    static_cast<int32_t>(ixiy)),
          {ctrl1, ctrl2});
  b.put(s, 3, 3, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3));
  b.put(s, 3, 1, ins(Opcode::ADD, D::RF2, S::RF2, S::RF3));
  s = b.slot(kInner);
  put_all(b, s, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, ff));
  s = b.slot(kInner);
  b.put(s, 3, 3, ins(Opcode::SUB, D::RF0, S::RF0, S::IMM, 1));
  s = b.slot(kInner);
  (void)s;
  s = b.slot(kInner);
  b.put_branch(s, 3, 3, Opcode::BNE, S::RF0, S::ZERO, "BODY");

  // Segment transition: rewind the weight pointers, re-arm the channel
  // counter, then dispatch a row-change or column-change input fix.
  s = b.slot(kUpdate);
  put_all(b, s, ins(Opcode::ADD, D::RF1, S::RF1, S::IMM, d_wt_seg));
  s = b.slot(kUpdate);
  b.put(s, 3, 3, mov_imm(D::RF0, p.C));
  b.put(s, 3, 1, ins(Opcode::SUB, D::RF0, S::RF0, S::IMM, 1));
  s = b.slot(kUpdate);
  b.put_branch(s, 3, 1, Opcode::BEQ, S::RF0, S::ZERO, "STORES");
  for (int t = 1; t < p.Fx; ++t) {
    s = b.slot(kUpdate);
    if (t == 1)
      b.put(s, 3, 1, mov_imm(D::RF3, p.Fy));
    else
      b.put(s, 3, 1, ins(Opcode::ADD, D::RF3, S::RF3, S::IMM, p.Fy));
    s = b.slot(kUpdate);
    b.put_branch(s, 3, 1, Opcode::BEQ, S::RF0, S::RF3, "IFIX");
  }
  s = b.slot(kUpdate);
  put_all(b, s, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, d_in_j),
          {ctrl1, ctrl2});
  s = b.slot(kUpdate);
  b.put_branch(s, 3, 1, Opcode::JMP, S::ZERO, S::ZERO, "BODY");
  b.label("IFIX");
  s = b.slot(kUpdate);
  put_all(b, s, ins(Opcode::ADD, D::RF0, S::RF0, S::IMM, d_in_i),
          {ctrl1, ctrl2});
  s = b.slot(kUpdate);
  b.put_branch(s, 3, 1, Opcode::JMP, S::ZERO, S::ZERO, "BODY");

  b.label("STORES");
  s = b.slot(kReduce);
  put_all(b, s, ins(Opcode::LWD, D::RF3, S::ZERO, S::IMM, prm.out));
  s = b.slot(kReduce);
  for (int pe = 0; pe < kNumPEs; ++pe)
    b.put(s, pe / 4, pe % 4,
          ins(Opcode::ADD, D::RF3, S::RF3, S::IMM, static_cast<int32_t>(pe * N)));
  s = b.slot(kReduce);
  put_all(b, s, ins(Opcode::SWD, D::OUT, S::RF2, S::RF3));
  s = b.slot(kReduce);
  b.put(s, 3, 3, ins(Opcode::EXIT, D::OUT, S::ZERO, S::ZERO));

  plan.program = b.finish();

  const int blocks = ceil_div16(p.K);
  for (int x = 0; x < p.Ox; ++x)
    for (int y = 0; y < p.Oy; ++y)
      for (int blk = 0; blk < blocks; ++blk) {
        LaunchSpec L;
        L.param_writes = {
            {prm.in, IN + static_cast<uint32_t>(x * Iy + y)},
            {prm.wt, WT + static_cast<uint32_t>(blk) * 16 * row_words},
            {prm.out,
             OUT + static_cast<uint32_t>(blk) * 16 * static_cast<uint32_t>(N) +
                 static_cast<uint32_t>(x * p.Oy + y)}};
        plan.launches.push_back(std::move(L));
        plan.host_tasks.push_back({HostTask::LAUNCH, 0, false});
      }
  return plan;
}

KernelPlan generate(Strategy s, const ConvParams& p) {
  if (!p.valid()) throw SimError("invalid convolution parameters");
  switch (s) {
    case Strategy::WP: return gen_conv_wp(p);
    case Strategy::IM2COL_IP: return gen_im2col_ip(p);
    case Strategy::CONV_OP: return gen_conv_op(p);
    case Strategy::IM2COL_OP: return gen_im2col_op(p);
  }
  throw SimError("unknown strategy");
}

// ---------------------------------------------------------------------------
// Plan execution
// ---------------------------------------------------------------------------

namespace {

void relaunch(MachineState& st) {
  st.pc = st.program.entry;
  st.halted = false;
  st.out.fill(0);
  for (auto& rf : st.rf) rf.fill(0);
}

// Patch vector ordered (h, w, c); for IP the channel axis is padded to a
// multiple of 16 and the pad positions stay zero from image init.
void write_patch(std::vector<uint32_t>& mem, uint32_t base,
                 const Tensor& in_hwc, int x, int y, const ConvParams& p,
                 int c_stride) {
  size_t idx = 0;
  for (int i = 0; i < p.Fx; ++i)
    for (int j = 0; j < p.Fy; ++j, ++idx)
      for (int c = 0; c < p.C; ++c)
        mem[base + idx * c_stride + c] = in_hwc.at_hwc(x + i, y + j, c);
}

}  // namespace

ExecResult execute_plan(const KernelPlan& plan, const MachineConfig& config,
                        const Tensor& input_chw, const Tensor& weights,
                        const HostModel& host) {
  const ConvParams& p = plan.params;
  if (input_chw.layout != Layout::CHW)
    throw SimError("execute_plan expects a CHW input");
  if (input_chw.dims != std::vector<int>{p.C, p.Ix(), p.Iy()})
    throw SimError("input dims do not match the plan");
  if (weights.dims != std::vector<int>{p.K, p.C, p.Fx, p.Fy})
    throw SimError("weight dims do not match the plan");

  MachineConfig cfg = config;
  cfg.mem_words = std::max<size_t>(cfg.mem_words, plan.required_words);

  std::vector<uint32_t> image(cfg.mem_words, 0);
  const int ff = p.Fx * p.Fy;
  Tensor in_hwc;

  switch (plan.strategy) {
    case Strategy::WP: {
      const auto& rin = plan.region("inputs");
      std::copy(input_chw.data.begin(), input_chw.data.end(),
                image.begin() + rin.offset);
      const auto& rwt = plan.region("weights");
      std::copy(weights.data.begin(), weights.data.end(),
                image.begin() + rwt.offset);
      break;
    }
    case Strategy::IM2COL_IP: {
      in_hwc = layout_convert(input_chw, Layout::HWC);
      const auto& rwt = plan.region("weights");
      const int Cp = 16 * ceil_div16(p.C);
      for (int k = 0; k < p.K; ++k)
        for (int i = 0; i < p.Fx; ++i)
          for (int j = 0; j < p.Fy; ++j)
            for (int c = 0; c < p.C; ++c)
              image[rwt.offset + static_cast<size_t>(k) * ff * Cp +
                    (static_cast<size_t>(i) * p.Fy + j) * Cp + c] =
                  weights.at_kcff(k, c, i, j);
      break;
    }
    case Strategy::IM2COL_OP: {
      in_hwc = layout_convert(input_chw, Layout::HWC);
      const auto& rwt = plan.region("weights");
      for (int k = 0; k < p.K; ++k)
        for (int i = 0; i < p.Fx; ++i)
          for (int j = 0; j < p.Fy; ++j)
            for (int c = 0; c < p.C; ++c)
              image[rwt.offset + static_cast<size_t>(k) * ff * p.C +
                    (static_cast<size_t>(i) * p.Fy + j) * p.C + c] =
                  weights.at_kcff(k, c, i, j);
      break;
    }
    case Strategy::CONV_OP: {
      const auto& rin = plan.region("inputs");
      std::copy(input_chw.data.begin(), input_chw.data.end(),
                image.begin() + rin.offset);
      const auto& rwt = plan.region("weights");
      std::copy(weights.data.begin(), weights.data.end(),
                image.begin() + rwt.offset);
      break;
    }
  }

  MachineState st = reset(cfg, plan.program, image);

  // Generous watchdog: every predicted slot at worst-case port cost plus
  // per-launch and per-pass bookkeeping.
  const int64_t slot_worst =
      4 * cfg.timing.mem_base_cycles + cfg.timing.alu_cycles;
  int64_t budget =
      (plan.predicted.main_iters * (plan.predicted.main_len + 6) +
       plan.predicted.border_iters * (plan.predicted.border_len + 6) +
       static_cast<int64_t>(plan.launches.size() + 1) *
           (static_cast<int64_t>(plan.program.length()) + 8) +
       static_cast<int64_t>(p.C) * p.K * 48 + 100000) *
          slot_worst +
      1000000;

  ExecResult res;
  res.launches = static_cast<int64_t>(plan.launches.size());
  const int Cp16 = 16 * ceil_div16(p.C);
  for (const auto& L : plan.launches) {
    if (L.build) {
      int c_stride = (plan.strategy == Strategy::IM2COL_IP) ? Cp16 : p.C;
      write_patch(st.memory, L.build_buffer, in_hwc, L.build_x, L.build_y, p,
                  c_stride);
    }
    for (auto [addr, val] : L.param_writes) st.memory[addr] = val;
    relaunch(st);
    while (!st.halted) {
      step(st);
      if (st.counters.total_cycles > budget) {
        st.sync_region_counters();
        throw WatchdogError("plan execution exceeded its cycle budget",
                            st.counters);
      }
    }
  }
  st.sync_region_counters();
  res.report = st.counters;

  // Extract the CHW output tensor from the strategy's native layout.
  res.output = Tensor::chw(p.K, p.Ox, p.Oy);
  const auto& rout = plan.region("outputs");
  const int64_t N = static_cast<int64_t>(p.Ox) * p.Oy;
  if (plan.strategy == Strategy::WP) {
    // Store-walk layout: per k, [pad, pad, sweep 0 cells, pad, sweep 1
    // cells, pad, ...] — one pad per sweep boundary plus two warm-up pads.
    const int64_t W = N + p.Oy + 2;
    for (int k = 0; k < p.K; ++k)
      for (int x = 0; x < p.Ox; ++x)
        for (int y = 0; y < p.Oy; ++y)
          res.output.at_chw(k, x, y) =
              st.memory[rout.offset + static_cast<size_t>(k) * W + 3 +
                        static_cast<size_t>(y) * (p.Ox + 1) + x];
  } else {
    for (int k = 0; k < p.K; ++k)
      for (int x = 0; x < p.Ox; ++x)
        for (int y = 0; y < p.Oy; ++y)
          res.output.at_chw(k, x, y) =
              st.memory[rout.offset + static_cast<size_t>(k) * N +
                        static_cast<size_t>(x) * p.Oy + y];
  }

  res.total_latency = total_latency(plan, res.report, host);
  for (const auto& t : plan.host_tasks)
    if (t.kind == HostTask::IM2COL_BUILD)
      res.host_build_cycles += t.words_moved * host.im2col_cycles_per_word;
  return res;
}

int64_t total_latency(const KernelPlan& plan, const RunReport& report,
                      const HostModel& host) {
  int64_t launches = 0;
  for (const auto& t : plan.host_tasks)
    if (t.kind == HostTask::LAUNCH) ++launches;
  if (launches == 0) return report.total_cycles;

  const int64_t per_launch = report.total_cycles / launches;
  int64_t exposed = 0;
  int64_t capacity = 0;  // CGRA cycles since the previous build
  bool first_build = true;
  for (const auto& t : plan.host_tasks) {
    if (t.kind == HostTask::LAUNCH) {
      capacity += per_launch;
      continue;
    }
    int64_t cost = t.words_moved * host.im2col_cycles_per_word;
    if (first_build || !t.overlap_eligible)
      exposed += cost;
    else
      exposed += std::max<int64_t>(0, cost - capacity);
    first_build = false;
    capacity = 0;
  }
  return report.total_cycles + launches * host.launch_overhead_cycles + exposed;
}

}  // namespace cgraconv
