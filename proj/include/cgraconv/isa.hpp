#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cgraconv {

// Per-PE instruction set. 32-bit integer ops plus control flow; there is
// no fused multiply-accumulate.
enum class Opcode : uint8_t {
  NOP,
  MOV,
  ADD,
  SUB,
  MUL,
  LWD,  // load word, addr = value(srcA) + value(srcB)
  SWD,  // store word, mem[value(srcB)] = value(srcA)
  LWI,  // load word, addr = RF[srcA], then RF[srcA] += imm
  SWI,  // store word, mem[RF[srcB]] = value(srcA), then RF[srcB] += imm
  BEQ,
  BNE,
  BLT,
  JMP,
  EXIT,
};

// Source operand selector. Neighbor selectors resolve by torus wraparound
// on the 4x4 grid and observe the neighbor's output register as of the end
// of the previous lockstep slot.
enum class OperandSel : uint8_t {
  RF0,
  RF1,
  RF2,
  RF3,
  SELF,   // own output register
  NBR_N,
  NBR_S,
  NBR_E,
  NBR_W,
  IMM,
  ZERO,
};

// Destination selector. The result of a value-producing instruction is
// written exactly to its destination; only OUT is visible to neighbors.
enum class Dest : uint8_t { OUT, RF0, RF1, RF2, RF3 };

struct PEInstruction {
  Opcode opcode = Opcode::NOP;
  Dest dst = Dest::OUT;
  OperandSel srcA = OperandSel::ZERO;
  OperandSel srcB = OperandSel::ZERO;
  int32_t imm = 0;
  std::string region;  // loop-region label, empty = untagged

  bool operator==(const PEInstruction& o) const {
    return opcode == o.opcode && dst == o.dst && srcA == o.srcA &&
           srcB == o.srcB && imm == o.imm && region == o.region;
  }
};

inline constexpr int kGridRows = 4;
inline constexpr int kGridCols = 4;
inline constexpr int kNumPEs = kGridRows * kGridCols;
inline constexpr int kProgMemWords = 32;
inline constexpr int kRfSize = 4;

// A 4x4 grid of per-PE instruction sequences. All 16 sequences must have
// equal length (lockstep issue); pad() appends NOPs to align them.
struct CgraProgram {
  std::array<std::vector<PEInstruction>, kNumPEs> grid;
  int entry = 0;

  std::vector<PEInstruction>& pe(int r, int c) { return grid[r * kGridCols + c]; }
  const std::vector<PEInstruction>& pe(int r, int c) const {
    return grid[r * kGridCols + c];
  }
  size_t length() const;
  void pad();

  bool operator==(const CgraProgram& o) const {
    return entry == o.entry && grid == o.grid;
  }
};

const char* opcode_name(Opcode op);
const char* operand_name(OperandSel s);
const char* dest_name(Dest d);

bool opcode_is_branch(Opcode op);
bool opcode_is_memory(Opcode op);
// True when the instruction produces a value routed through dst.
bool opcode_writes_dst(Opcode op);

struct ParseError {
  int line = 0;
  int column = 0;
  std::string message;
};

// Parses the textual assembly format. Throws AsmError (see below) carrying
// line/column on malformed input. emit_asm(parse_asm(t)) == parse_asm-stable.
CgraProgram parse_asm(const std::string& text);

// Canonical text form; round-trips with parse_asm. Region labels are kept
// as @region annotations.
std::string emit_asm(const CgraProgram& program);

// Static validation against the architecture's resource limits. Returns an
// empty list iff the program satisfies every CgraProgram invariant and all
// branch targets are in range. Violations are returned, never thrown.
std::vector<std::string> validate(const CgraProgram& program);

class AsmError : public std::exception {
 public:
  explicit AsmError(ParseError e) : err_(std::move(e)) {
    what_ = "line " + std::to_string(err_.line) + ":" +
            std::to_string(err_.column) + ": " + err_.message;
  }
  const ParseError& error() const { return err_; }
  const char* what() const noexcept override { return what_.c_str(); }

 private:
  ParseError err_;
  std::string what_;
};

}  // namespace cgraconv
