#include "cgraconv/isa.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>

namespace cgraconv {

size_t CgraProgram::length() const {
  size_t n = 0;
  for (const auto& seq : grid) n = std::max(n, seq.size());
  return n;
}

void CgraProgram::pad() {
  size_t n = length();
  for (auto& seq : grid) {
    while (seq.size() < n) seq.push_back(PEInstruction{});
  }
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::NOP: return "nop";
    case Opcode::MOV: return "mov";
    case Opcode::ADD: return "add";
    case Opcode::SUB: return "sub";
    case Opcode::MUL: return "mul";
    case Opcode::LWD: return "lwd";
    case Opcode::SWD: return "swd";
    case Opcode::LWI: return "lwi";
    case Opcode::SWI: return "swi";
    case Opcode::BEQ: return "beq";
    case Opcode::BNE: return "bne";
    case Opcode::BLT: return "blt";
    case Opcode::JMP: return "jmp";
    case Opcode::EXIT: return "exit";
  }
  return "?";
}

const char* operand_name(OperandSel s) {
  switch (s) {
    case OperandSel::RF0: return "rf0";
    case OperandSel::RF1: return "rf1";
    case OperandSel::RF2: return "rf2";
    case OperandSel::RF3: return "rf3";
    case OperandSel::SELF: return "self";
    case OperandSel::NBR_N: return "n";
    case OperandSel::NBR_S: return "s";
    case OperandSel::NBR_E: return "e";
    case OperandSel::NBR_W: return "w";
    case OperandSel::IMM: return "imm";
    case OperandSel::ZERO: return "zero";
  }
  return "?";
}

const char* dest_name(Dest d) {
  switch (d) {
    case Dest::OUT: return "out";
    case Dest::RF0: return "rf0";
    case Dest::RF1: return "rf1";
    case Dest::RF2: return "rf2";
    case Dest::RF3: return "rf3";
  }
  return "?";
}

bool opcode_is_branch(Opcode op) {
  return op == Opcode::BEQ || op == Opcode::BNE || op == Opcode::BLT ||
         op == Opcode::JMP;
}

bool opcode_is_memory(Opcode op) {
  return op == Opcode::LWD || op == Opcode::SWD || op == Opcode::LWI ||
         op == Opcode::SWI;
}

bool opcode_writes_dst(Opcode op) {
  switch (op) {
    case Opcode::MOV:
    case Opcode::ADD:
    case Opcode::SUB:
    case Opcode::MUL:
    case Opcode::LWD:
    case Opcode::LWI:
      return true;
    default:
      return false;
  }
}

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct Tokenizer {
  const std::string& text;
  size_t pos = 0;
  int line = 1;
  int col = 1;
};

[[noreturn]] void fail(int line, int col, const std::string& msg) {
  throw AsmError(ParseError{line, col, msg});
}

std::optional<Opcode> opcode_from_name(const std::string& s) {
  static const std::map<std::string, Opcode> table = {
      {"nop", Opcode::NOP}, {"mov", Opcode::MOV}, {"add", Opcode::ADD},
      {"sub", Opcode::SUB}, {"mul", Opcode::MUL}, {"lwd", Opcode::LWD},
      {"swd", Opcode::SWD}, {"lwi", Opcode::LWI}, {"swi", Opcode::SWI},
      {"beq", Opcode::BEQ}, {"bne", Opcode::BNE}, {"blt", Opcode::BLT},
      {"jmp", Opcode::JMP}, {"exit", Opcode::EXIT}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::optional<OperandSel> operand_from_name(const std::string& s) {
  static const std::map<std::string, OperandSel> table = {
      {"rf0", OperandSel::RF0},  {"rf1", OperandSel::RF1},
      {"rf2", OperandSel::RF2},  {"rf3", OperandSel::RF3},
      {"self", OperandSel::SELF}, {"n", OperandSel::NBR_N},
      {"s", OperandSel::NBR_S},  {"e", OperandSel::NBR_E},
      {"w", OperandSel::NBR_W},  {"imm", OperandSel::IMM},
      {"zero", OperandSel::ZERO}};
  auto it = table.find(s);
  if (it == table.end()) return std::nullopt;
  return it->second;
}

std::optional<Dest> dest_from_name(const std::string& s) {
  if (s == "out") return Dest::OUT;
  if (s == "rf0") return Dest::RF0;
  if (s == "rf1") return Dest::RF1;
  if (s == "rf2") return Dest::RF2;
  if (s == "rf3") return Dest::RF3;
  return std::nullopt;
}

// Operand shape per opcode: which fields appear, in canonical order.
// nop/exit: none
// jmp: imm
// beq/bne/blt: srcA, srcB, imm(target)
// mov: dst, srcA [, imm]
// add/sub/mul/lwd: dst, srcA, srcB [, imm]
// swd: srcA, srcB [, imm]
// lwi: dst, srcA, imm
// swi: srcA, srcB, imm

struct LineRec {
  std::string text;
  int line;
};

std::vector<std::string> split_fields(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  for (auto& f : out) {
    size_t a = f.find_first_not_of(" \t");
    size_t b = f.find_last_not_of(" \t");
    f = (a == std::string::npos) ? "" : f.substr(a, b - a + 1);
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

int32_t parse_int(const std::string& s, int line) {
  try {
    size_t used = 0;
    long long v = std::stoll(s, &used, 0);
    if (used != s.size()) fail(line, 1, "bad integer '" + s + "'");
    return static_cast<int32_t>(v);
  } catch (const AsmError&) {
    throw;
  } catch (...) {
    fail(line, 1, "bad integer '" + s + "'");
  }
}

}  // namespace

CgraProgram parse_asm(const std::string& text) {
  CgraProgram prog;
  int cur_pe = -1;
  std::string cur_region;

  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string s = raw;
    if (auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    size_t b = s.find_last_not_of(" \t\r");
    s = s.substr(a, b - a + 1);

    std::istringstream ls(s);
    std::string head;
    ls >> head;
    head = lower(head);

    if (head == "pe") {
      int r, c;
      if (!(ls >> r >> c)) fail(lineno, 1, "expected 'pe <row> <col>'");
      if (r < 0 || r >= kGridRows || c < 0 || c >= kGridCols)
        fail(lineno, 1, "pe coordinates out of range");
      cur_pe = r * kGridCols + c;
      cur_region.clear();
      continue;
    }
    if (head == "@region") {
      std::string name;
      ls >> name;
      if (name.empty()) fail(lineno, 1, "@region requires a name");
      cur_region = (name == "-") ? "" : name;
      continue;
    }

    if (cur_pe < 0) fail(lineno, 1, "instruction outside a pe block");
    auto op = opcode_from_name(head);
    if (!op) fail(lineno, 1, "unknown opcode '" + head + "'");

    std::string rest;
    std::getline(ls, rest);
    std::vector<std::string> f = split_fields(lower(rest));

    PEInstruction ins;
    ins.opcode = *op;
    ins.region = cur_region;

    auto want = [&](size_t lo, size_t hi) {
      if (f.size() < lo || f.size() > hi)
        fail(lineno, 1, std::string(opcode_name(*op)) + ": wrong operand count");
    };
    auto as_dest = [&](const std::string& t) {
      auto d = dest_from_name(t);
      if (!d) {
        if (t.rfind("rf", 0) == 0)
          fail(lineno, 1, "register index out of range '" + t + "'");
        fail(lineno, 1, "bad destination '" + t + "'");
      }
      return *d;
    };
    auto as_src = [&](const std::string& t) {
      auto ssel = operand_from_name(t);
      if (!ssel) {
        if (t.rfind("rf", 0) == 0)
          fail(lineno, 1, "register index out of range '" + t + "'");
        fail(lineno, 1, "bad operand '" + t + "'");
      }
      return *ssel;
    };

    switch (*op) {
      case Opcode::NOP:
      case Opcode::EXIT:
        want(0, 0);
        break;
      case Opcode::JMP:
        want(1, 1);
        ins.imm = parse_int(f[0], lineno);
        break;
      case Opcode::BEQ:
      case Opcode::BNE:
      case Opcode::BLT:
        want(3, 3);
        ins.srcA = as_src(f[0]);
        ins.srcB = as_src(f[1]);
        ins.imm = parse_int(f[2], lineno);
        break;
      case Opcode::MOV:
        want(2, 3);
        ins.dst = as_dest(f[0]);
        ins.srcA = as_src(f[1]);
        if (f.size() == 3) ins.imm = parse_int(f[2], lineno);
        break;
      case Opcode::ADD:
      case Opcode::SUB:
      case Opcode::MUL:
      case Opcode::LWD:
        want(3, 4);
        ins.dst = as_dest(f[0]);
        ins.srcA = as_src(f[1]);
        ins.srcB = as_src(f[2]);
        if (f.size() == 4) ins.imm = parse_int(f[3], lineno);
        break;
      case Opcode::SWD:
        want(2, 3);
        ins.srcA = as_src(f[0]);
        ins.srcB = as_src(f[1]);
        if (f.size() == 3) ins.imm = parse_int(f[2], lineno);
        break;
      case Opcode::LWI:
        want(3, 3);
        ins.dst = as_dest(f[0]);
        ins.srcA = as_src(f[1]);
        ins.imm = parse_int(f[2], lineno);
        break;
      case Opcode::SWI:
        want(3, 3);
        ins.srcA = as_src(f[0]);
        ins.srcB = as_src(f[1]);
        ins.imm = parse_int(f[2], lineno);
        break;
    }

    auto& seq = prog.grid[cur_pe];
    if (seq.size() >= kProgMemWords)
      fail(lineno, 1, "program memory exceeded (32 instructions per PE)");
    seq.push_back(std::move(ins));
  }

  prog.pad();
  if (prog.length() == 0) {
    // An empty source still denotes a runnable machine; give every PE one NOP.
    for (auto& seq : prog.grid) seq.push_back(PEInstruction{});
  }
  return prog;
}

std::string emit_asm(const CgraProgram& prog) {
  std::ostringstream out;
  for (int r = 0; r < kGridRows; ++r) {
    for (int c = 0; c < kGridCols; ++c) {
      const auto& seq = prog.pe(r, c);
      out << "pe " << r << " " << c << "\n";
      std::string region;
      for (const auto& ins : seq) {
        if (ins.region != region) {
          region = ins.region;
          out << "  @region " << (region.empty() ? "-" : region) << "\n";
        }
        out << "  " << opcode_name(ins.opcode);
        auto src = [&](OperandSel s) { return std::string(operand_name(s)); };
        switch (ins.opcode) {
          case Opcode::NOP:
          case Opcode::EXIT:
            break;
          case Opcode::JMP:
            out << " " << ins.imm;
            break;
          case Opcode::BEQ:
          case Opcode::BNE:
          case Opcode::BLT:
            out << " " << src(ins.srcA) << ", " << src(ins.srcB) << ", "
                << ins.imm;
            break;
          case Opcode::MOV:
            out << " " << dest_name(ins.dst) << ", " << src(ins.srcA);
            if (ins.srcA == OperandSel::IMM) out << ", " << ins.imm;
            break;
          case Opcode::ADD:
          case Opcode::SUB:
          case Opcode::MUL:
          case Opcode::LWD:
            out << " " << dest_name(ins.dst) << ", " << src(ins.srcA) << ", "
                << src(ins.srcB);
            if (ins.srcA == OperandSel::IMM || ins.srcB == OperandSel::IMM ||
                ins.imm != 0)
              out << ", " << ins.imm;
            break;
          case Opcode::SWD:
            out << " " << src(ins.srcA) << ", " << src(ins.srcB);
            if (ins.srcA == OperandSel::IMM || ins.srcB == OperandSel::IMM ||
                ins.imm != 0)
              out << ", " << ins.imm;
            break;
          case Opcode::LWI:
            out << " " << dest_name(ins.dst) << ", " << src(ins.srcA) << ", "
                << ins.imm;
            break;
          case Opcode::SWI:
            out << " " << src(ins.srcA) << ", " << src(ins.srcB) << ", "
                << ins.imm;
            break;
        }
        out << "\n";
      }
    }
  }
  return out.str();
}

std::vector<std::string> validate(const CgraProgram& prog) {
  std::vector<std::string> out;
  size_t len = 0;
  bool equal = true;
  for (int i = 0; i < kNumPEs; ++i) {
    if (i == 0)
      len = prog.grid[i].size();
    else if (prog.grid[i].size() != len)
      equal = false;
  }
  if (!equal) out.push_back("per-PE program lengths differ (lockstep requires equal length)");
  for (int i = 0; i < kNumPEs; ++i) {
    const auto& seq = prog.grid[i];
    std::string who = "pe(" + std::to_string(i / kGridCols) + "," +
                      std::to_string(i % kGridCols) + ")";
    if (seq.size() > kProgMemWords)
      out.push_back(who + ": program memory exceeded (" +
                    std::to_string(seq.size()) + " > 32)");
    for (size_t j = 0; j < seq.size(); ++j) {
      const auto& ins = seq[j];
      std::string at = who + " slot " + std::to_string(j);
      if (opcode_is_branch(ins.opcode)) {
        if (ins.imm < 0 || static_cast<size_t>(ins.imm) >= prog.length())
          out.push_back(at + ": branch target out of range");
      }
      if (ins.opcode == Opcode::LWI &&
          !(ins.srcA >= OperandSel::RF0 && ins.srcA <= OperandSel::RF3))
        out.push_back(at + ": lwi address operand must be a register-file slot");
      if (ins.opcode == Opcode::SWI &&
          !(ins.srcB >= OperandSel::RF0 && ins.srcB <= OperandSel::RF3))
        out.push_back(at + ": swi address operand must be a register-file slot");
    }
  }
  if (prog.entry < 0 || static_cast<size_t>(prog.entry) >= std::max<size_t>(prog.length(), 1))
    out.push_back("entry point out of range");
  return out;
}

}  // namespace cgraconv
