#include "cgraconv/cgraconv.h"

#include <cstring>
#include <sstream>

#include "cgraconv/bench.hpp"
#include "cgraconv/isa.hpp"
#include "cgraconv/kernels.hpp"
#include "cgraconv/machine.hpp"
#include "cgraconv/tensor.hpp"
#include "json.hpp"

using namespace cgraconv;

namespace {

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

int set_error(int code, const std::string& msg) {
  g_last_error = msg;
  return code;
}

ConvParams make_params(int C, int K, int Ox, int Oy, int Fx, int Fy) {
  ConvParams p;
  p.C = C;
  p.K = K;
  p.Ox = Ox;
  p.Oy = Oy;
  p.Fx = Fx > 0 ? Fx : 3;
  p.Fy = Fy > 0 ? Fy : 3;
  return p;
}

void apply_options(const cgra_options* o, TimingModel& t, HostModel& h,
                   uint32_t& seed) {
  if (!o) return;
  if (o->mem_lat > 0) t.mem_base_cycles = o->mem_lat;
  if (o->host_im2col_cpw > 0) h.im2col_cycles_per_word = o->host_im2col_cpw;
  if (o->launch_overhead > 0) h.launch_overhead_cycles = o->launch_overhead;
  if (o->seed != 0) seed = o->seed;
}

}  // namespace

struct cgra_plan {
  KernelPlan plan;
};

struct cgra_result {
  KernelPlan plan;
  ExecResult exec;
  Metrics metrics;
  bool oracle_ok = false;
};

extern "C" {

const char* cgra_last_error(void) { return g_last_error.c_str(); }

void cgra_string_free(char* s) { std::free(s); }

int cgra_plan_create(const char* strategy, int C, int K, int Ox, int Oy,
                     int Fx, int Fy, cgra_plan** out) {
  if (!strategy || !out) return set_error(CGRA_E_ARG, "null argument");
  Strategy s;
  if (!strategy_from_name(strategy, s))
    return set_error(CGRA_E_ARG, std::string("unknown strategy: ") + strategy);
  try {
    auto* p = new cgra_plan{generate(s, make_params(C, K, Ox, Oy, Fx, Fy))};
    *out = p;
    return CGRA_OK;
  } catch (const std::exception& e) {
    return set_error(CGRA_E_ARG, e.what());
  }
}

void cgra_plan_destroy(cgra_plan* plan) { delete plan; }

int cgra_plan_asm(const cgra_plan* plan, char** out_text) {
  if (!plan || !out_text) return set_error(CGRA_E_ARG, "null argument");
  *out_text = dup_string(emit_asm(plan->plan.program));
  return CGRA_OK;
}

int cgra_plan_json(const cgra_plan* plan, char** out_json) {
  if (!plan || !out_json) return set_error(CGRA_E_ARG, "null argument");
  *out_json = dup_string(plan->plan.to_json());
  return CGRA_OK;
}

int cgra_asm_canonicalize(const char* text, char** out_text) {
  if (!text || !out_text) return set_error(CGRA_E_ARG, "null argument");
  try {
    CgraProgram p = parse_asm(text);
    *out_text = dup_string(emit_asm(p));
    return CGRA_OK;
  } catch (const AsmError& e) {
    return set_error(CGRA_E_PARSE, e.what());
  }
}

int cgra_asm_validate(const char* text, char** out_violations) {
  if (!text || !out_violations) return set_error(CGRA_E_ARG, "null argument");
  try {
    CgraProgram p = parse_asm(text);
    std::ostringstream out;
    for (const auto& v : validate(p)) out << v << "\n";
    *out_violations = dup_string(out.str());
    return CGRA_OK;
  } catch (const AsmError& e) {
    return set_error(CGRA_E_PARSE, e.what());
  }
}

int cgra_run(const char* strategy, int C, int K, int Ox, int Oy, int Fx,
             int Fy, const cgra_options* opts, const char* input_path,
             const char* weights_path, cgra_result** out) {
  if (!strategy || !out) return set_error(CGRA_E_ARG, "null argument");
  Strategy s;
  if (!strategy_from_name(strategy, s))
    return set_error(CGRA_E_ARG, std::string("unknown strategy: ") + strategy);
  ConvParams p = make_params(C, K, Ox, Oy, Fx, Fy);
  TimingModel timing;
  HostModel host;
  uint32_t seed = 1;
  apply_options(opts, timing, host, seed);

  try {
    KernelPlan plan = generate(s, p);
    Tensor in = input_path ? load_tensor(input_path) : random_input(p, seed);
    if (in.layout == Layout::HWC) in = layout_convert(in, Layout::CHW);
    Tensor wt =
        weights_path ? load_tensor(weights_path) : random_weights(p, seed + 1);

    MachineConfig cfg;
    cfg.timing = timing;
    ExecResult exec = execute_plan(plan, cfg, in, wt, host);

    Tensor expect = conv2d_oracle(in, wt, p);
    bool ok = expect.data == exec.output.data;

    auto* r = new cgra_result;
    r->plan = std::move(plan);
    r->metrics = compute_metrics(r->plan, exec.report, p, host);
    r->exec = std::move(exec);
    r->oracle_ok = ok;
    *out = r;
    return CGRA_OK;
  } catch (const AsmError& e) {
    return set_error(CGRA_E_PARSE, e.what());
  } catch (const SimError& e) {
    return set_error(CGRA_E_SIM, e.what());
  } catch (const std::exception& e) {
    return set_error(CGRA_E_SIM, e.what());
  }
}

void cgra_result_destroy(cgra_result* r) { delete r; }

int cgra_result_matches_oracle(const cgra_result* r) {
  return (r && r->oracle_ok) ? 1 : 0;
}

int cgra_result_metrics_json(const cgra_result* r, char** out_json) {
  if (!r || !out_json) return set_error(CGRA_E_ARG, "null argument");
  nlohmann::json j;
  j["strategy"] = strategy_name(r->plan.strategy);
  j["params"] = {{"C", r->plan.params.C},   {"K", r->plan.params.K},
                 {"Ox", r->plan.params.Ox}, {"Oy", r->plan.params.Oy},
                 {"Fx", r->plan.params.Fx}, {"Fy", r->plan.params.Fy}};
  j["mac_count"] = r->metrics.mac_count;
  j["cycles"] = r->metrics.cycles;
  j["cgra_cycles"] = r->exec.report.total_cycles;
  j["mac_per_cycle"] = r->metrics.mac_per_cycle;
  j["utilization_main"] = r->metrics.utilization_main;
  j["utilization_border"] = r->metrics.utilization_border;
  j["utilization"] = r->metrics.utilization;
  j["footprint_bytes"] = r->metrics.footprint_bytes;
  j["loads"] = r->metrics.loads;
  j["stores"] = r->metrics.stores;
  j["conflict_cycles"] = r->metrics.conflict_cycles;
  j["launches"] = r->exec.launches;
  j["host_build_cycles"] = r->exec.host_build_cycles;
  j["oracle_match"] = r->oracle_ok;
  *out_json = dup_string(j.dump(2));
  return CGRA_OK;
}

int cgra_result_report_json(const cgra_result* r, char** out_json) {
  if (!r || !out_json) return set_error(CGRA_E_ARG, "null argument");
  *out_json = dup_string(r->exec.report.to_json());
  return CGRA_OK;
}

int cgra_result_save_output(const cgra_result* r, const char* path) {
  if (!r || !path) return set_error(CGRA_E_ARG, "null argument");
  try {
    save_tensor(path, r->exec.output);
    return CGRA_OK;
  } catch (const std::exception& e) {
    return set_error(CGRA_E_IO, e.what());
  }
}

int cgra_sweep(const char* strategies, const char* mode,
               long long mem_cap_bytes, const cgra_options* opts, int threads,
               const int* O_vals, int nO, const int* C_vals, int nC,
               const int* K_vals, int nK, const char* format,
               char** out_table) {
  if (!out_table) return set_error(CGRA_E_ARG, "null argument");
  SweepSpec spec = SweepSpec::defaults();
  uint32_t seed = 1;
  apply_options(opts, spec.timing, spec.host, seed);
  spec.seed = seed;
  if (threads > 0) spec.threads = threads;
  if (mem_cap_bytes > 0) spec.mem_cap_bytes = mem_cap_bytes;
  if (mode && std::string(mode) == "joint") spec.one_at_a_time = false;
  if (O_vals && nO > 0) spec.O_values.assign(O_vals, O_vals + nO);
  if (C_vals && nC > 0) spec.C_values.assign(C_vals, C_vals + nC);
  if (K_vals && nK > 0) spec.K_values.assign(K_vals, K_vals + nK);
  if (strategies) {
    spec.strategies.clear();
    std::stringstream ss(strategies);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      Strategy s;
      if (!strategy_from_name(tok, s))
        return set_error(CGRA_E_ARG, "unknown strategy: " + tok);
      spec.strategies.push_back(s);
    }
    if (spec.strategies.empty())
      return set_error(CGRA_E_ARG, "no strategies selected");
  }
  try {
    std::vector<SweepRow> rows = sweep(spec);
    bool json = format && std::string(format) == "json";
    *out_table = dup_string(json ? sweep_json(rows) : sweep_csv(rows));
    return CGRA_OK;
  } catch (const std::exception& e) {
    return set_error(CGRA_E_SIM, e.what());
  }
}

}  // extern "C"
