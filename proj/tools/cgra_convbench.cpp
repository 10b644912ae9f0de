// Command-line frontend for the CGRA convolution benchmark. Talks to the
// core exclusively through the shared-library C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgraconv/cgraconv.h"

namespace {

struct Freed {
  char* p = nullptr;
  ~Freed() { cgra_string_free(p); }
};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path);
}

void print_error_json(const std::string& stage, const std::string& message) {
  std::cerr << "{\"error\":{\"stage\":\"" << stage << "\",\"message\":\""
            << message << "\"}}\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cgra-convbench: convolution mapping experiments on a 4x4 CGRA"};
  app.require_subcommand(1);

  std::string strategy = "wp";
  int C = 16, K = 16, Ox = 16, Oy = 16, Fx = 3, Fy = 3;
  long long mem_lat = 0, host_cpw = 0, launch_ovh = 0;
  unsigned seed = 1;
  std::string out_dir = ".";
  std::string format = "csv";
  bool dump_asm = false;
  std::string input_path, weights_path;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--strategy", strategy,
                    "wp|im2col-ip|conv-op|im2col-op")
        ->default_val("wp");
    cmd->add_option("--C", C, "input channels")->default_val(16);
    cmd->add_option("--K", K, "output channels")->default_val(16);
    cmd->add_option("--Ox", Ox, "output rows")->default_val(16);
    cmd->add_option("--Oy", Oy, "output cols")->default_val(16);
    cmd->add_option("--Fx", Fx, "filter rows")->default_val(3);
    cmd->add_option("--Fy", Fy, "filter cols")->default_val(3);
    cmd->add_option("--mem-lat", mem_lat, "memory port latency (cycles)");
    cmd->add_option("--host-im2col-cpw", host_cpw,
                    "host im2col cycles per word");
    cmd->add_option("--launch-overhead", launch_ovh,
                    "host cycles per kernel launch");
    cmd->add_option("--seed", seed, "random tensor seed")->default_val(1);
    cmd->add_option("--out", out_dir, "output directory")->default_val(".");
  };

  auto* run = app.add_subcommand("run",
                                 "generate, simulate and verify one layer");
  add_common(run);
  run->add_flag("--dump-asm", dump_asm, "write the generated assembly");
  run->add_option("--input", input_path, "input tensor file (chw or hwc)");
  run->add_option("--weights", weights_path, "weight tensor file (kcff)");

  auto* sweep = app.add_subcommand("sweep", "hyperparameter sweep table");
  add_common(sweep);
  std::string strategies = "wp,im2col-ip,conv-op,im2col-op";
  std::string mode = "oat";
  long long mem_cap = 512 * 1024;
  int threads = 0;
  std::vector<int> O_vals, C_vals, K_vals;
  sweep->add_option("--strategies", strategies, "comma-separated subset");
  sweep->add_option("--mode", mode, "joint|oat")->default_val("oat");
  sweep->add_option("--mem-cap", mem_cap, "memory cap in bytes")
      ->default_val(512 * 1024);
  sweep->add_option("--threads", threads, "sweep parallelism cap");
  sweep->add_option("--O-values", O_vals, "explicit Ox=Oy values");
  sweep->add_option("--C-values", C_vals, "explicit C values");
  sweep->add_option("--K-values", K_vals, "explicit K values");
  sweep->add_option("--format", format, "csv|json")->default_val("csv");

  auto* validate = app.add_subcommand("validate",
                                      "check an assembly file against the "
                                      "architecture limits");
  std::string asm_path;
  validate->add_option("file", asm_path, "assembly source")->required();

  CLI11_PARSE(app, argc, argv);

  cgra_options opts{};
  opts.mem_lat = mem_lat;
  opts.host_im2col_cpw = host_cpw;
  opts.launch_overhead = launch_ovh;
  opts.seed = seed;

  if (run->parsed()) {
    cgra_result* res = nullptr;
    int rc = cgra_run(strategy.c_str(), C, K, Ox, Oy, Fx, Fy, &opts,
                      input_path.empty() ? nullptr : input_path.c_str(),
                      weights_path.empty() ? nullptr : weights_path.c_str(),
                      &res);
    if (rc != CGRA_OK) {
      print_error_json("run", cgra_last_error());
      return 2;
    }
    bool ok = cgra_result_matches_oracle(res) != 0;
    if (!ok) {
      // A kernel that fails verification gets no metrics.
      cgra_result_destroy(res);
      print_error_json("verify", "simulated output differs from the oracle");
      return 1;
    }
    Freed metrics;
    cgra_result_metrics_json(res, &metrics.p);
    try {
      write_file(out_dir + "/metrics.json", metrics.p);
      cgra_result_save_output(res, (out_dir + "/output.tensor").c_str());
      if (dump_asm) {
        cgra_plan* plan = nullptr;
        if (cgra_plan_create(strategy.c_str(), C, K, Ox, Oy, Fx, Fy, &plan) ==
            CGRA_OK) {
          Freed text;
          cgra_plan_asm(plan, &text.p);
          write_file(out_dir + "/kernel.asm", text.p);
          cgra_plan_destroy(plan);
        }
      }
    } catch (const std::exception& e) {
      print_error_json("io", e.what());
      cgra_result_destroy(res);
      return 2;
    }
    std::cout << metrics.p << "\n";
    cgra_result_destroy(res);
    return 0;
  }

  if (sweep->parsed()) {
    Freed table;
    int rc = cgra_sweep(
        strategies.c_str(), mode.c_str(), mem_cap, &opts, threads,
        O_vals.empty() ? nullptr : O_vals.data(), static_cast<int>(O_vals.size()),
        C_vals.empty() ? nullptr : C_vals.data(), static_cast<int>(C_vals.size()),
        K_vals.empty() ? nullptr : K_vals.data(), static_cast<int>(K_vals.size()),
        format.c_str(), &table.p);
    if (rc != CGRA_OK) {
      print_error_json("sweep", cgra_last_error());
      return 2;
    }
    std::string name = (format == "json") ? "sweep.json" : "sweep.csv";
    try {
      write_file(out_dir + "/" + name, table.p);
    } catch (const std::exception& e) {
      print_error_json("io", e.what());
      return 2;
    }
    std::cout << table.p;
    return 0;
  }

  if (validate->parsed()) {
    std::ifstream in(asm_path, std::ios::binary);
    if (!in) {
      print_error_json("io", "cannot open " + asm_path);
      return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    Freed violations;
    int rc = cgra_asm_validate(ss.str().c_str(), &violations.p);
    if (rc != CGRA_OK) {
      print_error_json("parse", cgra_last_error());
      return 2;
    }
    if (violations.p[0] == '\0') {
      std::cout << "ok\n";
      return 0;
    }
    std::cout << violations.p;
    return 1;
  }
  return 0;
}
