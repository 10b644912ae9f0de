#include <chrono>
#include <cstdio>
#include <cstring>

#include "cgraconv/bench.hpp"

using namespace cgraconv;

static void probe(Strategy s, int C, int K, int O) {
  ConvParams p;
  p.C = C;
  p.K = K;
  p.Ox = p.Oy = O;
  auto t0 = std::chrono::steady_clock::now();
  KernelPlan plan = generate(s, p);
  MachineConfig cfg;
  Tensor in = random_input(p, 1);
  Tensor wt = random_weights(p, 2);
  ExecResult r = execute_plan(plan, cfg, in, wt, HostModel{});
  Tensor expect = conv2d_oracle(in, wt, p);
  bool ok = expect.data == r.output.data;
  Metrics m = compute_metrics(plan, r.report, p, HostModel{});
  auto t1 = std::chrono::steady_clock::now();
  double secs = std::chrono::duration<double>(t1 - t0).count();
  printf(
      "%-10s C=%-3d K=%-3d O=%-3d mac/cyc=%.4f util_main=%.4f util_border=%.4f "
      "cycles=%lld cgra=%lld loads=%lld stores=%lld %s (%.2fs)\n",
      strategy_name(s), C, K, O, m.mac_per_cycle, m.utilization_main,
      m.utilization_border, (long long)m.cycles,
      (long long)r.report.total_cycles, (long long)m.loads,
      (long long)m.stores, ok ? "OK" : "MISMATCH", secs);
}

int main(int argc, char** argv) {
  if (argc >= 5) {
    Strategy s;
    if (!strategy_from_name(argv[1], s)) return 2;
    probe(s, atoi(argv[2]), atoi(argv[3]), atoi(argv[4]));
    return 0;
  }
  // calibration point
  probe(Strategy::WP, 16, 16, 64);
  // baseline
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP})
    probe(s, 16, 16, 16);
  // imbalance dips
  probe(Strategy::IM2COL_IP, 17, 16, 16);
  probe(Strategy::CONV_OP, 16, 17, 16);
  probe(Strategy::IM2COL_OP, 16, 17, 16);
  // best-ish points
  probe(Strategy::IM2COL_OP, 64, 16, 16);
  probe(Strategy::IM2COL_OP, 64, 64, 16);
  probe(Strategy::WP, 16, 16, 32);
  return 0;
}
