#include "doctest.h"

#include "cgraconv/bench.hpp"
#include "cgraconv/kernels.hpp"

using namespace cgraconv;

namespace {

constexpr Strategy kAllStrategies[] = {Strategy::WP, Strategy::IM2COL_IP,
                                       Strategy::CONV_OP, Strategy::IM2COL_OP};

ConvParams params(int C, int K, int O) {
  ConvParams p;
  p.C = C;
  p.K = K;
  p.Ox = p.Oy = O;
  return p;
}

ExecResult run_plan(Strategy s, const ConvParams& p, uint32_t seed = 1) {
  KernelPlan plan = generate(s, p);
  MachineConfig cfg;
  Tensor in = random_input(p, seed);
  Tensor wt = random_weights(p, seed + 1);
  return execute_plan(plan, cfg, in, wt, HostModel{});
}

void check_functional(Strategy s, const ConvParams& p, uint32_t seed = 1) {
  KernelPlan plan = generate(s, p);
  MachineConfig cfg;
  Tensor in = random_input(p, seed);
  Tensor wt = random_weights(p, seed + 1);
  ExecResult r = execute_plan(plan, cfg, in, wt, HostModel{});
  Tensor expect = conv2d_oracle(in, wt, p);
  REQUIRE_MESSAGE(r.output.data == expect.data,
                  "strategy=" << strategy_name(s) << " C=" << p.C
                              << " K=" << p.K << " O=" << p.Ox);
}

}  // namespace

TEST_CASE("trip count formulas at the baseline") {
  ConvParams p = params(16, 16, 16);
  auto wp = predicted_trip_counts(Strategy::WP, p);
  CHECK(wp.main_iters == 65536);
  CHECK(wp.border_iters == 4096);
  CHECK(wp.main_len == 4);
  CHECK(wp.border_len == 5);
  auto ip = predicted_trip_counts(Strategy::IM2COL_IP, p);
  CHECK(ip.main_iters == 36864);
  auto op = predicted_trip_counts(Strategy::CONV_OP, p);
  CHECK(op.main_iters == 36864);
  CHECK(predicted_trip_counts(Strategy::IM2COL_OP, p).main_iters == 36864);
}

TEST_CASE("ceiling rule at 17") {
  CHECK(predicted_trip_counts(Strategy::IM2COL_IP, params(17, 16, 16)).main_iters ==
        9LL * 16 * 16 * 16 * 2);
  CHECK(predicted_trip_counts(Strategy::CONV_OP, params(16, 17, 16)).main_iters ==
        9LL * 16 * 16 * 16 * 2);
}

TEST_CASE("degenerate single-pixel rows: every iteration is a border one") {
  ConvParams p = params(2, 2, 1);
  auto t = predicted_trip_counts(Strategy::WP, p);
  CHECK(t.main_iters == t.border_iters);
}

TEST_CASE("wp rejects non-3x3 filters") {
  ConvParams p = params(2, 2, 4);
  p.Fx = 5;
  CHECK_THROWS_WITH_AS(gen_conv_wp(p), doctest::Contains("3x3"), SimError);
}

TEST_CASE("generated programs pass validation and fit program memory") {
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP}) {
    KernelPlan plan = generate(s, params(17, 5, 4));
    CHECK(validate(plan.program).empty());
    CHECK(plan.program.length() <= 32);
  }
}

TEST_CASE("memory map regions are disjoint") {
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP}) {
    KernelPlan plan = generate(s, params(7, 9, 5));
    for (size_t i = 0; i < plan.mem_map.size(); ++i)
      for (size_t j = i + 1; j < plan.mem_map.size(); ++j) {
        const auto& a = plan.mem_map[i];
        const auto& b = plan.mem_map[j];
        bool disjoint = a.offset + a.words <= b.offset ||
                        b.offset + b.words <= a.offset;
        CHECK(disjoint);
      }
  }
}

TEST_CASE("wp structural roles") {
  KernelPlan plan = generate(Strategy::WP, params(2, 2, 4));
  // Locate the main region slots on PE(0,0).
  std::vector<int> main_slots;
  const auto& seq0 = plan.program.pe(0, 0);
  for (size_t i = 0; i < seq0.size(); ++i)
    if (seq0[i].region == "main") main_slots.push_back(static_cast<int>(i));
  REQUIRE(main_slots.size() == 4);

  int muls = 0, loader_loads = 0, stores = 0, reducer_adds = 0;
  for (int s : main_slots)
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        const auto& i = plan.program.pe(r, c)[s];
        if (i.opcode == Opcode::MUL && r < 3 && c < 3) ++muls;
        if ((i.opcode == Opcode::LWD || i.opcode == Opcode::LWI) && r == 3 && c < 3)
          ++loader_loads;
        if ((i.opcode == Opcode::SWI || i.opcode == Opcode::SWD) && r == 3 && c == 3)
          ++stores;
        if (i.opcode == Opcode::ADD && c == 3) ++reducer_adds;
      }
  CHECK(muls == 9);          // nine multipliers on the 3x3 sub-grid
  CHECK(loader_loads == 3);  // final row loads the input triplet
  CHECK(stores == 1);        // last PE stores the accumulated sum
  CHECK(reducer_adds >= 3);  // last column aggregates
}

TEST_CASE("loop structure lengths: wp 4+5, parallel inner 9") {
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP}) {
    KernelPlan plan = generate(s, params(3, 3, 4));
    std::map<std::string, int> region_len;
    for (const auto& i : plan.program.pe(0, 0))
      if (!i.region.empty()) region_len[i.region]++;
    if (s == Strategy::WP) {
      CHECK(region_len["main"] == 4);
      CHECK(region_len["border"] == 5);
    } else {
      CHECK(region_len["inner"] == 9);
    }
  }
}

TEST_CASE("functional equivalence with the oracle across strategies") {
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP}) {
    check_functional(s, params(2, 2, 4), 101);
    check_functional(s, params(1, 1, 4), 102);
    check_functional(s, params(3, 5, 5), 103);
  }
}

TEST_CASE("functional equivalence at the imbalance point") {
  check_functional(Strategy::IM2COL_IP, params(17, 2, 4), 7);
  check_functional(Strategy::CONV_OP, params(2, 17, 4), 7);
  check_functional(Strategy::IM2COL_OP, params(2, 17, 4), 7);
}

TEST_CASE("single-pixel outputs work on every strategy") {
  for (Strategy s : kAllStrategies) check_functional(s, params(2, 3, 1), 19);
}

TEST_CASE("im2col generators accept non-3x3 filters") {
  ConvParams p = params(2, 3, 4);
  p.Fx = 5;
  p.Fy = 4;
  for (Strategy s : {Strategy::IM2COL_IP, Strategy::IM2COL_OP})
    check_functional(s, p, 23);
}

TEST_CASE("simulated region counters equal the predictions") {
  for (Strategy s : {Strategy::WP, Strategy::IM2COL_IP, Strategy::CONV_OP,
                     Strategy::IM2COL_OP}) {
    for (ConvParams p : {params(2, 3, 4), params(17, 2, 4), params(2, 17, 4)}) {
      KernelPlan plan = generate(s, p);
      ExecResult r = run_plan(s, p);
      auto t = plan.predicted;
      if (s == Strategy::WP) {
        CHECK(r.report.per_region_slots.at("main") == t.main_iters * t.main_len);
        CHECK(r.report.per_region_slots.at("border") ==
              t.border_iters * t.border_len);
      } else {
        CHECK(r.report.per_region_slots.at("inner") == t.main_iters * t.main_len);
      }
    }
  }
}

TEST_CASE("host task schedules") {
  ConvParams p = params(16, 16, 16);
  SUBCASE("wp has no host tasks") {
    KernelPlan plan = generate(Strategy::WP, p);
    CHECK(plan.host_tasks.empty());
  }
  SUBCASE("ip rebuilds the patch for every output channel") {
    KernelPlan plan = generate(Strategy::IM2COL_IP, p);
    int64_t builds = 0, launches = 0;
    for (auto& t : plan.host_tasks) {
      if (t.kind == HostTask::IM2COL_BUILD) ++builds;
      if (t.kind == HostTask::LAUNCH) ++launches;
    }
    CHECK(builds == 4096);
    CHECK(launches == 4096);
  }
  SUBCASE("im2col-op builds once per spatial position") {
    KernelPlan plan = generate(Strategy::IM2COL_OP, p);
    int64_t builds = 0;
    for (auto& t : plan.host_tasks)
      if (t.kind == HostTask::IM2COL_BUILD) ++builds;
    CHECK(builds == 256);
  }
  SUBCASE("conv-op stores exactly one word per output element") {
    ExecResult r = run_plan(Strategy::CONV_OP, params(2, 16, 4));
    CHECK(r.report.stores == 16LL * 4 * 4);
  }
}

TEST_CASE("total latency composition") {
  ConvParams p = params(2, 2, 4);
  SUBCASE("no host tasks means report cycles only") {
    KernelPlan plan = generate(Strategy::WP, p);
    RunReport rep;
    rep.total_cycles = 12345;
    CHECK(total_latency(plan, rep, HostModel{}) == 12345);
  }
  SUBCASE("launch overhead accrues per launch") {
    KernelPlan plan = generate(Strategy::CONV_OP, p);
    int64_t launches = 0;
    for (auto& t : plan.host_tasks)
      if (t.kind == HostTask::LAUNCH) ++launches;
    RunReport rep;
    rep.total_cycles = 1000 * launches;
    HostModel host;
    CHECK(total_latency(plan, rep, host) ==
          rep.total_cycles + launches * host.launch_overhead_cycles);
  }
  SUBCASE("overlap hides all but the first build at realistic sizes") {
    KernelPlan plan = generate(Strategy::IM2COL_OP, p);
    int64_t launches = 0, builds = 0;
    for (auto& t : plan.host_tasks) {
      if (t.kind == HostTask::LAUNCH) ++launches;
      if (t.kind == HostTask::IM2COL_BUILD) ++builds;
    }
    HostModel host;
    int64_t per_launch = 10000;  // far larger than any build
    RunReport rep;
    rep.total_cycles = per_launch * launches;
    int64_t first_build = 2LL * 9 * p.C;
    CHECK(total_latency(plan, rep, host) ==
          rep.total_cycles + launches * host.launch_overhead_cycles +
              first_build);
  }
  SUBCASE("a hand-computed pipeline with a slow host") {
    // One build per launch, builds cost 180, launches 100 cgra cycles each:
    // every build after the first exposes 80 cycles.
    KernelPlan plan = generate(Strategy::IM2COL_IP, params(10, 1, 2));
    int64_t launches = 0, builds = 0;
    for (auto& t : plan.host_tasks) {
      if (t.kind == HostTask::LAUNCH) ++launches;
      if (t.kind == HostTask::IM2COL_BUILD) ++builds;
    }
    REQUIRE(launches == builds);
    HostModel host;
    host.im2col_cycles_per_word = 2;  // build = 2 * 90 = 180
    RunReport rep;
    rep.total_cycles = 100 * launches;
    int64_t expect = rep.total_cycles + launches * host.launch_overhead_cycles +
                     180 + (builds - 1) * 80;
    CHECK(total_latency(plan, rep, host) == expect);
  }
}

TEST_CASE("wp loads follow the closed-form count") {
  ConvParams p = params(2, 3, 4);
  ExecResult r = run_plan(Strategy::WP, p);
  // 4 loads per main iteration (triplet + running partial), 7 per border
  // (two triplets + the border reduction step's partial), 9 weights per
  // pass, one pipeline-tail load per pass.
  auto t = predicted_trip_counts(Strategy::WP, p);
  int64_t expect = 4 * t.main_iters + 7 * t.border_iters +
                   10LL * p.C * p.K;
  CHECK(r.report.loads == expect);
}
