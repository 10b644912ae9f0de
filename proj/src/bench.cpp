#include "cgraconv/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace cgraconv {

Metrics compute_metrics(const KernelPlan& plan, const RunReport& report,
                        const ConvParams& p, const HostModel& host) {
  Metrics m;
  m.mac_count = p.macs();
  m.cycles = total_latency(plan, report, host);
  if (m.cycles > 0)
    m.mac_per_cycle = static_cast<double>(m.mac_count) /
                      static_cast<double>(m.cycles);
  for (const auto& [region, slots] : report.per_region_slots) {
    (void)slots;
    m.utilization[region] = report.utilization(region);
  }
  if (plan.strategy == Strategy::WP) {
    m.utilization_main = report.utilization("main");
    m.utilization_border = report.utilization("border");
  } else {
    m.utilization_main = report.utilization("inner");
    m.utilization_border = 0.0;
  }
  m.footprint_bytes = footprint_bytes(p, plan.strategy);
  m.loads = report.loads;
  m.stores = report.stores;
  m.conflict_cycles = report.port_conflict_extra_cycles;
  return m;
}

std::vector<int> SweepSpec::default_steps(int lo, int hi) {
  std::vector<int> v;
  for (int x = lo; x <= std::min(hi, 32); ++x) v.push_back(x);
  for (int x = 48; x <= hi; x += 16) v.push_back(x);
  return v;
}

SweepSpec SweepSpec::defaults() {
  SweepSpec s;
  s.O_values = default_steps(16, 64);
  s.C_values = default_steps(16, 144);
  s.K_values = default_steps(16, 144);
  return s;
}

Tensor random_input(const ConvParams& p, uint32_t seed) {
  Tensor t = Tensor::chw(p.C, p.Ix(), p.Iy());
  uint32_t s = seed * 2654435761u + 12345u;
  for (auto& w : t.data) {
    s = s * 1664525u + 1013904223u;
    w = static_cast<uint32_t>(static_cast<int32_t>((s >> 16) % 256) - 128);
  }
  return t;
}

Tensor random_weights(const ConvParams& p, uint32_t seed) {
  Tensor t = Tensor::kcff(p.K, p.C, p.Fx, p.Fy);
  uint32_t s = seed * 2246822519u + 777u;
  for (auto& w : t.data) {
    s = s * 1664525u + 1013904223u;
    w = static_cast<uint32_t>(static_cast<int32_t>((s >> 16) % 256) - 128);
  }
  return t;
}

int sweep_thread_cap() {
  if (const char* env = std::getenv("CGRA_CONVBENCH_THREADS")) {
    int v = std::atoi(env);
    if (v >= 1) return v;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

namespace {

struct Point {
  ConvParams p;
};

bool params_less(const ConvParams& a, const ConvParams& b) {
  auto ta = std::array<int, 4>{a.C, a.K, a.Ox, a.Oy};
  auto tb = std::array<int, 4>{b.C, b.K, b.Ox, b.Oy};
  return ta < tb;
}

}  // namespace

std::vector<SweepRow> sweep(const SweepSpec& spec) {
  std::vector<ConvParams> points;
  auto add = [&](ConvParams p) {
    for (const auto& q : points)
      if (q.C == p.C && q.K == p.K && q.Ox == p.Ox && q.Oy == p.Oy) return;
    points.push_back(p);
  };
  if (spec.one_at_a_time) {
    add(spec.baseline);
    for (int o : spec.O_values) {
      ConvParams p = spec.baseline;
      p.Ox = p.Oy = o;
      add(p);
    }
    for (int c : spec.C_values) {
      ConvParams p = spec.baseline;
      p.C = c;
      add(p);
    }
    for (int k : spec.K_values) {
      ConvParams p = spec.baseline;
      p.K = k;
      add(p);
    }
  } else {
    for (int o : spec.O_values)
      for (int c : spec.C_values)
        for (int k : spec.K_values) {
          ConvParams p = spec.baseline;
          p.Ox = p.Oy = o;
          p.C = c;
          p.K = k;
          add(p);
        }
  }
  std::sort(points.begin(), points.end(), params_less);

  std::vector<SweepRow> rows(points.size() * spec.strategies.size());
  for (size_t i = 0; i < points.size(); ++i)
    for (size_t s = 0; s < spec.strategies.size(); ++s) {
      auto& row = rows[i * spec.strategies.size() + s];
      row.params = points[i];
      row.strategy = spec.strategies[s];
    }

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      size_t idx = next.fetch_add(1);
      if (idx >= rows.size()) return;
      SweepRow& row = rows[idx];
      int64_t fp = footprint_bytes(row.params, row.strategy);
      if (fp > spec.mem_cap_bytes) {
        row.skipped = true;
        row.skip_reason = "memory cap";
        row.metrics.footprint_bytes = fp;
        row.metrics.mac_count = row.params.macs();
        continue;
      }
      KernelPlan plan = generate(row.strategy, row.params);
      MachineConfig cfg;
      cfg.timing = spec.timing;
      Tensor in = random_input(row.params, spec.seed);
      Tensor wt = random_weights(row.params, spec.seed + 1);
      ExecResult r = execute_plan(plan, cfg, in, wt, spec.host);
      row.metrics = compute_metrics(plan, r.report, row.params, spec.host);
    }
  };

  int n_threads = spec.threads > 0 ? spec.threads : sweep_thread_cap();
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(rows.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  pareto_front(rows);
  return rows;
}

void pareto_front(std::vector<SweepRow>& rows) {
  for (auto& a : rows) {
    if (a.skipped) {
      a.pareto = false;
      continue;
    }
    bool dominated = false;
    for (const auto& b : rows) {
      if (&a == &b || b.skipped) continue;
      bool le = b.metrics.footprint_bytes <= a.metrics.footprint_bytes;
      bool ge = b.metrics.mac_per_cycle >= a.metrics.mac_per_cycle;
      bool strict = b.metrics.footprint_bytes < a.metrics.footprint_bytes ||
                    b.metrics.mac_per_cycle > a.metrics.mac_per_cycle;
      if (le && ge && strict) {
        dominated = true;
        break;
      }
    }
    a.pareto = !dominated;
  }
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "strategy,C,K,Ox,Oy,Fx,Fy,mac_count,cycles,mac_per_cycle,"
         "utilization_main,utilization_border,footprint_bytes,loads,stores,"
         "conflict_cycles,skipped\n";
  for (const auto& r : rows) {
    out << strategy_name(r.strategy) << "," << r.params.C << "," << r.params.K
        << "," << r.params.Ox << "," << r.params.Oy << "," << r.params.Fx
        << "," << r.params.Fy << "," << r.metrics.mac_count << ","
        << r.metrics.cycles << "," << r.metrics.mac_per_cycle << ","
        << r.metrics.utilization_main << "," << r.metrics.utilization_border
        << "," << r.metrics.footprint_bytes << "," << r.metrics.loads << ","
        << r.metrics.stores << "," << r.metrics.conflict_cycles << ","
        << (r.skipped ? r.skip_reason : "") << "\n";
  }
  return out.str();
}

std::string sweep_json(const std::vector<SweepRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["strategy"] = strategy_name(r.strategy);
    j["C"] = r.params.C;
    j["K"] = r.params.K;
    j["Ox"] = r.params.Ox;
    j["Oy"] = r.params.Oy;
    j["Fx"] = r.params.Fx;
    j["Fy"] = r.params.Fy;
    j["mac_count"] = r.metrics.mac_count;
    j["cycles"] = r.metrics.cycles;
    j["mac_per_cycle"] = r.metrics.mac_per_cycle;
    j["utilization_main"] = r.metrics.utilization_main;
    j["utilization_border"] = r.metrics.utilization_border;
    j["footprint_bytes"] = r.metrics.footprint_bytes;
    j["loads"] = r.metrics.loads;
    j["stores"] = r.metrics.stores;
    j["conflict_cycles"] = r.metrics.conflict_cycles;
    j["skipped"] = r.skipped ? r.skip_reason : "";
    j["pareto"] = r.pareto;
    arr.push_back(std::move(j));
  }
  return arr.dump(2);
}

}  // namespace cgraconv
