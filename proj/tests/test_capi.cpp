#include "doctest.h"

#include <cstring>
#include <string>

#include "cgraconv/cgraconv.h"

namespace {

struct Str {
  char* p = nullptr;
  ~Str() { cgra_string_free(p); }
  std::string s() const { return p ? std::string(p) : std::string(); }
};

}  // namespace

TEST_CASE("plan create/asm/json through the C surface") {
  cgra_plan* plan = nullptr;
  REQUIRE(cgra_plan_create("wp", 2, 2, 4, 4, 3, 3, &plan) == CGRA_OK);
  Str text, json;
  CHECK(cgra_plan_asm(plan, &text.p) == CGRA_OK);
  CHECK(text.s().find("pe 0 0") != std::string::npos);
  CHECK(cgra_plan_json(plan, &json.p) == CGRA_OK);
  CHECK(json.s().find("\"strategy\": \"wp\"") != std::string::npos);
  cgra_plan_destroy(plan);
}

TEST_CASE("unknown strategy is an argument error") {
  cgra_plan* plan = nullptr;
  CHECK(cgra_plan_create("zigzag", 2, 2, 4, 4, 3, 3, &plan) == CGRA_E_ARG);
  CHECK(std::string(cgra_last_error()).find("zigzag") != std::string::npos);
}

TEST_CASE("assembler canonicalization and validation") {
  Str canon;
  REQUIRE(cgra_asm_canonicalize("pe 0 0\n MUL OUT, RF0, RF1\n", &canon.p) ==
          CGRA_OK);
  CHECK(canon.s().find("mul out, rf0, rf1") != std::string::npos);

  Str v;
  REQUIRE(cgra_asm_validate("pe 0 0\nbne rf0, zero, 40\n", &v.p) == CGRA_OK);
  CHECK(v.s().find("branch target") != std::string::npos);

  Str bad;
  CHECK(cgra_asm_validate("pe 0 0\nbogus\n", &bad.p) == CGRA_E_PARSE);
}

TEST_CASE("end-to-end run verifies against the oracle") {
  cgra_result* res = nullptr;
  cgra_options opts{};
  opts.seed = 5;
  REQUIRE(cgra_run("im2col-op", 2, 3, 4, 4, 3, 3, &opts, nullptr, nullptr,
                   &res) == CGRA_OK);
  CHECK(cgra_result_matches_oracle(res) == 1);
  Str metrics, report;
  CHECK(cgra_result_metrics_json(res, &metrics.p) == CGRA_OK);
  CHECK(metrics.s().find("\"mac_per_cycle\"") != std::string::npos);
  CHECK(cgra_result_report_json(res, &report.p) == CGRA_OK);
  CHECK(report.s().find("\"total_cycles\"") != std::string::npos);
  CHECK(cgra_result_save_output(res, "capi_output.tensor") == CGRA_OK);
  cgra_result_destroy(res);
}

TEST_CASE("wp with a non-3x3 filter reports the precondition") {
  cgra_result* res = nullptr;
  int rc = cgra_run("wp", 2, 2, 4, 4, 5, 3, nullptr, nullptr, nullptr, &res);
  CHECK(rc != CGRA_OK);
  CHECK(std::string(cgra_last_error()).find("3x3") != std::string::npos);
}

TEST_CASE("single-point sweep through the C surface") {
  int O[] = {4};
  int C[] = {2};
  int K[] = {2};
  Str table;
  REQUIRE(cgra_sweep(nullptr, "joint", 0, nullptr, 2, O, 1, C, 1, K, 1, "csv",
                     &table.p) == CGRA_OK);
  std::string s = table.s();
  CHECK(s.find("strategy,C,K,Ox,Oy") != std::string::npos);
  size_t lines = 0;
  for (char ch : s)
    if (ch == '\n') ++lines;
  CHECK(lines == 5);  // header + 4 strategies
}
