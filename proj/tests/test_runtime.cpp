#include <doctest.h>

#include <functional>

#include "gen.hpp"
#include "pimflow/runtime.hpp"

using namespace pimflow;

namespace {

std::vector<ScalarValue> i32s(std::initializer_list<std::int32_t> xs) {
  std::vector<ScalarValue> out;
  for (auto x : xs) out.push_back(ScalarValue(x));
  return out;
}

std::vector<ScalarValue> iota_i32(std::int32_t from, std::int32_t count) {
  std::vector<ScalarValue> out;
  for (std::int32_t i = 0; i < count; ++i) out.push_back(ScalarValue(from + i));
  return out;
}

RunOptions with_dpus(int d) {
  RunOptions o;
  o.dpus = d;
  return o;
}

ExprPtr widen(ExprPtr e) {
  return unary(UnaryOp::FloatToInt, unary(UnaryOp::IntToFloat, std::move(e)));
}

}  // namespace

TEST_CASE("vecadd on two dpus") {
  auto p = build({ScalarType::Int32, ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), input(1)))});
  auto r = run(p, {i32s({1, 2}), i32s({3, 4})}, {}, PimMachineConfig{}, with_dpus(2));
  CHECK(r.output.is_stream);
  CHECK(r.output.values == i32s({4, 6}));
}

TEST_CASE("device reduce matches gauss") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(widen(input(0))),
                  Stage::reduce(Reducer::sum(ScalarType::Int64))});
  for (int dpus : {1, 7, 16, 100}) {
    CAPTURE(dpus);
    auto r = run(p, {iota_i32(1, 100)}, {}, PimMachineConfig{}, with_dpus(dpus));
    CHECK_FALSE(r.output.is_stream);
    REQUIRE(r.output.values.size() == 1);
    CHECK(r.output.values[0].as_i64() == 5050);
  }
}

TEST_CASE("filter keeps input order across dpus") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::filter(binary(BinaryOp::Eq,
                                       binary(BinaryOp::Mod, input(0), lit_i32(2)),
                                       lit_i32(0)))});
  auto expected = reference_execute(p, {iota_i32(0, 1000)}, {});
  for (int dpus : {1, 3, 7, 64}) {
    CAPTURE(dpus);
    auto r = run(p, {iota_i32(0, 1000)}, {}, PimMachineConfig{}, with_dpus(dpus));
    CHECK(r.output == expected);
  }
}

TEST_CASE("window and group match the oracle across dpus") {
  pftest::Rng rng(13);
  std::vector<ScalarValue> in;
  for (int i = 0; i < 500; ++i)
    in.push_back(ScalarValue(static_cast<std::int32_t>(rng.range(-99, 99))));

  auto pw = build({ScalarType::Int32}, {},
                  {Stage::window(4, Reducer::sum(ScalarType::Int32))});
  auto pg = build({ScalarType::Int32}, {},
                  {Stage::group(3, Reducer::sum(ScalarType::Int32))});
  for (const auto& p : {pw, pg}) {
    auto expected = reference_execute(p, {in}, {});
    for (int dpus : {1, 2, 9, 50, 500, 512}) {
      CAPTURE(dpus);
      auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(dpus));
      CHECK(r.output == expected);
    }
  }
}

TEST_CASE("sparse stream into host residue uses original indices") {
  // the window reducer reads each survivor's gidx: elements at odd original
  // positions are subtracted, so a renumbered index changes the answer
  Reducer signed_sum;
  signed_sum.acc = {ScalarType::Int32, 1, false};
  signed_sum.identity = {ScalarValue(std::int32_t{0})};
  signed_sum.step = select(
      binary(BinaryOp::Eq, binary(BinaryOp::Mod, global_index(), lit_i64(2)), lit_i64(0)),
      binary(BinaryOp::Add, input(0), input(1)),
      binary(BinaryOp::Sub, input(0), input(1)));
  signed_sum.combine = binary(BinaryOp::Add, input(0), input(1));
  auto p = build({ScalarType::Int32}, {},
                 {Stage::filter(binary(BinaryOp::Gt, input(0), lit_i32(0))),
                  Stage::window(2, signed_sum)});
  std::vector<ScalarValue> in = i32s({5, -1, 3, -2, -7, 8, 1, -9, 4, 2});
  auto expected = reference_execute(p, {in}, {});
  for (int dpus : {1, 2, 4, 10}) {
    CAPTURE(dpus);
    auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(dpus));
    CHECK(r.output == expected);
  }
}

TEST_CASE("broadcast buffers reach every dpu") {
  KernelEnv env;
  env.emplace("scale", BroadcastBuffer{ScalarType::Int32,
                                       i32s({2, 3, 5})});
  auto p = build({ScalarType::Int32}, {{"scale", ScalarType::Int32}},
                 {Stage::map(binary(BinaryOp::Mul, input(0),
                                    broadcast_load("scale",
                                                   binary(BinaryOp::Mod, global_index(),
                                                          lit_i64(3)))))});
  auto in = iota_i32(1, 100);
  auto expected = reference_execute(p, {in}, env);
  for (int dpus : {1, 4, 33}) {
    CAPTURE(dpus);
    auto r = run(p, {in}, env, PimMachineConfig{}, with_dpus(dpus));
    CHECK(r.output == expected);
  }
}

TEST_CASE("array accumulators combine across dpus") {
  Reducer hist;
  hist.acc = {ScalarType::Int64, 8, true};
  hist.identity.assign(8, ScalarValue(std::int64_t{0}));
  hist.step = binary(BinaryOp::Add, input(0), lit_i64(1));
  hist.combine = binary(BinaryOp::Add, input(0), input(1));
  hist.slot = binary(BinaryOp::Mod, input(0), lit_i32(8));
  auto p = build({ScalarType::Int32}, {}, {Stage::reduce(hist)});

  auto in = iota_i32(0, 320);
  auto expected = reference_execute(p, {in}, {});
  for (int dpus : {1, 5, 13}) {
    CAPTURE(dpus);
    auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(dpus));
    CHECK(r.output == expected);
    for (const auto& v : r.output.values) CHECK(v.as_i64() == 40);
  }
}

TEST_CASE("empty input never touches the device") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), lit_i32(1)))});
  auto r = run(p, {{}}, {}, PimMachineConfig{}, with_dpus(4));
  CHECK(r.output.values.empty());
  CHECK(r.counters.host_to_mram_bytes == 0);
  CHECK(r.counters.mram_to_host_bytes == 0);
  CHECK(r.counters.total_time() == 0.0);

  auto pr = build({ScalarType::Int32}, {},
                  {Stage::reduce(Reducer::sum(ScalarType::Int32))});
  auto rr = run(pr, {{}}, {}, PimMachineConfig{}, with_dpus(4));
  CHECK_FALSE(rr.output.is_stream);
  CHECK(rr.output.values[0].as_i32() == 0);
}

TEST_CASE("byte conservation for a fixed-size map") {
  auto p = build({ScalarType::Int32, ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), input(1)))});
  std::vector<ScalarValue> a = iota_i32(0, 1024), b = iota_i32(0, 1024);
  auto r = run(p, {a, b}, {}, PimMachineConfig{}, with_dpus(4));
  // 2 streams x 1024 int32 in, 1024 int32 out
  CHECK(r.counters.host_to_mram_bytes == 8192);
  CHECK(r.counters.mram_to_host_bytes == 4096);
}

TEST_CASE("variable outputs pull only the survivors plus count words") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::filter(binary(BinaryOp::Lt, input(0), lit_i32(10)))});
  auto in = iota_i32(0, 100);  // 10 survivors
  auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(4));
  CHECK(r.output.values.size() == 10);
  CHECK(r.counters.host_to_mram_bytes == 400);
  // 4 count words + 10 int32 survivors
  CHECK(r.counters.mram_to_host_bytes == 4 * 8 + 10 * 4);
}

TEST_CASE("optimization toggles never change the output") {
  pftest::Rng rng(60606);
  for (int i = 0; i < 120; ++i) {
    auto rc = pftest::gen_case(rng, 200);
    auto expected = reference_execute(rc.pipeline, rc.inputs, rc.env);
    int dpus = static_cast<int>(rng.range(1, 40));
    PipelineOutput first;
    bool have_first = false;
    for (bool par : {true, false}) {
      for (bool split : {true, false}) {
        RunOptions o;
        o.parallel_transfer = par;
        o.cpu_split = split;
        o.dpus = dpus;
        auto r = run(rc.pipeline, rc.inputs, rc.env, PimMachineConfig{}, o);
        CHECK(r.output == expected);
        if (!have_first) {
          first = r.output;
          have_first = true;
        } else {
          CHECK(r.output == first);
        }
      }
    }
  }
}

TEST_CASE("tasklet count does not change results") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Mul, input(0), lit_i32(3))),
                  Stage::reduce(Reducer::sum(ScalarType::Int32))});
  auto in = iota_i32(1, 997);
  auto expected = reference_execute(p, {in}, {});
  for (int tasklets : {1, 2, 8, 16}) {
    CAPTURE(tasklets);
    PimMachineConfig cfg;
    cfg.tasklets = tasklets;
    auto r = run(p, {in}, {}, cfg, with_dpus(6));
    CHECK(r.output == expected);
  }
}

TEST_CASE("float reduce agrees with the oracle within tolerance") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(unary(UnaryOp::IntToFloat, input(0))),
                  Stage::reduce(Reducer::sum(ScalarType::Float64))});
  auto in = iota_i32(1, 10000);
  auto expected = reference_execute(p, {in}, {});
  auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(13));
  REQUIRE(r.output.values.size() == 1);
  CHECK(r.output.values[0].as_f64() ==
        doctest::Approx(expected.values[0].as_f64()).epsilon(1e-12));
}

TEST_CASE("kernel runtime errors carry dpu coordinates") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Div, lit_i32(100), input(0)))});
  std::vector<ScalarValue> in = iota_i32(1, 50);
  in[37] = ScalarValue(std::int32_t{0});
  try {
    run(p, {in}, {}, PimMachineConfig{}, with_dpus(4));
    FAIL("expected RuntimeDivisionByZero");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RuntimeDivisionByZero);
    CHECK(std::string(e.what()).find("dpu") != std::string::npos);
    CHECK(std::string(e.what()).find("element 37") != std::string::npos);
  }
}

TEST_CASE("gather rejects a corrupt survivor count") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::filter(binary(BinaryOp::Gt, input(0), lit_i32(2)))});
  auto in = iota_i32(0, 8);
  auto ep = plan(p, 8, 1, PimMachineConfig{}, {});
  DpuProgram prog = instantiate_template(ep, p);
  PimMachine machine(PimMachineConfig{});

  std::vector<std::uint8_t> bytes;
  for (const auto& v : in) encode_value(v, bytes);
  machine.push(0, ep.layouts[0].inputs[0].offset, bytes);
  machine.launch(prog, ep);

  // overwrite the count word past the region capacity
  std::vector<std::uint8_t> bogus;
  encode_value(ScalarValue(std::int64_t{99}), bogus);
  machine.push(0, ep.layouts[0].count_word.offset, bogus);
  bool threw = false;
  try {
    gather_filtered(machine, ep, ScalarType::Int32, false);
  } catch (const Error& e) {
    threw = true;
    CHECK(e.code() == ErrorCode::CountExceedsRegion);
  }
  CHECK(threw);
}

TEST_CASE("dpu count bounds") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), lit_i32(1)))});
  auto in = iota_i32(0, 8);
  for (int bad : {0, -2, 2561}) {
    CAPTURE(bad);
    bool threw = false;
    try {
      RunOptions o;
      o.dpus = bad;
      if (bad < 0) o.dpus = 2561;  // -1 means "all", so probe the upper bound
      run(p, {in}, {}, PimMachineConfig{}, o);
    } catch (const Error& e) {
      threw = true;
      CHECK(e.code() == ErrorCode::ConfigError);
    }
    CHECK(threw);
  }
  // -1 resolves to every configured dpu
  auto r = run(p, {in}, {}, PimMachineConfig{}, RunOptions{});
  CHECK(r.output.values.size() == 8);
}

TEST_CASE("more dpus than elements leaves trailing dpus idle") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Mul, input(0), lit_i32(2)))});
  auto in = iota_i32(1, 3);
  auto r = run(p, {in}, {}, PimMachineConfig{}, with_dpus(2560));
  CHECK(r.output.values == i32s({2, 4, 6}));
  CHECK(r.counters.host_to_mram_bytes == 12);  // only 3 dpus got data
}

TEST_CASE("cost counters are deterministic") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), lit_i32(5))),
                  Stage::reduce(Reducer::sum(ScalarType::Int32))});
  auto in = iota_i32(0, 5000);
  auto a = run(p, {in}, {}, PimMachineConfig{}, with_dpus(32));
  auto b = run(p, {in}, {}, PimMachineConfig{}, with_dpus(32));
  CHECK(a.counters == b.counters);
  CHECK(a.plan_fingerprint == b.plan_fingerprint);
  CHECK(a.counters.kernel_ops > 0);
  CHECK(a.counters.dma_bytes > 0);
}
