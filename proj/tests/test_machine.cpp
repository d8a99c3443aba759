#include <doctest.h>

#include <functional>

#include "pimflow/machine.hpp"
#include "pimflow/runtime.hpp"

using namespace pimflow;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::ConfigError;
}

PimMachineConfig tiny_config(int ranks, int dpus_per_rank) {
  PimMachineConfig cfg;
  cfg.ranks = ranks;
  cfg.dpus_per_rank = dpus_per_rank;
  return cfg;
}

}  // namespace

TEST_CASE("value encoding roundtrips") {
  for (ScalarValue v : {ScalarValue(std::int32_t{-7}), ScalarValue(std::int64_t{1} << 40),
                        ScalarValue(3.25), ScalarValue(true), ScalarValue(false),
                        ScalarValue(std::int32_t{0x12345678})}) {
    std::vector<std::uint8_t> bytes;
    encode_value(v, bytes);
    CHECK(bytes.size() == scalar_type_bytes(v.type()));
    CHECK(decode_value(v.type(), bytes, 0) == v);
  }
  // little-endian layout
  std::vector<std::uint8_t> bytes;
  encode_value(ScalarValue(std::int32_t{0x12345678}), bytes);
  CHECK(bytes[0] == 0x78);
  CHECK(bytes[3] == 0x12);
}

TEST_CASE("push/pull roundtrip and byte counters") {
  PimMachine m(tiny_config(1, 4));
  std::vector<std::uint8_t> data{1, 2, 3, 4, 5, 6, 7, 8};
  m.push(2, 0, data);
  auto back = m.pull(2, 0, 8);
  CHECK(back == data);

  auto c = m.cost_report();
  CHECK(c.host_to_mram_bytes == 8);
  CHECK(c.mram_to_host_bytes == 8);
  CHECK(c.transfer_time == doctest::Approx(16.0));

  // unwritten mram reads back as zeros
  auto zeros = m.pull(1, 0, 16);
  CHECK(zeros == std::vector<std::uint8_t>(16, 0));
}

TEST_CASE("zero-byte transfers are free no-ops") {
  PimMachine m(tiny_config(1, 2));
  m.push(0, 0, {});
  m.pull(0, 0, 0);
  auto c = m.cost_report();
  CHECK(c.host_to_mram_bytes == 0);
  CHECK(c.mram_to_host_bytes == 0);
  CHECK(c.transfer_time == 0.0);
}

TEST_CASE("mram access is aligned and bounded") {
  PimMachineConfig cfg = tiny_config(1, 1);
  cfg.mram_bytes = 1024;
  PimMachine m(cfg);
  std::vector<std::uint8_t> data(8, 0);

  CHECK(code_of([&] { m.push(0, 4, data); }) == ErrorCode::BadAlignment);
  CHECK(code_of([&] { m.push(0, 1024, data); }) == ErrorCode::MramBounds);
  CHECK(code_of([&] { m.pull(0, 1020, 8); }) == ErrorCode::BadAlignment);
  CHECK(code_of([&] { m.pull(0, 1024, 8); }) == ErrorCode::MramBounds);
  CHECK(code_of([&] { m.pull(5, 0, 8); }) == ErrorCode::MramBounds);
  // last aligned word is fine
  m.push(0, 1016, data);
}

TEST_CASE("batch transfers are symmetric bursts") {
  // 2 ranks x 2 dpus; mixed sizes are all charged at the largest size
  PimMachine par(tiny_config(2, 2), true);
  PimMachine ser(tiny_config(2, 2), false);
  std::vector<PimMachine::PushOp> ops;
  ops.push_back({0, 0, std::vector<std::uint8_t>(8, 1)});
  ops.push_back({1, 0, std::vector<std::uint8_t>(16, 2)});
  ops.push_back({2, 0, std::vector<std::uint8_t>(8, 3)});
  auto ops2 = ops;
  par.push_batch(std::move(ops));
  ser.push_batch(std::move(ops2));

  // per-transfer slot = 16; rank0 carries 2 transfers, rank1 carries 1
  CHECK(par.cost_report().transfer_time == doctest::Approx(32.0));
  CHECK(ser.cost_report().transfer_time == doctest::Approx(48.0));
  // byte counters track the real payloads either way
  CHECK(par.cost_report().host_to_mram_bytes == 32);
  CHECK(ser.cost_report().host_to_mram_bytes == 32);
}

TEST_CASE("parallel transfer overlaps ranks exactly") {
  // equal per-rank load: serial time is exactly ranks x parallel time
  const int ranks = 20;
  PimMachine par(tiny_config(ranks, 1), true);
  PimMachine ser(tiny_config(ranks, 1), false);
  std::vector<PimMachine::PushOp> ops;
  for (int d = 0; d < ranks; ++d)
    ops.push_back({d, 0, std::vector<std::uint8_t>(8, 0)});
  auto ops2 = ops;
  par.push_batch(std::move(ops));
  ser.push_batch(std::move(ops2));
  CHECK(ser.cost_report().transfer_time ==
        doctest::Approx(ranks * par.cost_report().transfer_time));
}

TEST_CASE("launch rejects an oversized program estimate") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), lit_i32(1)))});
  auto ep = plan(p, 64, 2, PimMachineConfig{}, {});
  DpuProgram prog = instantiate_template(ep, p);
  prog.iram_estimate = PimMachineConfig{}.iram_bytes + 1;
  PimMachine m(PimMachineConfig{});
  CHECK(code_of([&] { m.launch(prog, ep); }) == ErrorCode::IramOverflow);
}

TEST_CASE("launch rejects a tile that outgrows wram") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), lit_i32(1)))});
  auto ep = plan(p, 64, 2, PimMachineConfig{}, {});
  DpuProgram prog = instantiate_template(ep, p);
  prog.tile_elems = 1 << 20;
  PimMachine m(PimMachineConfig{});
  CHECK(code_of([&] { m.launch(prog, ep); }) == ErrorCode::WramBounds);
}

TEST_CASE("wram tile view guards its bounds") {
  std::vector<Element> elems{{ScalarValue(std::int32_t{1}), 10},
                             {ScalarValue(std::int32_t{2}), 11}};
  WramTile tile(elems, 10);
  CHECK(tile.at(10).value.as_i32() == 1);
  CHECK(tile.at(11).value.as_i32() == 2);
  CHECK(code_of([&] { tile.at(9); }) == ErrorCode::WramBounds);
  CHECK(code_of([&] { tile.at(12); }) == ErrorCode::WramBounds);
}

TEST_CASE("machine config parses json with defaults") {
  auto cfg = PimMachineConfig::from_json_text("{}");
  CHECK(cfg.ranks == 20);
  CHECK(cfg.dpus_per_rank == 128);
  CHECK(cfg.total_dpus() == 2560);
  CHECK(cfg.mram_bytes == 64ull << 20);
  CHECK(cfg.wram_bytes == 64ull << 10);
  CHECK(cfg.iram_bytes == 24ull << 10);
  CHECK(cfg.tasklets == 16);

  auto cfg2 = PimMachineConfig::from_json_text(
      R"({"ranks": 2, "dpus_per_rank": 4, "tasklets": 8, "wram_bytes": 32768})");
  CHECK(cfg2.ranks == 2);
  CHECK(cfg2.total_dpus() == 8);
  CHECK(cfg2.tasklets == 8);
  CHECK(cfg2.wram_bytes == 32768);
  CHECK(cfg2.mram_bytes == 64ull << 20);  // untouched keys keep defaults

  CHECK(code_of([] { PimMachineConfig::from_json_text(R"({"rnaks": 2})"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { PimMachineConfig::from_json_text("not json"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { PimMachineConfig::from_json_text(R"({"ranks": 0})"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { PimMachineConfig::from_file("/nonexistent/machine.json"); }) ==
        ErrorCode::ConfigError);
}

TEST_CASE("rank mapping") {
  PimMachineConfig cfg;
  CHECK(cfg.rank_of(0) == 0);
  CHECK(cfg.rank_of(127) == 0);
  CHECK(cfg.rank_of(128) == 1);
  CHECK(cfg.rank_of(2559) == 19);
}
