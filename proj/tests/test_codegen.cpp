#include <doctest.h>

#include <functional>

#include "pimflow/codegen.hpp"
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

}  // namespace

TEST_CASE("iram estimate follows the node count") {
  auto k = binary(BinaryOp::Add, input(0), lit_i32(1));  // 3 nodes
  FusedPass pass;
  pass.elementwise.push_back(Stage::map(k));
  CHECK(iram_estimate({pass}) == kIramSkeletonBytes + kIramBytesPerNode * 3);

  FusedPass rp;
  rp.blocking = Stage::reduce(Reducer::sum(ScalarType::Int32));
  // step and combine are (in0 + in1): 3 nodes each
  CHECK(iram_estimate({rp}) == kIramSkeletonBytes + kIramBytesPerNode * 6);

  CHECK(iram_estimate({}) == kIramSkeletonBytes);
}

TEST_CASE("instantiation fills every template hole") {
  auto p = build({ScalarType::Int32, ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Add, input(0), input(1))),
                  Stage::reduce(Reducer::sum(ScalarType::Int32))});
  auto ep = plan(p, 4096, 8, PimMachineConfig{}, {});
  DpuProgram prog = instantiate_template(ep, p);

  CHECK(prog.n_streams == 2);
  CHECK(prog.stream_types[0] == ScalarType::Int32);
  CHECK(prog.stream_types[1] == ScalarType::Int32);
  CHECK(prog.tasklets == 16);
  CHECK(prog.tile_elems == ep.tiles.tile_elems);
  CHECK(prog.partial_reduce);
  CHECK_FALSE(prog.variable_output);
  CHECK(prog.plan_fingerprint == ep.fingerprint);
  CHECK(prog.iram_estimate > kIramSkeletonBytes);
  CHECK(prog.passes.size() == 1);
}

TEST_CASE("IramOverflow on a kernel too large for the instruction memory") {
  // 24 KiB budget and 16 bytes/node caps a program at 1408 nodes
  ExprPtr k = input(0);
  for (int i = 0; i < 710; ++i) k = binary(BinaryOp::Add, k, lit_i32(1));
  auto p = build({ScalarType::Int32}, {}, {Stage::map(k)});
  auto ep = plan(p, 64, 1, PimMachineConfig{}, {});
  CHECK(code_of([&] { instantiate_template(ep, p); }) == ErrorCode::IramOverflow);

  // the same kernel fits a machine with a larger IRAM
  PimMachineConfig big;
  big.iram_bytes = 64ull << 10;
  auto ep2 = plan(p, 64, 1, big, {});
  DpuProgram prog = instantiate_template(ep2, p);
  CHECK(prog.iram_estimate == kIramSkeletonBytes + kIramBytesPerNode * (1 + 710 * 2));
}

TEST_CASE("rendered source is deterministic and reflects the kernels") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Mul, input(0), lit_i32(3))),
                  Stage::filter(binary(BinaryOp::Gt, input(0), lit_i32(10)))});
  RunOptions opts;
  opts.dpus = 4;
  auto a = render_program_source(p, 1000, PimMachineConfig{}, opts);
  auto b = render_program_source(p, 1000, PimMachineConfig{}, opts);
  CHECK(a.text == b.text);
  CHECK(a.text.find("(in0 * 3i32)") != std::string::npos);
  CHECK(a.text.find("(in0 > 10i32)") != std::string::npos);
  CHECK(a.text.find("plan fingerprint: 0x") != std::string::npos);

  // a different pipeline renders differently
  auto q = build({ScalarType::Int32}, {},
                 {Stage::map(binary(BinaryOp::Mul, input(0), lit_i32(4)))});
  auto c = render_program_source(q, 1000, PimMachineConfig{}, opts);
  CHECK(a.text != c.text);
}

TEST_CASE("rendered source shows blocking stages") {
  auto p = build({ScalarType::Int32}, {},
                 {Stage::window(3, Reducer::sum(ScalarType::Int32))});
  RunOptions opts;
  opts.dpus = 2;
  auto s = render_program_source(p, 100, PimMachineConfig{}, opts);
  CHECK(s.text.find("window(3)") != std::string::npos);

  auto pr = build({ScalarType::Int32}, {},
                  {Stage::reduce(Reducer::sum(ScalarType::Int32))});
  auto sr = render_program_source(pr, 100, PimMachineConfig{}, opts);
  CHECK(sr.text.find("combine tasklet accumulators") != std::string::npos);
  CHECK(sr.text.find("per-dpu partial accumulator") != std::string::npos);
}
