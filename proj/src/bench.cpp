#include "pimflow/bench.hpp"

#include <chrono>
#include <random>

#include <json.hpp>

namespace pimflow {

PipelineBuilder& PipelineBuilder::input(ScalarType t) {
  inputs_.push_back(t);
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::broadcast(const std::string& name, ScalarType t) {
  broadcasts_.emplace(name, t);
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::map(ExprPtr f) {
  stages_.push_back(Stage::map(std::move(f)));
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::filter(ExprPtr p) {
  stages_.push_back(Stage::filter(std::move(p)));
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::reduce(Reducer r) {
  stages_.push_back(Stage::reduce(std::move(r)));
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::window(std::size_t w, Reducer r) {
  stages_.push_back(Stage::window(w, std::move(r)));
  ++statements_;
  return *this;
}

PipelineBuilder& PipelineBuilder::group(std::size_t g, Reducer r) {
  stages_.push_back(Stage::group(g, std::move(r)));
  ++statements_;
  return *this;
}

Pipeline PipelineBuilder::done() {
  ++statements_;
  return build(inputs_, broadcasts_, stages_);
}

const char* const kWorkloadNames[6] = {"vecadd", "select", "reduce",
                                       "unique", "histogram", "gemv"};

namespace {

// widen Int32 -> Int64 via the float domain; exact for 32-bit magnitudes
ExprPtr widen_i32(ExprPtr e) {
  return unary(UnaryOp::FloatToInt, unary(UnaryOp::IntToFloat, std::move(e)));
}

// splitmix64, so input streams do not depend on a library's distribution impl
struct SeededGen {
  std::uint64_t state;
  explicit SeededGen(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::int64_t in_range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(next() % static_cast<std::uint64_t>(hi - lo + 1));
  }
};

std::vector<ScalarValue> gen_i32(SeededGen& g, std::int64_t n, std::int64_t lo,
                                 std::int64_t hi) {
  std::vector<ScalarValue> v;
  v.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    v.push_back(ScalarValue(static_cast<std::int32_t>(g.in_range(lo, hi))));
  return v;
}

std::vector<ScalarValue> gen_i64(SeededGen& g, std::int64_t n, std::int64_t lo,
                                 std::int64_t hi) {
  std::vector<ScalarValue> v;
  v.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) v.push_back(ScalarValue(g.in_range(lo, hi)));
  return v;
}

std::int64_t derive_cols(std::int64_t n) {
  if (n <= 0) return 1;
  std::int64_t best = 1;
  for (std::int64_t c = 1; c <= 64 && c <= n; ++c)
    if (n % c == 0) best = c;
  return best;
}

constexpr std::int64_t kPack = 4294967296ll;  // 2^32

}  // namespace

Workload build_workload(const WorkloadSpec& spec) {
  if (spec.n < 0) fail(ErrorCode::BadSpec, "size must be >= 0");
  Workload w;
  SeededGen gen(spec.seed ^ fnv1a64(spec.name));
  PipelineBuilder b;

  if (spec.name == "vecadd") {
    w.pipeline = b.input(ScalarType::Int32)
                     .input(ScalarType::Int32)
                     .map(binary(BinaryOp::Add, input(0), input(1)))
                     .done();
    w.inputs.push_back(gen_i32(gen, spec.n, -1000, 1000));
    w.inputs.push_back(gen_i32(gen, spec.n, -1000, 1000));
  } else if (spec.name == "select") {
    w.pipeline = b.input(ScalarType::Int32)
                     .filter(binary(BinaryOp::Eq,
                                    binary(BinaryOp::Mod, input(0), lit_i32(2)),
                                    lit_i32(0)))
                     .done();
    w.inputs.push_back(gen_i32(gen, spec.n, -1000, 1000));
  } else if (spec.name == "reduce") {
    w.pipeline = b.input(ScalarType::Int32)
                     .map(widen_i32(input(0)))
                     .reduce(Reducer::sum(ScalarType::Int64))
                     .done();
    w.inputs.push_back(gen_i32(gen, spec.n, -1000, 1000));
  } else if (spec.name == "unique") {
    // consecutive-duplicate removal: window(2) packs (prev, cur) into one
    // i64, the filter keeps changed pairs, the map extracts cur; the first
    // element is prepended on the host
    Reducer pack;
    pack.acc = {ScalarType::Int64, 1, false};
    pack.identity = {ScalarValue(std::int64_t{0})};
    pack.step = binary(BinaryOp::Add,
                       binary(BinaryOp::Mul, input(0), lit_i64(kPack)),
                       widen_i32(input(1)));
    pack.combine = binary(BinaryOp::Add, input(0), input(1));
    w.pipeline =
        b.input(ScalarType::Int32)
            .window(2, pack)
            .filter(binary(BinaryOp::Ne,
                           binary(BinaryOp::Div, input(0), lit_i64(kPack)),
                           binary(BinaryOp::Mod, input(0), lit_i64(kPack))))
            .map(binary(BinaryOp::Mod, input(0), lit_i64(kPack)))
            .done();
    w.inputs.push_back(gen_i32(gen, spec.n, 0, 40));
    w.prepend_first = true;
  } else if (spec.name == "histogram") {
    if (spec.bins < 1) fail(ErrorCode::BadSpec, "bins must be >= 1");
    const std::int32_t bins = static_cast<std::int32_t>(spec.bins);
    // clamped bin index over an 8-bit value range
    ExprPtr bin = binary(
        BinaryOp::Min, lit_i32(bins - 1),
        binary(BinaryOp::Max, lit_i32(0),
               binary(BinaryOp::Div, binary(BinaryOp::Mul, input(0), lit_i32(bins)),
                      lit_i32(256))));
    Reducer hist;
    hist.acc = {ScalarType::Int64, static_cast<std::size_t>(bins), true};
    hist.identity.assign(static_cast<std::size_t>(bins), ScalarValue(std::int64_t{0}));
    hist.step = binary(BinaryOp::Add, input(0), lit_i64(1));
    hist.combine = binary(BinaryOp::Add, input(0), input(1));
    hist.slot = input(0);
    w.pipeline = b.input(ScalarType::Int32).map(bin).reduce(hist).done();
    w.inputs.push_back(gen_i32(gen, spec.n, 0, 255));
  } else if (spec.name == "gemv") {
    std::int64_t cols = spec.cols;
    std::int64_t rows = spec.rows;
    std::int64_t n = spec.n;
    if (cols > 0 && rows > 0) {
      if (n == 0) n = rows * cols;
      if (n != rows * cols) fail(ErrorCode::BadSpec, "gemv needs rows*cols == n");
    } else {
      cols = derive_cols(n);
      rows = cols > 0 ? n / cols : 0;
    }
    w.pipeline = b.input(ScalarType::Int64)
                     .broadcast("vec", ScalarType::Int64)
                     .map(binary(BinaryOp::Mul, input(0),
                                 broadcast_load("vec", binary(BinaryOp::Mod,
                                                              global_index(),
                                                              lit_i64(cols)))))
                     .group(static_cast<std::size_t>(cols),
                            Reducer::sum(ScalarType::Int64))
                     .done();
    w.inputs.push_back(gen_i64(gen, n, -9, 9));
    w.env.emplace("vec", BroadcastBuffer{ScalarType::Int64, gen_i64(gen, cols, -9, 9)});
  } else {
    fail(ErrorCode::BadSpec, "unknown workload '" + spec.name + "'");
  }

  w.loc = b.statements();
  return w;
}

namespace {

nlohmann::ordered_json counters_json(const CostCounters& c) {
  return {
      {"host_to_mram_bytes", c.host_to_mram_bytes},
      {"mram_to_host_bytes", c.mram_to_host_bytes},
      {"dma_bytes", c.dma_bytes},
      {"dma_ops", c.dma_ops},
      {"kernel_ops", c.kernel_ops},
      {"transfer_time", c.transfer_time},
      {"dma_time", c.dma_time},
      {"compute_time", c.compute_time},
      {"device_time", c.device_time},
      {"total_time", c.total_time()},
  };
}

char hexdigit(std::uint64_t v) { return "0123456789abcdef"[v & 0xf]; }

std::string hex64(std::uint64_t v) {
  std::string s = "0x";
  for (int i = 60; i >= 0; i -= 4) s += hexdigit(v >> i);
  return s;
}

}  // namespace

std::string BenchReport::to_json(bool include_timing) const {
  nlohmann::ordered_json j;
  j["schema"] = "pimflow-bench/1";
  j["workload"] = spec.name;
  j["params"] = {{"n", spec.n},        {"rows", spec.rows}, {"cols", spec.cols},
                 {"bins", spec.bins},  {"seed", spec.seed}, {"dpus", dpus},
                 {"parallel_transfer", parallel_transfer},
                 {"cpu_split", cpu_split}};
  j["verified"] = verified;
  j["loc"] = loc;
  j["plan_fingerprint"] = hex64(plan_fingerprint);
  j["counters"] = counters_json(counters);
  if (include_timing) j["wall_ms"] = wall_ms;
  return j.dump(2);
}

std::string BenchReport::to_csv(bool include_timing) const {
  std::string header =
      "workload,n,seed,dpus,parallel_transfer,cpu_split,verified,loc,"
      "host_to_mram_bytes,mram_to_host_bytes,dma_bytes,kernel_ops,"
      "transfer_time,device_time,total_time";
  std::string row = spec.name + "," + std::to_string(spec.n) + "," +
                    std::to_string(spec.seed) + "," + std::to_string(dpus) + "," +
                    (parallel_transfer ? "1" : "0") + "," + (cpu_split ? "1" : "0") +
                    "," + (verified ? "1" : "0") + "," + std::to_string(loc) + "," +
                    std::to_string(counters.host_to_mram_bytes) + "," +
                    std::to_string(counters.mram_to_host_bytes) + "," +
                    std::to_string(counters.dma_bytes) + "," +
                    std::to_string(counters.kernel_ops) + "," +
                    std::to_string(counters.transfer_time) + "," +
                    std::to_string(counters.device_time) + "," +
                    std::to_string(counters.total_time());
  if (include_timing) {
    header += ",wall_ms";
    row += "," + std::to_string(wall_ms);
  }
  return header + "\n" + row + "\n";
}

BenchReport run_bench(const WorkloadSpec& spec, const PimMachineConfig& m,
                      const RunOptions& opts) {
  Workload w = build_workload(spec);

  BenchReport report;
  report.spec = spec;
  report.dpus = opts.dpus < 0 ? m.total_dpus() : opts.dpus;
  report.parallel_transfer = opts.parallel_transfer;
  report.cpu_split = opts.cpu_split;
  report.loc = w.loc;

  const auto t0 = std::chrono::steady_clock::now();
  RunResult result = run(w.pipeline, w.inputs, w.env, m, opts);
  const auto t1 = std::chrono::steady_clock::now();
  report.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

  PipelineOutput expected = reference_execute(w.pipeline, w.inputs, w.env);
  report.verified = result.output == expected;
  report.counters = result.counters;
  report.plan_fingerprint = result.plan_fingerprint;
  return report;
}

std::vector<std::pair<std::string, int>> loc_report() {
  std::vector<std::pair<std::string, int>> out;
  for (const char* name : kWorkloadNames) {
    WorkloadSpec spec;
    spec.name = name;
    spec.n = 16;
    if (spec.name == "gemv") spec.n = 16;
    out.emplace_back(name, build_workload(spec).loc);
  }
  return out;
}

}  // namespace pimflow
