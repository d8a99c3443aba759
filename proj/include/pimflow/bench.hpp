#pragma once

#include <string>

#include "pimflow/runtime.hpp"

namespace pimflow {

/// Stage-counting pipeline builder; the statement count is the LoC proxy
/// reported by loc_report.
class PipelineBuilder {
 public:
  PipelineBuilder& input(ScalarType t);
  PipelineBuilder& broadcast(const std::string& name, ScalarType t);
  PipelineBuilder& map(ExprPtr f);
  PipelineBuilder& filter(ExprPtr p);
  PipelineBuilder& reduce(Reducer r);
  PipelineBuilder& window(std::size_t w, Reducer r);
  PipelineBuilder& group(std::size_t g, Reducer r);
  Pipeline done();

  int statements() const { return statements_; }

 private:
  std::vector<ScalarType> inputs_;
  EnvTypes broadcasts_;
  std::vector<Stage> stages_;
  int statements_ = 0;
};

struct WorkloadSpec {
  std::string name;  // vecadd | select | reduce | unique | histogram | gemv
  std::int64_t n = 0;
  std::int64_t rows = 0;  // gemv; derived from n when 0
  std::int64_t cols = 0;
  std::int64_t bins = 256;  // histogram
  std::uint64_t seed = 0;
};

struct Workload {
  Pipeline pipeline;
  std::vector<std::vector<ScalarValue>> inputs;
  KernelEnv env;
  int loc = 0;
  bool prepend_first = false;  // unique: host prepends the first element
};

extern const char* const kWorkloadNames[6];

/// Builds the named workload pipeline plus deterministic seeded inputs.
/// Throws BadSpec.
Workload build_workload(const WorkloadSpec& spec);

struct BenchReport {
  WorkloadSpec spec;
  int dpus = -1;
  bool parallel_transfer = true;
  bool cpu_split = true;
  bool verified = false;
  int loc = 0;
  std::uint64_t plan_fingerprint = 0;
  CostCounters counters;
  double wall_ms = 0.0;

  std::string to_json(bool include_timing = false) const;
  std::string to_csv(bool include_timing = false) const;
};

/// Runs the workload on the simulated machine and verifies the result
/// against the sequential oracle (bit-exact for integer workloads).
BenchReport run_bench(const WorkloadSpec& spec, const PimMachineConfig& m,
                      const RunOptions& opts);

/// Pipeline statement counts for every workload (programmability ceiling).
std::vector<std::pair<std::string, int>> loc_report();

}  // namespace pimflow
