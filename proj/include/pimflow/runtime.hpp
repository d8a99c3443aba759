#pragma once

#include "pimflow/machine.hpp"

namespace pimflow {

struct RunOptions {
  bool parallel_transfer = true;
  bool cpu_split = true;
  int dpus = -1;  // -1 = all configured DPUs
};

struct RunResult {
  PipelineOutput output;
  CostCounters counters;
  std::uint64_t plan_fingerprint = 0;
};

/// End-to-end orchestration: partition, distribute, launch, gather, then
/// host-residue execution. Output is bit-identical to reference_execute for
/// integer pipelines.
RunResult run(const Pipeline& p, const std::vector<std::vector<ScalarValue>>& inputs,
              const KernelEnv& env, const PimMachineConfig& m, const RunOptions& opts);

/// Pulls per-DPU survivor counts and compacts the variable-length outputs in
/// dpu-id order. Pulls only `count` elements per DPU, not the reserved
/// region. Throws CountExceedsRegion on a corrupt count word.
std::vector<Element> gather_filtered(PimMachine& machine, const ExecutionPlan& plan,
                                     ScalarType elem_type, bool with_indices);

/// Renders the program a run of this (pipeline, machine, opts) would execute.
RenderedSource render_program_source(const Pipeline& p, std::int64_t n,
                                     const PimMachineConfig& m, const RunOptions& opts,
                                     const std::map<std::string, std::size_t>& broadcast_sizes = {});

}  // namespace pimflow
