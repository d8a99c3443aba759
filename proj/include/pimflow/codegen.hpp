#pragma once

#include <string>

#include "pimflow/planner.hpp"

namespace pimflow {

/// IRAM estimate: fixed skeleton overhead plus a per-kernel-node constant.
inline constexpr std::uint64_t kIramSkeletonBytes = 2048;
inline constexpr std::uint64_t kIramBytesPerNode = 16;

/// The instantiated template executed by the simulator. One program is
/// shared by all DPUs; per-DPU differences (start, count, halos, region
/// sizes) are runtime parameters carried by the plan.
struct DpuProgram {
  std::vector<FusedPass> passes;
  std::int64_t tile_elems = 0;
  int tasklets = 1;
  int n_streams = 1;
  ScalarType stream_types[2] = {ScalarType::Int32, ScalarType::Int32};
  std::vector<std::pair<std::string, ScalarType>> broadcast_layout;  // dpu-local env
  bool variable_output = false;
  bool gather_indices = false;
  bool partial_reduce = false;
  ScalarType out_type = ScalarType::Int32;
  std::uint64_t iram_estimate = 0;
  std::uint64_t plan_fingerprint = 0;
};

struct RenderedSource {
  std::string text;
};

std::uint64_t iram_estimate(const std::vector<FusedPass>& passes);

/// Fills the program skeleton from the plan. Total: every hole is filled or
/// instantiation fails. Throws IramOverflow when the estimate exceeds the
/// machine's IRAM capacity.
DpuProgram instantiate_template(const ExecutionPlan& plan, const Pipeline& p);

/// Deterministic pseudo-source rendering of a program; byte-identical across
/// runs and platforms for identical (pipeline, config, opts).
RenderedSource render_source(const DpuProgram& prog);

}  // namespace pimflow
