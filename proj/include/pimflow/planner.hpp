#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pimflow/machine_config.hpp"
#include "pimflow/pipeline.hpp"

namespace pimflow {

inline constexpr std::uint64_t kMramAlignment = 8;
/// WRAM reserved for stack, accumulators and carry state.
inline constexpr std::uint64_t kWramReserveBytes = 2048;

struct PlanOptions {
  bool parallel_transfer = true;
  bool cpu_split = true;
};

/// One DPU's share of the input: a contiguous block plus replicated halo
/// elements so windows never straddle partitions.
struct DpuPartition {
  int dpu = 0;
  std::int64_t start = 0;
  std::int64_t count = 0;
  std::int64_t left_halo = 0;
  std::int64_t right_halo = 0;

  std::int64_t first() const { return start - left_halo; }
  std::int64_t total_elems() const { return left_halo + count + right_halo; }
};

struct PartitionSpec {
  std::vector<DpuPartition> parts;
  std::int64_t total = 0;
};

struct PartitionConstraints {
  std::optional<std::size_t> group;   // align partitions to multiples of G
  std::optional<std::size_t> window;  // replicate W-1 right-halo elements
};

/// Block distribution with remainder elements on the lowest dpu-ids.
/// Group-constrained partitions are aligned to multiples of G; window
/// partitions get a right halo of min(W-1, remaining) elements.
PartitionSpec partition(std::int64_t n, int ndpus, const PartitionConstraints& c = {});

struct Tile {
  std::uint64_t mram_offset = 0;  // relative to the DPU's input region
  std::uint64_t wram_offset = 0;
  std::int64_t elems = 0;
};

struct TilePlan {
  std::int64_t tile_elems = 0;
  std::uint64_t wram_budget = 0;
  std::vector<std::vector<Tile>> per_dpu;
};

/// Tile size is the largest multiple of the 8-byte alignment unit whose
/// working set (streams + one output) fits the WRAM budget.
/// Throws TileTooSmall when a single element's working set does not fit.
TilePlan compute_tiles(const PartitionSpec& p, std::size_t elem_bytes,
                       std::uint64_t wram_budget, int streams);

/// A run of elementwise stages optionally terminated by one blocking stage,
/// executed as a single loop over each tile.
struct FusedPass {
  std::vector<Stage> elementwise;
  std::optional<Stage> blocking;
  ScalarType in_type = ScalarType::Int32;
  ScalarType out_type = ScalarType::Int32;
};

/// Stages executed on the host after gathering device results.
struct HostResidue {
  bool combine_partials = false;  // fold per-DPU partial accumulators first
  Reducer reducer;                // the device reduce being combined
  std::vector<Stage> stages;      // oracle semantics, verbatim
};

/// Splits the stage list into device passes and host residue.
///
/// Elementwise runs fuse into one pass. The first blocking stage terminates
/// a pass: a window/group runs on-device when the stream is still densely
/// partitioned (no preceding filter); a reduce runs on-device as a per-DPU
/// partial when cpu_split is on. Stages from the second blocking stage (or
/// from a host-side reduce) onward are host residue.
std::pair<std::vector<FusedPass>, HostResidue> fuse_stages(const Pipeline& p,
                                                           bool cpu_split);

struct MramRegion {
  std::uint64_t offset = 0;
  std::uint64_t bytes = 0;
};

/// Per-DPU MRAM reservations and static output size.
struct DpuLayout {
  MramRegion inputs[2];
  std::vector<std::pair<std::string, MramRegion>> broadcasts;
  MramRegion output;        // value region (stream output or partial acc)
  MramRegion output_index;  // survivor index side-channel, when gathered
  MramRegion count_word;    // 8-byte survivor count, variable outputs only
  std::int64_t out_capacity_elems = 0;
  std::int64_t out_count_elems = 0;  // exact count for fixed-size outputs
  std::uint64_t resident_bytes = 0;
};

struct ExecutionPlan {
  PimMachineConfig machine;
  PlanOptions opts;
  std::int64_t n = 0;
  int ndpus = 0;
  PartitionSpec parts;
  TilePlan tiles;
  std::vector<FusedPass> device_passes;
  HostResidue residue;
  std::vector<DpuLayout> layouts;  // one per participating partition entry
  bool variable_output = false;    // filter in device passes, stream output
  bool gather_indices = false;     // residue kernels need original indices
  bool device_stream_output = false;
  bool device_partial_reduce = false;
  ScalarType device_out_type = ScalarType::Int32;
  std::uint64_t fingerprint = 0;
};

/// Lowers a validated pipeline into an ExecutionPlan for n input elements on
/// ndpus DPUs. broadcast_sizes gives the element count of each env buffer.
/// Throws MramOverflow and TileTooSmall.
ExecutionPlan plan(const Pipeline& p, std::int64_t n, int ndpus,
                   const PimMachineConfig& m, const PlanOptions& opts,
                   const std::map<std::string, std::size_t>& broadcast_sizes = {});

/// Deterministic JSON rendering of a plan, for debugging and golden tests.
std::string plan_to_json(const ExecutionPlan& plan);

std::uint64_t fnv1a64(const std::string& s);

}  // namespace pimflow
