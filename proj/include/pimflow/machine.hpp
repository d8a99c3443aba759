#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "pimflow/codegen.hpp"
#include "pimflow/machine_config.hpp"
#include "pimflow/planner.hpp"

namespace pimflow {

// Element <-> byte encoding used for MRAM contents (little-endian; bool = 1 byte).
void encode_value(const ScalarValue& v, std::vector<std::uint8_t>& out);
ScalarValue decode_value(ScalarType t, std::span<const std::uint8_t> bytes,
                         std::size_t index);

/// Bounds-guarded view of one WRAM-resident tile. Any access outside the
/// declared element range throws WramBounds.
class WramTile {
 public:
  WramTile(std::span<const Element> elems, std::int64_t base)
      : elems_(elems), base_(base) {}

  const Element& at(std::int64_t local) const {
    if (local < base_ || local >= base_ + static_cast<std::int64_t>(elems_.size()))
      fail(ErrorCode::WramBounds,
           "tile access at " + std::to_string(local) + " outside [" +
               std::to_string(base_) + ", " +
               std::to_string(base_ + static_cast<std::int64_t>(elems_.size())) + ")");
    return elems_[static_cast<std::size_t>(local - base_)];
  }

 private:
  std::span<const Element> elems_;
  std::int64_t base_;
};

/// Software model of the UPMEM-like machine: per-DPU MRAM, tasklet-parallel
/// in-order execution of DpuPrograms, and transfer/compute cost accounting.
///
/// Transfer timing uses symmetric rank bursts: every transfer in a batch is
/// charged the size of the largest one. With parallel_transfer on, ranks
/// overlap (batch time = max per-rank time); off, ranks serialize. Byte
/// counters always track actual payload bytes.
class PimMachine {
 public:
  explicit PimMachine(PimMachineConfig cfg, bool parallel_transfer = true);

  struct PushOp {
    int dpu = 0;
    std::uint64_t mram_offset = 0;
    std::vector<std::uint8_t> data;
  };
  struct PullOp {
    int dpu = 0;
    std::uint64_t mram_offset = 0;
    std::uint64_t bytes = 0;
  };

  void push(int dpu, std::uint64_t mram_offset, std::span<const std::uint8_t> data);
  std::vector<std::uint8_t> pull(int dpu, std::uint64_t mram_offset, std::uint64_t bytes);

  void push_batch(std::vector<PushOp> ops);
  std::vector<std::vector<std::uint8_t>> pull_batch(const std::vector<PullOp>& ops);

  /// Runs the program on every DPU that received work in the plan.
  /// Throws IramOverflow, WramBounds and kernel runtime errors with
  /// (dpu, element) coordinates.
  void launch(const DpuProgram& prog, const ExecutionPlan& plan);

  CostCounters cost_report() const;

  const PimMachineConfig& config() const { return cfg_; }

 private:
  struct DpuState {
    std::vector<std::uint8_t> mram;  // grown lazily up to capacity
    std::uint64_t dma_bytes = 0;
    std::uint64_t dma_ops = 0;
    std::uint64_t kernel_ops = 0;
  };

  DpuState& dpu(int id);
  void mram_write(DpuState& d, std::uint64_t offset, std::span<const std::uint8_t> data);
  void mram_read(const DpuState& d, std::uint64_t offset, std::uint64_t bytes,
                 std::vector<std::uint8_t>& out) const;
  void check_range(std::uint64_t offset, std::uint64_t bytes) const;
  void charge_batch(const std::vector<std::pair<int, std::uint64_t>>& dpu_bytes);

  void run_dpu(DpuState& d, int dpu_id, const DpuProgram& prog,
               const ExecutionPlan& plan, const DpuPartition& part);

  PimMachineConfig cfg_;
  bool parallel_transfer_;
  std::map<int, DpuState> dpus_;
  std::uint64_t host_to_mram_ = 0;
  std::uint64_t mram_to_host_ = 0;
  double transfer_time_ = 0.0;
};

}  // namespace pimflow
