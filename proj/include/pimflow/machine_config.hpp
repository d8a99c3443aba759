#pragma once

#include <cstdint>
#include <string>

namespace pimflow {

/// Linear, parametric cost model. Units are arbitrary; defaults are 1.0 per
/// byte (host link), per byte (WRAM DMA) and per kernel op. No claim is made
/// to real hardware latencies; the model exists to expose the relative effect
/// of the transfer/work-division optimizations.
struct CostParams {
  double host_link_bytes_per_unit_time = 1.0;
  double wram_dma_bytes_per_unit_time = 1.0;
  double dpu_ops_per_unit_time = 1.0;
};

/// Machine topology and per-DPU capacities. Defaults model a 20-rank system
/// of 128 DPUs per rank (2,560 DPUs, 160 GB), each DPU with a 64 MiB DRAM
/// bank, a 64 KiB scratchpad and a 24 KiB instruction memory.
struct PimMachineConfig {
  int ranks = 20;
  int dpus_per_rank = 128;
  std::uint64_t mram_bytes = 64ull << 20;
  std::uint64_t wram_bytes = 64ull << 10;
  std::uint64_t iram_bytes = 24ull << 10;
  int tasklets = 16;
  CostParams cost;

  int total_dpus() const { return ranks * dpus_per_rank; }
  int rank_of(int dpu) const { return dpu / dpus_per_rank; }

  /// Loads a JSON config file; missing keys keep the defaults above.
  /// Throws ConfigError on unknown keys or unreadable files.
  static PimMachineConfig from_file(const std::string& path);
  static PimMachineConfig from_json_text(const std::string& text);
};

/// Accounting of bytes moved and work executed, plus modeled time.
/// device_time is the max over DPUs of (dma + compute); total is
/// transfer_time + device_time.
struct CostCounters {
  std::uint64_t host_to_mram_bytes = 0;
  std::uint64_t mram_to_host_bytes = 0;
  std::uint64_t dma_bytes = 0;
  std::uint64_t dma_ops = 0;
  std::uint64_t kernel_ops = 0;
  double transfer_time = 0.0;
  double dma_time = 0.0;      // max over DPUs
  double compute_time = 0.0;  // max over DPUs
  double device_time = 0.0;   // max over DPUs of (dma + compute)
  double total_time() const { return transfer_time + device_time; }

  bool operator==(const CostCounters&) const = default;
};

}  // namespace pimflow
