#include "pimflow/machine.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pimflow {

void encode_value(const ScalarValue& v, std::vector<std::uint8_t>& out) {
  switch (v.type()) {
    case ScalarType::Int32: {
      std::int32_t x = v.as_i32();
      const auto* p = reinterpret_cast<const std::uint8_t*>(&x);
      out.insert(out.end(), p, p + 4);
      break;
    }
    case ScalarType::Int64: {
      std::int64_t x = v.as_i64();
      const auto* p = reinterpret_cast<const std::uint8_t*>(&x);
      out.insert(out.end(), p, p + 8);
      break;
    }
    case ScalarType::Float64: {
      double x = v.as_f64();
      const auto* p = reinterpret_cast<const std::uint8_t*>(&x);
      out.insert(out.end(), p, p + 8);
      break;
    }
    case ScalarType::Bool:
      out.push_back(v.as_bool() ? 1 : 0);
      break;
  }
}

ScalarValue decode_value(ScalarType t, std::span<const std::uint8_t> bytes,
                         std::size_t index) {
  const std::size_t w = scalar_type_bytes(t);
  const std::uint8_t* p = bytes.data() + index * w;
  switch (t) {
    case ScalarType::Int32: {
      std::int32_t x;
      std::memcpy(&x, p, 4);
      return ScalarValue(x);
    }
    case ScalarType::Int64: {
      std::int64_t x;
      std::memcpy(&x, p, 8);
      return ScalarValue(x);
    }
    case ScalarType::Float64: {
      double x;
      std::memcpy(&x, p, 8);
      return ScalarValue(x);
    }
    case ScalarType::Bool:
      return ScalarValue(*p != 0);
  }
  return {};
}

PimMachineConfig PimMachineConfig::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("bad machine config: ") + e.what());
  }
  PimMachineConfig cfg;
  for (const auto& [key, val] : j.items()) {
    if (key == "ranks") cfg.ranks = val.get<int>();
    else if (key == "dpus_per_rank") cfg.dpus_per_rank = val.get<int>();
    else if (key == "mram_bytes") cfg.mram_bytes = val.get<std::uint64_t>();
    else if (key == "wram_bytes") cfg.wram_bytes = val.get<std::uint64_t>();
    else if (key == "iram_bytes") cfg.iram_bytes = val.get<std::uint64_t>();
    else if (key == "tasklets") cfg.tasklets = val.get<int>();
    else if (key == "host_link_bytes_per_unit_time")
      cfg.cost.host_link_bytes_per_unit_time = val.get<double>();
    else if (key == "wram_dma_bytes_per_unit_time")
      cfg.cost.wram_dma_bytes_per_unit_time = val.get<double>();
    else if (key == "dpu_ops_per_unit_time")
      cfg.cost.dpu_ops_per_unit_time = val.get<double>();
    else
      fail(ErrorCode::ConfigError, "unknown machine config key '" + key + "'");
  }
  if (cfg.ranks <= 0 || cfg.dpus_per_rank <= 0 || cfg.tasklets <= 0)
    fail(ErrorCode::ConfigError, "machine counts must be positive");
  return cfg;
}

PimMachineConfig PimMachineConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::ConfigError, "cannot read machine config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

PimMachine::PimMachine(PimMachineConfig cfg, bool parallel_transfer)
    : cfg_(cfg), parallel_transfer_(parallel_transfer) {}

PimMachine::DpuState& PimMachine::dpu(int id) {
  if (id < 0 || id >= cfg_.total_dpus())
    fail(ErrorCode::MramBounds, "no such dpu " + std::to_string(id));
  return dpus_[id];
}

void PimMachine::check_range(std::uint64_t offset, std::uint64_t bytes) const {
  if (offset % kMramAlignment != 0)
    fail(ErrorCode::BadAlignment,
         "mram offset " + std::to_string(offset) + " not 8-byte aligned");
  if (offset + bytes > cfg_.mram_bytes)
    fail(ErrorCode::MramBounds,
         "mram range [" + std::to_string(offset) + ", " +
             std::to_string(offset + bytes) + ") exceeds capacity " +
             std::to_string(cfg_.mram_bytes));
}

void PimMachine::mram_write(DpuState& d, std::uint64_t offset,
                            std::span<const std::uint8_t> data) {
  check_range(offset, data.size());
  if (d.mram.size() < offset + data.size()) d.mram.resize(offset + data.size());
  std::memcpy(d.mram.data() + offset, data.data(), data.size());
}

void PimMachine::mram_read(const DpuState& d, std::uint64_t offset,
                           std::uint64_t bytes, std::vector<std::uint8_t>& out) const {
  check_range(offset, bytes);
  out.assign(bytes, 0);
  if (offset < d.mram.size()) {
    std::uint64_t avail = std::min<std::uint64_t>(bytes, d.mram.size() - offset);
    std::memcpy(out.data(), d.mram.data() + offset, avail);
  }
}

void PimMachine::charge_batch(const std::vector<std::pair<int, std::uint64_t>>& dpu_bytes) {
  if (dpu_bytes.empty()) return;
  std::uint64_t max_bytes = 0;
  for (const auto& [id, bytes] : dpu_bytes) max_bytes = std::max(max_bytes, bytes);
  // symmetric burst: every transfer in the batch occupies the largest slot
  const double per_transfer =
      static_cast<double>(max_bytes) / cfg_.cost.host_link_bytes_per_unit_time;
  std::map<int, std::uint64_t> rank_counts;
  for (const auto& [id, bytes] : dpu_bytes) {
    (void)bytes;
    ++rank_counts[cfg_.rank_of(id)];
  }
  double batch_time = 0.0;
  for (const auto& [rank, count] : rank_counts) {
    (void)rank;
    const double rank_time = static_cast<double>(count) * per_transfer;
    if (parallel_transfer_)
      batch_time = std::max(batch_time, rank_time);
    else
      batch_time += rank_time;
  }
  transfer_time_ += batch_time;
}

void PimMachine::push_batch(std::vector<PushOp> ops) {
  std::vector<std::pair<int, std::uint64_t>> charged;
  for (auto& op : ops) {
    if (op.data.empty()) continue;  // zero-byte push is a no-op
    mram_write(dpu(op.dpu), op.mram_offset, op.data);
    host_to_mram_ += op.data.size();
    charged.emplace_back(op.dpu, op.data.size());
  }
  charge_batch(charged);
}

std::vector<std::vector<std::uint8_t>> PimMachine::pull_batch(
    const std::vector<PullOp>& ops) {
  std::vector<std::vector<std::uint8_t>> out(ops.size());
  std::vector<std::pair<int, std::uint64_t>> charged;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const auto& op = ops[i];
    if (op.bytes == 0) continue;
    mram_read(dpu(op.dpu), op.mram_offset, op.bytes, out[i]);
    mram_to_host_ += op.bytes;
    charged.emplace_back(op.dpu, op.bytes);
  }
  charge_batch(charged);
  return out;
}

void PimMachine::push(int dpu_id, std::uint64_t mram_offset,
                      std::span<const std::uint8_t> data) {
  std::vector<PushOp> ops(1);
  ops[0].dpu = dpu_id;
  ops[0].mram_offset = mram_offset;
  ops[0].data.assign(data.begin(), data.end());
  push_batch(std::move(ops));
}

std::vector<std::uint8_t> PimMachine::pull(int dpu_id, std::uint64_t mram_offset,
                                           std::uint64_t bytes) {
  return pull_batch({PullOp{dpu_id, mram_offset, bytes}})[0];
}

namespace {

struct PassKernelCosts {
  std::vector<std::size_t> elementwise;
  std::size_t step = 0;
  std::size_t slot = 0;
  std::size_t combine = 0;
};

PassKernelCosts pass_costs(const FusedPass& pass) {
  PassKernelCosts c;
  for (const auto& s : pass.elementwise) c.elementwise.push_back(op_count(*s.kernel));
  if (pass.blocking) {
    const Reducer& r = pass.blocking->reducer;
    c.step = op_count(*r.step);
    if (r.slot) c.slot = op_count(*r.slot);
    c.combine = op_count(*r.combine);
  }
  return c;
}

[[noreturn]] void rethrow_with_coords(const Error& e, int dpu, std::int64_t gidx) {
  throw Error(e.code(), std::string(e.what()) + " (dpu " + std::to_string(dpu) +
                            ", element " + std::to_string(gidx) + ")");
}

}  // namespace

void PimMachine::run_dpu(DpuState& d, int dpu_id, const DpuProgram& prog,
                         const ExecutionPlan& plan, const DpuPartition& part) {
  const DpuLayout& layout = plan.layouts[static_cast<std::size_t>(part.dpu)];
  const std::int64_t total = part.total_elems();
  const std::int64_t tile_elems = prog.tile_elems;

  // broadcast environment is read back from this DPU's own MRAM copy
  KernelEnv env;
  for (const auto& [name, type] : prog.broadcast_layout) {
    auto it = std::find_if(layout.broadcasts.begin(), layout.broadcasts.end(),
                           [&](const auto& b) { return b.first == name; });
    BroadcastBuffer buf{type, {}};
    if (it != layout.broadcasts.end() && it->second.bytes > 0) {
      std::vector<std::uint8_t> raw;
      mram_read(d, it->second.offset, it->second.bytes, raw);
      const std::size_t elems = raw.size() / scalar_type_bytes(type);
      buf.data.reserve(elems);
      for (std::size_t i = 0; i < elems; ++i)
        buf.data.push_back(decode_value(type, raw, i));
    }
    env.emplace(name, std::move(buf));
  }

  // stream inputs
  std::vector<std::uint8_t> raw0, raw1;
  mram_read(d, layout.inputs[0].offset, layout.inputs[0].bytes, raw0);
  if (prog.n_streams == 2)
    mram_read(d, layout.inputs[1].offset, layout.inputs[1].bytes, raw1);

  std::vector<Element> stream;
  stream.reserve(static_cast<std::size_t>(total));
  for (std::int64_t k = 0; k < total; ++k)
    stream.push_back({decode_value(prog.stream_types[0], raw0,
                                   static_cast<std::size_t>(k)),
                      part.first() + k});

  const int tasklets = prog.tasklets;
  bool first_pass = true;
  bool is_acc = false;
  std::vector<ScalarValue> partial;

  for (const auto& pass : prog.passes) {
    const PassKernelCosts costs = pass_costs(pass);
    const std::int64_t in_len = static_cast<std::int64_t>(stream.size());
    const std::size_t in_w = scalar_type_bytes(pass.in_type);
    const std::size_t out_w = scalar_type_bytes(pass.out_type);
    const bool zip = first_pass && prog.n_streams == 2;

    // per-tasklet accumulators for a terminating reduce
    const bool reduce_pass =
        pass.blocking && pass.blocking->kind == Stage::Kind::Reduce;
    const Reducer* red = pass.blocking ? &pass.blocking->reducer : nullptr;
    std::vector<std::vector<ScalarValue>> taccs;
    if (reduce_pass)
      taccs.assign(static_cast<std::size_t>(tasklets), red->identity);

    std::vector<Element> ew_out;
    ew_out.reserve(static_cast<std::size_t>(in_len));

    for (std::int64_t lo = 0; lo < in_len; lo += tile_elems) {
      const std::int64_t hi = std::min(lo + tile_elems, in_len);
      const std::int64_t slice = hi - lo;
      // DMA the tile in (both streams for the zip entry pass)
      std::uint64_t in_bytes = static_cast<std::uint64_t>(slice) * in_w;
      if (zip)
        in_bytes += static_cast<std::uint64_t>(slice) *
                    scalar_type_bytes(prog.stream_types[1]);
      d.dma_bytes += in_bytes;
      d.dma_ops += 1;

      WramTile tile(std::span<const Element>(stream).subspan(
                        static_cast<std::size_t>(lo), static_cast<std::size_t>(slice)),
                    lo);
      const std::int64_t chunk = (slice + tasklets - 1) / tasklets;

      for (std::int64_t k = lo; k < hi; ++k) {
        const int tasklet =
            chunk == 0 ? 0 : static_cast<int>(std::min<std::int64_t>(
                                 (k - lo) / chunk, tasklets - 1));
        Element e = tile.at(k);
        bool alive = true;
        try {
          for (std::size_t si = 0; si < pass.elementwise.size(); ++si) {
            const Stage& s = pass.elementwise[si];
            if (zip && si == 0) {
              const ScalarValue args[2] = {
                  e.value, decode_value(prog.stream_types[1], raw1,
                                        static_cast<std::size_t>(k))};
              e.value = eval(*s.kernel, args, e.gidx, env);
            } else if (s.kind == Stage::Kind::Map) {
              const ScalarValue args[1] = {e.value};
              e.value = eval(*s.kernel, args, e.gidx, env);
            } else {
              const ScalarValue args[1] = {e.value};
              if (!eval(*s.kernel, args, e.gidx, env).as_bool()) {
                alive = false;
              }
            }
            d.kernel_ops += costs.elementwise[si];
            if (!alive) break;
          }
          if (!alive) continue;
          if (reduce_pass) {
            auto& acc = taccs[static_cast<std::size_t>(tasklet)];
            std::size_t slot = 0;
            if (red->acc.array) {
              const ScalarValue sargs[1] = {e.value};
              std::int64_t si = eval(*red->slot, sargs, e.gidx, env).as_index();
              d.kernel_ops += costs.slot;
              if (si < 0 || static_cast<std::size_t>(si) >= red->acc.length)
                fail(ErrorCode::BroadcastIndexOutOfBounds,
                     "accumulator slot " + std::to_string(si) + " out of range");
              slot = static_cast<std::size_t>(si);
            }
            const ScalarValue args[2] = {acc[slot], e.value};
            acc[slot] = eval(*red->step, args, e.gidx, env);
            d.kernel_ops += costs.step;
          } else {
            ew_out.push_back(e);
          }
        } catch (const Error& err) {
          rethrow_with_coords(err, dpu_id, e.gidx);
        }
      }
    }

    if (reduce_pass) {
      // combine tasklet accumulators on-dpu, in tasklet order
      partial = taccs[0];
      for (int t = 1; t < tasklets; ++t) {
        partial = combine_accumulators(*red, partial, taccs[static_cast<std::size_t>(t)], env);
        d.kernel_ops += costs.combine * red->acc.length;
      }
      d.dma_bytes += static_cast<std::uint64_t>(red->acc.length) *
                     scalar_type_bytes(red->acc.type);
      d.dma_ops += 1;
      is_acc = true;
      stream.clear();
    } else if (pass.blocking && pass.blocking->kind == Stage::Kind::Window) {
      const std::int64_t w = static_cast<std::int64_t>(pass.blocking->size);
      std::int64_t out_end = std::min(part.start + part.count, plan.n - w + 1);
      std::int64_t owned = std::max<std::int64_t>(0, out_end - part.start);
      std::vector<Element> out;
      out.reserve(static_cast<std::size_t>(owned));
      for (std::int64_t j = 0; j < owned; ++j) {
        ScalarValue acc = red->identity[0];
        try {
          for (std::int64_t k = 0; k < w; ++k) {
            const Element& e = ew_out[static_cast<std::size_t>(j + k)];
            const ScalarValue args[2] = {acc, e.value};
            acc = eval(*red->step, args, e.gidx, env);
            d.kernel_ops += costs.step;
          }
        } catch (const Error& err) {
          rethrow_with_coords(err, dpu_id, part.start + j);
        }
        out.push_back({acc, part.start + j});
      }
      stream = std::move(out);
      d.dma_bytes += static_cast<std::uint64_t>(owned) * out_w;
      d.dma_ops += owned > 0 ? 1 : 0;
    } else if (pass.blocking && pass.blocking->kind == Stage::Kind::Group) {
      const std::int64_t g = static_cast<std::int64_t>(pass.blocking->size);
      const std::int64_t m = static_cast<std::int64_t>(ew_out.size());
      const std::int64_t group_base = part.start / g;  // partitions are G-aligned
      std::vector<Element> out;
      out.reserve(static_cast<std::size_t>((m + g - 1) / g));
      for (std::int64_t j = 0; j * g < m; ++j) {
        ScalarValue acc = red->identity[0];
        const std::int64_t hi = std::min((j + 1) * g, m);
        try {
          for (std::int64_t k = j * g; k < hi; ++k) {
            const Element& e = ew_out[static_cast<std::size_t>(k)];
            const ScalarValue args[2] = {acc, e.value};
            acc = eval(*red->step, args, e.gidx, env);
            d.kernel_ops += costs.step;
          }
        } catch (const Error& err) {
          rethrow_with_coords(err, dpu_id, group_base + j);
        }
        out.push_back({acc, group_base + j});
      }
      stream = std::move(out);
      d.dma_bytes += static_cast<std::uint64_t>(out.size()) * out_w;
      d.dma_ops += out.empty() ? 0 : 1;
    } else {
      // elementwise-only pass
      d.dma_bytes += static_cast<std::uint64_t>(ew_out.size()) * out_w;
      d.dma_ops += ew_out.empty() ? 0 : 1;
      stream = std::move(ew_out);
    }
    first_pass = false;
  }

  // write results to the output regions
  if (is_acc) {
    std::vector<std::uint8_t> bytes;
    for (const auto& v : partial) encode_value(v, bytes);
    if (bytes.size() > layout.output.bytes)
      fail(ErrorCode::CountExceedsRegion, "partial accumulator exceeds region");
    mram_write(d, layout.output.offset, bytes);
    return;
  }

  if (static_cast<std::int64_t>(stream.size()) > layout.out_capacity_elems)
    fail(ErrorCode::CountExceedsRegion,
         "dpu " + std::to_string(dpu_id) + " produced " +
             std::to_string(stream.size()) + " elements, capacity " +
             std::to_string(layout.out_capacity_elems));

  std::vector<std::uint8_t> bytes;
  for (const auto& e : stream) encode_value(e.value, bytes);
  if (!bytes.empty()) mram_write(d, layout.output.offset, bytes);

  if (prog.gather_indices) {
    std::vector<std::uint8_t> idx_bytes;
    for (const auto& e : stream) encode_value(ScalarValue(e.gidx), idx_bytes);
    if (!idx_bytes.empty()) mram_write(d, layout.output_index.offset, idx_bytes);
  }
  if (prog.variable_output) {
    std::vector<std::uint8_t> count_bytes;
    encode_value(ScalarValue(static_cast<std::int64_t>(stream.size())), count_bytes);
    mram_write(d, layout.count_word.offset, count_bytes);
  }
}

void PimMachine::launch(const DpuProgram& prog, const ExecutionPlan& plan) {
  if (prog.iram_estimate > cfg_.iram_bytes)
    fail(ErrorCode::IramOverflow,
         "program estimate " + std::to_string(prog.iram_estimate) +
             " bytes exceeds IRAM capacity " + std::to_string(cfg_.iram_bytes));

  // tile working set must fit the scratchpad
  std::size_t max_w = scalar_type_bytes(prog.stream_types[0]);
  if (prog.n_streams == 2)
    max_w = std::max(max_w, scalar_type_bytes(prog.stream_types[1]));
  for (const auto& pass : prog.passes) {
    max_w = std::max(max_w, scalar_type_bytes(pass.in_type));
    max_w = std::max(max_w, scalar_type_bytes(pass.out_type));
  }
  const std::uint64_t working_set =
      static_cast<std::uint64_t>(prog.tile_elems) *
      static_cast<std::uint64_t>(prog.n_streams + 1) * max_w;
  if (cfg_.wram_bytes <= kWramReserveBytes ||
      working_set > cfg_.wram_bytes - kWramReserveBytes)
    fail(ErrorCode::WramBounds,
         "tile working set " + std::to_string(working_set) +
             " bytes exceeds the WRAM budget");

  for (const auto& part : plan.parts.parts) {
    if (part.count == 0) continue;
    run_dpu(dpu(part.dpu), part.dpu, prog, plan, part);
  }
}

CostCounters PimMachine::cost_report() const {
  CostCounters c;
  c.host_to_mram_bytes = host_to_mram_;
  c.mram_to_host_bytes = mram_to_host_;
  c.transfer_time = transfer_time_;
  for (const auto& [id, d] : dpus_) {
    (void)id;
    c.dma_bytes += d.dma_bytes;
    c.dma_ops += d.dma_ops;
    c.kernel_ops += d.kernel_ops;
    const double dma_t =
        static_cast<double>(d.dma_bytes) / cfg_.cost.wram_dma_bytes_per_unit_time;
    const double compute_t = static_cast<double>(d.kernel_ops) /
                             (cfg_.cost.dpu_ops_per_unit_time * cfg_.tasklets);
    c.dma_time = std::max(c.dma_time, dma_t);
    c.compute_time = std::max(c.compute_time, compute_t);
    c.device_time = std::max(c.device_time, dma_t + compute_t);
  }
  return c;
}

}  // namespace pimflow
