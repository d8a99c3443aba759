#include "pimflow/planner.hpp"

#include <algorithm>
#include <numeric>

#include <json.hpp>

namespace pimflow {

namespace {

std::uint64_t align_up(std::uint64_t x, std::uint64_t a) {
  return (x + a - 1) / a * a;
}

}  // namespace

PartitionSpec partition(std::int64_t n, int ndpus, const PartitionConstraints& c) {
  PartitionSpec spec;
  spec.total = n;
  spec.parts.resize(static_cast<std::size_t>(ndpus));
  for (int i = 0; i < ndpus; ++i) spec.parts[static_cast<std::size_t>(i)].dpu = i;
  if (n <= 0) return spec;

  if (c.group) {
    // distribute whole groups; no group straddles a DPU boundary
    const std::int64_t g = static_cast<std::int64_t>(*c.group);
    const std::int64_t ngroups = (n + g - 1) / g;
    const std::int64_t base = ngroups / ndpus;
    const std::int64_t rem = ngroups % ndpus;
    std::int64_t start = 0;
    for (int i = 0; i < ndpus; ++i) {
      auto& part = spec.parts[static_cast<std::size_t>(i)];
      std::int64_t groups = base + (i < rem ? 1 : 0);
      part.start = start;
      part.count = std::min(groups * g, n - start);
      start += part.count;
    }
  } else {
    const std::int64_t base = n / ndpus;
    const std::int64_t rem = n % ndpus;
    std::int64_t start = 0;
    for (int i = 0; i < ndpus; ++i) {
      auto& part = spec.parts[static_cast<std::size_t>(i)];
      part.start = start;
      part.count = base + (i < rem ? 1 : 0);
      start += part.count;
    }
  }

  if (c.window) {
    const std::int64_t halo = static_cast<std::int64_t>(*c.window) - 1;
    for (auto& part : spec.parts) {
      if (part.count == 0) continue;
      part.right_halo = std::min(halo, n - (part.start + part.count));
    }
  }
  return spec;
}

TilePlan compute_tiles(const PartitionSpec& p, std::size_t elem_bytes,
                       std::uint64_t wram_budget, int streams) {
  TilePlan tp;
  tp.wram_budget = wram_budget;
  const std::uint64_t working_set =
      static_cast<std::uint64_t>(streams + 1) * elem_bytes;
  if (working_set > wram_budget)
    fail(ErrorCode::TileTooSmall,
         "per-element working set of " + std::to_string(working_set) +
             " bytes exceeds the WRAM budget of " + std::to_string(wram_budget));

  const std::uint64_t unit = kMramAlignment / std::gcd<std::uint64_t>(elem_bytes, kMramAlignment);
  std::uint64_t tile = wram_budget / working_set;
  tile -= tile % unit;
  if (tile == 0)
    fail(ErrorCode::TileTooSmall, "no aligned tile fits the WRAM budget");
  tp.tile_elems = static_cast<std::int64_t>(tile);

  tp.per_dpu.resize(p.parts.size());
  for (std::size_t d = 0; d < p.parts.size(); ++d) {
    std::int64_t total = p.parts[d].total_elems();
    for (std::int64_t off = 0; off < total; off += tp.tile_elems) {
      Tile t;
      t.mram_offset = static_cast<std::uint64_t>(off) * elem_bytes;
      t.wram_offset = 0;
      t.elems = std::min<std::int64_t>(tp.tile_elems, total - off);
      tp.per_dpu[d].push_back(t);
    }
  }
  return tp;
}

std::pair<std::vector<FusedPass>, HostResidue> fuse_stages(const Pipeline& p,
                                                           bool cpu_split) {
  std::vector<FusedPass> passes;
  HostResidue residue;

  auto input_of = [&](std::size_t i) -> ScalarType {
    return i == 0 ? p.input_types[0] : p.stage_outputs[i - 1].element;
  };

  FusedPass cur;
  bool cur_open = false;
  bool dense = true;          // stream positions still equal global indices
  bool blocking_seen = false;

  auto open_pass = [&](std::size_t i) {
    if (!cur_open) {
      cur = FusedPass{};
      cur.in_type = input_of(i);
      cur_open = true;
    }
  };
  auto flush_pass = [&]() {
    if (cur_open) {
      passes.push_back(std::move(cur));
      cur_open = false;
    }
  };
  auto spill_to_residue = [&](std::size_t i) {
    flush_pass();
    residue.stages.assign(p.stages.begin() + static_cast<std::ptrdiff_t>(i),
                          p.stages.end());
  };

  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    const Stage& s = p.stages[i];
    if (s.is_elementwise()) {
      open_pass(i);
      cur.elementwise.push_back(s);
      cur.out_type = p.stage_outputs[i].element;
      if (s.kind == Stage::Kind::Filter) dense = false;
      continue;
    }

    if (blocking_seen) {
      spill_to_residue(i);
      return {std::move(passes), std::move(residue)};
    }
    if (s.kind == Stage::Kind::Reduce) {
      if (!cpu_split) {
        spill_to_residue(i);
        return {std::move(passes), std::move(residue)};
      }
      open_pass(i);
      cur.blocking = s;
      cur.out_type = s.reducer.acc.type;
      flush_pass();
      residue.combine_partials = true;
      residue.reducer = s.reducer;
      residue.stages.assign(p.stages.begin() + static_cast<std::ptrdiff_t>(i) + 1,
                            p.stages.end());
      return {std::move(passes), std::move(residue)};
    }
    // window / group
    if (!dense) {
      // a filtered stream has data-dependent positions; regrouping it on
      // statically partitioned DPUs would split windows/groups incorrectly
      spill_to_residue(i);
      return {std::move(passes), std::move(residue)};
    }
    open_pass(i);
    cur.blocking = s;
    cur.out_type = p.stage_outputs[i].element;
    flush_pass();
    blocking_seen = true;
    dense = true;  // outputs are renumbered by position
  }
  flush_pass();
  return {std::move(passes), std::move(residue)};
}

namespace {

nlohmann::ordered_json stage_json(const Stage& s) {
  nlohmann::ordered_json j;
  j["kind"] = stage_kind_name(s.kind);
  if (s.kernel) j["kernel"] = render(*s.kernel);
  if (s.is_blocking()) {
    j["acc_type"] = scalar_type_name(s.reducer.acc.type);
    j["acc_length"] = s.reducer.acc.length;
    j["step"] = render(*s.reducer.step);
    j["combine"] = render(*s.reducer.combine);
    if (s.reducer.slot) j["slot"] = render(*s.reducer.slot);
    if (s.size > 0) j["size"] = s.size;
  }
  return j;
}

}  // namespace

std::string plan_to_json(const ExecutionPlan& plan) {
  nlohmann::ordered_json j;
  j["schema"] = "pimflow-plan/1";
  j["machine"] = {
      {"ranks", plan.machine.ranks},
      {"dpus_per_rank", plan.machine.dpus_per_rank},
      {"mram_bytes", plan.machine.mram_bytes},
      {"wram_bytes", plan.machine.wram_bytes},
      {"iram_bytes", plan.machine.iram_bytes},
      {"tasklets", plan.machine.tasklets},
  };
  j["opts"] = {{"parallel_transfer", plan.opts.parallel_transfer},
               {"cpu_split", plan.opts.cpu_split}};
  j["n"] = plan.n;
  j["ndpus"] = plan.ndpus;

  nlohmann::ordered_json parts = nlohmann::ordered_json::array();
  for (const auto& part : plan.parts.parts) {
    if (part.count == 0) continue;
    parts.push_back({{"dpu", part.dpu},
                     {"start", part.start},
                     {"count", part.count},
                     {"left_halo", part.left_halo},
                     {"right_halo", part.right_halo}});
  }
  j["partitions"] = std::move(parts);
  j["tile_elems"] = plan.tiles.tile_elems;
  j["wram_budget"] = plan.tiles.wram_budget;

  nlohmann::ordered_json passes = nlohmann::ordered_json::array();
  for (const auto& pass : plan.device_passes) {
    nlohmann::ordered_json pj;
    pj["in_type"] = scalar_type_name(pass.in_type);
    pj["out_type"] = scalar_type_name(pass.out_type);
    nlohmann::ordered_json st = nlohmann::ordered_json::array();
    for (const auto& s : pass.elementwise) st.push_back(stage_json(s));
    if (pass.blocking) st.push_back(stage_json(*pass.blocking));
    pj["stages"] = std::move(st);
    passes.push_back(std::move(pj));
  }
  j["device_passes"] = std::move(passes);

  nlohmann::ordered_json rj;
  rj["combine_partials"] = plan.residue.combine_partials;
  nlohmann::ordered_json rst = nlohmann::ordered_json::array();
  for (const auto& s : plan.residue.stages) rst.push_back(stage_json(s));
  rj["stages"] = std::move(rst);
  j["residue"] = std::move(rj);

  nlohmann::ordered_json layouts = nlohmann::ordered_json::array();
  for (std::size_t d = 0; d < plan.layouts.size(); ++d) {
    const auto& l = plan.layouts[d];
    if (l.resident_bytes == 0) continue;
    nlohmann::ordered_json lj;
    lj["dpu"] = d;
    lj["input0"] = {l.inputs[0].offset, l.inputs[0].bytes};
    if (l.inputs[1].bytes > 0) lj["input1"] = {l.inputs[1].offset, l.inputs[1].bytes};
    if (!l.broadcasts.empty()) {
      nlohmann::ordered_json bj;
      for (const auto& [name, r] : l.broadcasts) bj[name] = {r.offset, r.bytes};
      lj["broadcasts"] = std::move(bj);
    }
    lj["output"] = {l.output.offset, l.output.bytes};
    if (l.output_index.bytes > 0)
      lj["output_index"] = {l.output_index.offset, l.output_index.bytes};
    if (l.count_word.bytes > 0)
      lj["count_word"] = {l.count_word.offset, l.count_word.bytes};
    lj["out_capacity_elems"] = l.out_capacity_elems;
    lj["out_count_elems"] = l.out_count_elems;
    lj["resident_bytes"] = l.resident_bytes;
    layouts.push_back(std::move(lj));
  }
  j["layouts"] = std::move(layouts);

  j["variable_output"] = plan.variable_output;
  j["gather_indices"] = plan.gather_indices;
  j["device_stream_output"] = plan.device_stream_output;
  j["device_partial_reduce"] = plan.device_partial_reduce;
  j["device_out_type"] = scalar_type_name(plan.device_out_type);
  return j.dump(2);
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

ExecutionPlan plan(const Pipeline& p, std::int64_t n, int ndpus,
                   const PimMachineConfig& m, const PlanOptions& opts,
                   const std::map<std::string, std::size_t>& broadcast_sizes) {
  ExecutionPlan ep;
  ep.machine = m;
  ep.opts = opts;
  ep.n = n;
  ep.ndpus = ndpus;

  auto [passes, residue] = fuse_stages(p, opts.cpu_split);
  ep.device_passes = std::move(passes);
  ep.residue = std::move(residue);

  PartitionConstraints constraints;
  for (const auto& pass : ep.device_passes) {
    if (!pass.blocking) continue;
    if (pass.blocking->kind == Stage::Kind::Window)
      constraints.window = pass.blocking->size;
    else if (pass.blocking->kind == Stage::Kind::Group)
      constraints.group = pass.blocking->size;
    break;  // only the first blocking stage shapes the partition
  }
  ep.parts = partition(n, ndpus, constraints);

  if (ep.device_passes.empty()) {
    // nothing runs on the device; the host executes the pipeline directly
    ep.layouts.assign(static_cast<std::size_t>(ndpus), DpuLayout{});
    ep.fingerprint = fnv1a64(plan_to_json(ep));
    return ep;
  }

  const int streams = static_cast<int>(p.input_types.size());
  std::size_t max_width = scalar_type_bytes(p.input_types[0]);
  if (streams == 2) max_width = std::max(max_width, scalar_type_bytes(p.input_types[1]));
  for (const auto& pass : ep.device_passes) {
    max_width = std::max(max_width, scalar_type_bytes(pass.in_type));
    max_width = std::max(max_width, scalar_type_bytes(pass.out_type));
  }
  if (m.wram_bytes <= kWramReserveBytes)
    fail(ErrorCode::TileTooSmall, "WRAM smaller than the reserved area");
  ep.tiles = compute_tiles(ep.parts, max_width, m.wram_bytes - kWramReserveBytes, streams);

  const FusedPass& last = ep.device_passes.back();
  ep.device_partial_reduce =
      last.blocking && last.blocking->kind == Stage::Kind::Reduce;
  ep.device_stream_output = !ep.device_partial_reduce;
  ep.device_out_type = last.out_type;

  bool has_filter = false;
  bool dense = true;
  for (const auto& pass : ep.device_passes) {
    for (const auto& s : pass.elementwise)
      if (s.kind == Stage::Kind::Filter) {
        has_filter = true;
        dense = false;
      }
    if (pass.blocking && pass.blocking->kind != Stage::Kind::Reduce) dense = true;
  }
  ep.variable_output = ep.device_stream_output && has_filter;
  ep.gather_indices = ep.device_stream_output && !dense && !ep.residue.stages.empty();

  const std::size_t out_bytes =
      ep.device_partial_reduce
          ? scalar_type_bytes(last.blocking->reducer.acc.type)
          : scalar_type_bytes(ep.device_out_type);

  ep.layouts.assign(static_cast<std::size_t>(ndpus), DpuLayout{});
  for (const auto& part : ep.parts.parts) {
    if (part.count == 0) continue;
    DpuLayout& l = ep.layouts[static_cast<std::size_t>(part.dpu)];
    std::uint64_t cursor = 0;
    auto alloc = [&](std::uint64_t bytes) {
      MramRegion r{cursor, bytes};
      cursor = align_up(cursor + bytes, kMramAlignment);
      return r;
    };

    const std::uint64_t in_elems = static_cast<std::uint64_t>(part.total_elems());
    l.inputs[0] = alloc(in_elems * scalar_type_bytes(p.input_types[0]));
    if (streams == 2)
      l.inputs[1] = alloc(in_elems * scalar_type_bytes(p.input_types[1]));
    for (const auto& [name, count] : broadcast_sizes) {
      auto it = p.broadcast_types.find(name);
      std::size_t w = it == p.broadcast_types.end() ? 8 : scalar_type_bytes(it->second);
      l.broadcasts.emplace_back(name, alloc(count * w));
    }

    // static output shape: track capacity and (when fixed) the exact count
    std::int64_t cap = part.count;
    std::int64_t fixed = part.count;
    for (const auto& pass : ep.device_passes) {
      if (!pass.blocking) continue;
      const Stage& b = *pass.blocking;
      if (b.kind == Stage::Kind::Window) {
        const std::int64_t w = static_cast<std::int64_t>(b.size);
        std::int64_t out_end = std::min(part.start + part.count, n - w + 1);
        std::int64_t owned = std::max<std::int64_t>(0, out_end - part.start);
        cap = owned;
        fixed = owned;
      } else if (b.kind == Stage::Kind::Group) {
        const std::int64_t g = static_cast<std::int64_t>(b.size);
        cap = (cap + g - 1) / g;
        fixed = (fixed + g - 1) / g;
      } else {
        cap = static_cast<std::int64_t>(b.reducer.acc.length);
        fixed = cap;
      }
    }
    l.out_capacity_elems = cap;
    l.out_count_elems = ep.variable_output ? -1 : fixed;

    l.output = alloc(static_cast<std::uint64_t>(cap) * out_bytes);
    if (ep.gather_indices)
      l.output_index = alloc(static_cast<std::uint64_t>(cap) * 8);
    if (ep.variable_output) l.count_word = alloc(8);
    l.resident_bytes = cursor;
    if (l.resident_bytes > m.mram_bytes)
      fail(ErrorCode::MramOverflow,
           "DPU " + std::to_string(part.dpu) + " needs " +
               std::to_string(l.resident_bytes) + " bytes of MRAM (capacity " +
               std::to_string(m.mram_bytes) + ")");
  }

  ep.fingerprint = fnv1a64(plan_to_json(ep));
  return ep;
}

}  // namespace pimflow
