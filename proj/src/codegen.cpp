#include "pimflow/codegen.hpp"

#include <array>
#include <cstdio>

namespace pimflow {

namespace {

std::size_t reducer_nodes(const Reducer& r) {
  std::size_t n = node_count(*r.step) + node_count(*r.combine);
  if (r.slot) n += node_count(*r.slot);
  return n;
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

std::uint64_t iram_estimate(const std::vector<FusedPass>& passes) {
  std::size_t nodes = 0;
  for (const auto& pass : passes) {
    for (const auto& s : pass.elementwise) nodes += node_count(*s.kernel);
    if (pass.blocking) nodes += reducer_nodes(pass.blocking->reducer);
  }
  return kIramSkeletonBytes + kIramBytesPerNode * nodes;
}

DpuProgram instantiate_template(const ExecutionPlan& plan, const Pipeline& p) {
  DpuProgram prog;
  prog.passes = plan.device_passes;
  prog.tile_elems = plan.tiles.tile_elems;
  prog.tasklets = plan.machine.tasklets;
  prog.n_streams = static_cast<int>(p.input_types.size());
  prog.stream_types[0] = p.input_types[0];
  if (prog.n_streams == 2) prog.stream_types[1] = p.input_types[1];
  for (const auto& [name, t] : p.broadcast_types)
    prog.broadcast_layout.emplace_back(name, t);
  prog.variable_output = plan.variable_output;
  prog.gather_indices = plan.gather_indices;
  prog.partial_reduce = plan.device_partial_reduce;
  prog.out_type = plan.device_out_type;
  prog.plan_fingerprint = plan.fingerprint;

  for (const auto& pass : prog.passes) {
    for (const auto& s : pass.elementwise)
      if (!s.kernel)
        fail(ErrorCode::StageTypeMismatch, "template hole: stage without kernel");
    if (pass.blocking &&
        (!pass.blocking->reducer.step || !pass.blocking->reducer.combine))
      fail(ErrorCode::StageTypeMismatch, "template hole: reducer without kernels");
  }

  prog.iram_estimate = iram_estimate(prog.passes);
  if (prog.iram_estimate > plan.machine.iram_bytes)
    fail(ErrorCode::IramOverflow,
         "program estimate " + std::to_string(prog.iram_estimate) +
             " bytes exceeds IRAM capacity " +
             std::to_string(plan.machine.iram_bytes));
  return prog;
}

RenderedSource render_source(const DpuProgram& prog) {
  std::string s;
  s += "// ---- pimflow dpu program ----\n";
  s += "// plan fingerprint: " + hex64(prog.plan_fingerprint) + "\n";
  s += "// tile_elems " + std::to_string(prog.tile_elems) +
       " | tasklets " + std::to_string(prog.tasklets) +
       " | streams " + std::to_string(prog.n_streams) + "\n";
  s += "// iram estimate: " + std::to_string(prog.iram_estimate) + " bytes\n";
  s += "\n";

  s += "dpu_main(start, count, left_halo, right_halo):\n";
  s += "  // tasklet t handles the contiguous chunk [t*ceil(len/";
  s += std::to_string(prog.tasklets);
  s += "), ...) of each tile\n";
  s += "  for tile in tiles(count + left_halo + right_halo, tile_elems=" +
       std::to_string(prog.tile_elems) + "):\n";
  s += "    dma_in(mram input regions -> wram tile)\n";

  for (std::size_t pi = 0; pi < prog.passes.size(); ++pi) {
    const auto& pass = prog.passes[pi];
    s += "    pass " + std::to_string(pi) + " (" +
         scalar_type_name(pass.in_type) + " -> " +
         scalar_type_name(pass.out_type) + "):\n";
    s += "    for each element x (gidx = global index):\n";
    int slot = 0;
    for (const auto& st : pass.elementwise) {
      if (st.kind == Stage::Kind::Map) {
        s += "      x = " + render(*st.kernel) + "\n";
      } else {
        s += "      if !" + render(*st.kernel) + ": skip element\n";
      }
      (void)slot;
    }
    if (pass.blocking) {
      const Stage& b = *pass.blocking;
      const Reducer& r = b.reducer;
      switch (b.kind) {
        case Stage::Kind::Reduce:
          s += "      acc[tasklet] = step(acc[tasklet], x): " + render(*r.step) + "\n";
          if (r.slot)
            s += "        at slot " + render(*r.slot) + " of " +
                 std::to_string(r.acc.length) + "\n";
          s += "    at pass end: combine tasklet accumulators on-dpu: " +
               render(*r.combine) + "\n";
          s += "    emit per-dpu partial accumulator\n";
          break;
        case Stage::Kind::Window:
          s += "      window(" + std::to_string(b.size) +
               "): fold W elements from identity: " + render(*r.step) + "\n";
          break;
        case Stage::Kind::Group:
          s += "      group(" + std::to_string(b.size) +
               "): fold G elements from identity: " + render(*r.step) + "\n";
          break;
        default:
          break;
      }
    }
  }

  if (prog.variable_output) {
    s += "    append survivors to output region; update count word\n";
  } else if (!prog.partial_reduce) {
    s += "    dma_out(wram tile -> mram output region)\n";
  }
  if (prog.gather_indices)
    s += "    append survivor gidx to index region\n";
  s += "// ---- end ----\n";
  return RenderedSource{std::move(s)};
}

}  // namespace pimflow
