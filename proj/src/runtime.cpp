#include "pimflow/runtime.hpp"

#include <algorithm>

namespace pimflow {

namespace {

std::map<std::string, std::size_t> broadcast_sizes_of(const KernelEnv& env) {
  std::map<std::string, std::size_t> sizes;
  for (const auto& [name, buf] : env) sizes.emplace(name, buf.data.size());
  return sizes;
}

std::vector<std::uint8_t> encode_slice(const std::vector<ScalarValue>& values,
                                       std::int64_t first, std::int64_t count) {
  std::vector<std::uint8_t> bytes;
  for (std::int64_t k = 0; k < count; ++k)
    encode_value(values[static_cast<std::size_t>(first + k)], bytes);
  return bytes;
}

}  // namespace

std::vector<Element> gather_filtered(PimMachine& machine, const ExecutionPlan& plan,
                                     ScalarType elem_type, bool with_indices) {
  std::vector<const DpuPartition*> active;
  for (const auto& part : plan.parts.parts)
    if (part.count > 0) active.push_back(&part);

  // pull the survivor count words first
  std::vector<PimMachine::PullOp> count_ops;
  for (const auto* part : active) {
    const DpuLayout& l = plan.layouts[static_cast<std::size_t>(part->dpu)];
    count_ops.push_back({part->dpu, l.count_word.offset, 8});
  }
  auto count_raw = machine.pull_batch(count_ops);

  std::vector<std::int64_t> counts(active.size(), 0);
  std::vector<PimMachine::PullOp> data_ops;
  std::vector<PimMachine::PullOp> index_ops;
  const std::size_t w = scalar_type_bytes(elem_type);
  for (std::size_t i = 0; i < active.size(); ++i) {
    const DpuLayout& l = plan.layouts[static_cast<std::size_t>(active[i]->dpu)];
    std::int64_t count = decode_value(ScalarType::Int64, count_raw[i], 0).as_i64();
    if (count < 0 || count > l.out_capacity_elems)
      fail(ErrorCode::CountExceedsRegion,
           "dpu " + std::to_string(active[i]->dpu) + " reports " +
               std::to_string(count) + " survivors, capacity " +
               std::to_string(l.out_capacity_elems));
    counts[i] = count;
    data_ops.push_back({active[i]->dpu, l.output.offset,
                        static_cast<std::uint64_t>(count) * w});
    if (with_indices)
      index_ops.push_back({active[i]->dpu, l.output_index.offset,
                           static_cast<std::uint64_t>(count) * 8});
  }
  auto data_raw = machine.pull_batch(data_ops);
  std::vector<std::vector<std::uint8_t>> index_raw;
  if (with_indices) index_raw = machine.pull_batch(index_ops);

  // concatenate by dpu-id, then local order
  std::vector<Element> out;
  std::int64_t position = 0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    for (std::int64_t k = 0; k < counts[i]; ++k) {
      std::int64_t gidx =
          with_indices
              ? decode_value(ScalarType::Int64, index_raw[i], static_cast<std::size_t>(k)).as_i64()
              : position;
      out.push_back({decode_value(elem_type, data_raw[i], static_cast<std::size_t>(k)), gidx});
      ++position;
    }
  }
  return out;
}

RunResult run(const Pipeline& p, const std::vector<std::vector<ScalarValue>>& inputs,
              const KernelEnv& env, const PimMachineConfig& m, const RunOptions& opts) {
  if (inputs.size() != p.input_types.size())
    fail(ErrorCode::InputLengthMismatch, "wrong number of input streams");
  const std::int64_t n = static_cast<std::int64_t>(inputs[0].size());
  for (const auto& s : inputs)
    if (static_cast<std::int64_t>(s.size()) != n)
      fail(ErrorCode::InputLengthMismatch, "input streams differ in length");

  int ndpus = opts.dpus < 0 ? m.total_dpus() : opts.dpus;
  if (ndpus < 1 || ndpus > m.total_dpus())
    fail(ErrorCode::ConfigError, "dpus_to_use must be in [1, " +
                                     std::to_string(m.total_dpus()) + "]");

  PlanOptions popts{opts.parallel_transfer, opts.cpu_split};
  ExecutionPlan ep = plan(p, n, ndpus, m, popts, broadcast_sizes_of(env));

  RunResult result;
  result.plan_fingerprint = ep.fingerprint;

  if (n == 0 || ep.device_passes.empty()) {
    // nothing to launch: the host executes the pipeline directly
    result.output = reference_execute(p, inputs, env);
    return result;
  }

  DpuProgram prog = instantiate_template(ep, p);
  PimMachine machine(m, opts.parallel_transfer);

  // distribute: input slices (with halos) plus broadcasts, one batch
  std::vector<PimMachine::PushOp> pushes;
  for (const auto& part : ep.parts.parts) {
    if (part.count == 0) continue;
    const DpuLayout& l = ep.layouts[static_cast<std::size_t>(part.dpu)];
    pushes.push_back({part.dpu, l.inputs[0].offset,
                      encode_slice(inputs[0], part.first(), part.total_elems())});
    if (inputs.size() == 2)
      pushes.push_back({part.dpu, l.inputs[1].offset,
                        encode_slice(inputs[1], part.first(), part.total_elems())});
    for (const auto& [name, region] : l.broadcasts) {
      auto it = env.find(name);
      if (it == env.end()) continue;
      std::vector<std::uint8_t> bytes;
      for (const auto& v : it->second.data) encode_value(v, bytes);
      pushes.push_back({part.dpu, region.offset, std::move(bytes)});
    }
  }
  machine.push_batch(std::move(pushes));

  machine.launch(prog, ep);

  // gather
  if (ep.device_partial_reduce) {
    const Reducer& red = ep.residue.reducer;
    const std::size_t acc_bytes = red.acc.length * scalar_type_bytes(red.acc.type);
    std::vector<PimMachine::PullOp> pulls;
    for (const auto& part : ep.parts.parts) {
      if (part.count == 0) continue;
      const DpuLayout& l = ep.layouts[static_cast<std::size_t>(part.dpu)];
      pulls.push_back({part.dpu, l.output.offset, acc_bytes});
    }
    auto raw = machine.pull_batch(pulls);

    // combine per-DPU partials on the host, in dpu-id order
    std::vector<ScalarValue> acc = red.identity;
    for (const auto& bytes : raw) {
      std::vector<ScalarValue> partial;
      partial.reserve(red.acc.length);
      for (std::size_t i = 0; i < red.acc.length; ++i)
        partial.push_back(decode_value(red.acc.type, bytes, i));
      acc = combine_accumulators(red, acc, partial, env);
    }
    acc = apply_scalar_maps(ep.residue.stages, std::move(acc), env);

    result.output.is_stream = false;
    result.output.acc = red.acc;
    if (!acc.empty()) result.output.acc.type = acc[0].type();
    result.output.values = std::move(acc);
  } else {
    std::vector<Element> gathered;
    if (ep.variable_output) {
      gathered = gather_filtered(machine, ep, ep.device_out_type, ep.gather_indices);
    } else {
      std::vector<PimMachine::PullOp> pulls;
      std::vector<std::int64_t> counts;
      const std::size_t w = scalar_type_bytes(ep.device_out_type);
      for (const auto& part : ep.parts.parts) {
        if (part.count == 0) continue;
        const DpuLayout& l = ep.layouts[static_cast<std::size_t>(part.dpu)];
        pulls.push_back({part.dpu, l.output.offset,
                         static_cast<std::uint64_t>(l.out_count_elems) * w});
        counts.push_back(l.out_count_elems);
      }
      auto raw = machine.pull_batch(pulls);
      std::int64_t position = 0;
      for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::int64_t k = 0; k < counts[i]; ++k)
          gathered.push_back({decode_value(ep.device_out_type, raw[i],
                                           static_cast<std::size_t>(k)),
                              position++});
    }
    result.output = execute_stages(ep.residue.stages, std::move(gathered), env);
  }

  result.counters = machine.cost_report();
  return result;
}

RenderedSource render_program_source(const Pipeline& p, std::int64_t n,
                                     const PimMachineConfig& m, const RunOptions& opts,
                                     const std::map<std::string, std::size_t>& broadcast_sizes) {
  int ndpus = opts.dpus < 0 ? m.total_dpus() : opts.dpus;
  PlanOptions popts{opts.parallel_transfer, opts.cpu_split};
  ExecutionPlan ep = plan(p, n, ndpus, m, popts, broadcast_sizes);
  return render_source(instantiate_template(ep, p));
}

}  // namespace pimflow
