#include "pimflow/pipeline.hpp"

#include <algorithm>

namespace pimflow {

const char* stage_kind_name(Stage::Kind k) {
  switch (k) {
    case Stage::Kind::Map: return "map";
    case Stage::Kind::Filter: return "filter";
    case Stage::Kind::Reduce: return "reduce";
    case Stage::Kind::Window: return "window";
    case Stage::Kind::Group: return "group";
  }
  return "?";
}

Reducer Reducer::sum(ScalarType t) {
  Reducer r;
  r.acc = {t, 1, false};
  r.identity = {zero_of(t)};
  r.step = binary(BinaryOp::Add, input(0), input(1));
  r.combine = binary(BinaryOp::Add, input(0), input(1));
  return r;
}

Reducer Reducer::min(ScalarType t, ScalarValue identity_value) {
  Reducer r;
  r.acc = {t, 1, false};
  r.identity = {identity_value};
  r.step = binary(BinaryOp::Min, input(0), input(1));
  r.combine = binary(BinaryOp::Min, input(0), input(1));
  return r;
}

Reducer Reducer::max(ScalarType t, ScalarValue identity_value) {
  Reducer r;
  r.acc = {t, 1, false};
  r.identity = {identity_value};
  r.step = binary(BinaryOp::Max, input(0), input(1));
  r.combine = binary(BinaryOp::Max, input(0), input(1));
  return r;
}

namespace {

void validate_reducer(const Reducer& r, ScalarType elem, const EnvTypes& env_types) {
  if (r.acc.length == 0 || (!r.acc.array && r.acc.length != 1))
    fail(ErrorCode::StageTypeMismatch, "bad accumulator shape");
  if (r.identity.size() != r.acc.length)
    fail(ErrorCode::StageTypeMismatch, "identity size != accumulator length");
  for (const auto& v : r.identity)
    if (v.type() != r.acc.type)
      fail(ErrorCode::StageTypeMismatch, "identity type != accumulator type");
  if (!r.step || !r.combine)
    fail(ErrorCode::StageTypeMismatch, "reducer missing step or combine");

  const ScalarType step_inputs[2] = {r.acc.type, elem};
  if (type_check(*r.step, step_inputs, env_types) != r.acc.type)
    fail(ErrorCode::StageTypeMismatch, "reducer step must yield accumulator type");
  const ScalarType comb_inputs[2] = {r.acc.type, r.acc.type};
  if (type_check(*r.combine, comb_inputs, env_types) != r.acc.type)
    fail(ErrorCode::StageTypeMismatch, "reducer combine must yield accumulator type");
  if (r.acc.array) {
    if (!r.slot) fail(ErrorCode::StageTypeMismatch, "array reducer needs a slot kernel");
    const ScalarType slot_inputs[1] = {elem};
    ScalarType st = type_check(*r.slot, slot_inputs, env_types);
    if (st != ScalarType::Int32 && st != ScalarType::Int64)
      fail(ErrorCode::StageTypeMismatch, "slot kernel must yield an integer");
  }
}

bool reserved_buffer_name(const std::string& name) {
  if (name.empty() || name == "gidx") return true;
  if (name.size() >= 3 && name.compare(0, 2, "in") == 0 &&
      std::all_of(name.begin() + 2, name.end(), [](char c) { return c >= '0' && c <= '9'; }))
    return true;
  return false;
}

}  // namespace

Pipeline build(std::vector<ScalarType> input_types, EnvTypes broadcast_types,
               std::vector<Stage> stages) {
  if (stages.empty()) fail(ErrorCode::EmptyPipeline, "pipeline has no stages");
  if (input_types.empty() || input_types.size() > 2)
    fail(ErrorCode::StageTypeMismatch, "pipelines take 1 or 2 input streams");
  for (const auto& [name, t] : broadcast_types) {
    (void)t;
    if (reserved_buffer_name(name))
      fail(ErrorCode::StageTypeMismatch, "reserved broadcast buffer name '" + name + "'");
  }
  if (input_types.size() == 2 && stages.front().kind != Stage::Kind::Map)
    fail(ErrorCode::StageTypeMismatch, "two-stream pipelines must start with a map");

  Pipeline p;
  p.input_types = std::move(input_types);
  p.broadcast_types = std::move(broadcast_types);
  p.stages = std::move(stages);

  StreamType cur{true, p.input_types[0], {}};
  bool first = true;
  for (const auto& s : p.stages) {
    std::vector<ScalarType> kin;
    if (cur.is_stream) {
      kin.push_back(cur.element);
      if (first && p.input_types.size() == 2) kin.push_back(p.input_types[1]);
    } else {
      kin.push_back(cur.element);
    }

    if (!cur.is_stream && s.kind != Stage::Kind::Map)
      fail(ErrorCode::StageAfterScalarReduce,
           std::string(stage_kind_name(s.kind)) + " after a reduce");

    switch (s.kind) {
      case Stage::Kind::Map: {
        if (!s.kernel) fail(ErrorCode::StageTypeMismatch, "map missing kernel");
        ScalarType out = type_check(*s.kernel, kin, p.broadcast_types);
        cur.element = out;
        if (!cur.is_stream) cur.acc.type = out;
        break;
      }
      case Stage::Kind::Filter: {
        if (!s.kernel) fail(ErrorCode::StageTypeMismatch, "filter missing kernel");
        if (type_check(*s.kernel, kin, p.broadcast_types) != ScalarType::Bool)
          fail(ErrorCode::StageTypeMismatch, "filter predicate must be bool");
        break;
      }
      case Stage::Kind::Reduce: {
        validate_reducer(s.reducer, cur.element, p.broadcast_types);
        cur = StreamType{false, s.reducer.acc.type, s.reducer.acc};
        break;
      }
      case Stage::Kind::Window: {
        if (s.size == 0) fail(ErrorCode::BadWindowSize, "window size must be >= 1");
        if (s.reducer.acc.array)
          fail(ErrorCode::StageTypeMismatch, "window reducer must be scalar");
        validate_reducer(s.reducer, cur.element, p.broadcast_types);
        cur = StreamType{true, s.reducer.acc.type, {}};
        break;
      }
      case Stage::Kind::Group: {
        if (s.size == 0) fail(ErrorCode::BadGroupSize, "group size must be >= 1");
        if (s.reducer.acc.array)
          fail(ErrorCode::StageTypeMismatch, "group reducer must be scalar");
        validate_reducer(s.reducer, cur.element, p.broadcast_types);
        cur = StreamType{true, s.reducer.acc.type, {}};
        break;
      }
    }
    p.stage_outputs.push_back(cur);
    first = false;
  }
  return p;
}

std::vector<Element> apply_elementwise(const Stage& s, std::vector<Element> in,
                                       const KernelEnv& env) {
  if (s.kind == Stage::Kind::Map) {
    for (auto& e : in) {
      const ScalarValue args[1] = {e.value};
      e.value = eval(*s.kernel, args, e.gidx, env);
    }
    return in;
  }
  // filter: stable subsequence, survivors keep their original index
  std::vector<Element> out;
  out.reserve(in.size());
  for (auto& e : in) {
    const ScalarValue args[1] = {e.value};
    if (eval(*s.kernel, args, e.gidx, env).as_bool()) out.push_back(e);
  }
  return out;
}

std::vector<ScalarValue> reduce_fold(const Reducer& r, std::span<const Element> in,
                                     const KernelEnv& env) {
  std::vector<ScalarValue> acc = r.identity;
  for (const auto& e : in) {
    std::size_t slot = 0;
    if (r.acc.array) {
      const ScalarValue sargs[1] = {e.value};
      std::int64_t s = eval(*r.slot, sargs, e.gidx, env).as_index();
      if (s < 0 || static_cast<std::size_t>(s) >= r.acc.length)
        fail(ErrorCode::BroadcastIndexOutOfBounds,
             "accumulator slot " + std::to_string(s) + " out of range");
      slot = static_cast<std::size_t>(s);
    }
    const ScalarValue args[2] = {acc[slot], e.value};
    acc[slot] = eval(*r.step, args, e.gidx, env);
  }
  return acc;
}

std::vector<ScalarValue> combine_accumulators(const Reducer& r,
                                              std::span<const ScalarValue> a,
                                              std::span<const ScalarValue> b,
                                              const KernelEnv& env) {
  std::vector<ScalarValue> out(a.begin(), a.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const ScalarValue args[2] = {out[i], b[i]};
    out[i] = eval(*r.combine, args, 0, env);
  }
  return out;
}

std::vector<Element> window_fold(const Reducer& r, std::size_t w,
                                 std::span<const Element> in, const KernelEnv& env) {
  std::vector<Element> out;
  if (in.size() < w) return out;
  out.reserve(in.size() - w + 1);
  for (std::size_t j = 0; j + w <= in.size(); ++j) {
    ScalarValue acc = r.identity[0];
    for (std::size_t k = 0; k < w; ++k) {
      const ScalarValue args[2] = {acc, in[j + k].value};
      acc = eval(*r.step, args, in[j + k].gidx, env);
    }
    out.push_back({acc, static_cast<std::int64_t>(j)});
  }
  return out;
}

std::vector<Element> group_fold(const Reducer& r, std::size_t g,
                                std::span<const Element> in, const KernelEnv& env) {
  std::vector<Element> out;
  out.reserve((in.size() + g - 1) / g);
  for (std::size_t j = 0; j * g < in.size(); ++j) {
    std::size_t lo = j * g;
    std::size_t hi = std::min(lo + g, in.size());
    ScalarValue acc = r.identity[0];
    for (std::size_t k = lo; k < hi; ++k) {
      const ScalarValue args[2] = {acc, in[k].value};
      acc = eval(*r.step, args, in[k].gidx, env);
    }
    out.push_back({acc, static_cast<std::int64_t>(j)});
  }
  return out;
}

namespace {

// Scalar maps over an accumulator: gidx is the slot index (0 for scalars).
std::vector<ScalarValue> apply_acc_map(const Stage& s, std::vector<ScalarValue> acc,
                                       const KernelEnv& env) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const ScalarValue args[1] = {acc[i]};
    acc[i] = eval(*s.kernel, args, static_cast<std::int64_t>(i), env);
  }
  return acc;
}

}  // namespace

std::vector<ScalarValue> apply_scalar_maps(std::span<const Stage> stages,
                                           std::vector<ScalarValue> acc,
                                           const KernelEnv& env) {
  for (const auto& s : stages) acc = apply_acc_map(s, std::move(acc), env);
  return acc;
}

PipelineOutput execute_stages(std::span<const Stage> stages,
                              std::vector<Element> stream, const KernelEnv& env) {
  bool is_stream = true;
  std::vector<ScalarValue> acc;
  AccumDesc desc;

  for (const auto& s : stages) {
    if (!is_stream) {
      acc = apply_acc_map(s, std::move(acc), env);
      if (!acc.empty()) desc.type = acc[0].type();
      continue;
    }
    switch (s.kind) {
      case Stage::Kind::Map:
      case Stage::Kind::Filter:
        stream = apply_elementwise(s, std::move(stream), env);
        break;
      case Stage::Kind::Reduce:
        acc = reduce_fold(s.reducer, stream, env);
        desc = s.reducer.acc;
        is_stream = false;
        stream.clear();
        break;
      case Stage::Kind::Window:
        stream = window_fold(s.reducer, s.size, stream, env);
        break;
      case Stage::Kind::Group:
        stream = group_fold(s.reducer, s.size, stream, env);
        break;
    }
  }

  PipelineOutput out;
  out.is_stream = is_stream;
  if (is_stream) {
    out.values.reserve(stream.size());
    for (const auto& e : stream) out.values.push_back(e.value);
  } else {
    out.values = std::move(acc);
    out.acc = desc;
  }
  return out;
}

PipelineOutput reference_execute(const Pipeline& p,
                                 const std::vector<std::vector<ScalarValue>>& inputs,
                                 const KernelEnv& env) {
  if (inputs.size() != p.input_types.size())
    fail(ErrorCode::InputLengthMismatch, "wrong number of input streams");
  const std::size_t n = inputs[0].size();
  for (const auto& s : inputs)
    if (s.size() != n) fail(ErrorCode::InputLengthMismatch, "input streams differ in length");

  std::vector<Element> stream;
  stream.reserve(n);
  std::size_t first_stage = 0;

  if (p.input_types.size() == 2) {
    // zip entry stage: the first map consumes both streams
    const Stage& s0 = p.stages[0];
    for (std::size_t i = 0; i < n; ++i) {
      const ScalarValue args[2] = {inputs[0][i], inputs[1][i]};
      stream.push_back({eval(*s0.kernel, args, static_cast<std::int64_t>(i), env),
                        static_cast<std::int64_t>(i)});
    }
    first_stage = 1;
  } else {
    for (std::size_t i = 0; i < n; ++i)
      stream.push_back({inputs[0][i], static_cast<std::int64_t>(i)});
  }

  return execute_stages(std::span<const Stage>(p.stages).subspan(first_stage),
                        std::move(stream), env);
}

}  // namespace pimflow
