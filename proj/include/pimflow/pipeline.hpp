#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pimflow/kernel.hpp"

namespace pimflow {

/// Reduction accumulator shape: a scalar, or a fixed-size array (histogram).
struct AccumDesc {
  ScalarType type = ScalarType::Int64;
  std::size_t length = 1;
  bool array = false;

  bool operator==(const AccumDesc&) const = default;
};

/// A fold with identity, per-element step, and an associative-commutative
/// combine. For array accumulators the step updates one slot, chosen by
/// `slot` evaluated on the element.
///
/// Kernel input conventions:
///   step:    in0 = accumulator (slot value for array reducers), in1 = element
///   combine: in0, in1 = two accumulator (slot) values
///   slot:    in0 = element; must yield an integer
struct Reducer {
  AccumDesc acc;
  std::vector<ScalarValue> identity;  // acc.length values
  ExprPtr step;
  ExprPtr combine;
  ExprPtr slot;  // array reducers only

  static Reducer sum(ScalarType t);
  static Reducer min(ScalarType t, ScalarValue identity_value);
  static Reducer max(ScalarType t, ScalarValue identity_value);
};

struct Stage {
  enum class Kind { Map, Filter, Reduce, Window, Group };

  Kind kind;
  ExprPtr kernel;       // Map f / Filter p
  Reducer reducer;      // Reduce / Window / Group
  std::size_t size = 0; // W or G

  static Stage map(ExprPtr f) { return {Kind::Map, std::move(f), {}, 0}; }
  static Stage filter(ExprPtr p) { return {Kind::Filter, std::move(p), {}, 0}; }
  static Stage reduce(Reducer r) { return {Kind::Reduce, nullptr, std::move(r), 0}; }
  static Stage window(std::size_t w, Reducer r) { return {Kind::Window, nullptr, std::move(r), w}; }
  static Stage group(std::size_t g, Reducer r) { return {Kind::Group, nullptr, std::move(r), g}; }

  bool is_elementwise() const { return kind == Kind::Map || kind == Kind::Filter; }
  bool is_blocking() const { return !is_elementwise(); }
};

const char* stage_kind_name(Stage::Kind k);

/// Type flowing between stages: an element stream or a (post-reduce) accumulator.
struct StreamType {
  bool is_stream = true;
  ScalarType element = ScalarType::Int32;  // stream element / scalar accumulator
  AccumDesc acc;                           // when !is_stream

  bool operator==(const StreamType&) const = default;
};

/// A validated linear sequence of stages over 1 or 2 aligned input streams.
/// Immutable once built.
struct Pipeline {
  std::vector<ScalarType> input_types;  // size 1 or 2
  EnvTypes broadcast_types;
  std::vector<Stage> stages;
  std::vector<StreamType> stage_outputs;  // per stage, filled by build()

  StreamType output_type() const { return stage_outputs.back(); }
};

/// Validates stage chaining and type-checks every kernel.
/// Throws EmptyPipeline, StageTypeMismatch, BadWindowSize, BadGroupSize,
/// StageAfterScalarReduce, plus kernel type errors.
Pipeline build(std::vector<ScalarType> input_types, EnvTypes broadcast_types,
               std::vector<Stage> stages);

/// One stream element with the global index it carries. Filter survivors keep
/// their original index; window/group outputs are renumbered by position.
struct Element {
  ScalarValue value;
  std::int64_t gidx;
};

/// Pipeline result: a stream of values or an accumulator.
struct PipelineOutput {
  bool is_stream = true;
  std::vector<ScalarValue> values;  // stream contents or acc slots
  AccumDesc acc;

  bool operator==(const PipelineOutput&) const = default;
};

/// The definitional sequential oracle. Executes stages strictly in order,
/// left to right over elements.
PipelineOutput reference_execute(const Pipeline& p,
                                 const std::vector<std::vector<ScalarValue>>& inputs,
                                 const KernelEnv& env);

// Single-stage semantics, shared by the oracle and the host-residue executor.
std::vector<Element> apply_elementwise(const Stage& s, std::vector<Element> in,
                                       const KernelEnv& env);
std::vector<ScalarValue> reduce_fold(const Reducer& r, std::span<const Element> in,
                                     const KernelEnv& env);
std::vector<ScalarValue> combine_accumulators(const Reducer& r,
                                              std::span<const ScalarValue> a,
                                              std::span<const ScalarValue> b,
                                              const KernelEnv& env);
std::vector<Element> window_fold(const Reducer& r, std::size_t w,
                                 std::span<const Element> in, const KernelEnv& env);
std::vector<Element> group_fold(const Reducer& r, std::size_t g,
                                std::span<const Element> in, const KernelEnv& env);

/// Scalar maps applied to accumulator slots (gidx = slot index).
std::vector<ScalarValue> apply_scalar_maps(std::span<const Stage> stages,
                                           std::vector<ScalarValue> acc,
                                           const KernelEnv& env);

/// Runs `stages` (a validated suffix of a pipeline) on an intermediate stream.
PipelineOutput execute_stages(std::span<const Stage> stages,
                              std::vector<Element> stream, const KernelEnv& env);

}  // namespace pimflow
