#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pimflow/error.hpp"

namespace pimflow {

enum class ScalarType { Int32, Int64, Float64, Bool };

const char* scalar_type_name(ScalarType t);
std::size_t scalar_type_bytes(ScalarType t);

/// Tagged runtime value. Integer arithmetic is two's-complement wrapping,
/// identically in the reference executor and the DPU simulator.
struct ScalarValue {
  std::variant<std::int32_t, std::int64_t, double, bool> v;

  ScalarValue() : v(std::int32_t{0}) {}
  ScalarValue(std::int32_t x) : v(x) {}
  ScalarValue(std::int64_t x) : v(x) {}
  ScalarValue(double x) : v(x) {}
  ScalarValue(bool x) : v(x) {}

  ScalarType type() const {
    switch (v.index()) {
      case 0: return ScalarType::Int32;
      case 1: return ScalarType::Int64;
      case 2: return ScalarType::Float64;
      default: return ScalarType::Bool;
    }
  }

  std::int32_t as_i32() const { return std::get<std::int32_t>(v); }
  std::int64_t as_i64() const { return std::get<std::int64_t>(v); }
  double as_f64() const { return std::get<double>(v); }
  bool as_bool() const { return std::get<bool>(v); }

  /// Integer value widened to 64 bits; errors on non-integer payloads.
  std::int64_t as_index() const;

  bool operator==(const ScalarValue& o) const { return v == o.v; }
};

ScalarValue zero_of(ScalarType t);

enum class UnaryOp { Neg, Not, IntToFloat, FloatToInt };
enum class BinaryOp {
  Add, Sub, Mul, Div, Mod, Min, Max,
  Eq, Ne, Lt, Le, Gt, Ge, And, Or,
};

const char* unary_op_name(UnaryOp op);
const char* binary_op_name(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// A finite, loop-free expression tree over element inputs, the global
/// element index, and read-only broadcast buffers.
struct Expr {
  enum class Kind { Input, GlobalIndex, Const, BroadcastLoad, Unary, Binary, Select };

  Kind kind;
  int slot = 0;              // Input
  ScalarValue value;         // Const
  std::string buffer;        // BroadcastLoad
  UnaryOp uop{};             // Unary
  BinaryOp bop{};            // Binary
  ExprPtr a, b, c;           // children; BroadcastLoad index lives in `a`
};

// Construction helpers.
ExprPtr input(int slot);
ExprPtr global_index();
ExprPtr constant(ScalarValue v);
ExprPtr broadcast_load(std::string buffer, ExprPtr index);
ExprPtr unary(UnaryOp op, ExprPtr a);
ExprPtr binary(BinaryOp op, ExprPtr a, ExprPtr b);
ExprPtr select(ExprPtr cond, ExprPtr then_branch, ExprPtr else_branch);

inline ExprPtr lit_i32(std::int32_t x) { return constant(ScalarValue(x)); }
inline ExprPtr lit_i64(std::int64_t x) { return constant(ScalarValue(x)); }
inline ExprPtr lit_f64(double x) { return constant(ScalarValue(x)); }
inline ExprPtr lit_bool(bool x) { return constant(ScalarValue(x)); }

struct BroadcastBuffer {
  ScalarType type;
  std::vector<ScalarValue> data;
};

/// Read-only broadcast environment; immutable for the duration of a run.
using KernelEnv = std::map<std::string, BroadcastBuffer>;
using EnvTypes = std::map<std::string, ScalarType>;

EnvTypes env_types_of(const KernelEnv& env);

/// Checks the tree and returns its result type.
/// Throws UnknownInputSlot, UnknownBuffer, TypeMismatch, ConstDivisionByZero.
ScalarType type_check(const Expr& e, std::span<const ScalarType> input_types,
                      const EnvTypes& env_types);

/// Pure evaluation of a type-checked tree.
/// Throws RuntimeDivisionByZero, BroadcastIndexOutOfBounds.
ScalarValue eval(const Expr& e, std::span<const ScalarValue> inputs,
                 std::int64_t gidx, const KernelEnv& env);

/// Number of operator nodes (Unary/Binary/Select/BroadcastLoad).
std::size_t op_count(const Expr& e);

/// Total node count, including leaves. Feeds the IRAM size estimate.
std::size_t node_count(const Expr& e);

/// Deterministic, fully parenthesized rendering. Injective up to tree
/// equality; the grammar is documented in the README.
std::string render(const Expr& e);

bool expr_equal(const Expr& a, const Expr& b);

}  // namespace pimflow
