#include "pimflow/kernel.hpp"

#include <charconv>
#include <cmath>
#include <cstring>

namespace pimflow {

const char* scalar_type_name(ScalarType t) {
  switch (t) {
    case ScalarType::Int32: return "i32";
    case ScalarType::Int64: return "i64";
    case ScalarType::Float64: return "f64";
    case ScalarType::Bool: return "bool";
  }
  return "?";
}

std::size_t scalar_type_bytes(ScalarType t) {
  switch (t) {
    case ScalarType::Int32: return 4;
    case ScalarType::Int64: return 8;
    case ScalarType::Float64: return 8;
    case ScalarType::Bool: return 1;
  }
  return 0;
}

std::int64_t ScalarValue::as_index() const {
  switch (type()) {
    case ScalarType::Int32: return as_i32();
    case ScalarType::Int64: return as_i64();
    default:
      fail(ErrorCode::TypeMismatch, "index value is not an integer");
  }
}

ScalarValue zero_of(ScalarType t) {
  switch (t) {
    case ScalarType::Int32: return ScalarValue(std::int32_t{0});
    case ScalarType::Int64: return ScalarValue(std::int64_t{0});
    case ScalarType::Float64: return ScalarValue(0.0);
    case ScalarType::Bool: return ScalarValue(false);
  }
  return {};
}

const char* unary_op_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "neg";
    case UnaryOp::Not: return "not";
    case UnaryOp::IntToFloat: return "i2f";
    case UnaryOp::FloatToInt: return "f2i";
  }
  return "?";
}

const char* binary_op_name(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Min: return "min";
    case BinaryOp::Max: return "max";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

ExprPtr input(int slot) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Input;
  e->slot = slot;
  return e;
}

ExprPtr global_index() {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::GlobalIndex;
  return e;
}

ExprPtr constant(ScalarValue v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Const;
  e->value = v;
  return e;
}

ExprPtr broadcast_load(std::string buffer, ExprPtr index) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::BroadcastLoad;
  e->buffer = std::move(buffer);
  e->a = std::move(index);
  return e;
}

ExprPtr unary(UnaryOp op, ExprPtr a) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Unary;
  e->uop = op;
  e->a = std::move(a);
  return e;
}

ExprPtr binary(BinaryOp op, ExprPtr a, ExprPtr b) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Binary;
  e->bop = op;
  e->a = std::move(a);
  e->b = std::move(b);
  return e;
}

ExprPtr select(ExprPtr cond, ExprPtr then_branch, ExprPtr else_branch) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Select;
  e->a = std::move(cond);
  e->b = std::move(then_branch);
  e->c = std::move(else_branch);
  return e;
}

EnvTypes env_types_of(const KernelEnv& env) {
  EnvTypes out;
  for (const auto& [name, buf] : env) out.emplace(name, buf.type);
  return out;
}

namespace {

bool is_numeric(ScalarType t) { return t != ScalarType::Bool; }
bool is_integer(ScalarType t) {
  return t == ScalarType::Int32 || t == ScalarType::Int64;
}

bool const_is_zero(const Expr& e) {
  if (e.kind != Expr::Kind::Const) return false;
  switch (e.value.type()) {
    case ScalarType::Int32: return e.value.as_i32() == 0;
    case ScalarType::Int64: return e.value.as_i64() == 0;
    case ScalarType::Float64: return e.value.as_f64() == 0.0;
    case ScalarType::Bool: return false;
  }
  return false;
}

}  // namespace

ScalarType type_check(const Expr& e, std::span<const ScalarType> input_types,
                      const EnvTypes& env_types) {
  switch (e.kind) {
    case Expr::Kind::Input:
      if (e.slot < 0 || static_cast<std::size_t>(e.slot) >= input_types.size())
        fail(ErrorCode::UnknownInputSlot, "input slot " + std::to_string(e.slot));
      return input_types[static_cast<std::size_t>(e.slot)];
    case Expr::Kind::GlobalIndex:
      return ScalarType::Int64;
    case Expr::Kind::Const:
      return e.value.type();
    case Expr::Kind::BroadcastLoad: {
      auto it = env_types.find(e.buffer);
      if (it == env_types.end())
        fail(ErrorCode::UnknownBuffer, "broadcast buffer '" + e.buffer + "'");
      ScalarType idx = type_check(*e.a, input_types, env_types);
      if (!is_integer(idx))
        fail(ErrorCode::TypeMismatch, "broadcast index must be integer");
      return it->second;
    }
    case Expr::Kind::Unary: {
      ScalarType t = type_check(*e.a, input_types, env_types);
      switch (e.uop) {
        case UnaryOp::Neg:
          if (!is_numeric(t)) fail(ErrorCode::TypeMismatch, "neg of bool");
          return t;
        case UnaryOp::Not:
          if (t != ScalarType::Bool) fail(ErrorCode::TypeMismatch, "not of non-bool");
          return ScalarType::Bool;
        case UnaryOp::IntToFloat:
          if (!is_integer(t)) fail(ErrorCode::TypeMismatch, "i2f of non-integer");
          return ScalarType::Float64;
        case UnaryOp::FloatToInt:
          if (t != ScalarType::Float64) fail(ErrorCode::TypeMismatch, "f2i of non-float");
          return ScalarType::Int64;
      }
      fail(ErrorCode::TypeMismatch, "bad unary op");
    }
    case Expr::Kind::Binary: {
      ScalarType ta = type_check(*e.a, input_types, env_types);
      ScalarType tb = type_check(*e.b, input_types, env_types);
      if (ta != tb)
        fail(ErrorCode::TypeMismatch,
             std::string("binary operands differ: ") + scalar_type_name(ta) +
                 " vs " + scalar_type_name(tb));
      switch (e.bop) {
        case BinaryOp::Add: case BinaryOp::Sub: case BinaryOp::Mul:
        case BinaryOp::Min: case BinaryOp::Max:
          if (!is_numeric(ta)) fail(ErrorCode::TypeMismatch, "arithmetic on bool");
          return ta;
        case BinaryOp::Div:
          if (!is_numeric(ta)) fail(ErrorCode::TypeMismatch, "division on bool");
          if (is_integer(ta) && const_is_zero(*e.b))
            fail(ErrorCode::ConstDivisionByZero, "division by constant zero");
          return ta;
        case BinaryOp::Mod:
          if (!is_integer(ta)) fail(ErrorCode::TypeMismatch, "mod on non-integer");
          if (const_is_zero(*e.b))
            fail(ErrorCode::ConstDivisionByZero, "mod by constant zero");
          return ta;
        case BinaryOp::Eq: case BinaryOp::Ne:
          return ScalarType::Bool;
        case BinaryOp::Lt: case BinaryOp::Le: case BinaryOp::Gt: case BinaryOp::Ge:
          if (!is_numeric(ta)) fail(ErrorCode::TypeMismatch, "ordering on bool");
          return ScalarType::Bool;
        case BinaryOp::And: case BinaryOp::Or:
          if (ta != ScalarType::Bool) fail(ErrorCode::TypeMismatch, "logic on non-bool");
          return ScalarType::Bool;
      }
      fail(ErrorCode::TypeMismatch, "bad binary op");
    }
    case Expr::Kind::Select: {
      ScalarType tc = type_check(*e.a, input_types, env_types);
      if (tc != ScalarType::Bool)
        fail(ErrorCode::TypeMismatch, "select condition must be bool");
      ScalarType tt = type_check(*e.b, input_types, env_types);
      ScalarType te = type_check(*e.c, input_types, env_types);
      if (tt != te)
        fail(ErrorCode::TypeMismatch, "select branch types differ");
      return tt;
    }
  }
  fail(ErrorCode::TypeMismatch, "bad node kind");
}

namespace {

std::int32_t wrap_i32(std::uint32_t x) { return static_cast<std::int32_t>(x); }
std::int64_t wrap_i64(std::uint64_t x) { return static_cast<std::int64_t>(x); }

template <typename T, typename U>
ScalarValue int_binary(BinaryOp op, T a, T b) {
  auto ua = static_cast<U>(a);
  auto ub = static_cast<U>(b);
  switch (op) {
    case BinaryOp::Add: return ScalarValue(static_cast<T>(ua + ub));
    case BinaryOp::Sub: return ScalarValue(static_cast<T>(ua - ub));
    case BinaryOp::Mul: return ScalarValue(static_cast<T>(ua * ub));
    case BinaryOp::Div:
      if (b == 0) fail(ErrorCode::RuntimeDivisionByZero, "division by zero");
      if (b == T{-1}) return ScalarValue(static_cast<T>(U{0} - ua));  // wraps at T_MIN
      return ScalarValue(static_cast<T>(a / b));
    case BinaryOp::Mod:
      if (b == 0) fail(ErrorCode::RuntimeDivisionByZero, "mod by zero");
      if (b == T{-1}) return ScalarValue(T{0});
      return ScalarValue(static_cast<T>(a % b));
    case BinaryOp::Min: return ScalarValue(a < b ? a : b);
    case BinaryOp::Max: return ScalarValue(a > b ? a : b);
    case BinaryOp::Eq: return ScalarValue(a == b);
    case BinaryOp::Ne: return ScalarValue(a != b);
    case BinaryOp::Lt: return ScalarValue(a < b);
    case BinaryOp::Le: return ScalarValue(a <= b);
    case BinaryOp::Gt: return ScalarValue(a > b);
    case BinaryOp::Ge: return ScalarValue(a >= b);
    default: fail(ErrorCode::TypeMismatch, "bad integer binary op");
  }
}

ScalarValue float_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::Add: return ScalarValue(a + b);
    case BinaryOp::Sub: return ScalarValue(a - b);
    case BinaryOp::Mul: return ScalarValue(a * b);
    case BinaryOp::Div:
      if (b == 0.0) fail(ErrorCode::RuntimeDivisionByZero, "division by zero");
      return ScalarValue(a / b);
    case BinaryOp::Min: return ScalarValue(a < b ? a : b);
    case BinaryOp::Max: return ScalarValue(a > b ? a : b);
    case BinaryOp::Eq: return ScalarValue(a == b);
    case BinaryOp::Ne: return ScalarValue(a != b);
    case BinaryOp::Lt: return ScalarValue(a < b);
    case BinaryOp::Le: return ScalarValue(a <= b);
    case BinaryOp::Gt: return ScalarValue(a > b);
    case BinaryOp::Ge: return ScalarValue(a >= b);
    default: fail(ErrorCode::TypeMismatch, "bad float binary op");
  }
}

}  // namespace

ScalarValue eval(const Expr& e, std::span<const ScalarValue> inputs,
                 std::int64_t gidx, const KernelEnv& env) {
  switch (e.kind) {
    case Expr::Kind::Input:
      return inputs[static_cast<std::size_t>(e.slot)];
    case Expr::Kind::GlobalIndex:
      return ScalarValue(gidx);
    case Expr::Kind::Const:
      return e.value;
    case Expr::Kind::BroadcastLoad: {
      std::int64_t idx = eval(*e.a, inputs, gidx, env).as_index();
      const auto& buf = env.at(e.buffer);
      if (idx < 0 || static_cast<std::size_t>(idx) >= buf.data.size())
        fail(ErrorCode::BroadcastIndexOutOfBounds,
             "buffer '" + e.buffer + "' index " + std::to_string(idx));
      return buf.data[static_cast<std::size_t>(idx)];
    }
    case Expr::Kind::Unary: {
      ScalarValue a = eval(*e.a, inputs, gidx, env);
      switch (e.uop) {
        case UnaryOp::Neg:
          switch (a.type()) {
            case ScalarType::Int32:
              return ScalarValue(wrap_i32(0u - static_cast<std::uint32_t>(a.as_i32())));
            case ScalarType::Int64:
              return ScalarValue(wrap_i64(0ull - static_cast<std::uint64_t>(a.as_i64())));
            default:
              return ScalarValue(-a.as_f64());
          }
        case UnaryOp::Not:
          return ScalarValue(!a.as_bool());
        case UnaryOp::IntToFloat:
          return ScalarValue(static_cast<double>(a.as_index()));
        case UnaryOp::FloatToInt:
          // truncation toward zero
          return ScalarValue(static_cast<std::int64_t>(a.as_f64()));
      }
      fail(ErrorCode::TypeMismatch, "bad unary op");
    }
    case Expr::Kind::Binary: {
      ScalarValue a = eval(*e.a, inputs, gidx, env);
      ScalarValue b = eval(*e.b, inputs, gidx, env);
      switch (a.type()) {
        case ScalarType::Int32:
          return int_binary<std::int32_t, std::uint32_t>(e.bop, a.as_i32(), b.as_i32());
        case ScalarType::Int64:
          return int_binary<std::int64_t, std::uint64_t>(e.bop, a.as_i64(), b.as_i64());
        case ScalarType::Float64:
          return float_binary(e.bop, a.as_f64(), b.as_f64());
        case ScalarType::Bool:
          switch (e.bop) {
            case BinaryOp::And: return ScalarValue(a.as_bool() && b.as_bool());
            case BinaryOp::Or: return ScalarValue(a.as_bool() || b.as_bool());
            case BinaryOp::Eq: return ScalarValue(a.as_bool() == b.as_bool());
            case BinaryOp::Ne: return ScalarValue(a.as_bool() != b.as_bool());
            default: fail(ErrorCode::TypeMismatch, "bad bool binary op");
          }
      }
      fail(ErrorCode::TypeMismatch, "bad binary operand type");
    }
    case Expr::Kind::Select: {
      bool cond = eval(*e.a, inputs, gidx, env).as_bool();
      return cond ? eval(*e.b, inputs, gidx, env) : eval(*e.c, inputs, gidx, env);
    }
  }
  fail(ErrorCode::TypeMismatch, "bad node kind");
}

std::size_t op_count(const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Input:
    case Expr::Kind::GlobalIndex:
    case Expr::Kind::Const:
      return 0;
    case Expr::Kind::BroadcastLoad:
      return 1 + op_count(*e.a);
    case Expr::Kind::Unary:
      return 1 + op_count(*e.a);
    case Expr::Kind::Binary:
      return 1 + op_count(*e.a) + op_count(*e.b);
    case Expr::Kind::Select:
      return 1 + op_count(*e.a) + op_count(*e.b) + op_count(*e.c);
  }
  return 0;
}

std::size_t node_count(const Expr& e) {
  std::size_t n = 1;
  if (e.a) n += node_count(*e.a);
  if (e.b) n += node_count(*e.b);
  if (e.c) n += node_count(*e.c);
  return n;
}

namespace {

std::string render_const(const ScalarValue& v) {
  switch (v.type()) {
    case ScalarType::Int32:
      return std::to_string(v.as_i32()) + "i32";
    case ScalarType::Int64:
      return std::to_string(v.as_i64()) + "i64";
    case ScalarType::Float64: {
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v.as_f64());
      (void)ec;
      return std::string(buf, p) + "f64";
    }
    case ScalarType::Bool:
      return v.as_bool() ? "true" : "false";
  }
  return "?";
}

void render_into(const Expr& e, std::string& out) {
  switch (e.kind) {
    case Expr::Kind::Input:
      out += "in" + std::to_string(e.slot);
      return;
    case Expr::Kind::GlobalIndex:
      out += "gidx";
      return;
    case Expr::Kind::Const:
      out += render_const(e.value);
      return;
    case Expr::Kind::BroadcastLoad:
      out += e.buffer;
      out += '[';
      render_into(*e.a, out);
      out += ']';
      return;
    case Expr::Kind::Unary:
      switch (e.uop) {
        case UnaryOp::Neg: out += "(-"; break;
        case UnaryOp::Not: out += "(!"; break;
        case UnaryOp::IntToFloat: out += "f64("; break;
        case UnaryOp::FloatToInt: out += "i64("; break;
      }
      render_into(*e.a, out);
      out += ')';
      return;
    case Expr::Kind::Binary:
      if (e.bop == BinaryOp::Min || e.bop == BinaryOp::Max) {
        out += binary_op_name(e.bop);
        out += '(';
        render_into(*e.a, out);
        out += ", ";
        render_into(*e.b, out);
        out += ')';
      } else {
        out += '(';
        render_into(*e.a, out);
        out += ' ';
        out += binary_op_name(e.bop);
        out += ' ';
        render_into(*e.b, out);
        out += ')';
      }
      return;
    case Expr::Kind::Select:
      out += '(';
      render_into(*e.a, out);
      out += " ? ";
      render_into(*e.b, out);
      out += " : ";
      render_into(*e.c, out);
      out += ')';
      return;
  }
}

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_into(e, out);
  return out;
}

bool expr_equal(const Expr& a, const Expr& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Expr::Kind::Input: return a.slot == b.slot;
    case Expr::Kind::GlobalIndex: return true;
    case Expr::Kind::Const: return a.value == b.value;
    case Expr::Kind::BroadcastLoad:
      return a.buffer == b.buffer && expr_equal(*a.a, *b.a);
    case Expr::Kind::Unary:
      return a.uop == b.uop && expr_equal(*a.a, *b.a);
    case Expr::Kind::Binary:
      return a.bop == b.bop && expr_equal(*a.a, *b.a) && expr_equal(*a.b, *b.b);
    case Expr::Kind::Select:
      return expr_equal(*a.a, *b.a) && expr_equal(*a.b, *b.b) && expr_equal(*a.c, *b.c);
  }
  return false;
}

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownInputSlot: return "UnknownInputSlot";
    case ErrorCode::UnknownBuffer: return "UnknownBuffer";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::ConstDivisionByZero: return "ConstDivisionByZero";
    case ErrorCode::RuntimeDivisionByZero: return "RuntimeDivisionByZero";
    case ErrorCode::BroadcastIndexOutOfBounds: return "BroadcastIndexOutOfBounds";
    case ErrorCode::EmptyPipeline: return "EmptyPipeline";
    case ErrorCode::StageTypeMismatch: return "StageTypeMismatch";
    case ErrorCode::BadWindowSize: return "BadWindowSize";
    case ErrorCode::BadGroupSize: return "BadGroupSize";
    case ErrorCode::StageAfterScalarReduce: return "StageAfterScalarReduce";
    case ErrorCode::InputLengthMismatch: return "InputLengthMismatch";
    case ErrorCode::TileTooSmall: return "TileTooSmall";
    case ErrorCode::MramOverflow: return "MramOverflow";
    case ErrorCode::IramOverflow: return "IramOverflow";
    case ErrorCode::MramBounds: return "MramBounds";
    case ErrorCode::BadAlignment: return "BadAlignment";
    case ErrorCode::WramBounds: return "WramBounds";
    case ErrorCode::CountExceedsRegion: return "CountExceedsRegion";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "UnknownError";
}

}  // namespace pimflow
