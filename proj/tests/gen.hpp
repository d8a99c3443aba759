#pragma once

// Random well-typed kernels and pipelines for the property tests. The
// generators avoid constructs whose runtime behavior is an error by design
// (division by a data-dependent zero, out-of-range broadcast indices), so a
// generated case always has a defined oracle result.

#include <cstdint>
#include <vector>

#include "pimflow/pipeline.hpp"

namespace pftest {

using namespace pimflow;

struct Rng {
  std::uint64_t s;
  explicit Rng(std::uint64_t seed) : s(seed) {}

  std::uint64_t next() {
    // splitmix64
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t below(std::uint64_t n) { return n ? next() % n : 0; }

  std::int64_t range(std::int64_t lo, std::int64_t hi) {  // inclusive
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  bool chance(int pct) { return below(100) < static_cast<std::uint64_t>(pct); }
};

// Random expression of the requested type over Int32 inputs. env_len > 0
// enables loads from a broadcast buffer "b" of that length (Int32).
inline ExprPtr gen_expr(Rng& rng, int n_inputs, std::size_t env_len,
                        ScalarType want, int depth) {
  auto leaf = [&]() -> ExprPtr {
    switch (want) {
      case ScalarType::Int32:
        switch (rng.below(env_len > 0 ? 3 : 2)) {
          case 0: return input(static_cast<int>(rng.below(static_cast<std::uint64_t>(n_inputs))));
          case 1: return lit_i32(static_cast<std::int32_t>(rng.range(-50, 50)));
          default:
            return broadcast_load(
                "b", binary(BinaryOp::Mod, global_index(),
                            lit_i64(static_cast<std::int64_t>(env_len))));
        }
      case ScalarType::Int64:
        if (rng.chance(50)) return global_index();
        return lit_i64(rng.range(-50, 50));
      case ScalarType::Bool:
        return lit_bool(rng.chance(50));
      default:
        return lit_f64(static_cast<double>(rng.range(-8, 8)));
    }
  };

  if (depth <= 0) return leaf();

  if (want == ScalarType::Bool) {
    switch (rng.below(4)) {
      case 0: {
        auto ops = {BinaryOp::Eq, BinaryOp::Ne, BinaryOp::Lt, BinaryOp::Le,
                    BinaryOp::Gt, BinaryOp::Ge};
        BinaryOp op = *(ops.begin() + rng.below(6));
        return binary(op, gen_expr(rng, n_inputs, env_len, ScalarType::Int32, depth - 1),
                      gen_expr(rng, n_inputs, env_len, ScalarType::Int32, depth - 1));
      }
      case 1:
        return binary(rng.chance(50) ? BinaryOp::And : BinaryOp::Or,
                      gen_expr(rng, n_inputs, env_len, ScalarType::Bool, depth - 1),
                      gen_expr(rng, n_inputs, env_len, ScalarType::Bool, depth - 1));
      case 2:
        return unary(UnaryOp::Not, gen_expr(rng, n_inputs, env_len, ScalarType::Bool, depth - 1));
      default:
        return leaf();
    }
  }

  if (want == ScalarType::Int32 || want == ScalarType::Int64) {
    switch (rng.below(5)) {
      case 0: {
        auto ops = {BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Min,
                    BinaryOp::Max};
        BinaryOp op = *(ops.begin() + rng.below(5));
        return binary(op, gen_expr(rng, n_inputs, env_len, want, depth - 1),
                      gen_expr(rng, n_inputs, env_len, want, depth - 1));
      }
      case 1: {
        // constant nonzero divisor only
        std::int64_t d = rng.range(1, 9);
        ExprPtr c = want == ScalarType::Int32 ? lit_i32(static_cast<std::int32_t>(d))
                                              : lit_i64(d);
        return binary(rng.chance(50) ? BinaryOp::Div : BinaryOp::Mod,
                      gen_expr(rng, n_inputs, env_len, want, depth - 1), c);
      }
      case 2:
        return unary(UnaryOp::Neg, gen_expr(rng, n_inputs, env_len, want, depth - 1));
      case 3:
        return select(gen_expr(rng, n_inputs, env_len, ScalarType::Bool, depth - 1),
                      gen_expr(rng, n_inputs, env_len, want, depth - 1),
                      gen_expr(rng, n_inputs, env_len, want, depth - 1));
      default:
        return leaf();
    }
  }

  return leaf();
}

inline Reducer gen_reducer(Rng& rng, ScalarType t) {
  switch (rng.below(3)) {
    case 0: return Reducer::sum(t);
    case 1:
      return Reducer::min(t, t == ScalarType::Int32
                                 ? ScalarValue(std::int32_t{1000000})
                                 : ScalarValue(std::int64_t{1000000}));
    default:
      return Reducer::max(t, t == ScalarType::Int32
                                 ? ScalarValue(std::int32_t{-1000000})
                                 : ScalarValue(std::int64_t{-1000000}));
  }
}

struct RandomCase {
  Pipeline pipeline;
  std::vector<std::vector<ScalarValue>> inputs;
  KernelEnv env;
};

// Random Int32 pipeline with 1-4 stages plus seeded inputs. Stage kinds mix
// maps, filters, windows, groups and at most one trailing reduce (optionally
// followed by scalar maps).
inline RandomCase gen_case(Rng& rng, std::int64_t max_n) {
  RandomCase rc;
  int n_inputs = rng.chance(25) ? 2 : 1;
  std::size_t env_len = rng.chance(40) ? 1 + rng.below(8) : 0;

  std::vector<Stage> stages;
  int n_stages = 1 + static_cast<int>(rng.below(4));
  bool reduced = false;
  bool first = true;
  for (int i = 0; i < n_stages && !reduced; ++i) {
    int pick = static_cast<int>(rng.below(first && n_inputs == 2 ? 1 : 5));
    switch (pick) {
      case 0:
        stages.push_back(Stage::map(gen_expr(rng, first ? n_inputs : 1, env_len,
                                             ScalarType::Int32, 3)));
        break;
      case 1:
        stages.push_back(Stage::filter(gen_expr(rng, 1, env_len, ScalarType::Bool, 3)));
        break;
      case 2:
        stages.push_back(Stage::window(1 + rng.below(5), gen_reducer(rng, ScalarType::Int32)));
        break;
      case 3:
        stages.push_back(Stage::group(1 + rng.below(4), gen_reducer(rng, ScalarType::Int32)));
        break;
      default:
        stages.push_back(Stage::reduce(gen_reducer(rng, ScalarType::Int32)));
        reduced = true;
        if (rng.chance(40))
          stages.push_back(Stage::map(gen_expr(rng, 1, 0, ScalarType::Int32, 2)));
        break;
    }
    first = false;
  }
  if (stages.empty())
    stages.push_back(Stage::map(gen_expr(rng, n_inputs, env_len, ScalarType::Int32, 3)));

  std::vector<ScalarType> in_types(static_cast<std::size_t>(n_inputs), ScalarType::Int32);
  EnvTypes bt;
  if (env_len > 0) bt.emplace("b", ScalarType::Int32);
  rc.pipeline = build(in_types, bt, stages);

  std::int64_t n = rng.range(0, max_n);
  rc.inputs.resize(static_cast<std::size_t>(n_inputs));
  for (auto& s : rc.inputs) {
    s.reserve(static_cast<std::size_t>(n));
    for (std::int64_t j = 0; j < n; ++j)
      s.push_back(ScalarValue(static_cast<std::int32_t>(rng.range(-1000, 1000))));
  }
  if (env_len > 0) {
    BroadcastBuffer buf{ScalarType::Int32, {}};
    for (std::size_t j = 0; j < env_len; ++j)
      buf.data.push_back(ScalarValue(static_cast<std::int32_t>(rng.range(-20, 20))));
    rc.env.emplace("b", std::move(buf));
  }
  return rc;
}

}  // namespace pftest
