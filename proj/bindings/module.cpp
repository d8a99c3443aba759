#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pimflow/bench.hpp"

namespace py = pybind11;
using namespace pimflow;

namespace {

// python ints/floats/bools <-> ScalarValue
ScalarValue to_scalar(ScalarType t, py::handle h) {
  switch (t) {
    case ScalarType::Int32: return ScalarValue(h.cast<std::int32_t>());
    case ScalarType::Int64: return ScalarValue(h.cast<std::int64_t>());
    case ScalarType::Float64: return ScalarValue(h.cast<double>());
    case ScalarType::Bool: return ScalarValue(h.cast<bool>());
  }
  throw py::value_error("bad scalar type");
}

py::object from_scalar(const ScalarValue& v) {
  switch (v.type()) {
    case ScalarType::Int32: return py::cast(v.as_i32());
    case ScalarType::Int64: return py::cast(v.as_i64());
    case ScalarType::Float64: return py::cast(v.as_f64());
    case ScalarType::Bool: return py::cast(v.as_bool());
  }
  return py::none();
}

std::vector<ScalarValue> to_stream(ScalarType t, const py::sequence& seq) {
  std::vector<ScalarValue> out;
  out.reserve(seq.size());
  for (auto item : seq) out.push_back(to_scalar(t, item));
  return out;
}

py::list from_output(const PipelineOutput& out) {
  py::list values;
  for (const auto& v : out.values) values.append(from_scalar(v));
  return values;
}

// Expr trees are shared_ptr<const Expr>; wrap them for python
struct PyExpr {
  ExprPtr p;
};

py::dict counters_dict(const CostCounters& c) {
  py::dict d;
  d["host_to_mram_bytes"] = c.host_to_mram_bytes;
  d["mram_to_host_bytes"] = c.mram_to_host_bytes;
  d["dma_bytes"] = c.dma_bytes;
  d["dma_ops"] = c.dma_ops;
  d["kernel_ops"] = c.kernel_ops;
  d["transfer_time"] = c.transfer_time;
  d["dma_time"] = c.dma_time;
  d["compute_time"] = c.compute_time;
  d["device_time"] = c.device_time;
  d["total_time"] = c.total_time();
  return d;
}

}  // namespace

PYBIND11_MODULE(_pimflow, m) {
  m.doc() = "Data-parallel pipelines on a software-modeled PIM machine";

  py::register_exception<Error>(m, "PimflowError");

  py::enum_<ScalarType>(m, "ScalarType")
      .value("Int32", ScalarType::Int32)
      .value("Int64", ScalarType::Int64)
      .value("Float64", ScalarType::Float64)
      .value("Bool", ScalarType::Bool);

  py::enum_<UnaryOp>(m, "UnaryOp")
      .value("Neg", UnaryOp::Neg)
      .value("Not", UnaryOp::Not)
      .value("IntToFloat", UnaryOp::IntToFloat)
      .value("FloatToInt", UnaryOp::FloatToInt);

  py::enum_<BinaryOp>(m, "BinaryOp")
      .value("Add", BinaryOp::Add).value("Sub", BinaryOp::Sub)
      .value("Mul", BinaryOp::Mul).value("Div", BinaryOp::Div)
      .value("Mod", BinaryOp::Mod).value("Min", BinaryOp::Min)
      .value("Max", BinaryOp::Max).value("Eq", BinaryOp::Eq)
      .value("Ne", BinaryOp::Ne).value("Lt", BinaryOp::Lt)
      .value("Le", BinaryOp::Le).value("Gt", BinaryOp::Gt)
      .value("Ge", BinaryOp::Ge).value("And", BinaryOp::And)
      .value("Or", BinaryOp::Or);

  py::class_<PyExpr>(m, "Expr")
      .def("render", [](const PyExpr& e) { return render(*e.p); })
      .def("op_count", [](const PyExpr& e) { return op_count(*e.p); });

  m.def("input", [](int slot) { return PyExpr{input(slot)}; });
  m.def("global_index", [] { return PyExpr{global_index()}; });
  m.def("const_i32", [](std::int32_t x) { return PyExpr{lit_i32(x)}; });
  m.def("const_i64", [](std::int64_t x) { return PyExpr{lit_i64(x)}; });
  m.def("const_f64", [](double x) { return PyExpr{lit_f64(x)}; });
  m.def("const_bool", [](bool x) { return PyExpr{lit_bool(x)}; });
  m.def("broadcast_load", [](const std::string& buf, const PyExpr& idx) {
    return PyExpr{broadcast_load(buf, idx.p)};
  });
  m.def("unary", [](UnaryOp op, const PyExpr& a) { return PyExpr{unary(op, a.p)}; });
  m.def("binary", [](BinaryOp op, const PyExpr& a, const PyExpr& b) {
    return PyExpr{binary(op, a.p, b.p)};
  });
  m.def("select", [](const PyExpr& c, const PyExpr& a, const PyExpr& b) {
    return PyExpr{select(c.p, a.p, b.p)};
  });

  py::class_<Reducer>(m, "Reducer")
      .def_static("sum", &Reducer::sum);

  py::class_<Stage>(m, "Stage")
      .def_static("map", [](const PyExpr& f) { return Stage::map(f.p); })
      .def_static("filter", [](const PyExpr& p) { return Stage::filter(p.p); })
      .def_static("reduce", &Stage::reduce)
      .def_static("window", &Stage::window)
      .def_static("group", &Stage::group);

  py::class_<Pipeline>(m, "Pipeline");

  m.def("build", &build, py::arg("input_types"), py::arg("broadcast_types"),
        py::arg("stages"));

  py::class_<PimMachineConfig>(m, "MachineConfig")
      .def(py::init<>())
      .def_readwrite("ranks", &PimMachineConfig::ranks)
      .def_readwrite("dpus_per_rank", &PimMachineConfig::dpus_per_rank)
      .def_readwrite("mram_bytes", &PimMachineConfig::mram_bytes)
      .def_readwrite("wram_bytes", &PimMachineConfig::wram_bytes)
      .def_readwrite("iram_bytes", &PimMachineConfig::iram_bytes)
      .def_readwrite("tasklets", &PimMachineConfig::tasklets)
      .def("total_dpus", &PimMachineConfig::total_dpus)
      .def_static("from_file", &PimMachineConfig::from_file);

  m.def(
      "reference_execute",
      [](const Pipeline& p, const std::vector<py::sequence>& streams,
         const py::dict& env_py) {
        std::vector<std::vector<ScalarValue>> inputs;
        for (std::size_t i = 0; i < streams.size(); ++i)
          inputs.push_back(to_stream(p.input_types[i], streams[i]));
        KernelEnv env;
        for (auto item : env_py) {
          auto name = item.first.cast<std::string>();
          auto t = p.broadcast_types.at(name);
          env.emplace(name, BroadcastBuffer{t, to_stream(t, item.second.cast<py::sequence>())});
        }
        return from_output(reference_execute(p, inputs, env));
      },
      py::arg("pipeline"), py::arg("inputs"), py::arg("env") = py::dict());

  m.def(
      "run",
      [](const Pipeline& p, const std::vector<py::sequence>& streams,
         const py::dict& env_py, const PimMachineConfig& m_, int dpus,
         bool parallel_transfer, bool cpu_split) {
        std::vector<std::vector<ScalarValue>> inputs;
        for (std::size_t i = 0; i < streams.size(); ++i)
          inputs.push_back(to_stream(p.input_types[i], streams[i]));
        KernelEnv env;
        for (auto item : env_py) {
          auto name = item.first.cast<std::string>();
          auto t = p.broadcast_types.at(name);
          env.emplace(name, BroadcastBuffer{t, to_stream(t, item.second.cast<py::sequence>())});
        }
        RunOptions opts{parallel_transfer, cpu_split, dpus};
        RunResult r = run(p, inputs, env, m_, opts);
        py::dict out;
        out["output"] = from_output(r.output);
        out["counters"] = counters_dict(r.counters);
        out["plan_fingerprint"] = r.plan_fingerprint;
        return out;
      },
      py::arg("pipeline"), py::arg("inputs"), py::arg("env") = py::dict(),
      py::arg("machine") = PimMachineConfig{}, py::arg("dpus") = -1,
      py::arg("parallel_transfer") = true, py::arg("cpu_split") = true);

  m.def(
      "run_workload",
      [](const std::string& name, std::int64_t size, std::uint64_t seed, int dpus,
         bool parallel_transfer, bool cpu_split) {
        WorkloadSpec spec;
        spec.name = name;
        spec.n = size;
        spec.seed = seed;
        RunOptions opts{parallel_transfer, cpu_split, dpus};
        BenchReport r = run_bench(spec, PimMachineConfig{}, opts);
        py::dict out;
        out["workload"] = r.spec.name;
        out["verified"] = r.verified;
        out["loc"] = r.loc;
        out["counters"] = counters_dict(r.counters);
        return out;
      },
      py::arg("name"), py::arg("size"), py::arg("seed") = 0, py::arg("dpus") = -1,
      py::arg("parallel_transfer") = true, py::arg("cpu_split") = true);

  m.def("loc_report", []() {
    py::dict d;
    for (const auto& [name, loc] : loc_report()) d[py::cast(name)] = loc;
    return d;
  });
}
