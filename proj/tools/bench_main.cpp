#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pimflow/bench.hpp"

using namespace pimflow;

int main(int argc, char** argv) {
  CLI::App app{"pimflow benchmark harness"};

  WorkloadSpec spec;
  std::string machine_path;
  std::string format = "json";
  std::string dump_source_dir;
  bool no_parallel_transfer = false;
  bool no_cpu_split = false;
  bool loc_report_mode = false;
  bool timing = false;
  int dpus = -1;

  app.add_option("--workload", spec.name,
                 "one of: vecadd select reduce unique histogram gemv");
  app.add_option("--size", spec.n, "input element count");
  app.add_option("--rows", spec.rows, "gemv rows");
  app.add_option("--cols", spec.cols, "gemv cols");
  app.add_option("--bins", spec.bins, "histogram bins (default 256)");
  app.add_option("--seed", spec.seed, "input generator seed");
  app.add_option("--dpus", dpus, "DPUs to use (default: all configured)");
  app.add_flag("--no-parallel-transfer", no_parallel_transfer,
               "serialize host<->MRAM transfers across ranks");
  app.add_flag("--no-cpu-split", no_cpu_split,
               "keep reductions on the host instead of per-DPU partials");
  app.add_option("--machine", machine_path, "machine config JSON path");
  app.add_option("--format", format, "report format: json|csv")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--dump-source", dump_source_dir,
                 "write the rendered DPU pseudo-source into this directory");
  app.add_flag("--loc-report", loc_report_mode,
               "print pipeline statement counts for all workloads and exit");
  app.add_flag("--timing", timing, "include wall-clock timing in the report");

  CLI11_PARSE(app, argc, argv);

  try {
    if (loc_report_mode) {
      for (const auto& [name, loc] : loc_report())
        std::cout << name << "," << loc << "\n";
      return 0;
    }
    if (spec.name.empty()) {
      std::cerr << "error: --workload is required\n";
      return 2;
    }

    PimMachineConfig machine;
    if (!machine_path.empty()) machine = PimMachineConfig::from_file(machine_path);

    RunOptions opts;
    opts.parallel_transfer = !no_parallel_transfer;
    opts.cpu_split = !no_cpu_split;
    opts.dpus = dpus;

    if (!dump_source_dir.empty()) {
      Workload w = build_workload(spec);
      std::map<std::string, std::size_t> sizes;
      for (const auto& [name, buf] : w.env) sizes.emplace(name, buf.data.size());
      RenderedSource src = render_program_source(
          w.pipeline, static_cast<std::int64_t>(w.inputs[0].size()), machine, opts,
          sizes);
      std::filesystem::create_directories(dump_source_dir);
      std::ofstream out(std::filesystem::path(dump_source_dir) / (spec.name + ".txt"));
      out << src.text;
    }

    BenchReport report = run_bench(spec, machine, opts);
    if (format == "csv")
      std::cout << report.to_csv(timing);
    else
      std::cout << report.to_json(timing) << "\n";
    return report.verified ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
