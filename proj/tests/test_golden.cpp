#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "pimflow/bench.hpp"

using namespace pimflow;

namespace {

std::map<std::string, std::size_t> sizes_of(const KernelEnv& env) {
  std::map<std::string, std::size_t> sizes;
  for (const auto& [name, buf] : env) sizes.emplace(name, buf.data.size());
  return sizes;
}

}  // namespace

// Byte-stable pseudo-source for every workload. Regenerate the files with
// PIMFLOW_REGEN_GOLDENS=1 after an intentional codegen change.
TEST_CASE("workload source matches the golden files") {
  const bool regen = std::getenv("PIMFLOW_REGEN_GOLDENS") != nullptr;
  RunOptions opts;
  opts.dpus = 4;

  for (const char* name : kWorkloadNames) {
    CAPTURE(name);
    WorkloadSpec spec;
    spec.name = name;
    spec.n = 1024;
    Workload w = build_workload(spec);
    auto src = render_program_source(w.pipeline, spec.n, PimMachineConfig{}, opts,
                                     sizes_of(w.env));
    const std::string path = std::string(GOLDEN_DIR) + "/" + name + ".txt";

    if (regen) {
      std::ofstream out(path, std::ios::binary);
      REQUIRE(out.good());
      out << src.text;
      continue;
    }

    std::ifstream in(path, std::ios::binary);
    REQUIRE_MESSAGE(in.good(), "missing golden file " << path);
    std::ostringstream buf;
    buf << in.rdbuf();
    CHECK(src.text == buf.str());
  }
}
