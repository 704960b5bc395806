#include <benchmark/benchmark.h>

#include "tactile_eit/inverse.hpp"
#include "tactile_eit/phantom.hpp"
#include "tactile_eit/sensitivity.hpp"

using namespace tactile_eit;

namespace {

void BM_SimulateFrame(benchmark::State& state) {
  const Mesh mesh = build_mesh(100, static_cast<std::size_t>(state.range(0)), 16, 3);
  const auto protocol = generate_adjacent_protocol(16, true);
  const auto field = uniform_field(mesh);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_frame(mesh, field, protocol));
}
BENCHMARK(BM_SimulateFrame)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Jacobian(benchmark::State& state) {
  const Mesh mesh = build_mesh(100, static_cast<std::size_t>(state.range(0)), 16, 3);
  const auto protocol = generate_adjacent_protocol(16, true);
  const auto field = uniform_field(mesh);
  for (auto _ : state) benchmark::DoNotOptimize(compute_jacobian(mesh, field, protocol));
}
BENCHMARK(BM_Jacobian)->Arg(32)->Unit(benchmark::kMillisecond);

struct Problem {
  Mesh mesh = build_mesh(100, 32, 16, 3);
  Protocol protocol = generate_adjacent_protocol(16, true);
  SensitivityMatrix j = compute_jacobian(mesh, uniform_field(mesh), protocol);
  MeasurementFrame dv;
  Problem() {
    const std::vector<TouchSpec> touch{TouchSpec::disc({40, 60}, 10, 5.0)};
    const auto bg = uniform_field(mesh);
    dv = difference(simulate_frame(mesh, apply_touches(bg, mesh, touch), protocol),
                    simulate_frame(mesh, bg, protocol));
  }
};

const Problem& problem() {
  static const Problem p;
  return p;
}

void BM_TikhonovFrame(benchmark::State& state) {
  const Reconstructor r(problem().j, ReconstructionParams::tikhonov());
  for (auto _ : state) benchmark::DoNotOptimize(r(problem().dv));
}
BENCHMARK(BM_TikhonovFrame)->Unit(benchmark::kMicrosecond);

void BM_IstaFrame(benchmark::State& state) {
  const Reconstructor r(problem().j, ReconstructionParams::l1());
  for (auto _ : state) benchmark::DoNotOptimize(r(problem().dv));
}
BENCHMARK(BM_IstaFrame)->Unit(benchmark::kMillisecond);

void BM_ReconstructorSetup(benchmark::State& state) {
  const auto method = state.range(0) ? ReconstructionParams::l1() : ReconstructionParams::tikhonov();
  for (auto _ : state) benchmark::DoNotOptimize(Reconstructor(problem().j, method));
}
BENCHMARK(BM_ReconstructorSetup)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
