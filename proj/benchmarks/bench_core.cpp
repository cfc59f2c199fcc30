#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

#include "tomo/algorithms.hpp"
#include "tomo/fbp.hpp"
#include "tomo/functions.hpp"
#include "tomo/projector.hpp"
#include "tomo/sim.hpp"

using namespace tomo;

namespace {

AcquisitionGeometry parallel2d(std::size_t n) {
    return make_parallel_geometry(2, Panel{{n, 1}, {1.0, 1.0}}, AngleList{linspace(0.0, 180.0, n, false)});
}

LabeledArray random_array(const ArraySpec& spec, std::uint64_t seed) {
    LabeledArray a(spec);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (double& v : a.values()) v = u(rng);
    return a;
}

}  // namespace

static void BM_ProjectorDirect(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ImageGeometry ig = make_image_geometry(n, n);
    const Operator a = projector(ig, parallel2d(n));
    const DataContainer x = make_phantom(SheppLogan2D{}, ig);
    DataContainer y = a.range().allocate();
    a.direct(x, y);
    for (auto _ : state) {
        a.direct(x, y);
        benchmark::DoNotOptimize(y);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n));
}
BENCHMARK(BM_ProjectorDirect)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_ProjectorAdjoint(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ImageGeometry ig = make_image_geometry(n, n);
    const auto ag = parallel2d(n);
    const Operator a = projector(ig, ag);
    const DataContainer y = random_array(ArraySpec(Geometry(ag)), 1);
    DataContainer x = a.domain().allocate();
    a.adjoint(y, x);
    for (auto _ : state) {
        a.adjoint(y, x);
        benchmark::DoNotOptimize(x);
    }
}
BENCHMARK(BM_ProjectorAdjoint)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_ConeProjector(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ImageGeometry ig = make_image_geometry(n, n, n);
    ConePlacement cp;
    cp.source_position = {0.0, -4.0 * static_cast<double>(n), 0.0};
    cp.detector_position = {0.0, 2.0 * static_cast<double>(n), 0.0};
    const auto ag = make_cone_geometry(3, cp, Panel{{2 * n, 2 * n}, {1.0, 1.0}}, AngleList{linspace(0.0, 360.0, n, false)});
    const Operator a = projector(ig, ag, {ProjectorOptions::Storage::on_the_fly});
    const DataContainer x = random_array(ArraySpec(Geometry(ig)), 2);
    DataContainer y = a.range().allocate();
    a.direct(x, y);
    for (auto _ : state) {
        a.direct(x, y);
        benchmark::DoNotOptimize(y);
    }
}
BENCHMARK(BM_ConeProjector)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Fbp(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ImageGeometry ig = make_image_geometry(n, n);
    const auto ag = parallel2d(n);
    const LabeledArray sino = projector(ig, ag).direct(DataContainer(make_phantom(SheppLogan2D{}, ig))).array();
    for (auto _ : state) benchmark::DoNotOptimize(fbp_parallel(sino, ig));
}
BENCHMARK(BM_Fbp)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_TvProx(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const DataContainer x = random_array(ArraySpec({"horizontal_y", "horizontal_x"}, {n, n}), 3);
    const Function tv = total_variation({.iterations = 100});
    DataContainer out = x;
    for (auto _ : state) {
        tv.prox(x, 0.1, out);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(BM_TvProx)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_PdhgIteration(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const ImageGeometry ig = make_image_geometry(n, n);
    const Operator a = projector(ig, parallel2d(n));
    const DataContainer b = a.direct(DataContainer(make_phantom(SheppLogan2D{}, ig)));
    const Operator k = block_column({a, gradient(ArraySpec(Geometry(ig)))});
    const double na = estimate_norm(a);
    k.set_norm(std::sqrt(na * na + 8.0));
    const Function f = block_function({0.5 * l2_norm_squared(b), 0.02 * mixed_l21()});
    Pdhg pdhg(a.domain().allocate(), f, k, indicator_box(0.0, 1.0), {.solver = {.log_interval = 1000000}});
    pdhg.run(1);
    for (auto _ : state) pdhg.run(1);
}
BENCHMARK(BM_PdhgIteration)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
