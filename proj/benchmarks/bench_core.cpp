#include <benchmark/benchmark.h>

#include <cstdint>

#include "flowlab/datasets.hpp"
#include "flowlab/distill.hpp"
#include "flowlab/flow.hpp"
#include "flowlab/graph.hpp"
#include "flowlab/metrics.hpp"
#include "flowlab/nets.hpp"
#include "flowlab/rng.hpp"
#include "flowlab/tensor.hpp"

using namespace flowlab;

namespace {

void bm_matmul_forward(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    Rng rng(1);
    const Tensor a = rng.normal_matrix(n, n);
    const Tensor b = rng.normal_matrix(n, n);
    for (auto _ : state) {
        Graph g;
        const Var c = matmul(g.input("a", a), g.input("b", b));
        benchmark::DoNotOptimize(g.value(c));
    }
    state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul_forward)->Arg(64)->Arg(256);

void bm_matmul_backward(benchmark::State& state) {
    const std::int64_t n = state.range(0);
    Rng rng(1);
    const Tensor a = rng.normal_matrix(n, n);
    const Tensor b = rng.normal_matrix(n, n);
    for (auto _ : state) {
        Graph g;
        const Var va = g.param("a", a);
        const Var loss = mean(square(matmul(va, g.param("b", b))));
        g.mark_output("loss", loss);
        benchmark::DoNotOptimize(g.backward("loss", Tensor::scalar(1.0)));
    }
}
BENCHMARK(bm_matmul_backward)->Arg(64)->Arg(256);

void bm_velocity_eval(benchmark::State& state) {
    Rng rng(2);
    const VelocityNet net(VelocityNetConfig{}, rng);
    const Tensor z = rng.normal_matrix(state.range(0), 2);
    for (auto _ : state) benchmark::DoNotOptimize(net.velocity(z, 0.5));
}
BENCHMARK(bm_velocity_eval)->Arg(128)->Arg(1024);

void bm_teacher_train_step(benchmark::State& state) {
    const Dataset data = Dataset::by_name("gauss8");
    TeacherConfig tc;
    tc.batch_size = state.range(0);
    TeacherState st = TeacherState::init(tc, VelocityNetConfig{});
    for (auto _ : state) benchmark::DoNotOptimize(teacher_train_step(st, data, tc));
}
BENCHMARK(bm_teacher_train_step)->Arg(128)->Arg(256);

void bm_distill_step(benchmark::State& state) {
    const Dataset data = Dataset::by_name("gauss8");
    Rng rng(3);
    const VelocityNet teacher(VelocityNetConfig{}, rng);
    DistillConfig dc;
    dc.batch_size = state.range(0);
    dc.schedule.n_rf = 0;  // full loss stack from the first step
    dc.schedule.n_bi = 0;
    DistillState st = DistillState::init(teacher, dc);
    for (auto _ : state) {
        const DistillBatch batch =
            DistillBatch::draw(data, dc.batch_size, dc.schedule.t_skip, st.rng);
        benchmark::DoNotOptimize(distill_step(st, batch, dc));
    }
}
BENCHMARK(bm_distill_step)->Arg(32)->Arg(128);

void bm_euler_sample(benchmark::State& state) {
    Rng rng(4);
    const VelocityNet net(VelocityNetConfig{}, rng);
    const Tensor z1 = rng.normal_matrix(256, 2);
    const VelocityField field = make_field(net);
    for (auto _ : state) benchmark::DoNotOptimize(euler_sample(field, z1, state.range(0)));
}
BENCHMARK(bm_euler_sample)->Arg(1)->Arg(8)->Arg(50);

void bm_energy_distance(benchmark::State& state) {
    Rng rng(5);
    const Tensor a = rng.normal_matrix(state.range(0), 2);
    const Tensor b = rng.normal_matrix(state.range(0), 2);
    for (auto _ : state) {
        benchmark::DoNotOptimize(energy_distance(a, b, EnergyForm::kV));
    }
}
BENCHMARK(bm_energy_distance)->Arg(500)->Arg(2000);

void bm_sliced_wasserstein(benchmark::State& state) {
    Rng rng(6);
    const Tensor a = rng.normal_matrix(state.range(0), 2);
    const Tensor b = rng.normal_matrix(state.range(0), 2);
    for (auto _ : state) benchmark::DoNotOptimize(sliced_wasserstein(a, b, 64, 9));
}
BENCHMARK(bm_sliced_wasserstein)->Arg(2000);

}  // namespace
