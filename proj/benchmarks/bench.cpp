// Microbenchmarks for the hot paths: synthetic generation, extractor
// fitting, coupled training epochs, committee selection, and the closed-form
// block solve.

#include <benchmark/benchmark.h>

#include "metafusion/baselines.hpp"
#include "metafusion/pipeline.hpp"
#include "metafusion/theory.hpp"

namespace mf = metafusion;

namespace {

mf::SynthConfig small_config() {
    mf::SynthConfig config;
    config.n = 300;
    config.latent_x = 10;
    config.latent_z = 8;
    config.observed_x = 60;
    config.observed_z = 40;
    config.seed = 7;
    return config;
}

void bm_generate_synthetic(benchmark::State& state) {
    mf::SynthConfig config = small_config();
    config.n = state.range(0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mf::generate_synthetic(config));
    }
}
BENCHMARK(bm_generate_synthetic)->Arg(300)->Arg(1000);

void bm_build_cohort(benchmark::State& state) {
    const mf::MultimodalDataset ds = mf::generate_synthetic(small_config());
    const mf::Index n_train = static_cast<mf::Index>(ds.rows_in(mf::Split::Train).size());
    for (auto _ : state) {
        std::vector<mf::ExtractorBank> banks;
        for (std::size_t m = 0; m < ds.modalities.size(); ++m)
            banks.push_back(
                mf::default_bank(static_cast<int>(m), ds.modalities[m].cols(), n_train));
        benchmark::DoNotOptimize(mf::build_cohort(ds, banks, mf::ModelSpec{}, mf::Task{}, 1));
    }
}
BENCHMARK(bm_build_cohort);

void bm_mutual_epochs(benchmark::State& state) {
    const mf::MultimodalDataset ds = mf::generate_synthetic(small_config());
    const mf::Index n_train = static_cast<mf::Index>(ds.rows_in(mf::Split::Train).size());
    std::vector<mf::ExtractorBank> banks;
    for (std::size_t m = 0; m < ds.modalities.size(); ++m)
        banks.push_back(mf::default_bank(static_cast<int>(m), ds.modalities[m].cols(), n_train));
    mf::Cohort cohort = mf::build_cohort(ds, banks, mf::ModelSpec{}, mf::Task{}, 1);
    mf::TrainConfig config;
    config.n_t = 5;
    const mf::ScreeningReport report = mf::initial_screening(cohort, ds, config);
    const mf::DivergenceWeights weights =
        mf::divergence_weights(report, mf::WeightMode::LearnFromTop, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mf::mutual_train(cohort, ds, weights, config));
    }
}
BENCHMARK(bm_mutual_epochs);

void bm_closed_form_fit(benchmark::State& state) {
    const mf::TheoryInstance inst =
        mf::generate_theory_instance(state.range(0), 8, 5, 5, 1.0, 1.0, 3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mf::closed_form_fit(inst, 1.0));
    }
}
BENCHMARK(bm_closed_form_fit)->Arg(200)->Arg(2000);

void bm_coop_fit(benchmark::State& state) {
    const mf::MultimodalDataset ds = mf::generate_synthetic(small_config());
    const mf::Matrix x = ds.modality_rows(0, mf::Split::Train);
    const mf::Matrix z = ds.modality_rows(1, mf::Split::Train);
    const mf::Vector y = ds.label_rows(mf::Split::Train);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mf::coop_fit(x, z, y, 0.5));
    }
}
BENCHMARK(bm_coop_fit);

}  // namespace

BENCHMARK_MAIN();
