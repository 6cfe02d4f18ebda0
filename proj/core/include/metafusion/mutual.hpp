#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "metafusion/cohort.hpp"
#include "metafusion/ensemble.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

struct TrainConfig {
    double rho = 1.0;
    int n_t = 100;       // epochs, both for screening and joint training
    double lr = 0.0;     // <= 0 selects a per-student step size automatically
    int k_top = 1;       // clusters forming the peer group worth learning from
    std::uint64_t seed = 0;
};

/// Default cross-validation grid for the coupling strength.
std::vector<double> default_rho_grid();

/// Outcome of the independent-training pass: per-student validation losses
/// and their 1-D clustering.
struct ScreeningReport {
    std::vector<double> initial_losses;    // validation task loss per student
    std::vector<int> cluster_of;           // cluster id per student
    std::vector<double> cluster_mean_loss;
    int k_cls = 0;
    std::vector<char> in_top;              // membership in the k_top best clusters
};

enum class WeightMode { LearnFromTop, LearnFromWorst, AllOnes };

/// Binary peer-coupling weights d(I, J); diagonal always zero.
struct DivergenceWeights {
    Matrix d;
    WeightMode mode = WeightMode::LearnFromTop;
};

struct EpochTrace {
    int epoch = 0;
    std::size_t student = 0;
    double task = 0.0;
    double divergence = 0.0;
};

/// Trains every student independently (no coupling) for n_t epochs, records
/// validation losses, and clusters them, choosing the cluster count from
/// {2..min(5, K-1)} by mean silhouette. Students are (re)initialized from
/// their seeds first. Identical losses collapse to a single all-top cluster.
ScreeningReport initial_screening(Cohort& cohort, const MultimodalDataset& dataset,
                                  const TrainConfig& config);

/// learn-from-top: d(I,J) = 1 iff J sits in the k_top best clusters.
/// learn-from-worst: iff J sits in the single worst cluster.
/// all-ones: every off-diagonal entry 1.
DivergenceWeights divergence_weights(const ScreeningReport& report, WeightMode mode, int k_top);

/// Re-initializes all students and runs n_t synchronous epochs of coupled
/// gradient steps; each epoch every student sees its peers' outputs frozen at
/// the epoch start. Returns per-epoch loss traces.
std::vector<EpochTrace> mutual_train(Cohort& cohort, const MultimodalDataset& dataset,
                                     const DivergenceWeights& weights, const TrainConfig& config);

void export_traces(const std::vector<EpochTrace>& traces, const Cohort& cohort, std::ostream& out);

/// Predictions of every student on an already-transformed split.
std::vector<Matrix> cohort_predictions(const Cohort& cohort, const TransformCache& cache);

/// Fully trained pipeline at one coupling strength.
struct PipelineState {
    double rho = 0.0;
    Cohort cohort;
    ScreeningReport screening;
    DivergenceWeights weights;
    Committee committee;
};

/// Runs screening once, then joint training plus ensemble selection for each
/// grid value; returns the state whose committee validation loss is smallest
/// (ties toward the smaller rho).
PipelineState select_rho(const MultimodalDataset& dataset, const std::vector<ExtractorBank>& banks,
                         const ModelSpec& spec, const Task& task,
                         const std::vector<double>& rho_grid, const TrainConfig& config,
                         const SelectionConfig& selection, WeightMode mode);

}  // namespace metafusion
