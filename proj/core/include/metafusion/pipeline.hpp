#pragma once

#include <iosfwd>
#include <vector>

#include "metafusion/mutual.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

/// End-to-end fused-cohort model: fitted extractor banks, the mutually
/// trained cohort at the selected coupling strength, and the decision
/// committee. Prediction is the simple average of the committee members'
/// outputs (logits for classification).
struct MetaFusionModel {
    ModelSpec spec;
    Task task;
    PipelineState state;

    Matrix predict(const std::vector<Matrix>& modalities) const;
};

/// Full three-step fit: extractor banks on train, screening + clustering +
/// coupled training with the coupling strength chosen on validation, then
/// greedy committee selection. Deterministic given config.seed.
MetaFusionModel fit_meta_fusion(const MultimodalDataset& dataset,
                                const std::vector<ExtractorBank>& banks, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config,
                                const SelectionConfig& selection,
                                const std::vector<double>& rho_grid,
                                WeightMode mode = WeightMode::LearnFromTop);

/// Convenience overload using default_bank per modality.
MetaFusionModel fit_meta_fusion(const MultimodalDataset& dataset, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config,
                                const SelectionConfig& selection,
                                const std::vector<double>& rho_grid,
                                WeightMode mode = WeightMode::LearnFromTop);

/// Versioned plain-text round trip of the fitted model.
void save_model(const MetaFusionModel& model, std::ostream& out);
MetaFusionModel load_model(std::istream& in);

}  // namespace metafusion
