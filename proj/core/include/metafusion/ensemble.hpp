#pragma once

#include <vector>

#include "metafusion/cohort.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

struct SelectionConfig {
    double p_prune = 0.5;  // fraction of worst students dropped before greedy search
    int n_init = 2;        // committee is seeded with this many best students
    int n_c = 10;          // committee size cap (clamped to the survivor count)
};

/// Decision-making committee: an ordered subset of students whose predictions
/// are averaged (logits averaged for classification).
struct Committee {
    std::vector<std::size_t> members;  // indices into the prediction list, selection order
    double val_loss = 0.0;             // committee task loss on the validation split
};

/// Greedy forward selection on validation predictions: sort by individual
/// loss, prune the worst ceil(p_prune * K), seed with the n_init best, then
/// add whichever candidate strictly lowers the committee loss until none does
/// or the cap is reached. Selection is without replacement; ties break toward
/// the lower index.
Committee ensemble_select(const std::vector<Matrix>& val_predictions, const Task& task,
                          const TrainingTargets& val_targets, const SelectionConfig& config);

/// Mean of the listed members' outputs.
Matrix committee_predict(const Committee& committee, const std::vector<Matrix>& predictions);

enum class AggregationMethod {
    BestSingle,
    Stacking,
    SimpleAverage,
    WeightedAverage,
    MajorityVote,
    WeightedVote,
};

/// Combines member predictions on a target split. Validation predictions and
/// targets drive the data-dependent methods (best-single pick, stacking head,
/// performance weights). Vote methods are classification-only and return a
/// one-hot score matrix; ties go to the smallest class index.
Matrix aggregate(const std::vector<Matrix>& target_predictions, AggregationMethod method,
                 const Task& task, const std::vector<Matrix>& val_predictions,
                 const TrainingTargets& val_targets);

/// Performance weights used by the weighted aggregators: 1/loss for
/// regression, accuracy for classification; normalized to sum to 1.
std::vector<double> performance_weights(const std::vector<Matrix>& val_predictions,
                                        const Task& task, const TrainingTargets& val_targets);

std::vector<int> predicted_classes(const Matrix& scores);
double misclassification_rate(const Matrix& scores, const std::vector<int>& classes);

}  // namespace metafusion
