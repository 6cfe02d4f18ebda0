#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "metafusion/datagen.hpp"
#include "metafusion/extractors.hpp"
#include "metafusion/rng.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

/// Index tuple selecting one extractor per modality. Index 0 is the null
/// mapping, k_m+1 the identity; the all-zero tuple is excluded.
struct Pairing {
    std::vector<int> indices;

    bool operator==(const Pairing&) const = default;
    bool operator<(const Pairing& other) const { return indices < other.indices; }
};

using PairingSet = std::vector<Pairing>;

/// Cartesian product of {0..k_m+1} per modality minus the all-zero tuple,
/// in lexicographic order.
PairingSet build_pairings(const std::vector<int>& bank_sizes);

enum class TaskKind { Regression, Classification };

struct Task {
    TaskKind kind = TaskKind::Regression;
    int classes = 1;

    Index output_dim() const { return kind == TaskKind::Regression ? 1 : classes; }
};

enum class ModelKind { Linear, Mlp };

struct ModelSpec {
    ModelKind kind = ModelKind::Linear;
    double ridge = 0.0;   // linear only; applied when fitted in closed form
    Index hidden = 16;    // mlp only
};

/// Supervised model on one fused representation.
struct Student {
    Pairing pairing;
    ModelSpec spec;
    Task task;
    Index input_width = 0;
    std::uint64_t init_seed = 0;

    // Linear: w1 (in x d), b1 (d). Mlp adds a tanh hidden layer:
    // w1 (in x h), b1 (h), w2 (h x d), b2 (d).
    Matrix w1, w2;
    Vector b1, b2;

    void init_params();
    Matrix predict(const Matrix& fused) const;
    bool params_finite() const;
};

struct LossParts {
    double task = 0.0;
    double divergence = 0.0;
    double total() const { return task + divergence; }
};

struct TrainingTargets {
    const Vector* values = nullptr;          // regression
    const std::vector<int>* classes = nullptr;  // classification
};

Matrix softmax_rows(const Matrix& logits);

/// Task loss of predictions against targets (mean over rows).
double task_loss(const Task& task, const Matrix& predictions, const TrainingTargets& targets);

/// One full-batch gradient step on the mutual-learning objective
///   task(pred, Y) + rho * sum_J w_J * Div(pred, peer_J)
/// with peer outputs treated as constants. Returns the loss evaluated at the
/// pre-step parameters. Throws NonFiniteLoss on NaN/Inf.
LossParts grad_step(Student& student, const Matrix& fused, const TrainingTargets& targets,
                    const std::vector<const Matrix*>& peer_outputs,
                    const std::vector<double>& peer_weights, double rho, double lr);

/// Stable step size for grad_step: the inverse of a power-iteration estimate
/// of the objective's curvature on this fused input.
double auto_learning_rate(const Student& student, const Matrix& fused, double rho_weight_sum);

/// Per-extractor transforms of one dataset split, computed once so that fused
/// inputs are cheap concatenations.
using TransformCache = std::vector<std::vector<Matrix>>;  // [modality][extractor]

TransformCache transform_all(const std::vector<ExtractorBank>& banks,
                             const std::vector<Matrix>& modalities);

/// Column-wise concatenation of the pairing's representations, modality order.
Matrix fuse(const Pairing& pairing, const TransformCache& cache);

/// Cross-modal student cohort sharing one extractor bank per modality.
struct Cohort {
    std::vector<ExtractorBank> banks;
    PairingSet pairings;
    std::vector<Student> students;
    Task task;

    std::string pairing_name(std::size_t idx) const;
};

/// Builds the full cohort: fits banks on the train split, enumerates
/// pairings, and creates one student per pairing with a seed derived from
/// the pairing's extractor names (so reduced cohorts reproduce the same
/// students bit for bit).
Cohort build_cohort(const MultimodalDataset& dataset, const std::vector<ExtractorBank>& banks,
                    const ModelSpec& spec, const Task& task, std::uint64_t seed);

/// Seed for one student's parameter stream.
std::uint64_t student_seed(std::uint64_t base_seed, const std::vector<ExtractorBank>& banks,
                           const Pairing& pairing);

}  // namespace metafusion
