#pragma once

#include <vector>

#include "metafusion/cohort.hpp"
#include "metafusion/mutual.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

/// Per-modality banks holding only {null, identity}: the reduced cohort whose
/// pairings are exactly the early-fusion and unimodal students. Seeds derive
/// from extractor names, so these students coincide bitwise with the
/// corresponding members of a full cohort built on the same base seed.
std::vector<ExtractorBank> identity_banks(const MultimodalDataset& dataset);

/// One trained student plus the fitted banks needed to reproduce its input
/// standardization at prediction time.
struct FusedStudentModel {
    Student student;
    std::vector<ExtractorBank> banks;

    Matrix predict(const std::vector<Matrix>& modalities) const;
};

/// Single student on the concatenated (standardized) raw modalities, trained
/// without coupling for config.n_t epochs.
FusedStudentModel early_fusion_fit(const MultimodalDataset& dataset, const ModelSpec& spec,
                                   const Task& task, const TrainConfig& config);

/// Student on one raw modality only.
FusedStudentModel unimodal_fit(const MultimodalDataset& dataset, std::size_t modality,
                               const ModelSpec& spec, const Task& task, const TrainConfig& config);

/// Independently trained unimodal students whose predictions are averaged.
struct LateFusionModel {
    std::vector<FusedStudentModel> members;  // one per modality

    Matrix predict(const std::vector<Matrix>& modalities) const;
};

LateFusionModel late_fusion_fit(const MultimodalDataset& dataset, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config);

/// Cooperative learning state: linear predictors for each modality and the
/// interaction term (fitted over [X, Z]), all with intercepts.
struct CoopState {
    Vector f_x, f_z, f_xz;
    double rho = 0.0;
    int iterations = 0;
    double residual = 0.0;  // max parameter change of the last cycle
    bool converged = false;
    bool simplified = false;          // interaction term forced to zero
    std::vector<double> objective_trace;  // objective after every block update
};

/// Alternating exact block minimization of the agreement-penalized objective
///   (1/2)||y - f_x - f_z - f_xz||^2 + (rho/2)||f_x - f_z||^2
///   + (rho / (2(1-rho)))||f_xz||^2
/// cycling f_x, f_z, f_xz until the max parameter change drops below tol.
/// Each update is the ridge-free least-squares projection of the penalty-
/// adjusted residual, so the objective never increases.
CoopState coop_fit(const Matrix& x, const Matrix& z, const Vector& y, double rho,
                   int max_iters = 500, double tol = 1e-8);

/// Same scheme without the interaction term, on the objective
///   (1/2)||y - f_x - f_z||^2 + (rho/2)||f_x - f_z||^2.
CoopState simplified_coop_fit(const Matrix& x, const Matrix& z, const Vector& y, double rho,
                              int max_iters = 500, double tol = 1e-8);

Vector coop_predict(const CoopState& state, const Matrix& x, const Matrix& z);

/// Empirical objective value at the current state.
double coop_objective(const CoopState& state, const Matrix& x, const Matrix& z, const Vector& y);

std::vector<double> default_coop_rho_grid();

/// Validation-MSE minimizer over the grid; ties toward the smaller rho.
double coop_select_rho(const MultimodalDataset& dataset, const std::vector<double>& grid,
                       int max_iters = 500, double tol = 1e-8);

}  // namespace metafusion
