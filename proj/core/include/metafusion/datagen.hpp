#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "metafusion/rng.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

enum class Transform { Identity, QuadraticMinusLinear };

/// Element-wise transform used by the synthetic label model.
Matrix apply_transform(Transform t, const Matrix& m);

enum class Split : std::uint8_t { Train = 0, Val = 1, Test = 2 };

struct SynthConfig {
    Index n = 2000;
    Index latent_x = 20, latent_z = 30, latent_shared = 0;
    Index observed_x = 500, observed_z = 400;
    double weight_x = 1.0, weight_z = 1.0, weight_shared = 0.0, weight_interaction = 0.0;
    Transform f_x = Transform::Identity;
    Transform f_z = Transform::Identity;
    Transform f_shared = Transform::Identity;
    double noise_x = 0.4, noise_z = 0.4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct MultimodalDataset {
    std::vector<Matrix> modalities;  // each n x p_m, shared row order
    Vector labels;                   // regression targets
    std::vector<int> class_labels;   // classification targets (empty for regression)
    std::vector<Split> splits;       // one tag per row
    bool classification = false;

    Index rows() const { return modalities.empty() ? 0 : modalities.front().rows(); }

    std::vector<Index> rows_in(Split s) const;
    Matrix modality_rows(std::size_t m, Split s) const;
    Vector label_rows(Split s) const;
    std::vector<int> class_label_rows(Split s) const;
};

/// Latent factor generator: iid N(0,1) latents, row-wise Kronecker
/// interactions, additive label model, signal-plus-noise observed features,
/// 64/16/20 train/val/test split by row.
MultimodalDataset generate_synthetic(const SynthConfig& config);

/// Row-wise Kronecker product of two matrices with equal row counts.
Matrix rowwise_kronecker(const Matrix& a, const Matrix& b);

struct TheoryInstance {
    Index n = 0, p = 0, p_I = 0, p_J = 0;
    Matrix latent;     // V, n x p, iid standard normal rows
    Vector coeff;      // theta, p
    Matrix map_I;      // T_I, p x p_I, orthogonal (not unit-norm) columns
    Matrix map_J;      // T_J, p x p_J
    double sigma_I = 1.0, sigma_J = 1.0;
    Matrix rep_I;      // V_I = V*T_I + eps_I
    Matrix rep_J;      // V_J = V*T_J + eps_J
    Vector labels;     // Y = V*theta
};

TheoryInstance generate_theory_instance(Index n, Index p, Index p_I, Index p_J, double sigma_I,
                                        double sigma_J, std::uint64_t seed);

/// Columnar text export: header row naming modality/column, one sample per
/// line, 12 significant digits.
void export_dataset(const MultimodalDataset& dataset, std::ostream& out);

}  // namespace metafusion
