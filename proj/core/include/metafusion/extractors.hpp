#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metafusion/numerics.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

enum class ExtractorKind { Null, Identity, Pca };

/// One latent-representation extractor for a single modality. Null maps to a
/// width-0 representation (the modality is dropped), identity passes raw
/// features through, pca projects onto the leading principal directions.
/// Fitting additionally learns a per-column standardization of the output
/// (train-split mean and scale), so every downstream consumer sees
/// unit-variance features regardless of the raw feature magnitudes.
class Extractor {
public:
    static Extractor null(int modality) { return Extractor(ExtractorKind::Null, modality, 0); }
    static Extractor identity(int modality) { return Extractor(ExtractorKind::Identity, modality, 0); }
    static Extractor pca(int modality, Index rank) { return Extractor(ExtractorKind::Pca, modality, rank); }

    ExtractorKind kind() const { return kind_; }
    int modality() const { return modality_; }
    Index pca_rank() const { return rank_; }
    bool fitted() const { return kind_ == ExtractorKind::Null || has_scaler_; }

    /// Learn state from training rows only. Null/identity are no-ops.
    void fit(const Matrix& train_data);

    /// Output width given an input of width p_m.
    Index output_width(Index input_width) const;

    Matrix transform(const Matrix& data) const;

    /// Stable label, e.g. "null", "identity", "pca8".
    std::string name() const;

    // Fitted-state access for model persistence.
    const PcaModel& pca_model() const { return model_; }
    void set_pca_model(PcaModel model) {
        model_ = std::move(model);
        has_model_ = true;
    }
    const Vector& output_offset() const { return offset_; }
    const Vector& output_scale() const { return scale_; }
    void set_scaler(Vector offset, Vector scale) {
        offset_ = std::move(offset);
        scale_ = std::move(scale);
        has_scaler_ = true;
    }

private:
    Extractor(ExtractorKind kind, int modality, Index rank)
        : kind_(kind), modality_(modality), rank_(rank) {}

    Matrix raw_transform(const Matrix& data) const;

    ExtractorKind kind_;
    int modality_;
    Index rank_;
    bool has_model_ = false;
    PcaModel model_;
    bool has_scaler_ = false;
    Vector offset_, scale_;  // standardization: (raw - offset) * scale per column
};

/// Extractor bank for one modality: the null mapping at index 0, the learned
/// extractors at 1..k, the identity mapping at k+1.
struct ExtractorBank {
    std::vector<Extractor> extractors;

    int learned_count() const { return static_cast<int>(extractors.size()) - 2; }
    void fit(const Matrix& train_data);
};

/// Default ladder {null, pca(k/4), pca(k/2), pca(k), identity} with
/// k = min(32, p_m, n_train - 1) and duplicate ranks removed.
ExtractorBank default_bank(int modality, Index input_width, Index n_train);

}  // namespace metafusion
