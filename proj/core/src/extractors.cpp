#include "metafusion/extractors.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace metafusion {

void Extractor::fit(const Matrix& train_data) {
    if (kind_ == ExtractorKind::Null) return;
    if (kind_ == ExtractorKind::Pca) {
        model_ = pca_fit(train_data, rank_);
        has_model_ = true;
    }
    const Matrix raw = raw_transform(train_data);
    const double n = static_cast<double>(raw.rows());
    offset_ = raw.colwise().mean();
    scale_.resize(raw.cols());
    for (Index j = 0; j < raw.cols(); ++j) {
        const double var = (raw.col(j).array() - offset_(j)).square().sum() / n;
        scale_(j) = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
    has_scaler_ = true;
}

Index Extractor::output_width(Index input_width) const {
    switch (kind_) {
        case ExtractorKind::Null:
            return 0;
        case ExtractorKind::Identity:
            return input_width;
        case ExtractorKind::Pca:
            return rank_;
    }
    return 0;
}

Matrix Extractor::raw_transform(const Matrix& data) const {
    switch (kind_) {
        case ExtractorKind::Null:
            return Matrix(data.rows(), 0);
        case ExtractorKind::Identity:
            return data;
        case ExtractorKind::Pca:
            if (!has_model_) throw NotFitted("Extractor::transform: pca extractor not fitted");
            return pca_transform(model_, data);
    }
    throw NotFitted("Extractor::transform: unknown kind");
}

Matrix Extractor::transform(const Matrix& data) const {
    if (kind_ == ExtractorKind::Null) return Matrix(data.rows(), 0);
    if (!has_scaler_) throw NotFitted("Extractor::transform: extractor not fitted");
    Matrix out = raw_transform(data);
    out.rowwise() -= offset_.transpose();
    out *= scale_.asDiagonal();
    return out;
}

std::string Extractor::name() const {
    switch (kind_) {
        case ExtractorKind::Null:
            return "null";
        case ExtractorKind::Identity:
            return "identity";
        case ExtractorKind::Pca:
            return "pca" + std::to_string(rank_);
    }
    return "?";
}

void ExtractorBank::fit(const Matrix& train_data) {
    for (Extractor& e : extractors) e.fit(train_data);
}

ExtractorBank default_bank(int modality, Index input_width, Index n_train) {
    ExtractorBank bank;
    bank.extractors.push_back(Extractor::null(modality));

    const Index k = std::min<Index>({32, input_width, n_train - 1});
    std::set<Index> ranks;
    for (Index r : {k / 4, k / 2, k})
        if (r >= 1 && r < input_width) ranks.insert(r);
    for (Index r : ranks) bank.extractors.push_back(Extractor::pca(modality, r));

    bank.extractors.push_back(Extractor::identity(modality));
    return bank;
}

}  // namespace metafusion
