#pragma once

#include <vector>

#include "metafusion/rng.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

/// argmin ||targets - design*w||^2 + ridge*||w||^2 via the normal equations.
/// Throws SingularSystem when ridge == 0 and design^T*design is rank
/// deficient (relative threshold 1e-10 on the eigenvalue spread).
Vector solve_least_squares(const Matrix& design, const Vector& targets, double ridge = 0.0);

struct PcaModel {
    Matrix projection;  // p x k, orthonormal columns, decreasing variance
    Vector means;       // p, column means of the training data
    Vector explained_variance;  // k, eigenvalues of the sample covariance
};

/// Principal directions of mean-centered data via eigendecomposition of the
/// sample covariance. Sign convention: each direction's largest-magnitude
/// entry is positive.
PcaModel pca_fit(const Matrix& data, Index k);

Matrix pca_transform(const PcaModel& model, const Matrix& data);

struct KMeansResult {
    std::vector<int> assignments;
    std::vector<double> centroids;
    double inertia = 0.0;
};

/// Lloyd's algorithm on scalar points with k-means++ seeding and 5 restarts,
/// keeping the minimum-inertia solution. Every returned cluster is non-empty.
KMeansResult kmeans_1d(const std::vector<double>& points, int k, Rng& rng);

/// Mean silhouette coefficient with Euclidean distance on scalar points.
/// Singleton clusters contribute coefficient 0.
double silhouette_mean(const std::vector<double>& points, const std::vector<int>& assignments);

}  // namespace metafusion
