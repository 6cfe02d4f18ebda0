#include "metafusion/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace metafusion {

Vector solve_least_squares(const Matrix& design, const Vector& targets, double ridge) {
    if (design.rows() != targets.size())
        throw ShapeMismatch("solve_least_squares: row count mismatch");
    if (design.rows() < 1 || design.cols() < 1)
        throw ShapeMismatch("solve_least_squares: empty design");
    if (ridge < 0.0) throw InvalidConfig("solve_least_squares: negative ridge");

    const Index p = design.cols();
    Matrix gram = design.transpose() * design;
    if (ridge > 0.0) gram.diagonal().array() += ridge;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
    const Vector& ev = eig.eigenvalues();
    const double emax = ev(p - 1);
    if (ridge == 0.0 && (emax <= 0.0 || ev(0) < 1e-10 * emax))
        throw SingularSystem("solve_least_squares: rank-deficient normal matrix");

    return eig.eigenvectors() *
           (eig.eigenvectors().transpose() * (design.transpose() * targets)).cwiseQuotient(ev);
}

PcaModel pca_fit(const Matrix& data, Index k) {
    const Index n = data.rows();
    const Index p = data.cols();
    if (k < 1 || k > std::min(n, p))
        throw InvalidRank("pca_fit: k out of range");

    PcaModel model;
    model.means = data.colwise().mean();
    Matrix centered = data.rowwise() - model.means.transpose();
    Matrix cov = centered.transpose() * centered / static_cast<double>(std::max<Index>(n - 1, 1));

    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);  // eigenvalues ascending
    model.projection.resize(p, k);
    model.explained_variance.resize(k);
    for (Index j = 0; j < k; ++j) {
        Vector dir = eig.eigenvectors().col(p - 1 - j);
        Index imax;
        dir.cwiseAbs().maxCoeff(&imax);
        if (dir(imax) < 0.0) dir = -dir;
        model.projection.col(j) = dir;
        model.explained_variance(j) = eig.eigenvalues()(p - 1 - j);
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& data) {
    if (data.cols() != model.means.size())
        throw ShapeMismatch("pca_transform: column count mismatch");
    return (data.rowwise() - model.means.transpose()) * model.projection;
}

namespace {

double assign_points(const std::vector<double>& points, const std::vector<double>& centroids,
                     std::vector<int>& assignments) {
    double inertia = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centroids.size(); ++c) {
            const double d = (points[i] - centroids[c]) * (points[i] - centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignments[i] = best;
        inertia += best_d;
    }
    return inertia;
}

std::vector<double> seed_plus_plus(const std::vector<double>& points, int k, Rng& rng) {
    const std::size_t m = points.size();
    std::vector<double> centroids;
    std::vector<bool> used(m, false);
    std::size_t first = rng.uniform_index(m);
    centroids.push_back(points[first]);
    used[first] = true;

    std::vector<double> d2(m);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centroids) best = std::min(best, (points[i] - c) * (points[i] - c));
            d2[i] = used[i] ? 0.0 : best;
            total += d2[i];
        }
        std::size_t pick = m;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            for (std::size_t i = 0; i < m; ++i) {
                r -= d2[i];
                if (r <= 0.0 && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        if (pick == m) {
            // All remaining mass is zero (duplicate points); take any unused index.
            for (std::size_t i = 0; i < m; ++i)
                if (!used[i]) {
                    pick = i;
                    break;
                }
        }
        centroids.push_back(points[pick]);
        used[pick] = true;
    }
    return centroids;
}

}  // namespace

KMeansResult kmeans_1d(const std::vector<double>& points, int k, Rng& rng) {
    const std::size_t m = points.size();
    if (k < 2) throw InvalidConfig("kmeans_1d: k must be >= 2");
    if (m < static_cast<std::size_t>(k)) throw TooFewPoints("kmeans_1d: fewer points than clusters");
    for (double x : points)
        if (!std::isfinite(x)) throw InvalidConfig("kmeans_1d: non-finite point");

    constexpr int kRestarts = 5;
    constexpr int kMaxIters = 100;

    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();

    for (int restart = 0; restart < kRestarts; ++restart) {
        std::vector<double> centroids = seed_plus_plus(points, k, rng);
        std::vector<int> assignments(m, -1);
        double inertia = assign_points(points, centroids, assignments);

        for (int iter = 0; iter < kMaxIters; ++iter) {
            std::vector<double> sums(k, 0.0);
            std::vector<int> counts(k, 0);
            for (std::size_t i = 0; i < m; ++i) {
                sums[assignments[i]] += points[i];
                ++counts[assignments[i]];
            }
            for (int c = 0; c < k; ++c) {
                if (counts[c] > 0) {
                    centroids[c] = sums[c] / counts[c];
                } else {
                    // Re-seed an emptied cluster with the point farthest from
                    // its current centroid.
                    std::size_t far = 0;
                    double far_d = -1.0;
                    for (std::size_t i = 0; i < m; ++i) {
                        const double d =
                            (points[i] - centroids[assignments[i]]) * (points[i] - centroids[assignments[i]]);
                        if (d > far_d && counts[assignments[i]] > 1) {
                            far_d = d;
                            far = i;
                        }
                    }
                    --counts[assignments[far]];
                    sums[assignments[far]] -= points[far];
                    assignments[far] = c;
                    counts[c] = 1;
                    sums[c] = points[far];
                    centroids[c] = points[far];
                }
            }
            std::vector<int> previous = assignments;
            inertia = assign_points(points, centroids, assignments);
            // Nearest-centroid ties can re-empty a cluster of duplicates; keep
            // the repaired labels in that case.
            std::vector<int> counts2(k, 0);
            for (int a : assignments) ++counts2[a];
            if (std::find(counts2.begin(), counts2.end(), 0) != counts2.end()) {
                assignments = previous;
                inertia = 0.0;
                for (std::size_t i = 0; i < m; ++i)
                    inertia += (points[i] - centroids[assignments[i]]) * (points[i] - centroids[assignments[i]]);
                break;
            }
            if (assignments == previous) break;
        }

        if (inertia < best.inertia) {
            best.inertia = inertia;
            best.assignments = assignments;
            best.centroids = centroids;
        }
    }

    // Lloyd restarts can stall in local minima.  In one dimension the optimal
    // clusters are contiguous in sorted order, so an exact partition search is
    // cheap; run it and keep whichever result is strictly better.
    if (m <= 4096) {
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
        std::vector<double> sum(m + 1, 0.0), sumsq(m + 1, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            sum[i + 1] = sum[i] + points[order[i]];
            sumsq[i + 1] = sumsq[i] + points[order[i]] * points[order[i]];
        }
        auto segment_cost = [&](std::size_t lo, std::size_t hi) {  // [lo, hi)
            const double s = sum[hi] - sum[lo];
            const double q = sumsq[hi] - sumsq[lo];
            return q - s * s / static_cast<double>(hi - lo);
        };
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<std::vector<double>> cost(m + 1, std::vector<double>(k + 1, inf));
        std::vector<std::vector<std::size_t>> cut(m + 1, std::vector<std::size_t>(k + 1, 0));
        cost[0][0] = 0.0;
        for (std::size_t j = 1; j <= m; ++j)
            for (int c = 1; c <= k; ++c)
                for (std::size_t i = static_cast<std::size_t>(c) - 1; i < j; ++i) {
                    const double v = cost[i][c - 1] + segment_cost(i, j);
                    if (v < cost[j][c]) {
                        cost[j][c] = v;
                        cut[j][c] = i;
                    }
                }
        if (cost[m][k] < best.inertia) {
            best.inertia = cost[m][k];
            best.assignments.assign(m, 0);
            best.centroids.assign(k, 0.0);
            std::size_t hi = m;
            for (int c = k; c >= 1; --c) {
                const std::size_t lo = cut[hi][c];
                for (std::size_t i = lo; i < hi; ++i) best.assignments[order[i]] = c - 1;
                best.centroids[c - 1] = (sum[hi] - sum[lo]) / static_cast<double>(hi - lo);
                hi = lo;
            }
        }
    }
    return best;
}

double silhouette_mean(const std::vector<double>& points, const std::vector<int>& assignments) {
    const std::size_t m = points.size();
    if (assignments.size() != m) throw ShapeMismatch("silhouette_mean: size mismatch");

    int k = 0;
    for (int a : assignments) k = std::max(k, a + 1);
    std::vector<int> counts(k, 0);
    for (int a : assignments) ++counts[a];
    int non_empty = 0;
    for (int c : counts) non_empty += c > 0 ? 1 : 0;
    if (non_empty < 2) throw SingleCluster("silhouette_mean: needs >= 2 non-empty clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const int ci = assignments[i];
        if (counts[ci] == 1) continue;  // singleton contributes 0

        double intra = 0.0;
        std::vector<double> inter(k, 0.0);
        for (std::size_t j = 0; j < m; ++j) {
            if (j == i) continue;
            const double d = std::abs(points[i] - points[j]);
            if (assignments[j] == ci)
                intra += d;
            else
                inter[assignments[j]] += d;
        }
        const double a = intra / (counts[ci] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != ci && counts[c] > 0) b = std::min(b, inter[c] / counts[c]);
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(m);
}

}  // namespace metafusion
