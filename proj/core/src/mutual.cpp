#include "metafusion/mutual.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "metafusion/csv.hpp"
#include "metafusion/numerics.hpp"

namespace metafusion {

std::vector<double> default_rho_grid() { return {0.1, 0.5, 1.0, 2.0, 5.0}; }

namespace {

struct SplitData {
    TransformCache train_cache, val_cache;
    Vector train_values, val_values;
    std::vector<int> train_classes, val_classes;
    TrainingTargets train_targets, val_targets;
};

SplitData prepare_splits(const Cohort& cohort, const MultimodalDataset& dataset) {
    SplitData s;
    std::vector<Matrix> train_mods, val_mods;
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m) {
        train_mods.push_back(dataset.modality_rows(m, Split::Train));
        val_mods.push_back(dataset.modality_rows(m, Split::Val));
    }
    s.train_cache = transform_all(cohort.banks, train_mods);
    s.val_cache = transform_all(cohort.banks, val_mods);
    if (cohort.task.kind == TaskKind::Regression) {
        s.train_values = dataset.label_rows(Split::Train);
        s.val_values = dataset.label_rows(Split::Val);
        s.train_targets.values = &s.train_values;
        s.val_targets.values = &s.val_values;
    } else {
        s.train_classes = dataset.class_label_rows(Split::Train);
        s.val_classes = dataset.class_label_rows(Split::Val);
        s.train_targets.classes = &s.train_classes;
        s.val_targets.classes = &s.val_classes;
    }
    return s;
}

double student_lr(const TrainConfig& config, const Student& student, const Matrix& fused,
                  double rho_weight_sum) {
    if (config.lr > 0.0) return config.lr;
    return auto_learning_rate(student, fused, rho_weight_sum);
}

std::vector<char> top_flags(const std::vector<int>& cluster_of,
                            const std::vector<double>& cluster_mean_loss, int k_top, bool worst) {
    std::vector<int> order(cluster_mean_loss.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return worst ? cluster_mean_loss[static_cast<std::size_t>(a)] >
                           cluster_mean_loss[static_cast<std::size_t>(b)]
                     : cluster_mean_loss[static_cast<std::size_t>(a)] <
                           cluster_mean_loss[static_cast<std::size_t>(b)];
    });
    std::vector<char> selected(cluster_mean_loss.size(), 0);
    for (int i = 0; i < k_top && i < static_cast<int>(order.size()); ++i)
        selected[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;
    std::vector<char> flags(cluster_of.size(), 0);
    for (std::size_t i = 0; i < cluster_of.size(); ++i)
        flags[i] = selected[static_cast<std::size_t>(cluster_of[i])];
    return flags;
}

}  // namespace

ScreeningReport initial_screening(Cohort& cohort, const MultimodalDataset& dataset,
                                  const TrainConfig& config) {
    if (config.n_t < 1) throw InvalidConfig("initial_screening: n_t must be >= 1");
    const SplitData split = prepare_splits(cohort, dataset);
    const std::size_t count = cohort.students.size();

    ScreeningReport report;
    report.initial_losses.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        Student& student = cohort.students[i];
        student.init_params();
        const Matrix fused = fuse(student.pairing, split.train_cache);
        const double lr = student_lr(config, student, fused, 0.0);
        try {
            for (int epoch = 0; epoch < config.n_t; ++epoch)
                grad_step(student, fused, split.train_targets, {}, {}, 0.0, lr);
        } catch (const NonFiniteLoss&) {
            throw NonFiniteLoss("initial_screening: training diverged for pairing " +
                                cohort.pairing_name(i));
        }
        report.initial_losses[i] =
            task_loss(cohort.task, student.predict(fuse(student.pairing, split.val_cache)),
                      split.val_targets);
    }

    // Cluster the screening losses. Degenerate spreads collapse to one
    // cluster with everyone on top, so downstream weight rules stay defined.
    const double lo = *std::min_element(report.initial_losses.begin(), report.initial_losses.end());
    const double hi = *std::max_element(report.initial_losses.begin(), report.initial_losses.end());
    const bool degenerate = hi - lo <= 1e-12 * std::max(1.0, std::abs(hi));
    if (count == 1 || degenerate) {
        report.k_cls = 1;
        report.cluster_of.assign(count, 0);
        report.cluster_mean_loss = {std::accumulate(report.initial_losses.begin(),
                                                    report.initial_losses.end(), 0.0) /
                                    static_cast<double>(count)};
        report.in_top.assign(count, 1);
        return report;
    }

    Rng rng = Rng(config.seed).child("screening-kmeans");
    const int k_max = std::min<int>(5, static_cast<int>(count) - 1);
    KMeansResult best;
    int best_k = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int k = 2; k <= std::max(2, k_max); ++k) {
        if (k > static_cast<int>(count)) break;
        KMeansResult res = kmeans_1d(report.initial_losses, k, rng);
        const double score =
            k_max < 2 ? 0.0 : silhouette_mean(report.initial_losses, res.assignments);
        if (score > best_score) {
            best_score = score;
            best = res;
            best_k = k;
        }
    }

    report.k_cls = best_k;
    report.cluster_of = best.assignments;
    report.cluster_mean_loss.assign(static_cast<std::size_t>(best_k), 0.0);
    std::vector<int> sizes(static_cast<std::size_t>(best_k), 0);
    for (std::size_t i = 0; i < count; ++i) {
        report.cluster_mean_loss[static_cast<std::size_t>(report.cluster_of[i])] +=
            report.initial_losses[i];
        ++sizes[static_cast<std::size_t>(report.cluster_of[i])];
    }
    for (std::size_t c = 0; c < report.cluster_mean_loss.size(); ++c)
        report.cluster_mean_loss[c] /= static_cast<double>(sizes[c]);
    report.in_top = top_flags(report.cluster_of, report.cluster_mean_loss, 1, false);
    return report;
}

DivergenceWeights divergence_weights(const ScreeningReport& report, WeightMode mode, int k_top) {
    if (k_top < 1) throw InvalidConfig("divergence_weights: k_top must be >= 1");
    const std::size_t count = report.initial_losses.size();
    DivergenceWeights weights;
    weights.mode = mode;
    weights.d = Matrix::Zero(static_cast<Index>(count), static_cast<Index>(count));

    std::vector<char> target(count, 1);
    if (mode == WeightMode::LearnFromTop)
        target = top_flags(report.cluster_of, report.cluster_mean_loss, k_top, false);
    else if (mode == WeightMode::LearnFromWorst)
        target = top_flags(report.cluster_of, report.cluster_mean_loss, 1, true);

    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t j = 0; j < count; ++j)
            if (i != j && target[j]) weights.d(static_cast<Index>(i), static_cast<Index>(j)) = 1.0;
    return weights;
}

std::vector<EpochTrace> mutual_train(Cohort& cohort, const MultimodalDataset& dataset,
                                     const DivergenceWeights& weights, const TrainConfig& config) {
    const std::size_t count = cohort.students.size();
    if (weights.d.rows() != static_cast<Index>(count) || weights.d.cols() != static_cast<Index>(count))
        throw ShapeMismatch("mutual_train: weight matrix size mismatch");
    if (config.n_t < 1) throw InvalidConfig("mutual_train: n_t must be >= 1");
    if (config.rho < 0.0) throw InvalidConfig("mutual_train: rho must be nonnegative");

    const SplitData split = prepare_splits(cohort, dataset);

    std::vector<Matrix> fused(count);
    std::vector<double> lrs(count);
    for (std::size_t i = 0; i < count; ++i) {
        Student& student = cohort.students[i];
        student.init_params();  // same seed stream as screening
        fused[i] = fuse(student.pairing, split.train_cache);
        lrs[i] = student_lr(config, student, fused[i],
                            config.rho * weights.d.row(static_cast<Index>(i)).sum());
    }

    std::vector<EpochTrace> traces;
    traces.reserve(static_cast<std::size_t>(config.n_t) * count);
    std::vector<Matrix> snapshots(count);
    for (int epoch = 0; epoch < config.n_t; ++epoch) {
        for (std::size_t i = 0; i < count; ++i)
            snapshots[i] = cohort.students[i].predict(fused[i]);
        for (std::size_t i = 0; i < count; ++i) {
            std::vector<const Matrix*> peers;
            std::vector<double> peer_weights;
            for (std::size_t j = 0; j < count; ++j) {
                const double w = weights.d(static_cast<Index>(i), static_cast<Index>(j));
                if (j != i && w != 0.0) {
                    peers.push_back(&snapshots[j]);
                    peer_weights.push_back(w);
                }
            }
            try {
                const LossParts parts = grad_step(cohort.students[i], fused[i], split.train_targets,
                                                  peers, peer_weights, config.rho, lrs[i]);
                traces.push_back({epoch, i, parts.task, parts.divergence});
            } catch (const NonFiniteLoss&) {
                throw NonFiniteLoss("mutual_train: training diverged for pairing " +
                                    cohort.pairing_name(i));
            }
        }
    }
    return traces;
}

void export_traces(const std::vector<EpochTrace>& traces, const Cohort& cohort, std::ostream& out) {
    out << "epoch,pairing,task_loss,divergence_loss\n";
    for (const EpochTrace& t : traces)
        out << t.epoch << ',' << cohort.pairing_name(t.student) << ',' << format_number(t.task)
            << ',' << format_number(t.divergence) << '\n';
}

std::vector<Matrix> cohort_predictions(const Cohort& cohort, const TransformCache& cache) {
    std::vector<Matrix> preds;
    preds.reserve(cohort.students.size());
    for (const Student& s : cohort.students) preds.push_back(s.predict(fuse(s.pairing, cache)));
    return preds;
}

PipelineState select_rho(const MultimodalDataset& dataset, const std::vector<ExtractorBank>& banks,
                         const ModelSpec& spec, const Task& task,
                         const std::vector<double>& rho_grid, const TrainConfig& config,
                         const SelectionConfig& selection, WeightMode mode) {
    if (rho_grid.empty()) throw InvalidConfig("select_rho: empty grid");
    for (double r : rho_grid)
        if (r < 0.0) throw InvalidConfig("select_rho: negative rho in grid");

    Cohort cohort = build_cohort(dataset, banks, spec, task, config.seed);
    const SplitData split = prepare_splits(cohort, dataset);

    PipelineState best;
    best.screening = initial_screening(cohort, dataset, config);
    best.weights = divergence_weights(best.screening, mode, config.k_top);

    std::vector<double> grid = rho_grid;
    std::sort(grid.begin(), grid.end());
    double best_loss = std::numeric_limits<double>::infinity();
    for (double rho : grid) {
        TrainConfig cfg = config;
        cfg.rho = rho;
        mutual_train(cohort, dataset, best.weights, cfg);
        const std::vector<Matrix> val_preds = cohort_predictions(cohort, split.val_cache);
        const Committee committee = ensemble_select(val_preds, task, split.val_targets, selection);
        if (committee.val_loss < best_loss) {  // ties keep the smaller rho
            best_loss = committee.val_loss;
            best.rho = rho;
            best.committee = committee;
            best.cohort = cohort;
        }
    }
    return best;
}

}  // namespace metafusion
