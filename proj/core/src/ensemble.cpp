#include "metafusion/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metafusion/numerics.hpp"

namespace metafusion {

namespace {

Matrix mean_of(const std::vector<Matrix>& predictions, const std::vector<std::size_t>& members) {
    Matrix sum = predictions[members[0]];
    for (std::size_t i = 1; i < members.size(); ++i) sum += predictions[members[i]];
    return sum / static_cast<double>(members.size());
}

}  // namespace

Matrix committee_predict(const Committee& committee, const std::vector<Matrix>& predictions) {
    if (committee.members.empty()) throw EmptyPool("committee_predict: no members");
    return mean_of(predictions, committee.members);
}

Committee ensemble_select(const std::vector<Matrix>& val_predictions, const Task& task,
                          const TrainingTargets& val_targets, const SelectionConfig& config) {
    const std::size_t total = val_predictions.size();
    if (total == 0) throw EmptyPool("ensemble_select: no students");
    if (config.p_prune < 0.0 || config.p_prune >= 1.0)
        throw InvalidConfig("ensemble_select: p_prune must lie in [0,1)");
    if (config.n_init < 1) throw InvalidConfig("ensemble_select: n_init must be >= 1");

    std::vector<double> losses(total);
    for (std::size_t i = 0; i < total; ++i) losses[i] = task_loss(task, val_predictions[i], val_targets);

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return losses[a] < losses[b]; });

    const std::size_t pruned = static_cast<std::size_t>(
        std::ceil(config.p_prune * static_cast<double>(total)));
    const std::size_t survivors = total - std::min(pruned, total);
    if (survivors < static_cast<std::size_t>(config.n_init))
        throw EmptyPool("ensemble_select: pruning leaves fewer students than n_init");
    order.resize(survivors);

    const std::size_t cap = std::min<std::size_t>(static_cast<std::size_t>(config.n_c), survivors);

    Committee committee;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i < static_cast<std::size_t>(config.n_init))
            committee.members.push_back(order[i]);
        else
            pool.push_back(order[i]);
    }
    committee.val_loss = task_loss(task, mean_of(val_predictions, committee.members), val_targets);

    while (committee.members.size() < cap && !pool.empty()) {
        double best_loss = committee.val_loss;
        std::size_t best_pos = pool.size();
        for (std::size_t c = 0; c < pool.size(); ++c) {
            std::vector<std::size_t> trial = committee.members;
            trial.push_back(pool[c]);
            const double loss = task_loss(task, mean_of(val_predictions, trial), val_targets);
            if (loss < best_loss) {  // strict improvement only
                best_loss = loss;
                best_pos = c;
            }
        }
        if (best_pos == pool.size()) break;
        committee.members.push_back(pool[best_pos]);
        committee.val_loss = best_loss;
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    return committee;
}

std::vector<int> predicted_classes(const Matrix& scores) {
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Index i = 0; i < scores.rows(); ++i) {
        Index best = 0;
        scores.row(i).maxCoeff(&best);  // Eigen returns the first maximum
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double misclassification_rate(const Matrix& scores, const std::vector<int>& classes) {
    if (static_cast<Index>(classes.size()) != scores.rows())
        throw ShapeMismatch("misclassification_rate: label count mismatch");
    const std::vector<int> pred = predicted_classes(scores);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < classes.size(); ++i)
        if (pred[i] != classes[i]) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(classes.size());
}

std::vector<double> performance_weights(const std::vector<Matrix>& val_predictions,
                                        const Task& task, const TrainingTargets& val_targets) {
    std::vector<double> weights(val_predictions.size());
    for (std::size_t i = 0; i < val_predictions.size(); ++i) {
        if (task.kind == TaskKind::Regression) {
            const double loss = task_loss(task, val_predictions[i], val_targets);
            weights[i] = 1.0 / std::max(loss, 1e-12);
        } else {
            weights[i] = 1.0 - misclassification_rate(val_predictions[i], *val_targets.classes);
        }
    }
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(weights.size()));
    } else {
        for (double& w : weights) w /= total;
    }
    return weights;
}

namespace {

Matrix vote(const std::vector<Matrix>& target_predictions, const std::vector<double>& weights,
            const Task& task) {
    const Index n = target_predictions[0].rows();
    Matrix tally = Matrix::Zero(n, task.classes);
    for (std::size_t m = 0; m < target_predictions.size(); ++m) {
        const std::vector<int> pred = predicted_classes(target_predictions[m]);
        for (Index i = 0; i < n; ++i) tally(i, pred[static_cast<std::size_t>(i)]) += weights[m];
    }
    // one-hot of the winning class; argmax already favors the smallest index on ties
    Matrix out = Matrix::Zero(n, task.classes);
    for (Index i = 0; i < n; ++i) {
        Index best = 0;
        tally.row(i).maxCoeff(&best);
        out(i, best) = 1.0;
    }
    return out;
}

Matrix stack_columns(const std::vector<Matrix>& predictions) {
    const Index n = predictions[0].rows();
    Index cols = 0;
    for (const Matrix& p : predictions) cols += p.cols();
    Matrix out(n, cols + 1);
    Index at = 0;
    for (const Matrix& p : predictions) {
        out.middleCols(at, p.cols()) = p;
        at += p.cols();
    }
    out.col(cols).setOnes();
    return out;
}

Matrix stacking(const std::vector<Matrix>& target_predictions, const Task& task,
                const std::vector<Matrix>& val_predictions, const TrainingTargets& val_targets) {
    const Matrix val_design = stack_columns(val_predictions);
    const Matrix target_design = stack_columns(target_predictions);
    // small ridge keeps the head well-posed when member outputs are collinear
    const double ridge = 1e-8;
    if (task.kind == TaskKind::Regression) {
        Vector head = solve_least_squares(val_design, *val_targets.values, ridge);
        return target_design * head;
    }
    Matrix head(val_design.cols(), task.classes);
    for (int c = 0; c < task.classes; ++c) {
        Vector onehot(val_design.rows());
        for (Index i = 0; i < onehot.size(); ++i)
            onehot(i) = (*val_targets.classes)[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
        head.col(c) = solve_least_squares(val_design, onehot, ridge);
    }
    return target_design * head;
}

}  // namespace

Matrix aggregate(const std::vector<Matrix>& target_predictions, AggregationMethod method,
                 const Task& task, const std::vector<Matrix>& val_predictions,
                 const TrainingTargets& val_targets) {
    if (target_predictions.empty()) throw EmptyPool("aggregate: no members");
    if (target_predictions.size() != val_predictions.size())
        throw ShapeMismatch("aggregate: member count differs between splits");

    switch (method) {
        case AggregationMethod::BestSingle: {
            std::size_t best = 0;
            double best_loss = task_loss(task, val_predictions[0], val_targets);
            for (std::size_t i = 1; i < val_predictions.size(); ++i) {
                const double loss = task_loss(task, val_predictions[i], val_targets);
                if (loss < best_loss) {
                    best_loss = loss;
                    best = i;
                }
            }
            return target_predictions[best];
        }
        case AggregationMethod::Stacking:
            return stacking(target_predictions, task, val_predictions, val_targets);
        case AggregationMethod::SimpleAverage: {
            Matrix sum = target_predictions[0];
            for (std::size_t i = 1; i < target_predictions.size(); ++i) sum += target_predictions[i];
            return sum / static_cast<double>(target_predictions.size());
        }
        case AggregationMethod::WeightedAverage: {
            const std::vector<double> weights = performance_weights(val_predictions, task, val_targets);
            Matrix sum = weights[0] * target_predictions[0];
            for (std::size_t i = 1; i < target_predictions.size(); ++i)
                sum += weights[i] * target_predictions[i];
            return sum;
        }
        case AggregationMethod::MajorityVote: {
            if (task.kind != TaskKind::Classification)
                throw MethodTaskMismatch("aggregate: majority vote needs a classification task");
            return vote(target_predictions,
                        std::vector<double>(target_predictions.size(), 1.0), task);
        }
        case AggregationMethod::WeightedVote: {
            if (task.kind != TaskKind::Classification)
                throw MethodTaskMismatch("aggregate: weighted vote needs a classification task");
            return vote(target_predictions, performance_weights(val_predictions, task, val_targets),
                        task);
        }
    }
    throw InvalidConfig("aggregate: unknown method");
}

}  // namespace metafusion
