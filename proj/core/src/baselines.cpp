#include "metafusion/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace metafusion {

std::vector<ExtractorBank> identity_banks(const MultimodalDataset& dataset) {
    std::vector<ExtractorBank> banks;
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m) {
        ExtractorBank bank;
        bank.extractors.push_back(Extractor::null(static_cast<int>(m)));
        bank.extractors.push_back(Extractor::identity(static_cast<int>(m)));
        banks.push_back(bank);
    }
    return banks;
}

Matrix FusedStudentModel::predict(const std::vector<Matrix>& modalities) const {
    return student.predict(fuse(student.pairing, transform_all(banks, modalities)));
}

namespace {

FusedStudentModel fit_single(const MultimodalDataset& dataset, const Pairing& pairing,
                             std::vector<ExtractorBank> banks, const ModelSpec& spec,
                             const Task& task, const TrainConfig& config) {
    for (std::size_t m = 0; m < banks.size(); ++m)
        banks[m].fit(dataset.modality_rows(m, Split::Train));
    Student student;
    student.pairing = pairing;
    student.spec = spec;
    student.task = task;
    student.input_width = 0;
    for (std::size_t m = 0; m < pairing.indices.size(); ++m)
        student.input_width +=
            banks[m].extractors[static_cast<std::size_t>(pairing.indices[m])].output_width(
                dataset.modalities[m].cols());
    student.init_seed = student_seed(config.seed, banks, pairing);
    student.init_params();

    std::vector<Matrix> train_mods;
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m)
        train_mods.push_back(dataset.modality_rows(m, Split::Train));
    const TransformCache cache = transform_all(banks, train_mods);
    const Matrix fused = fuse(pairing, cache);

    Vector values;
    std::vector<int> classes;
    TrainingTargets targets;
    if (task.kind == TaskKind::Regression) {
        values = dataset.label_rows(Split::Train);
        targets.values = &values;
    } else {
        classes = dataset.class_label_rows(Split::Train);
        targets.classes = &classes;
    }

    const double lr = config.lr > 0.0 ? config.lr : auto_learning_rate(student, fused, 0.0);
    for (int epoch = 0; epoch < config.n_t; ++epoch)
        grad_step(student, fused, targets, {}, {}, 0.0, lr);
    return {std::move(student), std::move(banks)};
}

}  // namespace

FusedStudentModel early_fusion_fit(const MultimodalDataset& dataset, const ModelSpec& spec,
                                   const Task& task, const TrainConfig& config) {
    if (dataset.modalities.size() < 2)
        throw InvalidConfig("early_fusion_fit: need at least two modalities");
    Pairing pairing{std::vector<int>(dataset.modalities.size(), 1)};
    return fit_single(dataset, pairing, identity_banks(dataset), spec, task, config);
}

FusedStudentModel unimodal_fit(const MultimodalDataset& dataset, std::size_t modality,
                               const ModelSpec& spec, const Task& task, const TrainConfig& config) {
    if (modality >= dataset.modalities.size())
        throw InvalidConfig("unimodal_fit: modality index out of range");
    Pairing pairing{std::vector<int>(dataset.modalities.size(), 0)};
    pairing.indices[modality] = 1;
    return fit_single(dataset, pairing, identity_banks(dataset), spec, task, config);
}

Matrix LateFusionModel::predict(const std::vector<Matrix>& modalities) const {
    if (members.size() != modalities.size())
        throw ShapeMismatch("LateFusionModel::predict: modality count mismatch");
    Matrix sum;
    for (std::size_t m = 0; m < members.size(); ++m) {
        Matrix pred = members[m].predict(modalities);
        if (m == 0)
            sum = pred;
        else
            sum += pred;
    }
    return sum / static_cast<double>(members.size());
}

LateFusionModel late_fusion_fit(const MultimodalDataset& dataset, const ModelSpec& spec,
                                const Task& task, const TrainConfig& config) {
    if (dataset.modalities.size() < 2)
        throw InvalidConfig("late_fusion_fit: need at least two modalities");
    LateFusionModel model;
    for (std::size_t m = 0; m < dataset.modalities.size(); ++m)
        model.members.push_back(unimodal_fit(dataset, m, spec, task, config));
    return model;
}

namespace {

Matrix with_intercept(const Matrix& m) {
    Matrix out(m.rows(), m.cols() + 1);
    out.leftCols(m.cols()) = m;
    out.col(m.cols()).setOnes();
    return out;
}

double coop_objective_raw(const Vector& pred_x, const Vector& pred_z, const Vector& pred_xz,
                          const Vector& y, double rho, bool simplified) {
    double obj = 0.5 * (y - pred_x - pred_z - pred_xz).squaredNorm() +
                 0.5 * rho * (pred_x - pred_z).squaredNorm();
    if (!simplified && rho > 0.0) obj += rho / (2.0 * (1.0 - rho)) * pred_xz.squaredNorm();
    return obj;
}

CoopState coop_fit_impl(const Matrix& x, const Matrix& z, const Vector& y, double rho,
                        int max_iters, double tol, bool simplified) {
    if (rho < 0.0 || rho >= 1.0) throw InvalidConfig("coop_fit: rho must lie in [0, 1)");
    if (x.rows() != z.rows() || x.rows() != y.size())
        throw ShapeMismatch("coop_fit: row counts disagree");

    const Matrix dx = with_intercept(x);
    const Matrix dz = with_intercept(z);
    Matrix dxz;
    if (!simplified) {
        dxz.resize(x.rows(), x.cols() + z.cols() + 1);
        dxz << x, z, Vector::Ones(x.rows());
    }

    // Factor each design once; every block update is then a cheap solve. The
    // minimum-norm solution keeps the projections well-defined even when a
    // design is wider than the sample count.
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod_x(dx), cod_z(dz), cod_xz;
    if (!simplified) cod_xz.compute(dxz);

    CoopState state;
    state.rho = rho;
    state.simplified = simplified;
    state.f_x = Vector::Zero(dx.cols());
    state.f_z = Vector::Zero(dz.cols());
    state.f_xz = simplified ? Vector() : Vector::Zero(dxz.cols());

    Vector pred_x = Vector::Zero(y.size());
    Vector pred_z = Vector::Zero(y.size());
    Vector pred_xz = Vector::Zero(y.size());

    auto record = [&] {
        state.objective_trace.push_back(
            coop_objective_raw(pred_x, pred_z, pred_xz, y, rho, simplified));
    };
    record();

    for (int it = 0; it < max_iters; ++it) {
        double change = 0.0;

        // f_x block: project the penalty-adjusted residual onto span(X)
        Vector target = (y - (1.0 - rho) * pred_z - pred_xz) / (1.0 + rho);
        Vector next = cod_x.solve(target);
        change = std::max(change, (next - state.f_x).lpNorm<Eigen::Infinity>());
        state.f_x = next;
        pred_x = dx * state.f_x;
        record();

        target = (y - (1.0 - rho) * pred_x - pred_xz) / (1.0 + rho);
        next = cod_z.solve(target);
        change = std::max(change, (next - state.f_z).lpNorm<Eigen::Infinity>());
        state.f_z = next;
        pred_z = dz * state.f_z;
        record();

        if (!simplified) {
            target = (1.0 - rho) * (y - pred_x - pred_z);
            next = cod_xz.solve(target);
            change = std::max(change, (next - state.f_xz).lpNorm<Eigen::Infinity>());
            state.f_xz = next;
            pred_xz = dxz * state.f_xz;
            record();
        }

        state.iterations = it + 1;
        state.residual = change;
        if (change < tol) {
            state.converged = true;
            break;
        }
    }
    return state;
}

}  // namespace

CoopState coop_fit(const Matrix& x, const Matrix& z, const Vector& y, double rho, int max_iters,
                   double tol) {
    return coop_fit_impl(x, z, y, rho, max_iters, tol, false);
}

CoopState simplified_coop_fit(const Matrix& x, const Matrix& z, const Vector& y, double rho,
                              int max_iters, double tol) {
    return coop_fit_impl(x, z, y, rho, max_iters, tol, true);
}

Vector coop_predict(const CoopState& state, const Matrix& x, const Matrix& z) {
    Vector pred = with_intercept(x) * state.f_x + with_intercept(z) * state.f_z;
    if (!state.simplified) {
        Matrix dxz(x.rows(), x.cols() + z.cols() + 1);
        dxz << x, z, Vector::Ones(x.rows());
        pred += dxz * state.f_xz;
    }
    return pred;
}

double coop_objective(const CoopState& state, const Matrix& x, const Matrix& z, const Vector& y) {
    Vector pred_x = with_intercept(x) * state.f_x;
    Vector pred_z = with_intercept(z) * state.f_z;
    Vector pred_xz = Vector::Zero(y.size());
    if (!state.simplified) {
        Matrix dxz(x.rows(), x.cols() + z.cols() + 1);
        dxz << x, z, Vector::Ones(x.rows());
        pred_xz = dxz * state.f_xz;
    }
    return coop_objective_raw(pred_x, pred_z, pred_xz, y, state.rho, state.simplified);
}

std::vector<double> default_coop_rho_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 9; ++i) grid.push_back(0.1 * i);
    return grid;
}

double coop_select_rho(const MultimodalDataset& dataset, const std::vector<double>& grid,
                       int max_iters, double tol) {
    if (grid.empty()) throw InvalidConfig("coop_select_rho: empty grid");
    if (dataset.modalities.size() != 2)
        throw InvalidConfig("coop_select_rho: cooperative learning handles two modalities");

    const Matrix x_train = dataset.modality_rows(0, Split::Train);
    const Matrix z_train = dataset.modality_rows(1, Split::Train);
    const Vector y_train = dataset.label_rows(Split::Train);
    const Matrix x_val = dataset.modality_rows(0, Split::Val);
    const Matrix z_val = dataset.modality_rows(1, Split::Val);
    const Vector y_val = dataset.label_rows(Split::Val);

    std::vector<double> sorted = grid;
    std::sort(sorted.begin(), sorted.end());
    double best_rho = sorted.front();
    double best_mse = std::numeric_limits<double>::infinity();
    for (double rho : sorted) {
        const CoopState state = coop_fit(x_train, z_train, y_train, rho, max_iters, tol);
        const double mse = (y_val - coop_predict(state, x_val, z_val)).squaredNorm() /
                           static_cast<double>(y_val.size());
        if (mse < best_mse) {  // strict: ties keep the smaller rho
            best_mse = mse;
            best_rho = rho;
        }
    }
    return best_rho;
}

}  // namespace metafusion
