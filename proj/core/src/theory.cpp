#include "metafusion/theory.hpp"

#include <cmath>

#include "metafusion/rng.hpp"

namespace metafusion {

namespace {

Matrix coupled_gram(const Matrix& rep_I, const Matrix& rep_J, double rho) {
    const Index p_I = rep_I.cols();
    const Index p_J = rep_J.cols();
    Matrix block(p_I + p_J, p_I + p_J);
    block.topLeftCorner(p_I, p_I) = (1.0 + rho) * (rep_I.transpose() * rep_I);
    block.topRightCorner(p_I, p_J) = -rho * (rep_I.transpose() * rep_J);
    block.bottomLeftCorner(p_J, p_I) = block.topRightCorner(p_I, p_J).transpose();
    block.bottomRightCorner(p_J, p_J) = (1.0 + rho) * (rep_J.transpose() * rep_J);
    return block;
}

}  // namespace

FittedPair closed_form_fit(const Matrix& rep_I, const Matrix& rep_J, const Vector& labels,
                           double rho) {
    if (rho < 0.0) throw InvalidConfig("closed_form_fit: rho must be nonnegative");
    if (rep_I.rows() != rep_J.rows() || rep_I.rows() != labels.size())
        throw ShapeMismatch("closed_form_fit: row counts disagree");
    if (rep_I.rows() < std::max(rep_I.cols(), rep_J.cols()))
        throw InvalidDims("closed_form_fit: need n >= max(p_I, p_J)");

    const Index p_I = rep_I.cols();
    const Index p_J = rep_J.cols();
    Matrix block = coupled_gram(rep_I, rep_J, rho);
    Vector rhs(p_I + p_J);
    rhs.head(p_I) = rep_I.transpose() * labels;
    rhs.tail(p_J) = rep_J.transpose() * labels;

    Eigen::SelfAdjointEigenSolver<Matrix> es(block);
    const double emax = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() < 1e-12 * emax) {
        // near-singular: regularize just enough to stabilize the solve
        block.diagonal().array() += 1e-8 * std::max(1.0, emax);
        es.compute(block);
        if (es.eigenvalues().minCoeff() <= 0.0)
            throw SingularSystem("closed_form_fit: coupled system is singular");
    }
    Vector sol = es.eigenvectors() *
                 (es.eigenvectors().transpose() * rhs).cwiseQuotient(es.eigenvalues());

    FittedPair fit;
    fit.theta_I = sol.head(p_I);
    fit.theta_J = sol.tail(p_J);
    fit.rho = rho;
    fit.route = SolveRoute::BlockClosedForm;
    return fit;
}

FittedPair closed_form_fit(const TheoryInstance& inst, double rho) {
    return closed_form_fit(inst.rep_I, inst.rep_J, inst.labels, rho);
}

FittedPair gradient_fit(const Matrix& rep_I, const Matrix& rep_J, const Vector& labels, double rho,
                        int max_iters, double tol) {
    if (rho < 0.0) throw InvalidConfig("gradient_fit: rho must be nonnegative");
    const Index p_I = rep_I.cols();
    const Index p_J = rep_J.cols();
    const Matrix block = coupled_gram(rep_I, rep_J, rho);
    Vector rhs(p_I + p_J);
    rhs.head(p_I) = rep_I.transpose() * labels;
    rhs.tail(p_J) = rep_J.transpose() * labels;

    // Step size from the largest curvature of the quadratic objective.
    Vector v = Vector::Ones(block.rows()).normalized();
    double lambda = 1.0;
    for (int it = 0; it < 100; ++it) {
        Vector w = block * v;
        lambda = w.norm();
        if (lambda <= 0.0) throw SingularSystem("gradient_fit: zero curvature");
        v = w / lambda;
    }
    const double lr = 1.0 / (2.0 * lambda);

    Vector theta = Vector::Zero(p_I + p_J);
    const double scale = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    for (int it = 0; it < max_iters; ++it) {
        Vector grad = 2.0 * (block * theta - rhs);
        if (grad.lpNorm<Eigen::Infinity>() <= tol * scale) break;
        theta -= lr * grad;
    }

    FittedPair fit;
    fit.theta_I = theta.head(p_I);
    fit.theta_J = theta.tail(p_J);
    fit.rho = rho;
    fit.route = SolveRoute::GradientDescent;
    return fit;
}

OracleQuantities oracle_quantities(const TheoryInstance& inst) {
    const Index p_I = inst.p_I;
    const Index p_J = inst.p_J;
    OracleQuantities q;

    q.sigma_tilde_I = inst.map_I.transpose() * inst.map_I;
    q.sigma_tilde_I.diagonal().array() += inst.sigma_I * inst.sigma_I;
    q.sigma_tilde_J = inst.map_J.transpose() * inst.map_J;
    q.sigma_tilde_J.diagonal().array() += inst.sigma_J * inst.sigma_J;

    Eigen::LLT<Matrix> llt_I(q.sigma_tilde_I);
    if (llt_I.info() != Eigen::Success)
        throw SingularSystem("oracle_quantities: sigma_tilde_I not positive definite");
    q.theta_star_I = llt_I.solve(inst.map_I.transpose() * inst.coeff);
    q.sigma_star2_I =
        inst.coeff.dot(inst.coeff - inst.map_I * llt_I.solve(inst.map_I.transpose() * inst.coeff));

    Matrix joint(p_I + p_J, p_I + p_J);
    joint.topLeftCorner(p_I, p_I) = q.sigma_tilde_I;
    joint.topRightCorner(p_I, p_J) = inst.map_I.transpose() * inst.map_J;
    joint.bottomLeftCorner(p_J, p_I) = joint.topRightCorner(p_I, p_J).transpose();
    joint.bottomRightCorner(p_J, p_J) = q.sigma_tilde_J;

    Eigen::LLT<Matrix> llt(joint);
    if (llt.info() != Eigen::Success)
        throw SingularSystem("oracle_quantities: joint representation covariance not positive definite");
    Matrix inv = llt.solve(Matrix::Identity(p_I + p_J, p_I + p_J));
    q.A = inv.topLeftCorner(p_I, p_I);
    q.B = inv.topRightCorner(p_I, p_J);
    q.C = inv.bottomLeftCorner(p_J, p_I);
    q.D = inv.bottomRightCorner(p_J, p_J);

    q.theta_bar_I = (q.A.transpose() * inst.map_I.transpose() + q.C.transpose() * inst.map_J.transpose()) *
                    inst.coeff;
    q.theta_bar_J = (q.B.transpose() * inst.map_I.transpose() + q.D.transpose() * inst.map_J.transpose()) *
                    inst.coeff;
    Matrix shrink = (inst.map_I * q.A + inst.map_J * q.C) * inst.map_I.transpose() +
                    (inst.map_I * q.B + inst.map_J * q.D) * inst.map_J.transpose();
    q.sigma_bar2 = inst.coeff.dot(inst.coeff - shrink * inst.coeff);
    return q;
}

std::vector<Decomposition> mse_decomposition_grid(const TheoryInstance& inst,
                                                  const std::vector<double>& rhos, int n_mc,
                                                  std::uint64_t seed) {
    if (n_mc < 1) throw InvalidConfig("mse_decomposition_grid: n_mc must be positive");
    const Index n = inst.n;
    const Index p = inst.p;
    const Index p_I = inst.p_I;
    const Index p_J = inst.p_J;
    const OracleQuantities q = oracle_quantities(inst);

    // Conditional law of the oracle latents given the fixed V_I:
    // rows are independent Gaussians with mean T_I sigma_tilde_I^{-1} v and
    // shared covariance I - T_I sigma_tilde_I^{-1} T_I^T.
    Eigen::LLT<Matrix> llt_I(q.sigma_tilde_I);
    Matrix gain = llt_I.solve(inst.map_I.transpose());         // p_I x p
    Matrix cond_mean_rows = inst.rep_I * gain;                 // n x p
    Matrix cond_cov = Matrix::Identity(p, p) - inst.map_I * gain;
    Matrix chol;
    {
        Eigen::LLT<Matrix> llt_c(cond_cov);
        if (llt_c.info() == Eigen::Success) {
            chol = llt_c.matrixL();
        } else {
            Eigen::SelfAdjointEigenSolver<Matrix> es(cond_cov);
            chol = es.eigenvectors() *
                   es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        }
    }

    const Vector diag_sigma = q.sigma_tilde_I.diagonal();
    const Index n_test = 4;

    struct Accum {
        Vector mean_sum, mean_sq_sum, var_sum;
        double direct_sum = 0.0, direct_sq_sum = 0.0;
    };
    std::vector<Accum> acc(rhos.size());
    for (Accum& a : acc) {
        a.mean_sum = Vector::Zero(p_I);
        a.mean_sq_sum = Vector::Zero(p_I);
        a.var_sum = Vector::Zero(p_I);
    }

    Rng rng(seed);
    Matrix stacked(p_I + p_J, n);
    stacked.topRows(p_I) = inst.rep_I.transpose();
    for (int r = 0; r < n_mc; ++r) {
        Matrix latent = cond_mean_rows + rng.normal_matrix(n, p) * chol.transpose();
        Matrix rep_J = latent * inst.map_J + inst.sigma_J * rng.normal_matrix(n, p_J);
        Vector labels = latent * inst.coeff;
        Vector mu_y = inst.rep_I * q.theta_bar_I + rep_J * q.theta_bar_J;

        Matrix test_latent = rng.normal_matrix(n_test, p);
        Matrix test_rep_I = test_latent * inst.map_I + inst.sigma_I * rng.normal_matrix(n_test, p_I);
        Vector test_labels = test_latent * inst.coeff;

        stacked.bottomRows(p_J) = rep_J.transpose();
        for (std::size_t g = 0; g < rhos.size(); ++g) {
            Matrix block = coupled_gram(inst.rep_I, rep_J, rhos[g]);
            Eigen::LDLT<Matrix> ldlt(block);
            if (ldlt.info() != Eigen::Success)
                throw SingularSystem("mse_decomposition_grid: coupled system singular");
            Matrix mixer = ldlt.solve(stacked).topRows(p_I);  // p_I x n, theta_hat_I = mixer * Y

            Vector cond_mean = mixer * mu_y;
            Vector cond_var = q.sigma_bar2 * mixer.array().square().rowwise().sum();
            Vector theta_hat = mixer * labels;

            acc[g].mean_sum += cond_mean;
            acc[g].mean_sq_sum += cond_mean.array().square().matrix();
            acc[g].var_sum += cond_var;
            const double direct =
                (test_labels - test_rep_I * theta_hat).squaredNorm() / static_cast<double>(n_test);
            acc[g].direct_sum += direct;
            acc[g].direct_sq_sum += direct * direct;
        }
    }

    std::vector<Decomposition> out(rhos.size());
    const double R = static_cast<double>(n_mc);
    for (std::size_t g = 0; g < rhos.size(); ++g) {
        Vector mean = acc[g].mean_sum / R;
        Vector var = Vector::Zero(p_I);
        if (n_mc > 1)
            var = (acc[g].mean_sq_sum - R * mean.array().square().matrix()) / (R - 1.0);

        Decomposition& d = out[g];
        d.rho = rhos[g];
        d.n_mc = n_mc;
        d.noise = q.sigma_star2_I;
        d.bias2 = diag_sigma.dot((q.theta_star_I - mean).array().square().matrix());
        d.var_aleatoric = diag_sigma.dot(acc[g].var_sum) / R;
        d.var_epistemic = diag_sigma.dot(var.cwiseMax(0.0));
        d.mse_direct = acc[g].direct_sum / R;
        const double var_direct =
            n_mc > 1 ? (acc[g].direct_sq_sum - R * d.mse_direct * d.mse_direct) / (R - 1.0) : 0.0;
        d.mse_direct_se = std::sqrt(std::max(0.0, var_direct) / R);
    }
    return out;
}

Decomposition mse_decomposition(const TheoryInstance& inst, double rho, int n_mc,
                                std::uint64_t seed) {
    return mse_decomposition_grid(inst, {rho}, n_mc, seed)[0];
}

double xi(const TheoryInstance& inst) {
    const OracleQuantities q = oracle_quantities(inst);
    double total = 0.0;
    for (Index m = 0; m < inst.p_I; ++m) {
        const double denom_I =
            inst.map_I.col(m).squaredNorm() + inst.sigma_I * inst.sigma_I;
        double inner = 0.0;
        for (Index k = 0; k < inst.p_J; ++k) {
            const double cross = inst.map_J.col(k).dot(inst.map_I.col(m));
            const double denom_J = inst.map_J.col(k).squaredNorm() + inst.sigma_J * inst.sigma_J;
            inner += cross * cross / (denom_I * denom_J);
        }
        total += inner - 1.0;
    }
    return 2.0 * q.sigma_bar2 / static_cast<double>(inst.n) * total;
}

namespace {

struct EventVectors {
    Vector cond_transfer;  // v_II^{-1} v_IJ theta_bar_J - (theta_star_I - theta_bar_I)
    Vector cond_contract;  // v_II^{-1} v_IJ v_JJ^{-1} v_JI theta_bar_I - theta_bar_I
};

EventVectors event_vectors(const TheoryInstance& inst, const OracleQuantities& q) {
    Eigen::LDLT<Matrix> v_II(Matrix(inst.rep_I.transpose() * inst.rep_I));
    Eigen::LDLT<Matrix> v_JJ(Matrix(inst.rep_J.transpose() * inst.rep_J));
    if (v_II.info() != Eigen::Success || v_JJ.info() != Eigen::Success)
        throw SingularSystem("event_vectors: degenerate realized gram");
    Matrix v_IJ = inst.rep_I.transpose() * inst.rep_J;

    EventVectors ev;
    ev.cond_transfer = v_II.solve(v_IJ * q.theta_bar_J) - (q.theta_star_I - q.theta_bar_I);
    ev.cond_contract =
        v_II.solve(v_IJ * v_JJ.solve(v_IJ.transpose() * q.theta_bar_I)) - q.theta_bar_I;
    return ev;
}

}  // namespace

bool event_E_holds(const TheoryInstance& inst) {
    const EventVectors ev = event_vectors(inst, oracle_quantities(inst));
    return (ev.cond_transfer.array() >= 0.0).all() && (ev.cond_contract.array() <= 0.0).all();
}

EventEReport event_E_check(const TheoryInstance& inst, int n_mc, std::uint64_t seed) {
    if (n_mc < 2) throw InvalidConfig("event_E_check: n_mc must be >= 2");
    const OracleQuantities q = oracle_quantities(inst);
    const EventVectors ev = event_vectors(inst, q);

    EventEReport report;
    report.holds = (ev.cond_transfer.array() >= 0.0).all() && (ev.cond_contract.array() <= 0.0).all();

    const Index p_I = inst.p_I;
    const Index p_J = inst.p_J;
    const Index n = inst.n;
    const double h = 1e-4;  // forward difference, rho >= 0
    const Vector diag_sigma = q.sigma_tilde_I.diagonal();
    const Vector mu_y = inst.rep_I * q.theta_bar_I + inst.rep_J * q.theta_bar_J;
    const double sigma_bar = std::sqrt(std::max(0.0, q.sigma_bar2));

    Matrix stacked(p_I + p_J, n);
    stacked.topRows(p_I) = inst.rep_I.transpose();
    stacked.bottomRows(p_J) = inst.rep_J.transpose();
    auto mixer_at = [&](double rho) {
        Eigen::LDLT<Matrix> ldlt(coupled_gram(inst.rep_I, inst.rep_J, rho));
        if (ldlt.info() != Eigen::Success) throw SingularSystem("event_E_check: singular system");
        return Matrix(ldlt.solve(stacked).topRows(p_I));
    };
    const Matrix mixer0 = mixer_at(0.0);
    const Matrix mixer_h = mixer_at(h);

    // Redraw Y given the realized (V_I, V_J); common draws across both rho
    // values so the finite differences cancel the shared noise. Slopes and
    // their spread come from batch means.
    const int n_batches = 20;
    const int per_batch = std::max(1, n_mc / n_batches);
    Rng rng(seed);
    std::vector<double> bias_slopes, epi_slopes;
    for (int b = 0; b < n_batches; ++b) {
        Vector y_mean = Vector::Zero(n);
        for (int r = 0; r < per_batch; ++r) y_mean += mu_y + sigma_bar * rng.normal_vector(n);
        y_mean /= static_cast<double>(per_batch);

        Vector m0 = mixer0 * y_mean;
        Vector mh = mixer_h * y_mean;
        const double b0 = diag_sigma.dot((q.theta_star_I - m0).array().square().matrix());
        const double bh = diag_sigma.dot((q.theta_star_I - mh).array().square().matrix());
        bias_slopes.push_back((bh - b0) / h);
        // epistemic slope via its product form: 2 diag^T [c1 o dm/drho]
        Vector dm = (mh - m0) / h;
        epi_slopes.push_back(2.0 * diag_sigma.dot(((m0 - q.theta_star_I).array() * dm.array()).matrix()));
    }

    auto mean_se = [](const std::vector<double>& xs) {
        double mean = 0.0;
        for (double x : xs) mean += x;
        mean /= static_cast<double>(xs.size());
        double var = 0.0;
        for (double x : xs) var += (x - mean) * (x - mean);
        var /= static_cast<double>(xs.size() - 1);
        return std::pair<double, double>(mean, std::sqrt(var / static_cast<double>(xs.size())));
    };
    std::tie(report.bias_slope, report.bias_slope_se) = mean_se(bias_slopes);
    std::tie(report.epistemic_slope, report.epistemic_slope_se) = mean_se(epi_slopes);
    return report;
}

}  // namespace metafusion
