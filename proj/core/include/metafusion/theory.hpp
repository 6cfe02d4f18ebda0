#pragma once

#include <cstdint>
#include <vector>

#include "metafusion/datagen.hpp"
#include "metafusion/types.hpp"

namespace metafusion {

enum class SolveRoute { BlockClosedForm, GradientDescent };

/// Coupled linear students fitted on a shared penalty rho.
struct FittedPair {
    Vector theta_I;
    Vector theta_J;
    double rho = 0.0;
    SolveRoute route = SolveRoute::BlockClosedForm;
};

/// Exact minimizer of
///   ||Y - V_I a||^2 + ||Y - V_J b||^2 + rho ||V_I a - V_J b||^2
/// via the (p_I + p_J) block system; no series truncation.
FittedPair closed_form_fit(const Matrix& rep_I, const Matrix& rep_J, const Vector& labels,
                           double rho);
FittedPair closed_form_fit(const TheoryInstance& inst, double rho);

/// Same objective minimized by plain gradient descent, as an independent
/// route for cross-checking the block solve.
FittedPair gradient_fit(const Matrix& rep_I, const Matrix& rep_J, const Vector& labels, double rho,
                        int max_iters = 200000, double tol = 1e-13);

/// Population quantities implied by the signal-plus-noise representation
/// model: the best linear predictors of Y from V_I alone and from (V_I, V_J)
/// jointly, with their residual variances.
struct OracleQuantities {
    Matrix sigma_tilde_I;  // T_I^T T_I + sigma_I^2 I
    Matrix sigma_tilde_J;
    Vector theta_star_I;    // coefficients of Y on V_I alone
    double sigma_star2_I = 0.0;
    Matrix A, B, C, D;      // blocks of the inverse joint representation covariance
    Vector theta_bar_I;     // joint coefficients of Y on (V_I, V_J)
    Vector theta_bar_J;
    double sigma_bar2 = 0.0;
};

OracleQuantities oracle_quantities(const TheoryInstance& inst);

/// Generalization error of student I at one rho, conditional on the observed
/// V_I, split into squared bias, aleatoric variance, epistemic variance, and
/// irreducible noise. Estimated by Monte Carlo over redraws of (V, V_J, Y)
/// given V_I; mse_direct is an independent fresh-test-point estimate of the
/// same total.
struct Decomposition {
    double rho = 0.0;
    double bias2 = 0.0;
    double var_aleatoric = 0.0;
    double var_epistemic = 0.0;
    double noise = 0.0;  // sigma_star2_I
    double mse_direct = 0.0;
    double mse_direct_se = 0.0;
    int n_mc = 0;

    double component_sum() const { return bias2 + var_aleatoric + var_epistemic + noise; }
};

/// Shared Monte Carlo draws across all rho values, so finite differences in
/// rho see common random numbers.
std::vector<Decomposition> mse_decomposition_grid(const TheoryInstance& inst,
                                                  const std::vector<double>& rhos, int n_mc,
                                                  std::uint64_t seed);
Decomposition mse_decomposition(const TheoryInstance& inst, double rho, int n_mc,
                                std::uint64_t seed);

/// Closed-form limit of the aleatoric-variance slope in rho at rho = 0:
///   (2 sigma_bar2 / n) * sum_m ( sum_k (T_J:k^T T_I:m)^2 /
///       ((T_I:m^T T_I:m + sigma_I^2)(T_J:k^T T_J:k + sigma_J^2)) - 1 )
double xi(const TheoryInstance& inst);

/// Componentwise conditions on the realized (V_I, V_J) under which the bias
/// and epistemic-variance slopes at rho = 0 are guaranteed nonpositive.
bool event_E_holds(const TheoryInstance& inst);

struct EventEReport {
    bool holds = false;
    double bias_slope = 0.0;
    double bias_slope_se = 0.0;
    double epistemic_slope = 0.0;
    double epistemic_slope_se = 0.0;
};

/// Checks the slope claims at the instance's realized (V_I, V_J) by redrawing
/// Y given both representations and taking forward differences at rho = 0.
EventEReport event_E_check(const TheoryInstance& inst, int n_mc, std::uint64_t seed);

}  // namespace metafusion
