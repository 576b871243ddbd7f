#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dbsa/bounds.hpp"
#include "dbsa/population.hpp"

namespace dbsa {

// Which outcome vector anchors the variance on the right-hand side of the
// predictive-covariates constraint. The observed vector keeps the constraint
// a convex quadratic in the unknown cells; the completed-vector reading is
// exposed for feasibility checks only.
enum class VarianceSource { observed_outcomes, completed_vector };

// Design matrix of transformed covariates (first column constant) plus the
// cached normal-equations factorization used to apply the hat matrix.
struct CovariateModel {
    Matrix q;              // N x p
    double lambda = 0.0;   // minimal R^2 of Y(x) on q(W)
    double var_y = 0.0;    // population variance of the observed outcomes
    VarianceSource variance_source = VarianceSource::observed_outcomes;
    Matrix qtq_inv;        // p x p

    static CovariateModel build(const ObservedData& data, const Matrix& q, double lambda);

    std::vector<double> coefficients(std::span<const double> y) const;  // (Q'Q)^-1 Q'y
    std::vector<double> fitted(std::span<const double> y) const;
    std::vector<double> residuals(std::span<const double> y) const;
    double residual_sq(std::span<const double> y) const;

    // N (1 - lambda) var(Y); the slack available to the residual sum.
    double budget() const;
    double budget_for(std::span<const double> y_completed) const;
};

// Sum of squared OLS residuals of y_x on Q minus the allowed budget.
// Nonpositive values mean the predictive-covariates constraint is satisfied.
double r2_constraint_residual(std::span<const double> y_x, const CovariateModel& model);

struct QclpArmSolution {
    bool feasible = false;
    double objective = 0.0;          // extreme free-cell sum
    std::vector<double> completion;  // free-cell values attaining it
    bool cap_active = false;
    double restart_spread = 0.0;     // max objective disagreement across restarts
};

struct QclpResult {
    Interval interval;
    // Extreme completions: free cells of each arm at the upper and lower
    // ATE endpoints, in data row order within the arm.
    std::vector<double> y1_free_at_hi, y0_free_at_hi;
    std::vector<double> y1_free_at_lo, y0_free_at_lo;
};

// Identified set for ATE under bounded outcomes, K-approximate mean balance,
// and the predictive-covariates constraint. Infeasible models yield an
// explicit empty interval (falsification).
QclpResult qclp_solve(const ObservedData& data, const CovariateModel& model, double k);
Interval qclp_bounds(const ObservedData& data, const CovariateModel& model, double k);

// Largest lambda in [0,1] consistent with the data, the boxes, and the
// K-band, located by bisection to 1e-3.
double falsification_point(const ObservedData& data, const CovariateModel& model, double k);

// Smallest achievable residual sum of squares for one arm's completed vector
// over its boxes, optionally restricted to the K-band on the free-cell mean.
// Arm 1 completes Y(1) over control rows; arm 0 completes Y(0) over treated
// rows.
double min_residual_sq(const ObservedData& data, const CovariateModel& model, int arm, double k);

}  // namespace dbsa
