#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbsa/bounds.hpp"
#include "dbsa/covariates.hpp"
#include "dbsa/design.hpp"
#include "dbsa/population.hpp"

namespace dbsa {

// Minimization over data-consistent completions of the unknown potential
// outcomes. Free cells are exactly the Y(0) of treated rows and Y(1) of
// control rows; fixed cells equal the observed outcomes.
struct CompletionProblem {
    ObservedData data;
    AssignmentBatch batch;
    RestrictionSet restrictions = RestrictionSet::unit_bounds();
    std::optional<double> covariate_lambda;
    std::optional<Matrix> q_matrix;  // required when covariate_lambda is set

    // Single-arm mode: the event constrains only one potential-outcome
    // vector (the instrument analysis re-randomizes Z against Y(0)).
    bool single_arm = false;
    int single_arm_value = 0;  // which potential outcome the event tracks
};

struct GaConfig {
    int population_size = 200;
    int generations = 300;
    double crossover_rate = 0.9;
    double mutation_sigma = 0.1;   // initial sigma as a fraction of box width
    double mutation_decay = 0.99;  // per-generation multiplier
    int elitism_count = 4;
    int tournament_size = 4;
};

struct SolverConfig {
    GaConfig ga;
    int restarts = 5;
    std::uint64_t seed = 0;
    double tolerance = 0.02;
    double time_budget_ms = 0.0;  // per grid point; 0 disables the cap
    int threads = 1;

    static SolverConfig light();  // reduced effort for coverage harnesses
};

struct PointDiagnostics {
    int runs = 0;
    std::uint64_t best_hash = 0;
    std::string status;  // "ga", "trivial", "implied-zero", "brute", "budget"
};

enum class CurveStatus { ok, falsified };

// Worst-case balance probabilities over a K grid. p_raw holds the solver
// output per grid point; p_tilde is the monotone (running suffix minimum)
// adjustment. Any heuristic value upper-bounds the true infimum, so the
// adjustment keeps that one-sidedness.
struct WorstCaseCurve {
    std::vector<double> k_grid;
    std::vector<double> p_raw;
    std::vector<double> p_tilde;
    std::vector<PointDiagnostics> diagnostics;
    CurveStatus status = CurveStatus::ok;
    bool budget_exceeded = false;

    std::string to_csv() const;
    std::string diagnostics_json() const;
};

// Minimizes the design probability of joint K-approximate balance over all
// data-consistent completions, one genetic-algorithm run per grid point with
// random restarts plus a warm-started chain across adjacent grid points.
WorstCaseCurve pbar_curve(const CompletionProblem& problem, const std::vector<double>& k_grid,
                          const SolverConfig& cfg);

// Covariate-constrained variant: completions must satisfy the predictive
// covariates constraint for problem.covariate_lambda in each arm.
WorstCaseCurve pbar_mod(const CompletionProblem& problem, const std::vector<double>& k_grid,
                        const SolverConfig& cfg);

// Deterministic small-problem solver: a uniform grid with points_per_cell
// values per free cell, minimized exactly over that grid (per arm event
// masks combined by branch-and-bound). Feasible only for small N.
WorstCaseCurve pbar_curve_brute(const CompletionProblem& problem,
                                const std::vector<double>& k_grid, int points_per_cell);

// Smallest grid K whose adjusted probability reaches 1 - alpha; saturated
// lookups return the grid maximum and set the flag.
struct KAlphaResult {
    double k = 0.0;
    std::size_t grid_index = 0;
    bool saturated = false;
};
KAlphaResult k_alpha(const WorstCaseCurve& curve, double alpha);

struct CalibratedSet {
    double one_minus_alpha = 0.0;
    double k = 0.0;
    Interval set;
    bool saturated = false;
};

// The headline output: identified sets at the calibrated K(alpha), one per
// requested alpha. Curves must share their K grid.
std::vector<CalibratedSet> calibrated_sets(const BoundsCurve& bounds, const WorstCaseCurve& curve,
                                           const std::vector<double>& alphas);

// Adjusted worst-case probability at the breakdown point.
double strength_of_evidence(const BoundsCurve& bounds, const WorstCaseCurve& curve);

// Big-M mixed-integer formulation of the fixed-K problem, in LP file format,
// for use with external solvers. Requires uniform global bounds.
std::string export_milp(const CompletionProblem& problem, double k);

}  // namespace dbsa
