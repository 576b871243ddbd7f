#pragma once

#include <string>
#include <vector>

#include "dbsa/bounds.hpp"
#include "dbsa/design.hpp"
#include "dbsa/population.hpp"
#include "dbsa/worstcase.hpp"

namespace dbsa {

enum class CiMethod { neyman, fisher, hoeffding, dbsa };

enum class InnerSolver { ga, brute };

std::string method_name(CiMethod m);

struct CiResult {
    CiMethod method = CiMethod::neyman;
    double alpha = 0.05;
    Interval interval;
    bool degenerate_variance = false;  // some arm had fewer than 2 units
    double variance_estimate = 0.0;    // Neyman only
};

// Difference in means +- Phi^{-1}(1-alpha/2) * sqrt(V1/N1 + V0/N0). Arms
// with a single unit contribute zero variance and set the degenerate flag.
CiResult neyman_ci(const ObservedData& data, double alpha);

// Inversion of the exact sharp-null test with statistic |Y1bar - Y0bar - c|.
// The p-value counts assignments with statistic strictly greater than the
// observed one; ties at the observed statistic are not rejections.
CiResult fisher_ci(const ObservedData& data, double alpha, const AssignmentBatch& batch,
                   double c_step = 0.0 /* 0: (y_max - y_min) / 400 */);

// Fixed-width concentration interval around the Horvitz-Thompson-style
// midpoint; requires equal arm sizes.
CiResult hoeffding_ci(const ObservedData& data, double alpha);

struct CoverageCell {
    CiMethod method;
    double alpha;
    double coverage;
};

struct CoverageReport {
    int n_assignments = 0;
    double truth = 0.0;  // finite-population ATE of the science table
    std::vector<CoverageCell> cells;

    double coverage(CiMethod m, double alpha) const;
    std::string to_csv() const;
    std::string to_json() const;
};

struct CoverageOptions {
    std::vector<CiMethod> methods{CiMethod::neyman, CiMethod::fisher, CiMethod::dbsa};
    std::vector<double> alphas{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
    // Calibrated-set internals.
    InnerSolver inner = InnerSolver::brute;
    int brute_points_per_cell = 5;
    SolverConfig solver = SolverConfig::light();
    KGridSpec k_grid{41, -1.0};
    int threads = 1;
};

// Exact design-distribution coverage: every assignment of the exhaustive
// design is realized in turn, each method's interval recomputed, and
// containment of the true ATE tallied. Method failures count as
// non-coverage.
CoverageReport exact_coverage(const Population& pop, const DesignSpec& design,
                              const CoverageOptions& options);

// One dataset's calibrated sets for the coverage harness and the CLI.
struct DbsaIntervals {
    BoundsCurve bounds;
    WorstCaseCurve worst;
    std::vector<CalibratedSet> sets;  // one per requested alpha
};
DbsaIntervals dbsa_intervals(const ObservedData& data, const AssignmentBatch& batch,
                             const std::vector<double>& alphas, const CoverageOptions& options);

}  // namespace dbsa
