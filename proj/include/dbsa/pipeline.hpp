#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbsa/bounds.hpp"
#include "dbsa/comparators.hpp"
#include "dbsa/covariates.hpp"
#include "dbsa/design.hpp"
#include "dbsa/iv.hpp"
#include "dbsa/population.hpp"
#include "dbsa/worstcase.hpp"

namespace dbsa {

// Fully resolved run description: a config file plus flag overrides collapse
// into one of these, and the artifact bundle embeds it for provenance.
struct RunConfig {
    std::string mode = "ate";  // ate | iv | survey | coverage | milp
    std::string data_path;
    CsvSchema schema;

    DesignSpec design;  // n_units / margin filled from data when left at 0
    KGridSpec k_grid;
    std::vector<double> alphas;  // calibrated-set levels; default 0.01..0.99
    SolverConfig solver;
    InnerSolver inner = InnerSolver::ga;
    int brute_points_per_cell = 5;
    RestrictionSet restrictions = RestrictionSet::unit_bounds();

    std::optional<double> lambda;
    std::vector<std::string> covariate_cols;

    // survey mode
    int pop_size = 0;
    double survey_k = k_infinity;

    // milp mode
    double milp_k = 0.1;

    // coverage mode
    std::string fixture = "dgp1";  // dgp1|dgp2|dgp3 or a population JSON path
    std::vector<std::string> coverage_methods{"neyman", "fisher", "dbsa"};

    std::string out_dir = "out";
    int threads = 1;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
};

struct AteAnalysis {
    BoundsCurve bounds;
    WorstCaseCurve worst;
    std::vector<CalibratedSet> sets;
    double pbar_at_breakdown = 0.0;
};

AteAnalysis run_ate_analysis(const ObservedData& data, const RunConfig& cfg);

// Exit codes: 0 success, 2 validation failure, 3 falsified model, 4 solver
// budget exceeded.
int run_command(const RunConfig& cfg);

// Plot-ready SVG views of the curve CSVs.
std::string render_sensitivity_svg(const BoundsCurve& bounds, const WorstCaseCurve& worst);
std::string render_calibrated_svg(const std::vector<CalibratedSet>& sets, double ate_hat);

}  // namespace dbsa
