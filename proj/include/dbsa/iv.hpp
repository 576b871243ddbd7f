#pragma once

#include <vector>

#include "dbsa/bounds.hpp"
#include "dbsa/design.hpp"
#include "dbsa/population.hpp"
#include "dbsa/worstcase.hpp"

namespace dbsa {

// Realized data for the noncompliance setting: outcome, treatment, and a
// binary instrument, plus per-unit outcome bounds.
struct IvData {
    std::vector<double> y;
    std::vector<int> x;
    std::vector<int> z;
    std::vector<double> y_min;
    std::vector<double> y_max;

    int n() const { return static_cast<int>(y.size()); }
    int n_instrument_on() const;
    double mean_y(int z_value) const;
    double mean_x(int z_value) const;
    double first_stage() const;  // mean_x(1) - mean_x(0)
    bool one_sided() const;      // no treated units in the instrument-off group
    void validate() const;
};

// Full IV science table (simulation and test fixtures only): potential
// outcomes and potential treatments for every unit.
struct IvPopulation {
    std::vector<double> y1, y0;
    std::vector<int> x1, x0;  // potential treatments X(1), X(0)
    std::vector<int> z;

    int n() const { return static_cast<int>(y1.size()); }
    // 'c', 'a', 'n' ('d' rejected by validate).
    char type(int i) const;
    void validate() const;
    IvData realize(double y_lo, double y_hi) const;
    double latt() const;  // mean effect among treated compliers
    double late() const;  // mean effect among all compliers
};

double wald(const IvData& data);

struct WaldDecomposition {
    double untreated_imbalance;  // (U-bar_z1 - U-bar_z0) / pi
    double always_taker_term;
    double complier_term;
    double total() const { return untreated_imbalance + always_taker_term + complier_term; }
};

// The three-way split of the Wald estimand; requires the full science table.
WaldDecomposition wald_decomposition(const IvPopulation& pop);

// Identified set for the realized local average effect on treated compliers
// under one-sided noncompliance and a K-bound on the untreated-outcome
// imbalance across instrument groups. When intersect_outcome_bounds is set
// the endpoints are clipped by the box-implied range of that imbalance.
Interval latt_bounds(const IvData& data, double k, bool intersect_outcome_bounds = false);

// Worst-case probability that the instrument groups' untreated outcomes are
// K-balanced, over completions of the unknown Y(0) of treated units, under
// re-randomization of the instrument.
WorstCaseCurve iv_pbar_curve(const IvData& data, const DesignSpec& z_design,
                             const std::vector<double>& k_grid, const SolverConfig& cfg);

WorstCaseCurve iv_pbar_curve_brute(const IvData& data, const DesignSpec& z_design,
                                   const std::vector<double>& k_grid, int points_per_cell);

}  // namespace dbsa
