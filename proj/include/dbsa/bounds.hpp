#pragma once

#include <limits>
#include <string>
#include <vector>

#include "dbsa/population.hpp"

namespace dbsa {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool empty = false;

    static Interval make_empty() { return {0.0, 0.0, true}; }
    double width() const { return empty ? 0.0 : hi - lo; }
    bool contains(double v, double tol = 1e-12) const {
        return !empty && v >= lo - tol && v <= hi + tol;
    }
};

// Extra structure on the unknown potential outcomes, beyond the per-unit
// boxes carried by the data.
struct RestrictionSet {
    enum class Kind {
        uniform_bounds,        // global [y_min, y_max] for every cell
        unit_bounds,           // per-unit boxes from the data
        bounded_unit_effect,   // |Y_i(1) - Y_i(0)| <= M per unit
        bounded_total_effect,  // sum_i |Y_i(1) - Y_i(0)| <= M
        variance_cap           // population variance of Y(x) at most M
    };
    Kind kind = Kind::unit_bounds;
    double m = 0.0;

    static RestrictionSet unit_bounds() { return {Kind::unit_bounds, 0.0}; }
    static RestrictionSet uniform_bounds() { return {Kind::uniform_bounds, 0.0}; }
    static RestrictionSet bounded_unit_effect(double m) { return {Kind::bounded_unit_effect, m}; }
    static RestrictionSet bounded_total_effect(double m) { return {Kind::bounded_total_effect, m}; }
    static RestrictionSet variance_cap(double m) { return {Kind::variance_cap, m}; }
};

struct KGridSpec {
    int count = 201;
    double k_max = -1.0;  // negative: span [0, global spread]
};

// Identified-set curve over a K grid. Intervals are nested in K and the
// K = 0 interval degenerates to the observed difference in means.
struct BoundsCurve {
    std::vector<double> k_grid;
    std::vector<Interval> intervals;
    double breakdown = 0.0;  // +inf when zero is excluded even at K = infinity
    double ate_hat = 0.0;
    double k_bar = 0.0;      // saturation threshold: intervals equal the K = inf set beyond it

    std::string to_csv() const;
    std::string summary_json() const;
};

constexpr double k_infinity = std::numeric_limits<double>::infinity();

// Closed-form identified set for ATE under uniform bounds and K-approximate
// mean balance.
Interval manski_bounds(const ObservedData& data, double k);

// Identified set with per-unit boxes or one of the other restriction kinds.
// Infeasible restriction combinations yield an explicit empty interval.
Interval lp_bounds(const ObservedData& data, double k, const RestrictionSet& restrictions);

Interval domain_of_consensus(const ObservedData& data);

BoundsCurve bounds_curve(const ObservedData& data, const KGridSpec& grid,
                         const RestrictionSet& restrictions = RestrictionSet::unit_bounds());

// Largest K at which zero is still excluded from the identified set; 0 when
// the observed difference in means is 0, +inf when even the K = infinity set
// excludes zero.
double breakdown_point(const ObservedData& data,
                       const RestrictionSet& restrictions = RestrictionSet::unit_bounds());

// Bounds on a finite population mean when only n of pop_size units were
// sampled, under |sampled mean - unsampled mean| <= k and global bounds.
Interval survey_bounds(const ObservedData& sampled, double k, int pop_size);

// K grid spanning [0, k_max or spread], augmented with the breakdown point.
std::vector<double> build_k_grid(const ObservedData& data, const KGridSpec& spec,
                                 double k_breakdown);

// Boxes of the unknown cells under a restriction kind. Arm 1 boxes cover the
// Y(1) of control rows, arm 0 the Y(0) of treated rows, both in data row
// order within the arm. ok is false when some box is empty.
struct FreeCellBoxes {
    std::vector<double> lo1, hi1;
    std::vector<double> lo0, hi0;
    bool ok = true;
};
FreeCellBoxes free_cell_boxes(const ObservedData& data, const RestrictionSet& restrictions);

}  // namespace dbsa
