#include "dbsa/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace dbsa {

namespace {

// One arm of the completion problem: the observed group mean plus the boxes
// of the cells that are free for this potential outcome.
struct ArmBoxes {
    double obs_sum = 0.0;
    int n_obs = 0;
    std::vector<double> lo;
    std::vector<double> hi;

    double obs_mean() const { return obs_sum / n_obs; }
    bool boxes_ok() const {
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (lo[i] > hi[i]) return false;
        return true;
    }
};

struct ArmPair {
    ArmBoxes arm1;  // free cells: Y(1) of control rows
    ArmBoxes arm0;  // free cells: Y(0) of treated rows
};

ArmPair build_arm_boxes(const ObservedData& data, const RestrictionSet& r) {
    if (data.degenerate()) throw std::invalid_argument("bounds: degenerate treatment arm");
    ArmPair p;
    const double gmin = data.global_y_min();
    const double gmax = data.global_y_max();
    double cap1_lo = 0.0, cap1_hi = 0.0, cap0_lo = 0.0, cap0_hi = 0.0;
    if (r.kind == RestrictionSet::Kind::variance_cap) {
        if (r.m < 0.0) throw std::invalid_argument("bounds: variance cap must be nonnegative");
        double half1 = 2.0 * std::sqrt(static_cast<double>(data.n1) * r.m);
        double half0 = 2.0 * std::sqrt(static_cast<double>(data.n0) * r.m);
        cap1_lo = data.mean_treated() - half1;
        cap1_hi = data.mean_treated() + half1;
        cap0_lo = data.mean_control() - half0;
        cap0_hi = data.mean_control() + half0;
    }
    for (int i = 0; i < data.n(); ++i) {
        double lo = data.y_min[i], hi = data.y_max[i];
        switch (r.kind) {
            case RestrictionSet::Kind::uniform_bounds:
                lo = gmin;
                hi = gmax;
                break;
            case RestrictionSet::Kind::unit_bounds:
            case RestrictionSet::Kind::bounded_total_effect:
                break;
            case RestrictionSet::Kind::bounded_unit_effect:
                lo = std::max(lo, data.y[i] - r.m);
                hi = std::min(hi, data.y[i] + r.m);
                break;
            case RestrictionSet::Kind::variance_cap:
                if (data.x[i] == 1) {  // free cell belongs to arm 0
                    lo = std::max(lo, cap0_lo);
                    hi = std::min(hi, cap0_hi);
                } else {
                    lo = std::max(lo, cap1_lo);
                    hi = std::min(hi, cap1_hi);
                }
                break;
        }
        if (data.x[i] == 1) {
            p.arm1.obs_sum += data.y[i];
            p.arm1.n_obs += 1;
            p.arm0.lo.push_back(lo);
            p.arm0.hi.push_back(hi);
        } else {
            p.arm0.obs_sum += data.y[i];
            p.arm0.n_obs += 1;
            p.arm1.lo.push_back(lo);
            p.arm1.hi.push_back(hi);
        }
    }
    return p;
}

// Range of achievable free-cell sums under the K-band on the mean of the
// free cells. Any value between the clipped extremes is attainable because
// the feasible set is a box sliced by parallel hyperplanes.
bool free_sum_range(const ArmBoxes& arm, double k, double* out_lo, double* out_hi) {
    if (!arm.boxes_ok()) return false;
    const double f = static_cast<double>(arm.lo.size());
    double sum_lo = 0.0, sum_hi = 0.0;
    for (std::size_t i = 0; i < arm.lo.size(); ++i) {
        sum_lo += arm.lo[i];
        sum_hi += arm.hi[i];
    }
    const double m = arm.obs_mean();
    double band_lo = std::isinf(k) ? -k_infinity : f * (m - k);
    double band_hi = std::isinf(k) ? k_infinity : f * (m + k);
    double lo = std::max(sum_lo, band_lo);
    double hi = std::min(sum_hi, band_hi);
    if (lo > hi + 1e-12 * (1.0 + std::fabs(hi))) return false;
    *out_lo = std::min(lo, hi);
    *out_hi = hi;
    return true;
}

Interval interval_from_arms(const ObservedData& data, const ArmPair& p, double k) {
    double su_lo, su_hi, sv_lo, sv_hi;
    if (!free_sum_range(p.arm1, k, &su_lo, &su_hi)) return Interval::make_empty();
    if (!free_sum_range(p.arm0, k, &sv_lo, &sv_hi)) return Interval::make_empty();
    const double n = data.n();
    Interval out;
    out.lo = (p.arm1.obs_sum + su_lo - p.arm0.obs_sum - sv_hi) / n;
    out.hi = (p.arm1.obs_sum + su_hi - p.arm0.obs_sum - sv_lo) / n;
    return out;
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex on the standard form min c'z s.t. Az <= b, z >= 0.
// Only used for the restriction kind whose constraints couple the two arms.
// ---------------------------------------------------------------------------
struct LpResult {
    bool feasible = false;
    bool bounded = true;
    double value = 0.0;
};

LpResult simplex_min(const std::vector<double>& c, const Matrix& a, const std::vector<double>& b) {
    const std::size_t m = a.rows;
    const std::size_t nv = a.cols;
    const double tol = 1e-9;

    // Columns: structural (nv) + slack (m) + artificial (as needed) + rhs.
    std::size_t n_art = 0;
    for (std::size_t i = 0; i < m; ++i)
        if (b[i] < 0.0) ++n_art;
    const std::size_t total = nv + m + n_art;
    Matrix t(m + 1, total + 1);
    std::vector<int> basis(m);

    std::size_t art = nv + m;
    for (std::size_t i = 0; i < m; ++i) {
        double sign = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < nv; ++j) t(i, j) = sign * a(i, j);
        t(i, nv + i) = sign;  // slack
        t(i, total) = sign * b[i];
        if (b[i] < 0.0) {
            t(i, art) = 1.0;
            basis[i] = static_cast<int>(art);
            ++art;
        } else {
            basis[i] = static_cast<int>(nv + i);
        }
    }

    auto pivot = [&](std::size_t pr, std::size_t pc) {
        double pv = t(pr, pc);
        for (std::size_t j = 0; j <= total; ++j) t(pr, j) /= pv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == pr) continue;
            double f = t(i, pc);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j <= total; ++j) t(i, j) -= f * t(pr, j);
        }
        basis[pr] = static_cast<int>(pc);
    };

    auto run = [&](std::size_t ncols) -> bool {  // returns false when unbounded
        for (long iter = 0; iter < 50000; ++iter) {
            // Bland's rule: first improving column.
            std::size_t pc = total;
            for (std::size_t j = 0; j < ncols; ++j) {
                if (t(m, j) < -tol) {
                    pc = j;
                    break;
                }
            }
            if (pc == total) return true;
            std::size_t pr = m;
            double best = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                if (t(i, pc) > tol) {
                    double ratio = t(i, total) / t(i, pc);
                    if (pr == m || ratio < best - 1e-15 ||
                        (std::fabs(ratio - best) <= 1e-15 && basis[i] < basis[pr])) {
                        pr = i;
                        best = ratio;
                    }
                }
            }
            if (pr == m) return false;
            pivot(pr, pc);
        }
        return true;
    };

    LpResult res;
    if (n_art > 0) {
        // Phase 1: minimize the sum of artificials.
        for (std::size_t j = 0; j <= total; ++j) t(m, j) = 0.0;
        for (std::size_t j = nv + m; j < total; ++j) t(m, j) = 1.0;
        for (std::size_t i = 0; i < m; ++i)
            if (basis[i] >= static_cast<int>(nv + m))
                for (std::size_t j = 0; j <= total; ++j) t(m, j) -= t(i, j);
        run(total);
        if (t(m, total) < -1e-7) return res;  // artificials remain positive
        // Drive any artificial still in the basis out of it.
        for (std::size_t i = 0; i < m; ++i) {
            if (basis[i] >= static_cast<int>(nv + m)) {
                for (std::size_t j = 0; j < nv + m; ++j) {
                    if (std::fabs(t(i, j)) > tol) {
                        pivot(i, j);
                        break;
                    }
                }
            }
        }
    }

    // Phase 2 objective.
    for (std::size_t j = 0; j <= total; ++j) t(m, j) = 0.0;
    for (std::size_t j = 0; j < nv; ++j) t(m, j) = c[j];
    for (std::size_t j = nv + m; j < total; ++j) t(m, j) = 1e30;  // keep artificials out
    for (std::size_t i = 0; i < m; ++i) {
        int bj = basis[i];
        double cb = bj < static_cast<int>(nv) ? c[static_cast<std::size_t>(bj)]
                    : bj >= static_cast<int>(nv + m) ? 1e30
                                                     : 0.0;
        if (cb != 0.0)
            for (std::size_t j = 0; j <= total; ++j) t(m, j) -= cb * t(i, j);
    }
    res.feasible = true;
    res.bounded = run(nv + m);
    res.value = -t(m, total);
    return res;
}

// Bounds under the total-effect budget. Works on unit effects directly:
// boxes on e_i from the outcome boxes, group-sum bands from the balance
// constraint, and the coupling row sum_i |e_i| <= M.
Interval total_effect_bounds(const ObservedData& data, double k, double budget) {
    const int n = data.n();
    ArmPair arms = build_arm_boxes(data, RestrictionSet::unit_bounds());
    std::vector<double> e_lo(n), e_hi(n);
    {
        std::size_t i1 = 0, i0 = 0;
        for (int i = 0; i < n; ++i) {
            if (data.x[i] == 1) {
                e_lo[i] = data.y[i] - arms.arm0.hi[i0];
                e_hi[i] = data.y[i] - arms.arm0.lo[i0];
                ++i0;
            } else {
                e_lo[i] = arms.arm1.lo[i1] - data.y[i];
                e_hi[i] = arms.arm1.hi[i1] - data.y[i];
                ++i1;
            }
        }
    }

    // Variables z = (e - e_lo, t); all rows as Az <= b.
    const std::size_t nv = 2 * static_cast<std::size_t>(n);
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    auto add_row = [&](const std::vector<double>& r, double v) {
        rows.push_back(r);
        rhs.push_back(v);
    };
    for (int i = 0; i < n; ++i) {  // e_i <= e_hi[i]
        std::vector<double> r(nv, 0.0);
        r[static_cast<std::size_t>(i)] = 1.0;
        add_row(r, e_hi[i] - e_lo[i]);
    }
    for (int i = 0; i < n; ++i) {  // t_i >= +-e_i
        std::vector<double> r1(nv, 0.0), r2(nv, 0.0);
        r1[static_cast<std::size_t>(i)] = 1.0;
        r1[static_cast<std::size_t>(n + i)] = -1.0;
        add_row(r1, -e_lo[i]);
        r2[static_cast<std::size_t>(i)] = -1.0;
        r2[static_cast<std::size_t>(n + i)] = -1.0;
        add_row(r2, e_lo[i]);
    }
    {
        std::vector<double> r(nv, 0.0);
        for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(n + i)] = 1.0;
        add_row(r, budget);
    }
    if (!std::isinf(k)) {
        // Balance bands expressed through within-group effect sums.
        double m1 = data.mean_treated(), m0 = data.mean_control();
        double sum_ty = m1 * data.n1, sum_cy = m0 * data.n0;
        std::vector<double> rt(nv, 0.0), rc(nv, 0.0);
        double base_t = 0.0, base_c = 0.0;
        for (int i = 0; i < n; ++i) {
            if (data.x[i] == 1) {
                rt[static_cast<std::size_t>(i)] = 1.0;
                base_t += e_lo[i];
            } else {
                rc[static_cast<std::size_t>(i)] = 1.0;
                base_c += e_lo[i];
            }
        }
        double t_hi = sum_ty - data.n1 * (m0 - k) - base_t;
        double t_lo = sum_ty - data.n1 * (m0 + k) - base_t;
        double c_hi = data.n0 * (m1 + k) - sum_cy - base_c;
        double c_lo = data.n0 * (m1 - k) - sum_cy - base_c;
        add_row(rt, t_hi);
        auto neg = [&](const std::vector<double>& r) {
            std::vector<double> o(r);
            for (auto& v : o) v = -v;
            return o;
        };
        add_row(neg(rt), -t_lo);
        add_row(rc, c_hi);
        add_row(neg(rc), -c_lo);
    }

    Matrix a(rows.size(), nv);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < nv; ++j) a(i, j) = rows[i][j];

    double base = 0.0;
    for (int i = 0; i < n; ++i) base += e_lo[i];
    std::vector<double> c_max(nv, 0.0), c_min(nv, 0.0);
    for (int i = 0; i < n; ++i) {
        c_max[static_cast<std::size_t>(i)] = -1.0;  // min -sum(e) == max sum(e)
        c_min[static_cast<std::size_t>(i)] = 1.0;
    }
    LpResult up = simplex_min(c_max, a, rhs);
    if (!up.feasible) return Interval::make_empty();
    LpResult dn = simplex_min(c_min, a, rhs);
    Interval out;
    out.hi = (-up.value + base) / n;
    out.lo = (dn.value + base) / n;
    return out;
}

}  // namespace

FreeCellBoxes free_cell_boxes(const ObservedData& data, const RestrictionSet& r) {
    if (r.kind == RestrictionSet::Kind::bounded_total_effect)
        throw std::invalid_argument(
            "free_cell_boxes: the total-effect budget couples cells and has no box form");
    ArmPair arms = build_arm_boxes(data, r);
    FreeCellBoxes out;
    out.lo1 = arms.arm1.lo;
    out.hi1 = arms.arm1.hi;
    out.lo0 = arms.arm0.lo;
    out.hi0 = arms.arm0.hi;
    out.ok = arms.arm1.boxes_ok() && arms.arm0.boxes_ok();
    return out;
}

Interval manski_bounds(const ObservedData& data, double k) {
    if (k < 0.0) throw std::invalid_argument("manski_bounds: K must be nonnegative");
    if (data.degenerate()) throw std::invalid_argument("manski_bounds: degenerate treatment arm");
    const double n = data.n();
    const double n1 = data.n1, n0 = data.n0;
    const double ymin = data.global_y_min();
    const double ymax = data.global_y_max();
    const double m1 = data.mean_treated();
    const double m0 = data.mean_control();
    auto lb = [&](double mx, double nx, double nother) {
        double fill = std::isinf(k) ? ymin : std::max(ymin, mx - k);
        return mx * nx / n + fill * nother / n;
    };
    auto ub = [&](double mx, double nx, double nother) {
        double fill = std::isinf(k) ? ymax : std::min(ymax, mx + k);
        return mx * nx / n + fill * nother / n;
    };
    Interval out;
    out.lo = lb(m1, n1, n0) - ub(m0, n0, n1);
    out.hi = ub(m1, n1, n0) - lb(m0, n0, n1);
    return out;
}

Interval lp_bounds(const ObservedData& data, double k, const RestrictionSet& r) {
    if (k < 0.0) throw std::invalid_argument("lp_bounds: K must be nonnegative");
    if (r.kind == RestrictionSet::Kind::bounded_total_effect) {
        if (r.m < 0.0) throw std::invalid_argument("lp_bounds: effect budget must be nonnegative");
        return total_effect_bounds(data, k, r.m);
    }
    ArmPair arms = build_arm_boxes(data, r);
    return interval_from_arms(data, arms, k);
}

Interval domain_of_consensus(const ObservedData& data) {
    return lp_bounds(data, k_infinity, RestrictionSet::unit_bounds());
}

double breakdown_point(const ObservedData& data, const RestrictionSet& r) {
    const double ate = data.ate_hat();
    if (ate == 0.0) return 0.0;
    auto contains_zero = [&](double k) {
        Interval iv = lp_bounds(data, k, r);
        return !iv.empty && iv.lo <= 0.0 && iv.hi >= 0.0;
    };
    if (contains_zero(0.0)) return 0.0;
    double hi = data.spread();
    if (!contains_zero(hi)) {
        Interval inf_set = lp_bounds(data, k_infinity, r);
        if (!inf_set.empty && inf_set.lo <= 0.0 && inf_set.hi >= 0.0) {
            // Zero only enters past the grid span; widen the bracket.
            while (!contains_zero(hi)) hi *= 2.0;
        } else {
            return k_infinity;  // the sign is identified even with no balance restriction
        }
    }
    double lo = 0.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (contains_zero(mid))
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

std::vector<double> build_k_grid(const ObservedData& data, const KGridSpec& spec,
                                 double k_breakdown) {
    if (spec.count < 2) throw std::invalid_argument("build_k_grid: need at least 2 points");
    double kmax = spec.k_max > 0.0 ? spec.k_max : data.spread();
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(spec.count) + 1);
    for (int i = 0; i < spec.count; ++i)
        grid.push_back(kmax * static_cast<double>(i) / (spec.count - 1));
    if (std::isfinite(k_breakdown) && k_breakdown > 0.0 && k_breakdown < kmax)
        grid.push_back(k_breakdown);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

BoundsCurve bounds_curve(const ObservedData& data, const KGridSpec& grid,
                         const RestrictionSet& r) {
    BoundsCurve curve;
    curve.ate_hat = data.ate_hat();
    curve.breakdown = breakdown_point(data, r);
    curve.k_grid = build_k_grid(data, grid, curve.breakdown);
    curve.intervals.reserve(curve.k_grid.size());
    for (double k : curve.k_grid) curve.intervals.push_back(lp_bounds(data, k, r));
    {
        ArmPair arms = build_arm_boxes(data, r);
        auto sat = [](const ArmBoxes& a) {
            double sl = 0.0, sh = 0.0;
            for (std::size_t i = 0; i < a.lo.size(); ++i) {
                sl += a.lo[i];
                sh += a.hi[i];
            }
            double f = static_cast<double>(a.lo.size());
            return std::max(a.obs_mean() - sl / f, sh / f - a.obs_mean());
        };
        curve.k_bar = std::max(sat(arms.arm1), sat(arms.arm0));
    }
    return curve;
}

Interval survey_bounds(const ObservedData& sampled, double k, int pop_size) {
    const int n = sampled.n();
    if (n == 0) throw std::invalid_argument("survey_bounds: no sampled units");
    if (pop_size < n) throw std::invalid_argument("survey_bounds: pop_size smaller than sample");
    double mean = vec_mean(sampled.y);
    if (pop_size == n) return {mean, mean, false};
    const double ymin = sampled.global_y_min();
    const double ymax = sampled.global_y_max();
    const double miss = pop_size - n;
    double fill_lo = std::isinf(k) ? ymin : std::max(ymin, mean - k);
    double fill_hi = std::isinf(k) ? ymax : std::min(ymax, mean + k);
    if (fill_lo > fill_hi) return Interval::make_empty();
    Interval out;
    out.lo = (mean * n + fill_lo * miss) / pop_size;
    out.hi = (mean * n + fill_hi * miss) / pop_size;
    return out;
}

std::string BoundsCurve::to_csv() const {
    std::ostringstream os;
    os << "k,lb,ub\n";
    char buf[96];
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", k_grid[i], intervals[i].lo,
                      intervals[i].hi);
        os << buf;
    }
    return os.str();
}

std::string BoundsCurve::summary_json() const {
    nlohmann::json j;
    j["ate_hat"] = ate_hat;
    if (std::isfinite(breakdown))
        j["k_bp"] = breakdown;
    else
        j["k_bp"] = "inf";
    j["k_bar"] = k_bar;
    return j.dump(2);
}

}  // namespace dbsa
