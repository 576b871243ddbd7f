#include "dbsa/covariates.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dbsa {

namespace {

Matrix invert_spd(const Matrix& m) {
    const std::size_t p = m.rows;
    Matrix a = m;
    Matrix inv(p, p);
    for (std::size_t i = 0; i < p; ++i) inv(i, i) = 1.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < p; ++i) scale = std::max(scale, std::fabs(a(i, i)));
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::fabs(a(r, col)) > std::fabs(a(piv, col))) piv = r;
        if (std::fabs(a(piv, col)) < 1e-10 * std::max(1.0, scale))
            throw std::invalid_argument("CovariateModel: Q'Q is not invertible (ill-conditioned)");
        if (piv != col)
            for (std::size_t j = 0; j < p; ++j) {
                std::swap(a(col, j), a(piv, j));
                std::swap(inv(col, j), inv(piv, j));
            }
        double d = a(col, col);
        for (std::size_t j = 0; j < p; ++j) {
            a(col, j) /= d;
            inv(col, j) /= d;
        }
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double f = a(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < p; ++j) {
                a(r, j) -= f * a(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

// One arm's completion problem: fixed observed rows, free boxes, band center.
struct ArmContext {
    std::vector<int> free_rows;
    std::vector<double> base_y;  // observed values, zero at free rows
    std::vector<double> lo, hi;
    double m_obs = 0.0;

    int f() const { return static_cast<int>(free_rows.size()); }

    std::vector<double> assemble(std::span<const double> u) const {
        std::vector<double> y = base_y;
        for (std::size_t i = 0; i < free_rows.size(); ++i) y[free_rows[i]] = u[i];
        return y;
    }
};

ArmContext build_arm(const ObservedData& data, int arm) {
    ArmContext ctx;
    ctx.base_y.assign(data.n(), 0.0);
    double obs_sum = 0.0;
    int obs_n = 0;
    for (int i = 0; i < data.n(); ++i) {
        if (data.x[i] == arm) {
            ctx.base_y[i] = data.y[i];
            obs_sum += data.y[i];
            ++obs_n;
        } else {
            ctx.free_rows.push_back(i);
            ctx.lo.push_back(data.y_min[i]);
            ctx.hi.push_back(data.y_max[i]);
        }
    }
    if (obs_n == 0) throw std::invalid_argument("covariates: degenerate treatment arm");
    ctx.m_obs = obs_sum / obs_n;
    return ctx;
}

// Projection onto {u in box : sum(u) in [s_lo, s_hi]} via a scalar shift.
void project_box_slab(std::vector<double>& u, const std::vector<double>& lo,
                      const std::vector<double>& hi, double s_lo, double s_hi) {
    const std::size_t f = u.size();
    double sum = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
        u[i] = std::clamp(u[i], lo[i], hi[i]);
        sum += u[i];
    }
    if (sum >= s_lo && sum <= s_hi) return;
    double target = sum < s_lo ? s_lo : s_hi;
    double nu_lo = 0.0, nu_hi = 0.0;
    for (std::size_t i = 0; i < f; ++i) {
        nu_lo = std::min(nu_lo, lo[i] - u[i]);
        nu_hi = std::max(nu_hi, hi[i] - u[i]);
    }
    std::vector<double> base = u;
    for (int it = 0; it < 120; ++it) {
        double nu = 0.5 * (nu_lo + nu_hi);
        double s = 0.0;
        for (std::size_t i = 0; i < f; ++i) s += std::clamp(base[i] + nu, lo[i], hi[i]);
        if (s < target)
            nu_lo = nu;
        else
            nu_hi = nu;
    }
    double nu = 0.5 * (nu_lo + nu_hi);
    for (std::size_t i = 0; i < f; ++i) u[i] = std::clamp(base[i] + nu, lo[i], hi[i]);
}

// FISTA on the residual sum of squares over box-with-sum-slab. The smooth
// part has Lipschitz constant at most 2 because I - H is a projection.
struct ResidualMin {
    double value = 0.0;
    std::vector<double> u;
};

ResidualMin minimize_residual(const CovariateModel& model, const ArmContext& ctx, double s_lo,
                              double s_hi, std::vector<double> u0, int max_iter = 10000) {
    const double step = 0.5;  // 1/L with L = 2
    project_box_slab(u0, ctx.lo, ctx.hi, s_lo, s_hi);
    std::vector<double> u = u0, u_prev = u0, z = u0;
    double t_mom = 1.0;
    double f_prev = -1.0;
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> y = ctx.assemble(z);
        std::vector<double> r = model.residuals(y);
        for (int i = 0; i < ctx.f(); ++i) z[i] -= step * 2.0 * r[ctx.free_rows[i]];
        project_box_slab(z, ctx.lo, ctx.hi, s_lo, s_hi);
        u_prev.swap(u);
        u = z;
        double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
        for (int i = 0; i < ctx.f(); ++i)
            z[i] = u[i] + ((t_mom - 1.0) / t_next) * (u[i] - u_prev[i]);
        t_mom = t_next;
        if (it % 32 == 31) {
            double f_cur = model.residual_sq(ctx.assemble(u));
            if (f_prev >= 0.0 && std::fabs(f_prev - f_cur) < 1e-14 * (1.0 + f_cur)) break;
            f_prev = f_cur;
        }
    }
    ResidualMin out;
    out.u = u;
    out.value = model.residual_sq(ctx.assemble(u));
    return out;
}

struct SumRange {
    double lo = 0.0, hi = 0.0;
    bool ok = false;
};

SumRange band_sum_range(const ArmContext& ctx, double k) {
    SumRange r;
    double sl = 0.0, sh = 0.0;
    for (int i = 0; i < ctx.f(); ++i) {
        sl += ctx.lo[i];
        sh += ctx.hi[i];
    }
    double f = ctx.f();
    r.lo = std::isinf(k) ? sl : std::max(sl, f * (ctx.m_obs - k));
    r.hi = std::isinf(k) ? sh : std::min(sh, f * (ctx.m_obs + k));
    r.ok = r.lo <= r.hi + 1e-12 * (1.0 + std::fabs(r.hi));
    if (r.ok && r.lo > r.hi) r.lo = r.hi;
    return r;
}

// Maximize (dir=+1) or minimize (dir=-1) the free-cell sum subject to box,
// band, and the residual budget. The sum is the objective, so we locate the
// extreme feasible sum by bisection on the convex value function
// sigma -> min residual_sq at fixed sum sigma.
QclpArmSolution solve_arm(const CovariateModel& model, const ArmContext& ctx, double k,
                          int dir, int restarts, std::uint64_t seed) {
    QclpArmSolution best;
    SumRange range = band_sum_range(ctx, k);
    if (!range.ok) return best;

    const double budget = model.lambda == 0.0 ? k_infinity : model.budget();
    std::vector<double> objectives;
    for (int rs = 0; rs < std::max(1, restarts); ++rs) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(rs), dir > 0 ? 1 : 2));
        std::vector<double> u0(ctx.f());
        for (int i = 0; i < ctx.f(); ++i)
            u0[i] = rs == 0 ? 0.5 * (ctx.lo[i] + ctx.hi[i]) : rng.uniform(ctx.lo[i], ctx.hi[i]);

        double target = dir > 0 ? range.hi : range.lo;
        QclpArmSolution sol;
        if (std::isinf(budget)) {
            sol.feasible = true;
            sol.objective = target;
            std::vector<double> u = u0;
            project_box_slab(u, ctx.lo, ctx.hi, target, target);
            sol.completion = u;
        } else {
            ResidualMin at_target = minimize_residual(model, ctx, target, target, u0);
            if (at_target.value <= budget + 1e-9) {
                sol.feasible = true;
                sol.objective = target;
                sol.completion = at_target.u;
                sol.cap_active = false;
            } else {
                ResidualMin anchor = minimize_residual(model, ctx, range.lo, range.hi, u0);
                if (anchor.value > budget + 1e-9) return QclpArmSolution{};  // falsified
                double s_feas = 0.0;
                for (double v : anchor.u) s_feas += v;
                double lo_s = dir > 0 ? s_feas : target;
                double hi_s = dir > 0 ? target : s_feas;
                std::vector<double> warm = anchor.u;
                std::vector<double> best_u = anchor.u;
                double best_s = s_feas;
                // Bisect toward the infeasible end; keep the feasible iterate.
                for (int it = 0; it < 60; ++it) {
                    double mid = 0.5 * (lo_s + hi_s);
                    ResidualMin rm = minimize_residual(model, ctx, mid, mid, warm, 3000);
                    warm = rm.u;
                    bool ok = rm.value <= budget + 1e-9;
                    if (ok) {
                        best_u = rm.u;
                        best_s = mid;
                    }
                    if (dir > 0) {
                        if (ok)
                            lo_s = mid;
                        else
                            hi_s = mid;
                    } else {
                        if (ok)
                            hi_s = mid;
                        else
                            lo_s = mid;
                    }
                }
                sol.feasible = true;
                sol.objective = best_s;
                sol.completion = best_u;
                sol.cap_active = true;
            }
        }
        if (sol.feasible) {
            objectives.push_back(sol.objective);
            bool better = !best.feasible || (dir > 0 ? sol.objective > best.objective
                                                     : sol.objective < best.objective);
            if (better) best = sol;
        }
        if (sol.feasible && !sol.cap_active) break;  // exact; restarts add nothing
    }
    if (best.feasible && objectives.size() > 1) {
        double mn = objectives[0], mx = objectives[0];
        for (double v : objectives) {
            mn = std::min(mn, v);
            mx = std::max(mx, v);
        }
        best.restart_spread = mx - mn;
    }
    return best;
}

}  // namespace

CovariateModel CovariateModel::build(const ObservedData& data, const Matrix& q, double lambda) {
    if (lambda < 0.0 || lambda > 1.0)
        throw std::invalid_argument("CovariateModel: lambda must be in [0,1]");
    if (q.rows != static_cast<std::size_t>(data.n()))
        throw std::invalid_argument("CovariateModel: Q row count disagrees with data");
    bool has_const = false;
    for (std::size_t j = 0; j < q.cols && !has_const; ++j) {
        bool constant = true;
        for (std::size_t i = 1; i < q.rows && constant; ++i)
            constant = q(i, j) == q(0, j);
        if (constant && q(0, j) != 0.0) has_const = true;
    }
    if (!has_const)
        throw std::invalid_argument("CovariateModel: Q must include a constant column");

    CovariateModel m;
    m.q = q;
    m.lambda = lambda;
    m.var_y = vec_var(data.y);
    Matrix qtq(q.cols, q.cols);
    for (std::size_t a = 0; a < q.cols; ++a)
        for (std::size_t b = 0; b < q.cols; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < q.rows; ++i) s += q(i, a) * q(i, b);
            qtq(a, b) = s;
        }
    m.qtq_inv = invert_spd(qtq);
    return m;
}

std::vector<double> CovariateModel::coefficients(std::span<const double> y) const {
    std::vector<double> qty(q.cols, 0.0);
    for (std::size_t j = 0; j < q.cols; ++j)
        for (std::size_t i = 0; i < q.rows; ++i) qty[j] += q(i, j) * y[i];
    std::vector<double> beta(q.cols, 0.0);
    for (std::size_t a = 0; a < q.cols; ++a)
        for (std::size_t b = 0; b < q.cols; ++b) beta[a] += qtq_inv(a, b) * qty[b];
    return beta;
}

std::vector<double> CovariateModel::fitted(std::span<const double> y) const {
    std::vector<double> beta = coefficients(y);
    std::vector<double> out(q.rows, 0.0);
    for (std::size_t i = 0; i < q.rows; ++i)
        for (std::size_t j = 0; j < q.cols; ++j) out[i] += q(i, j) * beta[j];
    return out;
}

std::vector<double> CovariateModel::residuals(std::span<const double> y) const {
    std::vector<double> fit = fitted(y);
    std::vector<double> out(q.rows);
    for (std::size_t i = 0; i < q.rows; ++i) out[i] = y[i] - fit[i];
    return out;
}

double CovariateModel::residual_sq(std::span<const double> y) const {
    std::vector<double> r = residuals(y);
    double s = 0.0;
    for (double v : r) s += v * v;
    return s;
}

double CovariateModel::budget() const {
    return static_cast<double>(q.rows) * (1.0 - lambda) * var_y;
}

double CovariateModel::budget_for(std::span<const double> y_completed) const {
    double v = variance_source == VarianceSource::observed_outcomes ? var_y
                                                                    : vec_var(y_completed);
    return static_cast<double>(q.rows) * (1.0 - lambda) * v;
}

double r2_constraint_residual(std::span<const double> y_x, const CovariateModel& model) {
    return model.residual_sq(y_x) - model.budget_for(y_x);
}

double min_residual_sq(const ObservedData& data, const CovariateModel& model, int arm, double k) {
    ArmContext ctx = build_arm(data, arm);
    SumRange range = band_sum_range(ctx, k);
    if (!range.ok) return std::numeric_limits<double>::infinity();
    std::vector<double> u0(ctx.f());
    for (int i = 0; i < ctx.f(); ++i) u0[i] = 0.5 * (ctx.lo[i] + ctx.hi[i]);
    return minimize_residual(model, ctx, range.lo, range.hi, u0).value;
}

QclpResult qclp_solve(const ObservedData& data, const CovariateModel& model, double k) {
    if (k < 0.0) throw std::invalid_argument("qclp_solve: K must be nonnegative");
    ArmContext arm1 = build_arm(data, 1);
    ArmContext arm0 = build_arm(data, 0);
    const int restarts = 3;

    QclpArmSolution u_hi = solve_arm(model, arm1, k, +1, restarts, mix_seed(11, 1));
    QclpArmSolution u_lo = solve_arm(model, arm1, k, -1, restarts, mix_seed(11, 2));
    QclpArmSolution v_hi = solve_arm(model, arm0, k, +1, restarts, mix_seed(11, 3));
    QclpArmSolution v_lo = solve_arm(model, arm0, k, -1, restarts, mix_seed(11, 4));

    QclpResult out;
    if (!u_hi.feasible || !u_lo.feasible || !v_hi.feasible || !v_lo.feasible) {
        out.interval = Interval::make_empty();
        return out;
    }
    double s1 = data.mean_treated() * data.n1;
    double s0 = data.mean_control() * data.n0;
    const double n = data.n();
    out.interval.hi = (s1 + u_hi.objective - s0 - v_lo.objective) / n;
    out.interval.lo = (s1 + u_lo.objective - s0 - v_hi.objective) / n;
    out.y1_free_at_hi = u_hi.completion;
    out.y0_free_at_hi = v_lo.completion;
    out.y1_free_at_lo = u_lo.completion;
    out.y0_free_at_lo = v_hi.completion;
    return out;
}

Interval qclp_bounds(const ObservedData& data, const CovariateModel& model, double k) {
    return qclp_solve(data, model, k).interval;
}

double falsification_point(const ObservedData& data, const CovariateModel& model, double k) {
    double r1 = min_residual_sq(data, model, 1, k);
    double r0 = min_residual_sq(data, model, 0, k);
    double worst = std::max(r1, r0);
    if (std::isinf(worst)) return 0.0;  // K-band itself infeasible
    const double n = data.n();
    auto feasible = [&](double lam) {
        if (lam == 0.0) return true;
        return worst <= n * (1.0 - lam) * model.var_y + 1e-9;
    };
    if (feasible(1.0)) return 1.0;
    double lo = 0.0, hi = 1.0;
    while (hi - lo > 1e-3) {
        double mid = 0.5 * (lo + hi);
        if (feasible(mid))
            lo = mid;
        else
            hi = mid;
    }
    return lo;
}

}  // namespace dbsa
