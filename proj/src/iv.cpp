#include "dbsa/iv.hpp"

#include <cmath>
#include <stdexcept>

namespace dbsa {

namespace {

ObservedData iv_completion_data(const IvData& data) {
    ObservedData d;
    d.y = data.y;
    d.x = data.x;
    d.y_min = data.y_min;
    d.y_max = data.y_max;
    d.ids.resize(data.y.size());
    for (std::size_t i = 0; i < d.ids.size(); ++i) d.ids[i] = static_cast<int>(i);
    d.n1 = 0;
    for (int v : d.x) d.n1 += v;
    d.n0 = d.n() - d.n1;
    return d;
}

}  // namespace

int IvData::n_instrument_on() const {
    int c = 0;
    for (int v : z) c += v;
    return c;
}

double IvData::mean_y(int z_value) const {
    double s = 0.0;
    int c = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (z[i] == z_value) {
            s += y[i];
            ++c;
        }
    if (c == 0) throw std::domain_error("IvData: empty instrument group");
    return s / c;
}

double IvData::mean_x(int z_value) const {
    double s = 0.0;
    int c = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (z[i] == z_value) {
            s += x[i];
            ++c;
        }
    if (c == 0) throw std::domain_error("IvData: empty instrument group");
    return s / c;
}

double IvData::first_stage() const { return mean_x(1) - mean_x(0); }

bool IvData::one_sided() const {
    for (std::size_t i = 0; i < y.size(); ++i)
        if (z[i] == 0 && x[i] == 1) return false;
    return true;
}

void IvData::validate() const {
    std::size_t n_sz = y.size();
    if (x.size() != n_sz || z.size() != n_sz || y_min.size() != n_sz || y_max.size() != n_sz)
        throw std::invalid_argument("IvData: vector lengths disagree");
    int zc = 0;
    for (std::size_t i = 0; i < n_sz; ++i) {
        if (x[i] != 0 && x[i] != 1) throw std::invalid_argument("IvData: x must be 0 or 1");
        if (z[i] != 0 && z[i] != 1) throw std::invalid_argument("IvData: z must be 0 or 1");
        if (!(y_min[i] < y_max[i]) || y[i] < y_min[i] || y[i] > y_max[i])
            throw std::invalid_argument("IvData: row " + std::to_string(i + 1) +
                                        ": y outside bounds");
        zc += z[i];
    }
    if (zc == 0 || zc == static_cast<int>(n_sz))
        throw std::invalid_argument("IvData: the instrument is constant");
}

double wald(const IvData& data) {
    data.validate();
    double pi = data.first_stage();
    if (pi == 0.0)
        throw std::invalid_argument("wald: relevance failure, the first stage is zero");
    return (data.mean_y(1) - data.mean_y(0)) / pi;
}

char IvPopulation::type(int i) const {
    if (x1[i] == 1 && x0[i] == 0) return 'c';
    if (x1[i] == 1 && x0[i] == 1) return 'a';
    if (x1[i] == 0 && x0[i] == 0) return 'n';
    return 'd';
}

void IvPopulation::validate() const {
    std::size_t n_sz = y1.size();
    if (y0.size() != n_sz || x1.size() != n_sz || x0.size() != n_sz || z.size() != n_sz)
        throw std::invalid_argument("IvPopulation: vector lengths disagree");
    for (int i = 0; i < n(); ++i)
        if (type(i) == 'd') throw std::invalid_argument("IvPopulation: defier present");
}

IvData IvPopulation::realize(double y_lo, double y_hi) const {
    validate();
    IvData d;
    for (int i = 0; i < n(); ++i) {
        int xi = z[i] == 1 ? x1[i] : x0[i];
        d.x.push_back(xi);
        d.z.push_back(z[i]);
        d.y.push_back(xi == 1 ? y1[i] : y0[i]);
        d.y_min.push_back(y_lo);
        d.y_max.push_back(y_hi);
    }
    return d;
}

double IvPopulation::latt() const {
    double s = 0.0;
    int c = 0;
    for (int i = 0; i < n(); ++i)
        if (type(i) == 'c' && z[i] == 1) {
            s += y1[i] - y0[i];
            ++c;
        }
    if (c == 0) throw std::domain_error("IvPopulation: no treated compliers");
    return s / c;
}

double IvPopulation::late() const {
    double s = 0.0;
    int c = 0;
    for (int i = 0; i < n(); ++i)
        if (type(i) == 'c') {
            s += y1[i] - y0[i];
            ++c;
        }
    if (c == 0) throw std::domain_error("IvPopulation: no compliers");
    return s / c;
}

WaldDecomposition wald_decomposition(const IvPopulation& pop) {
    pop.validate();
    int n1 = 0, n0 = 0;
    for (int v : pop.z) n1 += v;
    n0 = pop.n() - n1;
    if (n1 == 0 || n0 == 0) throw std::invalid_argument("wald_decomposition: constant instrument");

    double u_z1 = 0.0, u_z0 = 0.0;
    double ta_beta_z1 = 0.0, ta_beta_z0 = 0.0;  // sum-form T-bar(a) * beta-bar(a)
    double tc_beta_z1 = 0.0;
    double x_z1 = 0.0, x_z0 = 0.0;
    for (int i = 0; i < pop.n(); ++i) {
        double beta = pop.y1[i] - pop.y0[i];
        char t = pop.type(i);
        if (pop.z[i] == 1) {
            u_z1 += pop.y0[i];
            x_z1 += pop.x1[i];
            if (t == 'a') ta_beta_z1 += beta;
            if (t == 'c') tc_beta_z1 += beta;
        } else {
            u_z0 += pop.y0[i];
            x_z0 += pop.x0[i];
            if (t == 'a') ta_beta_z0 += beta;
        }
    }
    double pi = x_z1 / n1 - x_z0 / n0;
    if (pi == 0.0) throw std::invalid_argument("wald_decomposition: relevance failure");
    WaldDecomposition out;
    out.untreated_imbalance = (u_z1 / n1 - u_z0 / n0) / pi;
    out.always_taker_term = (ta_beta_z1 / n1 - ta_beta_z0 / n0) / pi;
    out.complier_term = (tc_beta_z1 / n1) / pi;
    return out;
}

Interval latt_bounds(const IvData& data, double k, bool intersect_outcome_bounds) {
    data.validate();
    if (k < 0.0) throw std::invalid_argument("latt_bounds: K must be nonnegative");
    if (!data.one_sided())
        throw std::invalid_argument(
            "latt_bounds: treated units in the instrument-off group; two-sided noncompliance "
            "is not supported");
    double pi = data.first_stage();
    if (pi <= 0.0)
        throw std::invalid_argument("latt_bounds: nonpositive first stage under one-sided "
                                    "noncompliance signals inconsistent data");
    double w = wald(data);
    double delta_lo = -k, delta_hi = k;
    if (intersect_outcome_bounds) {
        // Box-implied range of U-bar_{z=1} - U-bar_{z=0}: treated units'
        // Y(0) are unknown inside their boxes, everything else is observed.
        int n1 = data.n_instrument_on();
        int n0 = data.n() - n1;
        double s1_lo = 0.0, s1_hi = 0.0, s0 = 0.0;
        for (int i = 0; i < data.n(); ++i) {
            if (data.z[i] == 1) {
                if (data.x[i] == 1) {
                    s1_lo += data.y_min[i];
                    s1_hi += data.y_max[i];
                } else {
                    s1_lo += data.y[i];
                    s1_hi += data.y[i];
                }
            } else {
                s0 += data.y[i];
            }
        }
        delta_lo = std::max(delta_lo, s1_lo / n1 - s0 / n0);
        delta_hi = std::min(delta_hi, s1_hi / n1 - s0 / n0);
        if (delta_lo > delta_hi) return Interval::make_empty();
    }
    Interval out;
    out.lo = w - delta_hi / pi;
    out.hi = w - delta_lo / pi;
    return out;
}

namespace {

CompletionProblem iv_problem(const IvData& data, const DesignSpec& z_design) {
    data.validate();
    if (!data.one_sided())
        throw std::invalid_argument("iv_pbar_curve: two-sided noncompliance is not supported");
    if (z_design.n_units != data.n() ||
        z_design.n_treated_or_sampled != data.n_instrument_on())
        throw std::invalid_argument("iv_pbar_curve: design margins disagree with data");
    CompletionProblem problem;
    problem.data = iv_completion_data(data);
    problem.batch = make_batch(z_design);
    problem.single_arm = true;
    problem.single_arm_value = 0;
    return problem;
}

}  // namespace

WorstCaseCurve iv_pbar_curve(const IvData& data, const DesignSpec& z_design,
                             const std::vector<double>& k_grid, const SolverConfig& cfg) {
    return pbar_curve(iv_problem(data, z_design), k_grid, cfg);
}

WorstCaseCurve iv_pbar_curve_brute(const IvData& data, const DesignSpec& z_design,
                                   const std::vector<double>& k_grid, int points_per_cell) {
    return pbar_curve_brute(iv_problem(data, z_design), k_grid, points_per_cell);
}

}  // namespace dbsa
