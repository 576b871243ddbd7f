#include "dbsa/comparators.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dbsa {

std::string method_name(CiMethod m) {
    switch (m) {
        case CiMethod::neyman: return "neyman";
        case CiMethod::fisher: return "fisher";
        case CiMethod::hoeffding: return "hoeffding";
        case CiMethod::dbsa: return "dbsa";
    }
    return "?";
}

CiResult neyman_ci(const ObservedData& data, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("neyman_ci: alpha must be in (0,1)");
    if (data.degenerate()) throw std::invalid_argument("neyman_ci: degenerate treatment arm");
    CiResult res;
    res.method = CiMethod::neyman;
    res.alpha = alpha;
    double m1 = data.mean_treated(), m0 = data.mean_control();
    auto group_var = [&](int arm, double mean, int count) {
        if (count < 2) {
            res.degenerate_variance = true;
            return 0.0;
        }
        double s = 0.0;
        for (int i = 0; i < data.n(); ++i)
            if (data.x[i] == arm) s += (data.y[i] - mean) * (data.y[i] - mean);
        return s / (count - 1);
    };
    double v = group_var(1, m1, data.n1) / data.n1 + group_var(0, m0, data.n0) / data.n0;
    res.variance_estimate = v;
    double half = normal_quantile(1.0 - alpha / 2.0) * std::sqrt(v);
    res.interval = {m1 - m0 - half, m1 - m0 + half, false};
    if (v == 0.0) res.degenerate_variance = true;
    return res;
}

CiResult fisher_ci(const ObservedData& data, double alpha, const AssignmentBatch& batch,
                   double c_step) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("fisher_ci: alpha must be in (0,1)");
    if (batch.n != data.n())
        throw std::invalid_argument("fisher_ci: batch size disagrees with data");
    const double ymin = data.global_y_min();
    const double ymax = data.global_y_max();
    if (c_step <= 0.0) c_step = (ymax - ymin) / 400.0;
    const double c_lo = ymin - ymax;
    const double c_hi = ymax - ymin;

    // Per-assignment sufficient statistics; each (c, assignment) pair is then O(1).
    const int b = batch.size;
    const int n1 = batch.n1;
    const int n0 = batch.n - batch.n1;
    std::vector<double> s_y(b, 0.0), s_x(b, 0.0);
    for (int j = 0; j < b; ++j) {
        for (std::uint32_t i : batch.row(j)) {
            s_y[j] += data.y[i];
            s_x[j] += data.x[i];
        }
    }
    double total_y = 0.0, total_x = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        total_y += data.y[i];
        total_x += data.x[i];
    }
    const double ate = data.ate_hat();

    CiResult res;
    res.method = CiMethod::fisher;
    res.alpha = alpha;
    bool any = false;
    double lo = 0.0, hi = 0.0;
    for (double c = c_lo; c <= c_hi + 1e-12; c += c_step) {
        double t_obs = std::fabs(ate - c);
        int greater = 0;
        for (int j = 0; j < b; ++j) {
            // Sharp-null imputation: Y_i(1) = Y_i + c(1-X_i), Y_i(0) = Y_i - c X_i.
            double in_sum = s_y[j] + c * (n1 - s_x[j]);
            double out_sum = (total_y - s_y[j]) - c * (total_x - s_x[j]);
            double t_new = std::fabs(in_sum / n1 - out_sum / n0 - c);
            if (t_new > t_obs) ++greater;
        }
        double pval = static_cast<double>(greater) / b;
        if (pval > alpha) {
            if (!any) {
                lo = c;
                any = true;
            }
            hi = c;
        }
    }
    if (!any)
        res.interval = Interval::make_empty();
    else
        res.interval = {lo, hi, false};
    return res;
}

CiResult hoeffding_ci(const ObservedData& data, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("hoeffding_ci: alpha must be in (0,1)");
    if (data.n1 != data.n0)
        throw std::invalid_argument(
            "hoeffding_ci: requires equal arm sizes (per-unit treatment probability 1/2)");
    const double n = data.n();
    double center = 0.0;
    for (int i = 0; i < data.n(); ++i) center += 2.0 * (2.0 * data.x[i] - 1.0) * data.y[i];
    center /= n;
    double width = 4.0 * (data.global_y_max() - data.global_y_min()) *
                   std::sqrt(std::log(4.0 / alpha) / (2.0 * n));
    CiResult res;
    res.method = CiMethod::hoeffding;
    res.alpha = alpha;
    res.interval = {center - width, center + width, false};
    return res;
}

DbsaIntervals dbsa_intervals(const ObservedData& data, const AssignmentBatch& batch,
                             const std::vector<double>& alphas, const CoverageOptions& options) {
    DbsaIntervals out;
    out.bounds = bounds_curve(data, options.k_grid);
    CompletionProblem problem;
    problem.data = data;
    problem.batch = batch;
    if (options.inner == InnerSolver::brute) {
        out.worst = pbar_curve_brute(problem, out.bounds.k_grid, options.brute_points_per_cell);
    } else {
        SolverConfig cfg = options.solver;
        out.worst = pbar_curve(problem, out.bounds.k_grid, cfg);
    }
    out.sets = calibrated_sets(out.bounds, out.worst, alphas);
    return out;
}

double CoverageReport::coverage(CiMethod m, double alpha) const {
    for (const auto& c : cells)
        if (c.method == m && std::fabs(c.alpha - alpha) < 1e-12) return c.coverage;
    throw std::out_of_range("CoverageReport: no such cell");
}

std::string CoverageReport::to_csv() const {
    std::ostringstream os;
    os << "method,alpha,coverage\n";
    char buf[96];
    for (const auto& c : cells) {
        std::snprintf(buf, sizeof(buf), "%s,%.12g,%.12g\n", method_name(c.method).c_str(),
                      c.alpha, c.coverage);
        os << buf;
    }
    return os.str();
}

std::string CoverageReport::to_json() const {
    nlohmann::json j;
    j["n_assignments"] = n_assignments;
    j["truth"] = truth;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& c : cells)
        arr.push_back({{"method", method_name(c.method)},
                       {"alpha", c.alpha},
                       {"coverage", c.coverage}});
    j["cells"] = arr;
    return j.dump(2);
}

CoverageReport exact_coverage(const Population& pop, const DesignSpec& design,
                              const CoverageOptions& options) {
    pop.validate();
    if (design.source != AssignmentSource::exhaustive)
        throw std::invalid_argument("exact_coverage: requires an exhaustive design");
    if (options.methods.empty()) throw std::invalid_argument("exact_coverage: no methods given");
    if (options.alphas.empty()) throw std::invalid_argument("exact_coverage: no alphas given");
    AssignmentBatch batch = enumerate_assignments(design);
    const int b = batch.size;

    CoverageReport report;
    report.n_assignments = b;
    report.truth = pop.ate();
    const double truth = report.truth;

    // Group assignments whose observations coincide up to a unit
    // relabeling. The exhaustive design is invariant under relabeling, so
    // every interval below is too (the GA path only up to restart noise),
    // and some science tables collapse to a handful of distinct datasets.
    std::map<std::string, int> first_of;
    std::vector<int> rep(b);
    for (int j = 0; j < b; ++j) {
        std::vector<std::array<double, 3>> treated, control;
        std::vector<char> xv(batch.n, 0);
        for (std::uint32_t i : batch.row(j)) xv[i] = 1;
        for (int i = 0; i < batch.n; ++i) {
            std::array<double, 3> row{xv[i] ? pop.y1[i] : pop.y0[i], pop.y_min[i], pop.y_max[i]};
            (xv[i] ? treated : control).push_back(row);
        }
        std::sort(treated.begin(), treated.end());
        std::sort(control.begin(), control.end());
        std::string obs;
        obs.reserve((treated.size() + control.size()) * 3 * sizeof(double));
        for (const auto& r : treated)
            obs.append(reinterpret_cast<const char*>(r.data()), 3 * sizeof(double));
        for (const auto& r : control)
            obs.append(reinterpret_cast<const char*>(r.data()), 3 * sizeof(double));
        auto it = first_of.find(obs);
        if (it == first_of.end()) {
            first_of[obs] = j;
            rep[j] = j;
        } else {
            rep[j] = it->second;
        }
    }

    const std::size_t n_methods = options.methods.size();
    const std::size_t n_alphas = options.alphas.size();
    std::vector<std::uint8_t> covers(static_cast<std::size_t>(b) * n_methods * n_alphas, 0);
    auto cover_at = [&](int j, std::size_t mi, std::size_t ai) -> std::uint8_t& {
        return covers[(static_cast<std::size_t>(j) * n_methods + mi) * n_alphas + ai];
    };

    std::vector<int> distinct;
    for (int j = 0; j < b; ++j)
        if (rep[j] == j) distinct.push_back(j);

    parallel_for(distinct.size(), options.threads, [&](std::size_t di) {
        int j = distinct[di];
        ObservedData data;
        data.ids.resize(batch.n);
        data.y.resize(batch.n);
        data.x.assign(batch.n, 0);
        for (std::uint32_t i : batch.row(j)) data.x[i] = 1;
        for (int i = 0; i < batch.n; ++i) {
            data.ids[i] = i;
            data.y[i] = data.x[i] ? pop.y1[i] : pop.y0[i];
        }
        data.y_min = pop.y_min;
        data.y_max = pop.y_max;
        data.n1 = batch.n1;
        data.n0 = batch.n - batch.n1;

        for (std::size_t mi = 0; mi < n_methods; ++mi) {
            CiMethod m = options.methods[mi];
            try {
                if (m == CiMethod::dbsa) {
                    DbsaIntervals res = dbsa_intervals(data, batch, options.alphas, options);
                    for (std::size_t ai = 0; ai < n_alphas; ++ai)
                        cover_at(j, mi, ai) = res.sets[ai].set.contains(truth) ? 1 : 0;
                } else {
                    for (std::size_t ai = 0; ai < n_alphas; ++ai) {
                        CiResult ci;
                        if (m == CiMethod::neyman)
                            ci = neyman_ci(data, options.alphas[ai]);
                        else if (m == CiMethod::fisher)
                            ci = fisher_ci(data, options.alphas[ai], batch);
                        else
                            ci = hoeffding_ci(data, options.alphas[ai]);
                        cover_at(j, mi, ai) = ci.interval.contains(truth) ? 1 : 0;
                    }
                }
            } catch (const std::exception&) {
                for (std::size_t ai = 0; ai < n_alphas; ++ai) cover_at(j, mi, ai) = 0;
            }
        }
    });

    // Copy representative results onto duplicate datasets, then tally.
    for (int j = 0; j < b; ++j) {
        if (rep[j] == j) continue;
        for (std::size_t mi = 0; mi < n_methods; ++mi)
            for (std::size_t ai = 0; ai < n_alphas; ++ai)
                cover_at(j, mi, ai) = cover_at(rep[j], mi, ai);
    }
    for (std::size_t mi = 0; mi < n_methods; ++mi) {
        for (std::size_t ai = 0; ai < n_alphas; ++ai) {
            long hits = 0;
            for (int j = 0; j < b; ++j) hits += cover_at(j, mi, ai);
            report.cells.push_back(
                {options.methods[mi], options.alphas[ai], static_cast<double>(hits) / b});
        }
    }
    return report;
}

}  // namespace dbsa
