#pragma once

// Independent test oracles: brute-force enumerations and direct formula
// evaluations kept deliberately separate from the library's code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dbsa/population.hpp"
#include "dbsa/util.hpp"

namespace oracle {

// All k-subsets of {0..n-1} via simple recursion.
inline std::vector<std::vector<int>> subsets(int n, int k) {
    std::vector<std::vector<int>> out;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int start) {
        if (static_cast<int>(cur.size()) == k) {
            out.push_back(cur);
            return;
        }
        for (int i = start; i < n; ++i) {
            cur.push_back(i);
            rec(i + 1);
            cur.pop_back();
        }
    };
    rec(0);
    return out;
}

inline double dim_oracle(const std::vector<double>& values, const std::vector<int>& treated_set,
                         int n) {
    double s_in = 0.0, s_all = 0.0;
    for (double v : values) s_all += v;
    for (int i : treated_set) s_in += values[i];
    int n1 = static_cast<int>(treated_set.size());
    return s_in / n1 - (s_all - s_in) / (n - n1);
}

// Exact balance probability by full enumeration.
inline double balance_prob_oracle(const std::vector<double>& y1, const std::vector<double>& y0,
                                  int n1, double k) {
    int n = static_cast<int>(y1.size());
    auto sets = subsets(n, n1);
    int count = 0;
    for (const auto& s : sets)
        if (std::fabs(dim_oracle(y1, s, n)) <= k && std::fabs(dim_oracle(y0, s, n)) <= k) ++count;
    return static_cast<double>(count) / sets.size();
}

// Grid completions of one arm: every combination of g values per free cell.
inline std::vector<std::vector<double>> grid_completions(const std::vector<double>& lo,
                                                         const std::vector<double>& hi, int g) {
    std::vector<std::vector<double>> out;
    int f = static_cast<int>(lo.size());
    std::vector<int> digit(f, 0);
    for (;;) {
        std::vector<double> u(f);
        for (int i = 0; i < f; ++i) u[i] = lo[i] + (hi[i] - lo[i]) * digit[i] / (g - 1);
        out.push_back(u);
        int pos = 0;
        while (pos < f && ++digit[pos] == g) digit[pos++] = 0;
        if (pos == f) break;
    }
    return out;
}

// Identified-set endpoints for ATE by grid fill: enumerate grid completions
// per arm, keep those whose arm imbalance obeys the K band, track the
// extreme achievable ATE.
struct GridBoundsResult {
    double lo = 0.0, hi = 0.0;
    bool feasible = false;
};

inline GridBoundsResult grid_fill_bounds(const dbsa::ObservedData& data, double k, int g) {
    std::vector<double> lo1, hi1, lo0, hi0;
    double s_treated = 0.0, s_control = 0.0;
    for (int i = 0; i < data.n(); ++i) {
        if (data.x[i] == 1) {
            s_treated += data.y[i];
            lo0.push_back(data.y_min[i]);
            hi0.push_back(data.y_max[i]);
        } else {
            s_control += data.y[i];
            lo1.push_back(data.y_min[i]);
            hi1.push_back(data.y_max[i]);
        }
    }
    double m1 = s_treated / data.n1;
    double m0 = s_control / data.n0;
    auto arm_sums = [&](const std::vector<double>& lo, const std::vector<double>& hi,
                        double m_obs) {
        std::vector<double> sums;
        for (const auto& u : grid_completions(lo, hi, g)) {
            double s = 0.0;
            for (double v : u) s += v;
            double mean = s / u.size();
            if (std::fabs(m_obs - mean) <= k + 1e-12) sums.push_back(s);
        }
        return sums;
    };
    std::vector<double> su = arm_sums(lo1, hi1, m1);
    std::vector<double> sv = arm_sums(lo0, hi0, m0);
    GridBoundsResult res;
    if (su.empty() || sv.empty()) return res;
    res.feasible = true;
    double su_lo = *std::min_element(su.begin(), su.end());
    double su_hi = *std::max_element(su.begin(), su.end());
    double sv_lo = *std::min_element(sv.begin(), sv.end());
    double sv_hi = *std::max_element(sv.begin(), sv.end());
    double n = data.n();
    res.lo = (s_treated + su_lo - s_control - sv_hi) / n;
    res.hi = (s_treated + su_hi - s_control - sv_lo) / n;
    return res;
}

// Worst-case joint balance probability over grid completions of both arms,
// evaluated exactly on the exhaustive design. Small N only.
inline std::vector<double> pbar_grid_oracle(const dbsa::ObservedData& data,
                                            const std::vector<double>& k_grid, int g) {
    int n = data.n();
    auto sets = subsets(n, data.n1);
    std::vector<double> lo1, hi1, lo0, hi0;
    std::vector<int> rows1, rows0;
    for (int i = 0; i < n; ++i) {
        if (data.x[i] == 1) {
            rows0.push_back(i);
            lo0.push_back(data.y_min[i]);
            hi0.push_back(data.y_max[i]);
        } else {
            rows1.push_back(i);
            lo1.push_back(data.y_min[i]);
            hi1.push_back(data.y_max[i]);
        }
    }
    auto imbalance_rows = [&](const std::vector<int>& free_rows,
                              const std::vector<std::vector<double>>& completions, int arm) {
        // completions x assignments matrix of |imbalance|
        std::vector<std::vector<double>> out;
        for (const auto& u : completions) {
            std::vector<double> vec(n);
            for (int i = 0; i < n; ++i) vec[i] = data.x[i] == arm ? data.y[i] : 0.0;
            for (std::size_t t = 0; t < free_rows.size(); ++t) vec[free_rows[t]] = u[t];
            std::vector<double> row;
            for (const auto& s : sets) row.push_back(std::fabs(dim_oracle(vec, s, n)));
            out.push_back(std::move(row));
        }
        return out;
    };
    auto m1 = imbalance_rows(rows1, grid_completions(lo1, hi1, g), 1);
    auto m0 = imbalance_rows(rows0, grid_completions(lo0, hi0, g), 0);

    std::vector<double> result;
    const int b = static_cast<int>(sets.size());
    for (double k : k_grid) {
        // Event bitmasks per completion, deduplicated.
        auto masks_of = [&](const std::vector<std::vector<double>>& m) {
            std::vector<std::vector<std::uint64_t>> masks;
            const int w = (b + 63) / 64;
            for (const auto& row : m) {
                std::vector<std::uint64_t> mask(w, 0);
                for (int j = 0; j < b; ++j)
                    if (row[j] <= k) mask[j >> 6] |= 1ULL << (j & 63);
                masks.push_back(std::move(mask));
            }
            std::sort(masks.begin(), masks.end());
            masks.erase(std::unique(masks.begin(), masks.end()), masks.end());
            return masks;
        };
        auto ms1 = masks_of(m1);
        auto ms0 = masks_of(m0);
        long best = b + 1;
        for (const auto& a : ms1) {
            for (const auto& c : ms0) {
                long inter = 0;
                for (std::size_t w = 0; w < a.size(); ++w)
                    inter += __builtin_popcountll(a[w] & c[w]);
                best = std::min(best, inter);
                if (best == 0) break;
            }
            if (best == 0) break;
        }
        result.push_back(static_cast<double>(best) / b);
    }
    // Monotone envelope, mirroring the library's adjustment.
    for (std::size_t i = result.size(); i-- > 0;) {
        double nxt = i + 1 < result.size() ? result[i + 1] : 1.0;
        result[i] = std::min(result[i], nxt);
    }
    return result;
}

// Random data-consistent completion of both arms.
inline void random_completion(const dbsa::ObservedData& data, dbsa::Rng& rng,
                              std::vector<double>* y1, std::vector<double>* y0) {
    y1->resize(data.n());
    y0->resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
        if (data.x[i] == 1) {
            (*y1)[i] = data.y[i];
            (*y0)[i] = rng.uniform(data.y_min[i], data.y_max[i]);
        } else {
            (*y0)[i] = data.y[i];
            (*y1)[i] = rng.uniform(data.y_min[i], data.y_max[i]);
        }
    }
}

inline dbsa::ObservedData random_dataset(int n, int n1, dbsa::Rng& rng, double y_lo = 0.0,
                                         double y_hi = 1.0) {
    dbsa::ObservedData d;
    for (int i = 0; i < n; ++i) {
        d.ids.push_back(i);
        d.y.push_back(rng.uniform(y_lo, y_hi));
        d.x.push_back(i < n1 ? 1 : 0);
        d.y_min.push_back(y_lo);
        d.y_max.push_back(y_hi);
    }
    d.n1 = n1;
    d.n0 = n - n1;
    return d;
}

}  // namespace oracle
