#include "dbsa/worstcase.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace dbsa {

namespace {

// Per-assignment machinery for the difference in means of one completed
// potential-outcome vector. Observed cells are folded into per-assignment
// constants; only the free cells (indexed by slot) vary.
struct ArmEval {
    int n = 0;
    int n1 = 0;
    double known_total = 0.0;
    std::vector<int> free_rows;            // data rows whose cell is free
    std::vector<double> known_in;          // per assignment: sum of fixed cells assigned 1
    std::vector<std::uint32_t> slots;      // flattened free-slot lists per assignment
    std::vector<std::uint32_t> off;        // size B+1
    double coef = 0.0;                     // 1/N1 + 1/N0
    double inv_n0 = 0.0;

    int f() const { return static_cast<int>(free_rows.size()); }

    // Imbalance of the completed vector under assignment j.
    double imbalance(int j, const double* u, double sum_u) const {
        double acc = known_in[j];
        for (std::uint32_t t = off[j]; t < off[j + 1]; ++t) acc += u[slots[t]];
        return coef * acc - (known_total + sum_u) * inv_n0;
    }
};

ArmEval build_arm_eval(const ObservedData& data, const AssignmentBatch& batch, int arm) {
    if (batch.n != data.n())
        throw std::invalid_argument("worstcase: batch size disagrees with data");
    ArmEval ev;
    ev.n = batch.n;
    ev.n1 = batch.n1;
    ev.coef = 1.0 / batch.n1 + 1.0 / (batch.n - batch.n1);
    ev.inv_n0 = 1.0 / (batch.n - batch.n1);
    std::vector<int> slot_of(data.n(), -1);
    std::vector<double> fixed(data.n(), 0.0);
    for (int i = 0; i < data.n(); ++i) {
        if (data.x[i] == arm) {
            fixed[i] = data.y[i];
            ev.known_total += data.y[i];
        } else {
            slot_of[i] = ev.f();
            ev.free_rows.push_back(i);
        }
    }
    ev.off.reserve(batch.size + 1);
    ev.off.push_back(0);
    ev.known_in.reserve(batch.size);
    for (int j = 0; j < batch.size; ++j) {
        double s = 0.0;
        for (std::uint32_t i : batch.row(j)) {
            if (slot_of[i] >= 0)
                ev.slots.push_back(static_cast<std::uint32_t>(slot_of[i]));
            else
                s += fixed[i];
        }
        ev.known_in.push_back(s);
        ev.off.push_back(static_cast<std::uint32_t>(ev.slots.size()));
    }
    return ev;
}

// Full evaluation context: one or two arm evaluators plus the gene layout
// (arm-1 free cells first, then arm-0 free cells).
struct EvalContext {
    const CompletionProblem* problem = nullptr;
    ArmEval arm1;
    ArmEval arm0;
    bool single = false;
    int batch_size = 0;
    std::vector<double> lo, hi;  // gene boxes
    int f1 = 0, f0 = 0;

    int genes() const { return f1 + f0; }

    long count(const double* g, double k, double* secondary) const {
        double sum1 = 0.0, sum0 = 0.0;
        for (int i = 0; i < f1; ++i) sum1 += g[i];
        for (int i = 0; i < f0; ++i) sum0 += g[f1 + i];
        long cnt = 0;
        double sec = 0.0;
        const double kd = k > 1e-300 ? k : 1e-300;
        if (single) {
            const ArmEval& ev = f1 > 0 ? arm1 : arm0;
            const double* u = f1 > 0 ? g : g + f1;
            double su = f1 > 0 ? sum1 : sum0;
            for (int j = 0; j < batch_size; ++j) {
                double d = std::fabs(ev.imbalance(j, u, su));
                if (d <= k) {
                    ++cnt;
                    sec += 1.0 - d / kd;
                }
            }
        } else {
            for (int j = 0; j < batch_size; ++j) {
                double d1 = std::fabs(arm1.imbalance(j, g, sum1));
                if (d1 > k) continue;
                double d0 = std::fabs(arm0.imbalance(j, g + f1, sum0));
                if (d0 <= k) {
                    ++cnt;
                    sec += 1.0 - std::max(d1, d0) / kd;
                }
            }
        }
        if (secondary) *secondary = sec;
        return cnt;
    }

    double fitness(const double* g, double k) const {
        double sec = 0.0;
        long cnt = count(g, k, &sec);
        return static_cast<double>(cnt) + sec / (batch_size + 1.0);
    }
};

EvalContext build_context(const CompletionProblem& problem) {
    EvalContext ctx;
    ctx.problem = &problem;
    ctx.single = problem.single_arm;
    ctx.batch_size = problem.batch.size;
    FreeCellBoxes boxes = free_cell_boxes(problem.data, problem.restrictions);
    if (!boxes.ok)
        throw std::invalid_argument("worstcase: empty free-cell box under the restriction");
    if (ctx.single) {
        if (problem.single_arm_value == 1) {
            ctx.arm1 = build_arm_eval(problem.data, problem.batch, 1);
            ctx.f1 = ctx.arm1.f();
            ctx.lo = boxes.lo1;
            ctx.hi = boxes.hi1;
        } else {
            ctx.arm0 = build_arm_eval(problem.data, problem.batch, 0);
            ctx.f0 = ctx.arm0.f();
            ctx.lo = boxes.lo0;
            ctx.hi = boxes.hi0;
        }
    } else {
        ctx.arm1 = build_arm_eval(problem.data, problem.batch, 1);
        ctx.arm0 = build_arm_eval(problem.data, problem.batch, 0);
        ctx.f1 = ctx.arm1.f();
        ctx.f0 = ctx.arm0.f();
        ctx.lo = boxes.lo1;
        ctx.hi = boxes.hi1;
        ctx.lo.insert(ctx.lo.end(), boxes.lo0.begin(), boxes.lo0.end());
        ctx.hi.insert(ctx.hi.end(), boxes.hi0.begin(), boxes.hi0.end());
    }
    return ctx;
}

// Covariate feasibility repair: blend an infeasible completion toward a
// strictly feasible anchor (the minimal-residual completion per arm).
struct ModConstraint {
    CovariateModel model;
    std::vector<double> base1, base0;      // fixed-value vectors per arm
    std::vector<int> rows1, rows0;         // free rows per arm
    std::vector<double> anchor1, anchor0;  // minimal-residual free cells
    double budget = 0.0;

    double resid_sq(const std::vector<double>& base, const std::vector<int>& rows,
                    const double* u) const {
        std::vector<double> y = base;
        for (std::size_t i = 0; i < rows.size(); ++i) y[rows[i]] = u[i];
        return model.residual_sq(y);
    }

    bool repair_arm(const std::vector<double>& base, const std::vector<int>& rows,
                    const std::vector<double>& anchor, double* u) const {
        if (resid_sq(base, rows, u) <= budget) return true;
        double lo = 0.0, hi = 1.0;  // blend factor toward u
        std::vector<double> cand(rows.size());
        for (int it = 0; it < 12; ++it) {
            double t = 0.5 * (lo + hi);
            for (std::size_t i = 0; i < rows.size(); ++i)
                cand[i] = anchor[i] + t * (u[i] - anchor[i]);
            if (resid_sq(base, rows, cand.data()) <= budget)
                lo = t;
            else
                hi = t;
        }
        for (std::size_t i = 0; i < rows.size(); ++i) u[i] = anchor[i] + lo * (u[i] - anchor[i]);
        return resid_sq(base, rows, u) <= budget + 1e-9;
    }

    void repair(double* genes, int f1) const {
        if (!rows1.empty()) repair_arm(base1, rows1, anchor1, genes);
        if (!rows0.empty()) repair_arm(base0, rows0, anchor0, genes + f1);
    }

    bool feasible_arm1(const double* u) const {
        return rows1.empty() || resid_sq(base1, rows1, u) <= budget + 1e-7;
    }
    bool feasible_arm0(const double* u) const {
        return rows0.empty() || resid_sq(base0, rows0, u) <= budget + 1e-7;
    }
};

struct GaRunResult {
    long best_count = 0;
    double best_fitness = 0.0;
    std::vector<double> best_genes;
    bool budget_hit = false;
};

using Clock = std::chrono::steady_clock;

GaRunResult ga_run(const EvalContext& ctx, double k, const GaConfig& g, std::uint64_t seed,
                   const std::vector<double>* warm, const ModConstraint* mod, int threads,
                   Clock::time_point start, double budget_ms) {
    const int f = ctx.genes();
    const int pop_n = std::max(4, g.population_size);
    Rng rng(seed);

    std::vector<std::vector<double>> pop(pop_n, std::vector<double>(f));
    std::vector<std::vector<double>> next(pop_n, std::vector<double>(f));
    std::vector<double> fit(pop_n);
    std::vector<double> width(f);
    for (int i = 0; i < f; ++i) width[i] = ctx.hi[i] - ctx.lo[i];

    auto corner = [&](std::vector<double>& ind, int kind) {
        for (int i = 0; i < f; ++i) {
            bool arm1_cell = i < ctx.f1;
            bool high = kind == 1 || (kind == 2 && arm1_cell) || (kind == 3 && !arm1_cell);
            ind[i] = high ? ctx.hi[i] : ctx.lo[i];
        }
    };
    for (int p = 0; p < pop_n; ++p) {
        if (p == 0) {
            if (warm && static_cast<int>(warm->size()) == f)
                pop[p] = *warm;
            else
                for (int i = 0; i < f; ++i) pop[p][i] = 0.5 * (ctx.lo[i] + ctx.hi[i]);
        } else if (p <= 4) {
            corner(pop[p], p - 1);
        } else {
            for (int i = 0; i < f; ++i) pop[p][i] = rng.uniform(ctx.lo[i], ctx.hi[i]);
        }
        if (mod) mod->repair(pop[p].data(), ctx.f1);
    }

    auto eval_all = [&](std::vector<std::vector<double>>& individuals) {
        parallel_for(individuals.size(), threads, [&](std::size_t i) {
            fit[i] = ctx.fitness(individuals[i].data(), k);
        });
    };
    eval_all(pop);

    GaRunResult res;
    res.best_fitness = std::numeric_limits<double>::infinity();
    auto note_best = [&]() {
        for (int p = 0; p < pop_n; ++p) {
            if (fit[p] < res.best_fitness) {
                res.best_fitness = fit[p];
                res.best_genes = pop[p];
            }
        }
    };
    note_best();

    const double pmut = std::max(0.1, 1.0 / std::max(1, f));
    double sigma = g.mutation_sigma;
    double last_best = res.best_fitness;
    int stall = 0;
    for (int gen = 0; gen < g.generations; ++gen) {
        if (res.best_fitness < 1.0) break;  // a zero-count completion cannot be improved
        if (budget_ms > 0.0) {
            double ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            if (ms > budget_ms) {
                res.budget_hit = true;
                break;
            }
        }
        // Elites survive unchanged.
        std::vector<int> order(pop_n);
        for (int p = 0; p < pop_n; ++p) order[p] = p;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fit[a] < fit[b]; });
        int elite = std::min(g.elitism_count, pop_n);
        for (int e = 0; e < elite; ++e) next[e] = pop[order[e]];

        auto tournament = [&]() {
            int best = static_cast<int>(rng.below(pop_n));
            for (int t = 1; t < g.tournament_size; ++t) {
                int c = static_cast<int>(rng.below(pop_n));
                if (fit[c] < fit[best]) best = c;
            }
            return best;
        };
        for (int p = elite; p < pop_n; ++p) {
            const std::vector<double>& pa = pop[tournament()];
            const std::vector<double>& pb = pop[tournament()];
            std::vector<double>& child = next[p];
            bool cross = rng.uniform01() < g.crossover_rate;
            for (int i = 0; i < f; ++i)
                child[i] = (cross && rng.next_u64() & 1u) ? pb[i] : pa[i];
            for (int i = 0; i < f; ++i) {
                if (rng.uniform01() < pmut) {
                    child[i] += sigma * width[i] * rng.normal();
                    child[i] = std::clamp(child[i], ctx.lo[i], ctx.hi[i]);
                }
            }
            if (mod) mod->repair(child.data(), ctx.f1);
        }
        pop.swap(next);
        eval_all(pop);
        note_best();
        sigma *= g.mutation_decay;
        if (res.best_fitness < last_best - 1e-12) {
            last_best = res.best_fitness;
            stall = 0;
        } else if (++stall >= 80) {
            break;
        }
    }
    double sec = 0.0;
    res.best_count = ctx.count(res.best_genes.data(), k, &sec);
    return res;
}

WorstCaseCurve run_curve_ga(const CompletionProblem& problem, const std::vector<double>& k_grid,
                            const SolverConfig& cfg, const ModConstraint* mod) {
    EvalContext ctx = build_context(problem);
    const double spread = problem.data.spread();
    const int b = problem.batch.size;
    const std::size_t m = k_grid.size();

    WorstCaseCurve curve;
    curve.k_grid = k_grid;
    curve.p_raw.assign(m, 0.0);
    curve.p_tilde.assign(m, 0.0);
    curve.diagnostics.assign(m, {});

    std::vector<double> warm_chain;
    bool have_zero = false;
    std::uint64_t zero_hash = 0;

    for (std::size_t idx = m; idx-- > 0;) {
        double k = k_grid[idx];
        PointDiagnostics& diag = curve.diagnostics[idx];
        if (k >= spread) {
            curve.p_raw[idx] = 1.0;
            diag.status = "trivial";
            continue;
        }
        if (have_zero) {
            curve.p_raw[idx] = 0.0;
            diag.status = "implied-zero";
            diag.best_hash = zero_hash;
            continue;
        }
        GaRunResult best;
        best.best_fitness = std::numeric_limits<double>::infinity();
        best.best_count = b + 1;
        int runs = 0;
        auto point_start = Clock::now();
        // Run 0 is the warm chain; runs 1..R are independent restarts whose
        // streams do not depend on the total restart count.
        for (int r = 0; r <= std::max(1, cfg.restarts); ++r) {
            std::uint64_t seed = mix_seed(cfg.seed, idx, static_cast<std::uint64_t>(r));
            const std::vector<double>* warm = (r == 0 && !warm_chain.empty()) ? &warm_chain : nullptr;
            GaRunResult run = ga_run(ctx, k, cfg.ga, seed, warm, mod, cfg.threads, point_start,
                                     cfg.time_budget_ms);
            ++runs;
            if (run.budget_hit) curve.budget_exceeded = true;
            if (r == 0) warm_chain = run.best_genes;
            if (run.best_count < best.best_count ||
                (run.best_count == best.best_count && run.best_fitness < best.best_fitness))
                best = run;
            if (best.best_count == 0) break;
            if (cfg.time_budget_ms > 0.0) {
                double ms =
                    std::chrono::duration<double, std::milli>(Clock::now() - point_start).count();
                if (ms > cfg.time_budget_ms) break;
            }
        }
        curve.p_raw[idx] = static_cast<double>(best.best_count) / b;
        diag.runs = runs;
        diag.best_hash = fnv1a(best.best_genes);
        diag.status = curve.budget_exceeded && best.best_count > 0 ? "budget" : "ga";
        if (best.best_count == 0) {
            have_zero = true;
            zero_hash = diag.best_hash;
        }
    }
    // Monotone adjustment: the suffix minimum restores the cdf shape without
    // breaking the one-sided (>= infimum) guarantee.
    for (std::size_t idx = m; idx-- > 0;) {
        double nxt = (idx + 1 < m) ? curve.p_tilde[idx + 1] : 1.0;
        curve.p_tilde[idx] = std::min(curve.p_raw[idx], nxt);
    }
    return curve;
}

}  // namespace

SolverConfig SolverConfig::light() {
    SolverConfig cfg;
    cfg.ga.population_size = 48;
    cfg.ga.generations = 90;
    cfg.ga.mutation_sigma = 0.15;
    cfg.ga.mutation_decay = 0.97;
    cfg.ga.elitism_count = 2;
    cfg.restarts = 1;
    return cfg;
}

WorstCaseCurve pbar_curve(const CompletionProblem& problem, const std::vector<double>& k_grid,
                          const SolverConfig& cfg) {
    if (problem.covariate_lambda) return pbar_mod(problem, k_grid, cfg);
    return run_curve_ga(problem, k_grid, cfg, nullptr);
}

WorstCaseCurve pbar_mod(const CompletionProblem& problem, const std::vector<double>& k_grid,
                        const SolverConfig& cfg) {
    if (!problem.covariate_lambda)
        throw std::invalid_argument("pbar_mod: covariate_lambda must be set");
    if (!problem.q_matrix) throw std::invalid_argument("pbar_mod: q_matrix must be set");
    double lambda = *problem.covariate_lambda;
    if (lambda == 0.0) return run_curve_ga(problem, k_grid, cfg, nullptr);

    CovariateModel model = CovariateModel::build(problem.data, *problem.q_matrix, lambda);
    ModConstraint mod;
    mod.model = model;
    mod.budget = model.budget();
    const ObservedData& d = problem.data;
    mod.base1.assign(d.n(), 0.0);
    mod.base0.assign(d.n(), 0.0);
    for (int i = 0; i < d.n(); ++i) {
        if (d.x[i] == 1) {
            mod.base1[i] = d.y[i];
            mod.rows0.push_back(i);
        } else {
            mod.base0[i] = d.y[i];
            mod.rows1.push_back(i);
        }
    }
    if (problem.single_arm) {
        if (problem.single_arm_value == 1)
            mod.rows0.clear();
        else
            mod.rows1.clear();
    }

    // Anchors: the minimal-residual completion of each arm. If even those
    // violate the budget the model is falsified.
    WorstCaseCurve falsified;
    falsified.k_grid = k_grid;
    falsified.p_raw.assign(k_grid.size(), 0.0);
    falsified.p_tilde.assign(k_grid.size(), 0.0);
    falsified.diagnostics.assign(k_grid.size(), {0, 0, "falsified"});
    falsified.status = CurveStatus::falsified;

    {
        auto solve_anchor = [&](int arm, const std::vector<int>& rows,
                                std::vector<double>* out) -> bool {
            if (rows.empty()) {
                out->clear();
                return true;
            }
            // Minimal residual over the boxes alone (no K-band).
            double minres = min_residual_sq(d, model, arm, k_infinity);
            if (minres > mod.budget + 1e-9) return false;
            // Reconstruct a feasible point by coordinate-wise refinement from
            // box midpoints toward the fitted values.
            std::vector<double> base = arm == 1 ? mod.base1 : mod.base0;
            std::vector<double> u(rows.size());
            std::vector<double> lo(rows.size()), hi(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                lo[i] = d.y_min[rows[i]];
                hi[i] = d.y_max[rows[i]];
                u[i] = 0.5 * (lo[i] + hi[i]);
            }
            for (int it = 0; it < 4000; ++it) {
                std::vector<double> y = base;
                for (std::size_t i = 0; i < rows.size(); ++i) y[rows[i]] = u[i];
                std::vector<double> r = model.residuals(y);
                double rsq = 0.0;
                for (double v : r) rsq += v * v;
                if (rsq <= mod.budget * (1.0 - 1e-6) || rsq <= mod.budget - 1e-12) break;
                for (std::size_t i = 0; i < rows.size(); ++i)
                    u[i] = std::clamp(u[i] - 0.5 * 2.0 * r[rows[i]], lo[i], hi[i]);
            }
            std::vector<double> y = base;
            for (std::size_t i = 0; i < rows.size(); ++i) y[rows[i]] = u[i];
            if (model.residual_sq(y) > mod.budget + 1e-9) return false;
            *out = u;
            return true;
        };
        if (!solve_anchor(1, mod.rows1, &mod.anchor1)) return falsified;
        if (!solve_anchor(0, mod.rows0, &mod.anchor0)) return falsified;
    }

    return run_curve_ga(problem, k_grid, cfg, &mod);
}

namespace {

// Deterministic grid minimizer. Enumerates per-arm completions on a uniform
// per-cell grid, reduces each to its event mask per K, and minimizes the
// joint count over mask pairs with a branch-and-bound sweep.
struct ArmGrid {
    std::vector<float> imb;  // completions x batch, |imbalance|
    int count = 0;
    int batch = 0;
};

ArmGrid build_arm_grid(const ArmEval& ev, const std::vector<double>& lo,
                       const std::vector<double>& hi, int points, int batch_size,
                       const ModConstraint* mod, bool arm_is_1, std::uint64_t cap) {
    const int f = ev.f();
    std::uint64_t total = 1;
    for (int i = 0; i < f; ++i) {
        total *= static_cast<std::uint64_t>(points);
        if (total > cap)
            throw std::invalid_argument(
                "pbar_curve_brute: completion grid too large; use the GA solver");
    }
    ArmGrid grid;
    grid.batch = batch_size;
    grid.imb.reserve(static_cast<std::size_t>(total) * batch_size);
    std::vector<int> digit(f, 0);
    std::vector<double> u(f);
    for (std::uint64_t c = 0; c < total; ++c) {
        std::uint64_t rem = c;
        for (int i = 0; i < f; ++i) {
            digit[i] = static_cast<int>(rem % points);
            rem /= points;
            u[i] = points == 1 ? lo[i]
                               : lo[i] + (hi[i] - lo[i]) * digit[i] / (points - 1);
        }
        if (mod) {
            bool ok = arm_is_1 ? mod->feasible_arm1(u.data()) : mod->feasible_arm0(u.data());
            if (!ok) continue;
        }
        double sum_u = 0.0;
        for (double v : u) sum_u += v;
        for (int j = 0; j < batch_size; ++j)
            grid.imb.push_back(static_cast<float>(std::fabs(ev.imbalance(j, u.data(), sum_u))));
        ++grid.count;
    }
    if (grid.count == 0)
        throw std::invalid_argument("pbar_curve_brute: no grid completion satisfies the model");
    return grid;
}

struct MaskSet {
    std::vector<std::uint64_t> words;  // masks x words
    std::vector<int> counts;
    int n_words = 0;
};

MaskSet build_masks(const ArmGrid& grid, double k) {
    const int w = (grid.batch + 63) / 64;
    MaskSet out;
    out.n_words = w;
    std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
    std::vector<std::uint64_t> mask(w);
    for (int c = 0; c < grid.count; ++c) {
        std::fill(mask.begin(), mask.end(), 0);
        const float* row = grid.imb.data() + static_cast<std::size_t>(c) * grid.batch;
        int cnt = 0;
        for (int j = 0; j < grid.batch; ++j) {
            if (row[j] <= k) {
                mask[j >> 6] |= 1ULL << (j & 63);
                ++cnt;
            }
        }
        std::uint64_t h = fnv1a(mask.data(), mask.size() * 8);
        auto& bucket = seen[h];
        bool dup = false;
        for (std::size_t pos : bucket) {
            if (std::memcmp(out.words.data() + pos * w, mask.data(), w * 8) == 0) {
                dup = true;
                break;
            }
        }
        if (!dup) {
            bucket.push_back(out.counts.size());
            out.words.insert(out.words.end(), mask.begin(), mask.end());
            out.counts.push_back(cnt);
        }
    }
    return out;
}

long min_joint_count(const MaskSet& a, const MaskSet& b, int batch) {
    const int w = a.n_words;
    std::vector<std::size_t> ord_a(a.counts.size()), ord_b(b.counts.size());
    for (std::size_t i = 0; i < ord_a.size(); ++i) ord_a[i] = i;
    for (std::size_t i = 0; i < ord_b.size(); ++i) ord_b[i] = i;
    std::sort(ord_a.begin(), ord_a.end(), [&](auto x, auto y) { return a.counts[x] < a.counts[y]; });
    std::sort(ord_b.begin(), ord_b.end(), [&](auto x, auto y) { return b.counts[x] < b.counts[y]; });
    long best = batch + 1;
    const int b_min = b.counts[ord_b[0]];
    for (std::size_t ia = 0; ia < ord_a.size(); ++ia) {
        long ca = a.counts[ord_a[ia]];
        if (std::max<long>(0, ca + b_min - batch) >= best) break;
        const std::uint64_t* wa = a.words.data() + ord_a[ia] * w;
        for (std::size_t ib = 0; ib < ord_b.size(); ++ib) {
            long cb = b.counts[ord_b[ib]];
            long lower = std::max<long>(0, ca + cb - batch);
            if (lower >= best) break;
            const std::uint64_t* wb = b.words.data() + ord_b[ib] * w;
            long inter = 0;
            for (int t = 0; t < w; ++t) inter += __builtin_popcountll(wa[t] & wb[t]);
            if (inter < best) {
                best = inter;
                if (best == 0) return 0;
            }
        }
    }
    return best;
}

}  // namespace

WorstCaseCurve pbar_curve_brute(const CompletionProblem& problem,
                                const std::vector<double>& k_grid, int points_per_cell) {
    if (points_per_cell < 2)
        throw std::invalid_argument("pbar_curve_brute: need at least 2 points per cell");
    EvalContext ctx = build_context(problem);

    std::unique_ptr<ModConstraint> mod;
    if (problem.covariate_lambda && *problem.covariate_lambda > 0.0) {
        if (!problem.q_matrix)
            throw std::invalid_argument("pbar_curve_brute: q_matrix must be set with lambda");
        mod = std::make_unique<ModConstraint>();
        mod->model = CovariateModel::build(problem.data, *problem.q_matrix,
                                           *problem.covariate_lambda);
        mod->budget = mod->model.budget();
        const ObservedData& d = problem.data;
        mod->base1.assign(d.n(), 0.0);
        mod->base0.assign(d.n(), 0.0);
        for (int i = 0; i < d.n(); ++i) {
            if (d.x[i] == 1) {
                mod->base1[i] = d.y[i];
                mod->rows0.push_back(i);
            } else {
                mod->base0[i] = d.y[i];
                mod->rows1.push_back(i);
            }
        }
    }

    const double spread = problem.data.spread();
    const int b = problem.batch.size;
    const std::size_t m = k_grid.size();
    const std::uint64_t cap = 400000;

    WorstCaseCurve curve;
    curve.k_grid = k_grid;
    curve.p_raw.assign(m, 0.0);
    curve.p_tilde.assign(m, 0.0);
    curve.diagnostics.assign(m, {});

    ArmGrid g1, g0;
    bool built = false;
    bool have_zero = false;
    for (std::size_t idx = m; idx-- > 0;) {
        double k = k_grid[idx];
        PointDiagnostics& diag = curve.diagnostics[idx];
        diag.status = "brute";
        if (k >= spread) {
            curve.p_raw[idx] = 1.0;
            diag.status = "trivial";
            continue;
        }
        if (have_zero) {
            curve.p_raw[idx] = 0.0;
            diag.status = "implied-zero";
            continue;
        }
        if (!built) {
            if (ctx.single) {
                const ArmEval& ev = ctx.f1 > 0 ? ctx.arm1 : ctx.arm0;
                std::vector<double> lo = ctx.lo, hi = ctx.hi;
                g1 = build_arm_grid(ev, lo, hi, points_per_cell, b, mod.get(), ctx.f1 > 0, cap);
            } else {
                std::vector<double> lo1(ctx.lo.begin(), ctx.lo.begin() + ctx.f1);
                std::vector<double> hi1(ctx.hi.begin(), ctx.hi.begin() + ctx.f1);
                std::vector<double> lo0(ctx.lo.begin() + ctx.f1, ctx.lo.end());
                std::vector<double> hi0(ctx.hi.begin() + ctx.f1, ctx.hi.end());
                g1 = build_arm_grid(ctx.arm1, lo1, hi1, points_per_cell, b, mod.get(), true, cap);
                g0 = build_arm_grid(ctx.arm0, lo0, hi0, points_per_cell, b, mod.get(), false, cap);
            }
            built = true;
        }
        long best;
        if (ctx.single) {
            MaskSet s1 = build_masks(g1, k);
            best = *std::min_element(s1.counts.begin(), s1.counts.end());
        } else {
            MaskSet s1 = build_masks(g1, k);
            MaskSet s0 = build_masks(g0, k);
            best = min_joint_count(s1, s0, b);
        }
        curve.p_raw[idx] = static_cast<double>(best) / b;
        if (best == 0) have_zero = true;
    }
    for (std::size_t idx = m; idx-- > 0;) {
        double nxt = (idx + 1 < m) ? curve.p_tilde[idx + 1] : 1.0;
        curve.p_tilde[idx] = std::min(curve.p_raw[idx], nxt);
    }
    return curve;
}

KAlphaResult k_alpha(const WorstCaseCurve& curve, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("k_alpha: alpha must be in (0,1)");
    KAlphaResult out;
    for (std::size_t i = 0; i < curve.k_grid.size(); ++i) {
        if (curve.p_tilde[i] >= 1.0 - alpha) {
            out.k = curve.k_grid[i];
            out.grid_index = i;
            return out;
        }
    }
    out.k = curve.k_grid.back();
    out.grid_index = curve.k_grid.size() - 1;
    out.saturated = true;
    return out;
}

std::vector<CalibratedSet> calibrated_sets(const BoundsCurve& bounds, const WorstCaseCurve& curve,
                                           const std::vector<double>& alphas) {
    if (bounds.k_grid != curve.k_grid)
        throw std::invalid_argument("calibrated_sets: curves must share their K grid");
    std::vector<CalibratedSet> out;
    out.reserve(alphas.size());
    for (double a : alphas) {
        KAlphaResult ka = k_alpha(curve, a);
        CalibratedSet cs;
        cs.one_minus_alpha = 1.0 - a;
        cs.k = ka.k;
        cs.set = bounds.intervals[ka.grid_index];
        cs.saturated = ka.saturated;
        out.push_back(cs);
    }
    return out;
}

double strength_of_evidence(const BoundsCurve& bounds, const WorstCaseCurve& curve) {
    if (!std::isfinite(bounds.breakdown)) return 1.0;
    if (bounds.breakdown <= 0.0) return curve.p_tilde.empty() ? 0.0 : curve.p_tilde.front();
    for (std::size_t i = 0; i < curve.k_grid.size(); ++i)
        if (curve.k_grid[i] >= bounds.breakdown - 1e-12) return curve.p_tilde[i];
    return curve.p_tilde.back();
}

std::string export_milp(const CompletionProblem& problem, double k) {
    const ObservedData& d = problem.data;
    const double gmin = d.global_y_min();
    const double gmax = d.global_y_max();
    for (int i = 0; i < d.n(); ++i)
        if (d.y_min[i] != gmin || d.y_max[i] != gmax)
            throw std::invalid_argument("export_milp: requires uniform global bounds");
    EvalContext ctx = build_context(problem);
    if (ctx.single) throw std::invalid_argument("export_milp: joint two-arm problems only");
    const int b = problem.batch.size;
    const double spread = gmax - gmin;
    const double big_m = k + spread;

    std::ostringstream os;
    os.precision(12);
    auto var_a = [&](int slot) { return "a_" + std::to_string(ctx.arm1.free_rows[slot]); };
    auto var_b = [&](int slot) { return "b_" + std::to_string(ctx.arm0.free_rows[slot]); };

    os << "\\ worst-case probability of K-approximate balance, K = " << k << "\n";
    os << "Minimize\n obj:";
    for (int j = 0; j < b; ++j) {
        os << (j == 0 ? " " : " + ") << (1.0 / b) << " z3_" << j;
        if (j % 8 == 7) os << "\n     ";
    }
    os << "\nSubject To\n";

    // Linear expression of the imbalance for one arm and one assignment:
    // coefficient 1/N1 for free cells assigned 1, -1/N0 otherwise.
    auto emit_arm = [&](const ArmEval& ev, const char* tag,
                        const std::function<std::string(int)>& name) {
        const double inv_n1 = 1.0 / ev.n1;
        const double inv_n0 = ev.inv_n0;
        for (int j = 0; j < b; ++j) {
            std::vector<double> coef(ev.f(), -inv_n0);
            for (std::uint32_t t = ev.off[j]; t < ev.off[j + 1]; ++t)
                coef[ev.slots[t]] = inv_n1;
            double cst = ev.coef * ev.known_in[j] - ev.known_total * inv_n0;
            auto expr = [&](double sign, std::ostringstream& row) {
                for (int i = 0; i < ev.f(); ++i) {
                    double cv = sign * coef[i];
                    row << (cv >= 0 ? " + " : " - ") << std::fabs(cv) << " " << name(i);
                }
            };
            {  // M z+ >= K - Diff  <=>  Diff + M z+ >= K
                std::ostringstream row;
                row << " c" << tag << "p_lo_" << j << ":";
                expr(+1.0, row);
                row << " + " << big_m << " z" << tag << "p_" << j << " >= " << (k - cst) << "\n";
                os << row.str();
            }
            {  // M (1 - z+) >= Diff - K  <=>  Diff + M z+ <= K + M
                std::ostringstream row;
                row << " c" << tag << "p_hi_" << j << ":";
                expr(+1.0, row);
                row << " + " << big_m << " z" << tag << "p_" << j << " <= "
                    << (k + big_m - cst) << "\n";
                os << row.str();
            }
            {  // M z- >= K + Diff  <=>  -Diff + M z- >= K
                std::ostringstream row;
                row << " c" << tag << "m_lo_" << j << ":";
                expr(-1.0, row);
                row << " + " << big_m << " z" << tag << "m_" << j << " >= " << (k + cst) << "\n";
                os << row.str();
            }
            {  // M (1 - z-) >= -Diff - K  <=>  -Diff + M z- <= K + M
                std::ostringstream row;
                row << " c" << tag << "m_hi_" << j << ":";
                expr(-1.0, row);
                row << " + " << big_m << " z" << tag << "m_" << j << " <= "
                    << (k + big_m + cst) << "\n";
                os << row.str();
            }
        }
    };
    emit_arm(ctx.arm1, "1", var_a);
    emit_arm(ctx.arm0, "0", var_b);

    for (int j = 0; j < b; ++j) {
        os << " link_a_" << j << ": z3_" << j << " - z1p_" << j << " <= 0\n";
        os << " link_b_" << j << ": z3_" << j << " - z1m_" << j << " <= 0\n";
        os << " link_c_" << j << ": z3_" << j << " - z0p_" << j << " <= 0\n";
        os << " link_d_" << j << ": z3_" << j << " - z0m_" << j << " <= 0\n";
        os << " link_e_" << j << ": z1p_" << j << " + z1m_" << j << " + z0p_" << j << " + z0m_"
           << j << " - z3_" << j << " <= 3\n";
    }

    os << "Bounds\n";
    for (int i = 0; i < ctx.f1; ++i)
        os << " " << gmin << " <= " << var_a(i) << " <= " << gmax << "\n";
    for (int i = 0; i < ctx.f0; ++i)
        os << " " << gmin << " <= " << var_b(i) << " <= " << gmax << "\n";
    os << "Binary\n";
    for (int j = 0; j < b; ++j)
        os << " z1p_" << j << " z1m_" << j << " z0p_" << j << " z0m_" << j << " z3_" << j << "\n";
    os << "End\n";
    return os.str();
}

std::string WorstCaseCurve::to_csv() const {
    std::ostringstream os;
    os << "k,p_raw,p_tilde\n";
    char buf[96];
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g\n", k_grid[i], p_raw[i], p_tilde[i]);
        os << buf;
    }
    return os.str();
}

std::string WorstCaseCurve::diagnostics_json() const {
    nlohmann::json j;
    j["status"] = status == CurveStatus::ok ? "ok" : "falsified";
    j["budget_exceeded"] = budget_exceeded;
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < k_grid.size(); ++i) {
        char hash[24];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(diagnostics[i].best_hash));
        pts.push_back({{"k", k_grid[i]},
                       {"p_raw", p_raw[i]},
                       {"p_tilde", p_tilde[i]},
                       {"runs", diagnostics[i].runs},
                       {"best_completion", hash},
                       {"status", diagnostics[i].status}});
    }
    j["points"] = pts;
    return j.dump(2);
}

}  // namespace dbsa
