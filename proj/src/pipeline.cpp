#include "dbsa/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "json.hpp"

namespace dbsa {

namespace {

std::vector<double> default_alphas() {
    std::vector<double> a;
    for (int i = 1; i <= 99; ++i) a.push_back(i / 100.0);
    return a;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
    out << content;
}

DesignSpec resolve_design(const ObservedData& data, const RunConfig& cfg, int margin) {
    DesignSpec d = cfg.design;
    if (d.n_units == 0) d.n_units = data.n();
    if (d.n_treated_or_sampled == 0) d.n_treated_or_sampled = margin;
    if (d.source == AssignmentSource::exhaustive &&
        count_combinations(d.n_units, d.n_treated_or_sampled) > d.enumeration_cap) {
        d.source = AssignmentSource::monte_carlo;
        if (d.seed == 0) d.seed = cfg.solver.seed == 0 ? 1 : cfg.solver.seed;
    }
    return d;
}

Matrix build_q(const ObservedData& data) {
    if (!data.w) throw std::invalid_argument("covariate analysis requires covariate columns");
    Matrix q(data.w->rows, data.w->cols + 1);
    for (std::size_t i = 0; i < q.rows; ++i) {
        q(i, 0) = 1.0;
        for (std::size_t j = 0; j < data.w->cols; ++j) q(i, j + 1) = (*data.w)(i, j);
    }
    return q;
}

std::string csv_calibrated(const std::vector<CalibratedSet>& sets) {
    std::ostringstream os;
    os << "one_minus_alpha,k_alpha,lb,ub,saturated\n";
    char buf[160];
    for (const auto& s : sets) {
        std::snprintf(buf, sizeof(buf), "%.12g,%.12g,%.12g,%.12g,%d\n", s.one_minus_alpha, s.k,
                      s.set.lo, s.set.hi, s.saturated ? 1 : 0);
        os << buf;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// Minimal SVG rendering: axes, polylines, and a shaded band. The figures are
// derived views of the CSV data only.
// ---------------------------------------------------------------------------
struct Panel {
    double x_lo, x_hi, y_lo, y_hi;
    double px = 560, py = 240, ox = 60, oy = 20;

    double tx(double x) const { return ox + (x - x_lo) / (x_hi - x_lo) * px; }
    double ty(double y) const { return oy + (y_hi - y) / (y_hi - y_lo) * py; }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void draw_axes(std::ostringstream& os, const Panel& p, const std::string& x_label,
               const std::string& y_label, double y_offset) {
    double oy = p.oy + y_offset;
    os << "<rect x='" << p.ox << "' y='" << oy << "' width='" << p.px << "' height='" << p.py
       << "' fill='none' stroke='black' stroke-width='1'/>\n";
    for (int t = 0; t <= 4; ++t) {
        double xv = p.x_lo + (p.x_hi - p.x_lo) * t / 4.0;
        double yv = p.y_lo + (p.y_hi - p.y_lo) * t / 4.0;
        double xp = p.tx(xv);
        double yp = p.ty(yv) + y_offset;
        os << "<line x1='" << xp << "' y1='" << oy + p.py << "' x2='" << xp << "' y2='"
           << oy + p.py + 4 << "' stroke='black'/>\n";
        os << "<text x='" << xp << "' y='" << oy + p.py + 16
           << "' font-size='10' text-anchor='middle'>" << fmt(xv) << "</text>\n";
        os << "<line x1='" << p.ox - 4 << "' y1='" << yp << "' x2='" << p.ox << "' y2='" << yp
           << "' stroke='black'/>\n";
        os << "<text x='" << p.ox - 6 << "' y='" << yp + 3
           << "' font-size='10' text-anchor='end'>" << fmt(yv) << "</text>\n";
    }
    os << "<text x='" << p.ox + p.px / 2 << "' y='" << oy + p.py + 32
       << "' font-size='11' text-anchor='middle'>" << x_label << "</text>\n";
    os << "<text x='14' y='" << oy + p.py / 2 << "' font-size='11' text-anchor='middle' "
       << "transform='rotate(-90 14 " << oy + p.py / 2 << ")'>" << y_label << "</text>\n";
}

void polyline(std::ostringstream& os, const Panel& p, const std::vector<double>& xs,
              const std::vector<double>& ys, const std::string& stroke, double y_offset) {
    os << "<polyline fill='none' stroke='" << stroke << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << p.tx(xs[i]) << "," << p.ty(ys[i]) + y_offset << " ";
    os << "'/>\n";
}

void band(std::ostringstream& os, const Panel& p, const std::vector<double>& xs,
          const std::vector<double>& lo, const std::vector<double>& hi, double y_offset) {
    os << "<polygon fill='lightsteelblue' fill-opacity='0.5' stroke='none' points='";
    for (std::size_t i = 0; i < xs.size(); ++i)
        os << p.tx(xs[i]) << "," << p.ty(hi[i]) + y_offset << " ";
    for (std::size_t i = xs.size(); i-- > 0;)
        os << p.tx(xs[i]) << "," << p.ty(lo[i]) + y_offset << " ";
    os << "'/>\n";
}

}  // namespace

std::string render_sensitivity_svg(const BoundsCurve& bounds, const WorstCaseCurve& worst) {
    std::vector<double> lo, hi;
    for (const auto& iv : bounds.intervals) {
        lo.push_back(iv.lo);
        hi.push_back(iv.hi);
    }
    Panel top;
    top.x_lo = bounds.k_grid.front();
    top.x_hi = bounds.k_grid.back();
    top.y_lo = *std::min_element(lo.begin(), lo.end());
    top.y_hi = *std::max_element(hi.begin(), hi.end());
    double pad = 0.05 * (top.y_hi - top.y_lo + 1e-12);
    top.y_lo -= pad;
    top.y_hi += pad;
    Panel bot = top;
    bot.y_lo = 0.0;
    bot.y_hi = 1.0;

    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='680' height='640'>\n";
    draw_axes(os, top, "K", "bounds on ATE", 0.0);
    band(os, top, bounds.k_grid, lo, hi, 0.0);
    polyline(os, top, bounds.k_grid, lo, "steelblue", 0.0);
    polyline(os, top, bounds.k_grid, hi, "steelblue", 0.0);
    if (top.y_lo < 0.0 && top.y_hi > 0.0)
        polyline(os, top, {top.x_lo, top.x_hi}, {0.0, 0.0}, "gray", 0.0);
    double off = 320.0;
    draw_axes(os, bot, "K", "worst-case balance probability", off);
    polyline(os, bot, worst.k_grid, worst.p_tilde, "firebrick", off);
    os << "</svg>\n";
    return os.str();
}

std::string render_calibrated_svg(const std::vector<CalibratedSet>& sets, double ate_hat) {
    std::vector<double> xs, lo, hi;
    for (const auto& s : sets) {
        xs.push_back(s.one_minus_alpha);
        lo.push_back(s.set.lo);
        hi.push_back(s.set.hi);
    }
    Panel p;
    p.x_lo = *std::min_element(xs.begin(), xs.end());
    p.x_hi = *std::max_element(xs.begin(), xs.end());
    p.y_lo = *std::min_element(lo.begin(), lo.end());
    p.y_hi = *std::max_element(hi.begin(), hi.end());
    double pad = 0.05 * (p.y_hi - p.y_lo + 1e-12);
    p.y_lo -= pad;
    p.y_hi += pad;
    p.py = 360;

    std::ostringstream os;
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='680' height='440'>\n";
    draw_axes(os, p, "1 - alpha", "bounds on ATE", 0.0);
    band(os, p, xs, lo, hi, 0.0);
    polyline(os, p, xs, lo, "steelblue", 0.0);
    polyline(os, p, xs, hi, "steelblue", 0.0);
    polyline(os, p, {p.x_lo, p.x_hi}, {ate_hat, ate_hat}, "black", 0.0);
    if (p.y_lo < 0.0 && p.y_hi > 0.0)
        polyline(os, p, {p.x_lo, p.x_hi}, {0.0, 0.0}, "gray", 0.0);
    os << "</svg>\n";
    return os.str();
}

AteAnalysis run_ate_analysis(const ObservedData& data, const RunConfig& cfg) {
    AteAnalysis out;
    out.bounds = bounds_curve(data, cfg.k_grid, cfg.restrictions);

    CompletionProblem problem;
    problem.data = data;
    problem.restrictions = cfg.restrictions;
    DesignSpec design = resolve_design(data, cfg, data.n1);
    problem.batch = make_batch(design);
    if (cfg.lambda) {
        problem.covariate_lambda = cfg.lambda;
        problem.q_matrix = build_q(data);
    }
    if (cfg.inner == InnerSolver::brute) {
        out.worst = pbar_curve_brute(problem, out.bounds.k_grid, cfg.brute_points_per_cell);
    } else {
        SolverConfig solver = cfg.solver;
        solver.threads = cfg.threads;
        out.worst = pbar_curve(problem, out.bounds.k_grid, solver);
    }

    const std::vector<double>& alphas = cfg.alphas;
    out.sets = calibrated_sets(out.bounds, out.worst, alphas);
    out.pbar_at_breakdown = strength_of_evidence(out.bounds, out.worst);
    return out;
}

namespace {

nlohmann::json summary_json(const AteAnalysis& a, const std::string& estimand) {
    nlohmann::json j;
    j["estimand"] = estimand;
    j["ate_hat"] = a.bounds.ate_hat;
    if (std::isfinite(a.bounds.breakdown))
        j["k_bp"] = a.bounds.breakdown;
    else
        j["k_bp"] = "inf";
    j["k_bar"] = a.bounds.k_bar;
    j["pbar_at_kbp"] = a.pbar_at_breakdown;
    j["theta_inf"] = {a.bounds.intervals.back().lo, a.bounds.intervals.back().hi};
    nlohmann::json table = nlohmann::json::array();
    for (double level : {0.5, 0.8, 0.9, 0.95, 0.99}) {
        for (const auto& s : a.sets) {
            if (std::fabs(s.one_minus_alpha - level) < 1e-9) {
                table.push_back({{"one_minus_alpha", s.one_minus_alpha},
                                 {"k_alpha", s.k},
                                 {"lb", s.set.lo},
                                 {"ub", s.set.hi},
                                 {"saturated", s.saturated}});
                break;
            }
        }
    }
    j["k_alpha_table"] = table;
    return j;
}

int finish_bundle(const RunConfig& cfg, const AteAnalysis& a, const std::string& estimand) {
    namespace fs = std::filesystem;
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "bounds_curve.csv", a.bounds.to_csv());
    write_file(dir / "pbar_curve.csv", a.worst.to_csv());
    write_file(dir / "calibrated_sets.csv", csv_calibrated(a.sets));
    write_file(dir / "summary.json", summary_json(a, estimand).dump(2) + "\n");
    write_file(dir / "solver_diagnostics.json", a.worst.diagnostics_json() + "\n");
    write_file(dir / "resolved_config.json", cfg.to_json() + "\n");
    write_file(dir / "figure_sensitivity.svg", render_sensitivity_svg(a.bounds, a.worst));
    write_file(dir / "figure_calibrated.svg", render_calibrated_svg(a.sets, a.bounds.ate_hat));
    if (a.worst.status == CurveStatus::falsified) return 3;
    if (a.worst.budget_exceeded) return 4;
    return 0;
}

int cmd_analyze(const RunConfig& cfg) {
    ObservedData data = load_csv(cfg.data_path, cfg.schema);
    AteAnalysis a = run_ate_analysis(data, cfg);
    return finish_bundle(cfg, a, "ate");
}

int cmd_iv(const RunConfig& cfg) {
    CsvSchema schema = cfg.schema;
    if (schema.z_col.empty()) schema.z_col = "z";
    LoadedCsv loaded = load_csv_full(cfg.data_path, schema);
    IvData iv;
    iv.y = loaded.data.y;
    iv.x = loaded.data.x;
    iv.z = loaded.z;
    iv.y_min = loaded.data.y_min;
    iv.y_max = loaded.data.y_max;
    iv.validate();

    double w = wald(iv);
    double pi = iv.first_stage();

    // Mirror the ATE bundle with the LATT identified set per K.
    AteAnalysis a;
    ObservedData shell = loaded.data;
    a.bounds.ate_hat = w;
    a.bounds.breakdown = w == 0.0 ? 0.0 : std::fabs(w) * pi;
    a.bounds.k_grid = build_k_grid(shell, cfg.k_grid, a.bounds.breakdown);
    for (double k : a.bounds.k_grid) a.bounds.intervals.push_back(latt_bounds(iv, k));
    a.bounds.k_bar = shell.spread();

    DesignSpec z_design = cfg.design;
    if (z_design.n_units == 0) z_design.n_units = iv.n();
    if (z_design.n_treated_or_sampled == 0) z_design.n_treated_or_sampled = iv.n_instrument_on();
    if (z_design.source == AssignmentSource::exhaustive &&
        count_combinations(z_design.n_units, z_design.n_treated_or_sampled) >
            z_design.enumeration_cap) {
        z_design.source = AssignmentSource::monte_carlo;
        if (z_design.seed == 0) z_design.seed = cfg.solver.seed == 0 ? 1 : cfg.solver.seed;
    }
    if (cfg.inner == InnerSolver::brute) {
        a.worst = iv_pbar_curve_brute(iv, z_design, a.bounds.k_grid, cfg.brute_points_per_cell);
    } else {
        SolverConfig solver = cfg.solver;
        solver.threads = cfg.threads;
        a.worst = iv_pbar_curve(iv, z_design, a.bounds.k_grid, solver);
    }
    a.sets = calibrated_sets(a.bounds, a.worst, cfg.alphas);
    a.pbar_at_breakdown = strength_of_evidence(a.bounds, a.worst);
    return finish_bundle(cfg, a, "latt");
}

int cmd_survey(const RunConfig& cfg) {
    CsvSchema schema = cfg.schema;
    schema.x_col.clear();  // outcome-only file
    ObservedData sampled = load_csv(cfg.data_path, schema);
    int pop_n = cfg.pop_size;
    if (pop_n <= sampled.n())
        throw std::invalid_argument("survey mode requires pop_size larger than the sample");

    AteAnalysis a;
    double mean = vec_mean(sampled.y);
    a.bounds.ate_hat = mean;
    {
        auto contains_zero = [&](double k) {
            Interval iv = survey_bounds(sampled, k, pop_n);
            return !iv.empty && iv.lo <= 0.0 && iv.hi >= 0.0;
        };
        if (mean == 0.0 || contains_zero(0.0)) {
            a.bounds.breakdown = 0.0;
        } else if (!contains_zero(sampled.spread())) {
            a.bounds.breakdown = k_infinity;
        } else {
            double lo = 0.0, hi = sampled.spread();
            for (int it = 0; it < 200; ++it) {
                double mid = 0.5 * (lo + hi);
                if (mid == lo || mid == hi) break;
                (contains_zero(mid) ? hi : lo) = mid;
            }
            a.bounds.breakdown = 0.5 * (lo + hi);
        }
    }
    a.bounds.k_grid = build_k_grid(sampled, cfg.k_grid, a.bounds.breakdown);
    for (double k : a.bounds.k_grid) a.bounds.intervals.push_back(survey_bounds(sampled, k, pop_n));
    a.bounds.k_bar = sampled.spread();

    // Completion problem over the full population: sampled rows fixed, the
    // rest free inside the global bounds, re-randomized by simple random
    // sampling of n out of pop_size.
    ObservedData full;
    full.ids.resize(pop_n);
    full.y.resize(pop_n);
    full.x.resize(pop_n);
    full.y_min.resize(pop_n);
    full.y_max.resize(pop_n);
    double gmin = sampled.global_y_min(), gmax = sampled.global_y_max();
    for (int i = 0; i < pop_n; ++i) {
        full.ids[i] = i;
        bool obs = i < sampled.n();
        full.x[i] = obs ? 1 : 0;
        full.y[i] = obs ? sampled.y[i] : 0.5 * (gmin + gmax);
        full.y_min[i] = obs ? sampled.y_min[i] : gmin;
        full.y_max[i] = obs ? sampled.y_max[i] : gmax;
    }
    full.n1 = sampled.n();
    full.n0 = pop_n - sampled.n();

    DesignSpec design = cfg.design;
    design.kind = DesignKind::simple_random_sampling;
    design.n_units = pop_n;
    design.n_treated_or_sampled = sampled.n();
    if (design.source == AssignmentSource::exhaustive &&
        count_combinations(pop_n, sampled.n()) > design.enumeration_cap) {
        design.source = AssignmentSource::monte_carlo;
        if (design.seed == 0) design.seed = cfg.solver.seed == 0 ? 1 : cfg.solver.seed;
    }
    CompletionProblem problem;
    problem.data = full;
    problem.batch = make_batch(design);
    problem.single_arm = true;
    problem.single_arm_value = 1;
    if (cfg.inner == InnerSolver::brute) {
        a.worst = pbar_curve_brute(problem, a.bounds.k_grid, cfg.brute_points_per_cell);
    } else {
        SolverConfig solver = cfg.solver;
        solver.threads = cfg.threads;
        a.worst = pbar_curve(problem, a.bounds.k_grid, solver);
    }
    a.sets = calibrated_sets(a.bounds, a.worst, cfg.alphas);
    a.pbar_at_breakdown = strength_of_evidence(a.bounds, a.worst);
    return finish_bundle(cfg, a, "population_mean");
}

int cmd_coverage(const RunConfig& cfg) {
    Population pop;
    if (cfg.fixture == "dgp1" || cfg.fixture == "dgp2" || cfg.fixture == "dgp3") {
        int idx = cfg.fixture[3] - '1';
        pop = science_tables_appendix()[static_cast<std::size_t>(idx)];
    } else {
        std::ifstream in(cfg.fixture);
        if (!in) throw std::runtime_error("cannot open fixture '" + cfg.fixture + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        pop = population_from_json(ss.str());
    }
    CoverageOptions opt;
    opt.methods.clear();
    for (const std::string& m : cfg.coverage_methods) {
        if (m == "neyman")
            opt.methods.push_back(CiMethod::neyman);
        else if (m == "fisher")
            opt.methods.push_back(CiMethod::fisher);
        else if (m == "hoeffding")
            opt.methods.push_back(CiMethod::hoeffding);
        else if (m == "dbsa")
            opt.methods.push_back(CiMethod::dbsa);
        else
            throw std::invalid_argument("unknown coverage method '" + m + "'");
    }
    if (opt.methods.empty()) throw std::invalid_argument("empty coverage method list");
    opt.inner = cfg.inner;
    opt.brute_points_per_cell = cfg.brute_points_per_cell;
    opt.solver = cfg.solver;
    opt.k_grid = cfg.k_grid;
    opt.threads = cfg.threads;

    DesignSpec design;
    design.n_units = pop.n_units;
    design.n_treated_or_sampled = pop.n_treated();
    CoverageReport report = exact_coverage(pop, design, opt);

    namespace fs = std::filesystem;
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "coverage.csv", report.to_csv());
    write_file(dir / "coverage.json", report.to_json() + "\n");
    write_file(dir / "resolved_config.json", cfg.to_json() + "\n");
    return 0;
}

int cmd_export_milp(const RunConfig& cfg) {
    ObservedData data = load_csv(cfg.data_path, cfg.schema);
    CompletionProblem problem;
    problem.data = data;
    problem.batch = make_batch(resolve_design(data, cfg, data.n1));
    std::string lp = export_milp(problem, cfg.milp_k);
    namespace fs = std::filesystem;
    fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_file(dir / "model.lp", lp);
    write_file(dir / "resolved_config.json", cfg.to_json() + "\n");
    return 0;
}

}  // namespace

int run_command(const RunConfig& cfg) {
    if (cfg.mode == "ate") return cmd_analyze(cfg);
    if (cfg.mode == "iv") return cmd_iv(cfg);
    if (cfg.mode == "survey") return cmd_survey(cfg);
    if (cfg.mode == "coverage") return cmd_coverage(cfg);
    if (cfg.mode == "milp") return cmd_export_milp(cfg);
    throw std::invalid_argument("unknown mode '" + cfg.mode + "'");
}

std::string RunConfig::to_json() const {
    nlohmann::json j;
    j["mode"] = mode;
    j["data"] = data_path;
    j["schema"] = {{"y", schema.y_col},
                   {"x", schema.x_col},
                   {"z", schema.z_col},
                   {"w", schema.w_cols},
                   {"s", schema.s_col},
                   {"ymin_col", schema.y_min_col},
                   {"ymax_col", schema.y_max_col},
                   {"y_min", schema.global_y_min},
                   {"y_max", schema.global_y_max}};
    j["design"] = {{"kind", design.kind == DesignKind::uniform_randomization
                                ? "uniform_randomization"
                                : "simple_random_sampling"},
                   {"n", design.n_units},
                   {"n1", design.n_treated_or_sampled},
                   {"source", design.source == AssignmentSource::exhaustive ? "exhaustive"
                                                                            : "monte_carlo"},
                   {"batch", design.batch_size},
                   {"seed", design.seed},
                   {"cap", design.enumeration_cap}};
    j["k_grid"] = {{"count", k_grid.count}, {"k_max", k_grid.k_max}};
    j["alphas"] = alphas;
    j["solver"] = {{"population", solver.ga.population_size},
                   {"generations", solver.ga.generations},
                   {"crossover_rate", solver.ga.crossover_rate},
                   {"mutation_sigma", solver.ga.mutation_sigma},
                   {"mutation_decay", solver.ga.mutation_decay},
                   {"elitism", solver.ga.elitism_count},
                   {"tournament", solver.ga.tournament_size},
                   {"restarts", solver.restarts},
                   {"seed", solver.seed},
                   {"tolerance", solver.tolerance},
                   {"time_budget_ms", solver.time_budget_ms}};
    j["inner"] = inner == InnerSolver::ga ? "ga" : "brute";
    j["brute_points_per_cell"] = brute_points_per_cell;
    j["restriction"] = [&] {
        switch (restrictions.kind) {
            case RestrictionSet::Kind::uniform_bounds: return std::string("uniform_bounds");
            case RestrictionSet::Kind::unit_bounds: return std::string("unit_bounds");
            case RestrictionSet::Kind::bounded_unit_effect:
                return "bounded_unit_effect:" + std::to_string(restrictions.m);
            case RestrictionSet::Kind::bounded_total_effect:
                return "bounded_total_effect:" + std::to_string(restrictions.m);
            case RestrictionSet::Kind::variance_cap:
                return "variance_cap:" + std::to_string(restrictions.m);
        }
        return std::string("unit_bounds");
    }();
    if (lambda) j["lambda"] = *lambda;
    j["covariates"] = covariate_cols;
    j["pop_size"] = pop_size;
    j["survey_k"] = std::isinf(survey_k) ? -1.0 : survey_k;
    j["milp_k"] = milp_k;
    j["fixture"] = fixture;
    j["coverage_methods"] = coverage_methods;
    j["out"] = out_dir;
    j["threads"] = threads;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunConfig c;
    c.alphas = default_alphas();
    auto get = [&](const char* key, auto def) {
        using T = decltype(def);
        return j.contains(key) ? j[key].get<T>() : def;
    };
    c.mode = get("mode", std::string("ate"));
    c.data_path = get("data", std::string());
    if (j.contains("schema")) {
        const auto& s = j["schema"];
        auto sget = [&](const char* key, auto def) {
            using T = decltype(def);
            return s.contains(key) ? s[key].get<T>() : def;
        };
        c.schema.y_col = sget("y", std::string("y"));
        c.schema.x_col = sget("x", std::string("x"));
        c.schema.z_col = sget("z", std::string());
        c.schema.w_cols = sget("w", std::vector<std::string>{});
        c.schema.s_col = sget("s", std::string());
        c.schema.y_min_col = sget("ymin_col", std::string());
        c.schema.y_max_col = sget("ymax_col", std::string());
        c.schema.global_y_min = sget("y_min", 0.0);
        c.schema.global_y_max = sget("y_max", 1.0);
    }
    if (j.contains("design")) {
        const auto& d = j["design"];
        auto dget = [&](const char* key, auto def) {
            using T = decltype(def);
            return d.contains(key) ? d[key].get<T>() : def;
        };
        c.design.kind = dget("kind", std::string("uniform_randomization")) ==
                                "simple_random_sampling"
                            ? DesignKind::simple_random_sampling
                            : DesignKind::uniform_randomization;
        c.design.n_units = dget("n", 0);
        c.design.n_treated_or_sampled = dget("n1", 0);
        c.design.source = dget("source", std::string("exhaustive")) == "monte_carlo"
                              ? AssignmentSource::monte_carlo
                              : AssignmentSource::exhaustive;
        c.design.batch_size = dget("batch", 1600);
        c.design.seed = dget("seed", static_cast<std::uint64_t>(0));
        c.design.enumeration_cap = dget("cap", static_cast<std::uint64_t>(5000000));
    }
    if (j.contains("k_grid")) {
        c.k_grid.count = j["k_grid"].value("count", 201);
        c.k_grid.k_max = j["k_grid"].value("k_max", -1.0);
    }
    if (j.contains("alphas") && !j["alphas"].empty())
        c.alphas = j["alphas"].get<std::vector<double>>();
    if (j.contains("solver")) {
        const auto& s = j["solver"];
        c.solver.ga.population_size = s.value("population", 200);
        c.solver.ga.generations = s.value("generations", 300);
        c.solver.ga.crossover_rate = s.value("crossover_rate", 0.9);
        c.solver.ga.mutation_sigma = s.value("mutation_sigma", 0.1);
        c.solver.ga.mutation_decay = s.value("mutation_decay", 0.99);
        c.solver.ga.elitism_count = s.value("elitism", 4);
        c.solver.ga.tournament_size = s.value("tournament", 4);
        c.solver.restarts = s.value("restarts", 5);
        c.solver.seed = s.value("seed", static_cast<std::uint64_t>(0));
        c.solver.tolerance = s.value("tolerance", 0.02);
        c.solver.time_budget_ms = s.value("time_budget_ms", 0.0);
    }
    c.inner = get("inner", std::string("ga")) == "brute" ? InnerSolver::brute : InnerSolver::ga;
    c.brute_points_per_cell = get("brute_points_per_cell", 5);
    std::string r = get("restriction", std::string("unit_bounds"));
    if (r == "uniform_bounds") {
        c.restrictions = RestrictionSet::uniform_bounds();
    } else if (r.rfind("bounded_unit_effect:", 0) == 0) {
        c.restrictions = RestrictionSet::bounded_unit_effect(std::stod(r.substr(20)));
    } else if (r.rfind("bounded_total_effect:", 0) == 0) {
        c.restrictions = RestrictionSet::bounded_total_effect(std::stod(r.substr(21)));
    } else if (r.rfind("variance_cap:", 0) == 0) {
        c.restrictions = RestrictionSet::variance_cap(std::stod(r.substr(13)));
    } else {
        c.restrictions = RestrictionSet::unit_bounds();
    }
    if (j.contains("lambda") && !j["lambda"].is_null()) c.lambda = j["lambda"].get<double>();
    c.covariate_cols = get("covariates", std::vector<std::string>{});
    c.pop_size = get("pop_size", 0);
    double sk = get("survey_k", -1.0);
    c.survey_k = sk < 0.0 ? k_infinity : sk;
    c.milp_k = get("milp_k", 0.1);
    c.fixture = get("fixture", std::string("dgp1"));
    c.coverage_methods = get("coverage_methods",
                             std::vector<std::string>{"neyman", "fisher", "dbsa"});
    c.out_dir = get("out", std::string("out"));
    c.threads = get("threads", 1);
    return c;
}

}  // namespace dbsa
