#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "dbsa/pipeline.hpp"

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "dbsa: finite-population sensitivity analysis for treatment effects.\n"
        "Computes identified-set curves, worst-case balance probabilities, and\n"
        "calibrated uncertainty intervals, plus reference confidence intervals\n"
        "and exact coverage simulation."};

    std::string config_path, data_path, out_dir, mode, design_str, inner_str, fixture;
    std::string alphas_str, methods_str, lambda_str, covariates_str, restriction_str;
    int k_grid_count = -1, batch = -1, threads = -1, pop_size = -1, brute_points = -1;
    double k_max = -2.0, milp_k = -1.0;
    long long seed = -1;

    app.add_option("--config", config_path, "JSON config file; flags override its entries");
    app.add_option("--data", data_path, "input CSV path");
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--mode", mode, "ate | iv | survey | coverage | milp");
    app.add_option("--k-grid", k_grid_count, "number of K grid points");
    app.add_option("--k-max", k_max, "K grid upper end (default: outcome spread)");
    app.add_option("--alphas", alphas_str, "comma-separated alpha levels");
    app.add_option("--batch", batch, "Monte Carlo assignment batch size");
    app.add_option("--seed", seed, "seed for samplers and the solver");
    app.add_option("--design", design_str,
                   "exhaustive | monte_carlo (auto-downgrades above the enumeration cap)");
    app.add_option("--inner", inner_str, "completion solver: ga | brute");
    app.add_option("--brute-points", brute_points, "grid points per cell for the brute solver");
    app.add_option("--lambda", lambda_str, "predictive-covariates lower bound in [0,1]");
    app.add_option("--covariates", covariates_str, "comma-separated covariate column names");
    app.add_option("--restriction", restriction_str,
                   "unit_bounds | uniform_bounds | bounded_unit_effect:M | "
                   "bounded_total_effect:M | variance_cap:M");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--pop-size", pop_size, "population size (survey mode)");
    app.add_option("--milp-k", milp_k, "balance threshold K for the exported program");
    app.add_option("--fixture", fixture, "coverage fixture: dgp1|dgp2|dgp3 or a population JSON");
    app.add_option("--methods", methods_str, "coverage methods, comma-separated");

    CLI11_PARSE(app, argc, argv);

    try {
        dbsa::RunConfig cfg = config_path.empty()
                                  ? dbsa::RunConfig::from_json("{}")
                                  : dbsa::RunConfig::from_json(read_file(config_path));
        if (!data_path.empty()) cfg.data_path = data_path;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        if (!mode.empty()) cfg.mode = mode;
        if (k_grid_count > 0) cfg.k_grid.count = k_grid_count;
        if (k_max > -1.5) cfg.k_grid.k_max = k_max;
        if (batch > 0) cfg.design.batch_size = batch;
        if (seed >= 0) {
            cfg.solver.seed = static_cast<std::uint64_t>(seed);
            cfg.design.seed = static_cast<std::uint64_t>(seed);
        }
        if (!design_str.empty())
            cfg.design.source = design_str == "monte_carlo" ? dbsa::AssignmentSource::monte_carlo
                                                            : dbsa::AssignmentSource::exhaustive;
        if (!inner_str.empty())
            cfg.inner = inner_str == "brute" ? dbsa::InnerSolver::brute : dbsa::InnerSolver::ga;
        if (brute_points > 1) cfg.brute_points_per_cell = brute_points;
        if (!lambda_str.empty()) cfg.lambda = std::stod(lambda_str);
        if (!covariates_str.empty()) {
            cfg.covariate_cols.clear();
            std::stringstream ss(covariates_str);
            std::string tok;
            while (std::getline(ss, tok, ',')) cfg.covariate_cols.push_back(tok);
            cfg.schema.w_cols = cfg.covariate_cols;
        }
        if (!restriction_str.empty()) {
            using R = dbsa::RestrictionSet;
            if (restriction_str == "uniform_bounds")
                cfg.restrictions = R::uniform_bounds();
            else if (restriction_str == "unit_bounds")
                cfg.restrictions = R::unit_bounds();
            else if (restriction_str.rfind("bounded_unit_effect:", 0) == 0)
                cfg.restrictions = R::bounded_unit_effect(std::stod(restriction_str.substr(20)));
            else if (restriction_str.rfind("bounded_total_effect:", 0) == 0)
                cfg.restrictions = R::bounded_total_effect(std::stod(restriction_str.substr(21)));
            else if (restriction_str.rfind("variance_cap:", 0) == 0)
                cfg.restrictions = R::variance_cap(std::stod(restriction_str.substr(13)));
            else
                throw std::invalid_argument("unknown restriction '" + restriction_str + "'");
        }
        if (threads > 0) cfg.threads = threads;
        if (pop_size > 0) cfg.pop_size = pop_size;
        if (milp_k >= 0.0) cfg.milp_k = milp_k;
        if (!fixture.empty()) cfg.fixture = fixture;
        if (!alphas_str.empty()) {
            cfg.alphas.clear();
            std::stringstream ss(alphas_str);
            std::string tok;
            while (std::getline(ss, tok, ',')) cfg.alphas.push_back(std::stod(tok));
        }
        if (!methods_str.empty()) {
            cfg.coverage_methods.clear();
            std::stringstream ss(methods_str);
            std::string tok;
            while (std::getline(ss, tok, ',')) cfg.coverage_methods.push_back(tok);
        }
        if (cfg.data_path.empty() && cfg.mode != "coverage")
            throw std::invalid_argument("--data is required for mode '" + cfg.mode + "'");

        int code = dbsa::run_command(cfg);
        if (code == 3) std::cerr << "model falsified by the data\n";
        if (code == 4) std::cerr << "solver time budget exceeded\n";
        return code;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
