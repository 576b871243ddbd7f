#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dbsa/util.hpp"

namespace dbsa {

// Full science table: both potential outcomes for every unit, realized
// treatment, optional covariates and sampling indicators, and per-unit
// outcome bounds. Known in full only for simulations and fixtures.
struct Population {
    int n_units = 0;
    std::vector<double> y1;     // treated potential outcomes
    std::vector<double> y0;     // untreated potential outcomes
    std::vector<int> x;         // realized treatment, 0/1
    std::optional<Matrix> w;    // covariates, n_units x d_w
    std::vector<int> s;         // sampling indicators, default all 1
    std::vector<double> y_min;  // per-unit lower outcome bound
    std::vector<double> y_max;  // per-unit upper outcome bound

    double ate() const;
    int n_treated() const;
    void validate() const;
};

// The researcher-visible matrix: realized outcomes for sampled units only.
struct ObservedData {
    std::vector<int> ids;  // row indices into the source population
    std::vector<double> y;
    std::vector<int> x;
    std::optional<Matrix> w;
    std::vector<double> y_min;
    std::vector<double> y_max;
    int n1 = 0;
    int n0 = 0;

    int n() const { return static_cast<int>(y.size()); }
    bool degenerate() const { return n1 == 0 || n0 == 0; }
    double mean_treated() const;
    double mean_control() const;
    double ate_hat() const { return mean_treated() - mean_control(); }
    double global_y_min() const;
    double global_y_max() const;
    double spread() const { return global_y_max() - global_y_min(); }
    void validate() const;
};

// Simulation stream: Y_i(x) = T(beta * x + U_i) with T the standard normal
// cdf and U_i a seeded iid standard normal stream of length n_max. The first
// half of the stream is treated, so size-n populations are per-arm prefixes
// of the size-n_max one.
struct DgpSpec {
    double beta = 0.9648;
    double mu1 = 0.75;   // limit mean of Y(1)
    double mu0 = 0.5;    // limit mean of Y(0)
    double rho = 0.5;    // limit treatment share
    std::uint64_t seed = 1;
    int n_max = 400;
};

// Column mapping for load_csv. When ymin/ymax columns are absent the global
// bounds apply to every row.
struct CsvSchema {
    std::string y_col = "y";
    std::string x_col = "x";
    std::string z_col;                     // optional instrument column
    std::vector<std::string> w_cols;       // optional covariate columns
    std::string s_col;                     // optional sampling column
    std::string y_min_col;                 // optional per-unit bound columns
    std::string y_max_col;
    double global_y_min = 0.0;
    double global_y_max = 1.0;
};

// Observed data plus the optional instrument column, for IV analyses.
struct LoadedCsv {
    ObservedData data;
    std::vector<int> z;  // empty unless schema.z_col was set
};

ObservedData load_csv(const std::string& path, const CsvSchema& schema);
LoadedCsv load_csv_full(const std::string& path, const CsvSchema& schema);

// Projection of a science table onto what the researcher sees.
ObservedData make_data(const Population& pop);

// The 6-unit example population; true ATE 0.55.
Population toy_population();

Population generate_dgp(const DgpSpec& spec, int n);

// The three N=10 science tables used by the coverage simulations.
std::vector<Population> science_tables_appendix();

std::string population_to_json(const Population& pop);
Population population_from_json(const std::string& text);

}  // namespace dbsa
