#include "dbsa/population.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace dbsa {

double Population::ate() const {
    double s1 = 0.0, s0 = 0.0;
    for (int i = 0; i < n_units; ++i) {
        s1 += y1[i];
        s0 += y0[i];
    }
    return (s1 - s0) / n_units;
}

int Population::n_treated() const {
    int c = 0;
    for (int v : x) c += v;
    return c;
}

void Population::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("Population: " + msg); };
    std::size_t n = static_cast<std::size_t>(n_units);
    if (n_units <= 0) fail("n_units must be positive");
    if (y1.size() != n || y0.size() != n || x.size() != n) fail("vector lengths disagree with n_units");
    if (y_min.size() != n || y_max.size() != n) fail("bound vectors must have length n_units");
    if (!s.empty() && s.size() != n) fail("sampling vector length disagrees with n_units");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(y_min[i] < y_max[i]) || !std::isfinite(y_min[i]) || !std::isfinite(y_max[i]))
            fail("unit " + std::to_string(i + 1) + ": bounds must satisfy y_min < y_max and be finite");
        if (x[i] != 0 && x[i] != 1) fail("unit " + std::to_string(i + 1) + ": x must be 0 or 1");
        if (y1[i] < y_min[i] || y1[i] > y_max[i])
            fail("unit " + std::to_string(i + 1) + ": y1 outside bounds");
        if (y0[i] < y_min[i] || y0[i] > y_max[i])
            fail("unit " + std::to_string(i + 1) + ": y0 outside bounds");
        if (!s.empty() && s[i] != 0 && s[i] != 1)
            fail("unit " + std::to_string(i + 1) + ": s must be 0 or 1");
    }
    if (w && (w->rows != n)) fail("covariate matrix row count disagrees with n_units");
}

double ObservedData::mean_treated() const {
    if (n1 == 0) throw std::domain_error("ObservedData: no treated units");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (x[i] == 1) s += y[i];
    return s / n1;
}

double ObservedData::mean_control() const {
    if (n0 == 0) throw std::domain_error("ObservedData: no control units");
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (x[i] == 0) s += y[i];
    return s / n0;
}

double ObservedData::global_y_min() const {
    double v = y_min.empty() ? 0.0 : y_min[0];
    for (double b : y_min) v = std::min(v, b);
    return v;
}

double ObservedData::global_y_max() const {
    double v = y_max.empty() ? 0.0 : y_max[0];
    for (double b : y_max) v = std::max(v, b);
    return v;
}

void ObservedData::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("ObservedData: " + msg); };
    std::size_t n = y.size();
    if (x.size() != n || y_min.size() != n || y_max.size() != n || ids.size() != n)
        fail("vector lengths disagree");
    int c1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] != 0 && x[i] != 1) fail("row " + std::to_string(i + 1) + ": x must be 0 or 1");
        c1 += x[i];
        if (!(y_min[i] < y_max[i]))
            fail("row " + std::to_string(i + 1) + ": bounds must satisfy y_min < y_max");
        if (y[i] < y_min[i] || y[i] > y_max[i])
            fail("row " + std::to_string(i + 1) + ": y outside bounds");
    }
    if (c1 != n1 || n1 + n0 != static_cast<int>(n)) fail("treated/control counts inconsistent");
    if (w && w->rows != n) fail("covariate matrix row count disagrees");
}

ObservedData make_data(const Population& pop) {
    pop.validate();
    ObservedData out;
    std::size_t d_w = pop.w ? pop.w->cols : 0;
    std::vector<double> wrows;
    for (int i = 0; i < pop.n_units; ++i) {
        if (!pop.s.empty() && pop.s[i] == 0) continue;
        out.ids.push_back(i);
        out.y.push_back(pop.x[i] == 1 ? pop.y1[i] : pop.y0[i]);
        out.x.push_back(pop.x[i]);
        out.y_min.push_back(pop.y_min[i]);
        out.y_max.push_back(pop.y_max[i]);
        if (d_w > 0)
            for (std::size_t j = 0; j < d_w; ++j) wrows.push_back((*pop.w)(i, j));
    }
    out.n1 = 0;
    for (int v : out.x) out.n1 += v;
    out.n0 = static_cast<int>(out.x.size()) - out.n1;
    if (d_w > 0) {
        Matrix m(out.y.size(), d_w);
        m.data = wrows;
        out.w = std::move(m);
    }
    return out;
}

Population toy_population() {
    Population p;
    p.n_units = 6;
    p.y0 = {0.1, 0.0, 0.2, 0.4, 0.1, 0.2};
    p.y1 = {0.8, 0.5, 0.7, 0.6, 0.9, 0.8};
    p.x = {0, 0, 0, 1, 1, 1};
    p.s = std::vector<int>(6, 1);
    p.y_min = std::vector<double>(6, 0.0);
    p.y_max = std::vector<double>(6, 1.0);
    return p;
}

Population generate_dgp(const DgpSpec& spec, int n) {
    if (n <= 0 || n % 2 != 0)
        throw std::invalid_argument("generate_dgp: n must be a positive even number");
    if (spec.n_max <= 0 || spec.n_max % 2 != 0)
        throw std::invalid_argument("generate_dgp: n_max must be a positive even number");
    if (n > spec.n_max)
        throw std::invalid_argument("generate_dgp: n exceeds the seed stream length n_max");

    // One latent draw per unit id, counter-based so any prefix is stable.
    auto latent = [&](int unit) {
        std::uint64_t bits = splitmix64(mix_seed(spec.seed, static_cast<std::uint64_t>(unit)));
        double u = (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
        return normal_quantile(u);
    };

    Population p;
    p.n_units = n;
    int half = n / 2;
    int offset = spec.n_max / 2;  // untreated units live in the second half of the stream
    for (int j = 0; j < n; ++j) {
        int unit = (j < half) ? j : offset + (j - half);
        double u = latent(unit);
        p.y0.push_back(normal_cdf(u));
        p.y1.push_back(normal_cdf(spec.beta + u));
        p.x.push_back(j < half ? 1 : 0);
    }
    p.s = std::vector<int>(n, 1);
    p.y_min = std::vector<double>(n, 0.0);
    p.y_max = std::vector<double>(n, 1.0);
    return p;
}

std::vector<Population> science_tables_appendix() {
    auto build = [](const std::vector<double>& y0, const std::vector<double>& y1) {
        Population p;
        p.n_units = 10;
        p.y0 = y0;
        p.y1 = y1;
        p.x = {1, 1, 1, 1, 1, 0, 0, 0, 0, 0};
        p.s = std::vector<int>(10, 1);
        p.y_min = std::vector<double>(10, 0.0);
        p.y_max = std::vector<double>(10, 1.0);
        return p;
    };
    std::vector<Population> out;
    // Heterogeneous effects.
    out.push_back(build(
        {0.706, 0.062, 0.420, 0.309, 0.649, 0.660, 0.657, 0.358, 0.274, 0.278},
        {0.931, 0.275, 0.770, 0.671, 0.907, 0.912, 0.911, 0.719, 0.634, 0.638}));
    // Binary outcomes, a single unit with an effect.
    out.push_back(build({0, 0, 0, 0, 0, 0, 0, 0, 0, 0},
                        {0, 0, 0, 0, 0, 0, 0, 0, 0, 1}));
    // Beta-like untreated outcomes, a single unit with an effect.
    out.push_back(build(
        {0.0499, 0.0646, 0.2540, 0.0811, 0.0847, 0.1080, 0.0269, 0.0450, 0.0547, 0.1040},
        {0.0499, 0.0646, 0.2540, 0.0811, 0.0847, 0.1080, 0.0269, 0.0450, 0.0547, 1.0}));
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        std::size_t a = f.find_first_not_of(" \t");
        std::size_t b = f.find_last_not_of(" \t");
        f = (a == std::string::npos) ? std::string() : f.substr(a, b - a + 1);
    }
    return out;
}

double parse_number(const std::string& field, int row, const std::string& col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(field, &pos);
        if (pos != field.size()) throw std::invalid_argument("trailing characters");
        if (std::isnan(v)) throw std::invalid_argument("NaN");
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("load_csv: row " + std::to_string(row) + ", column '" + col +
                                    "': invalid or missing numeric value '" + field + "'");
    }
}

}  // namespace

LoadedCsv load_csv_full(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_csv: cannot open '" + path + "'");

    std::string header;
    if (!std::getline(in, header)) throw std::runtime_error("load_csv: empty file '" + path + "'");
    std::vector<std::string> cols = split_csv_line(header);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < cols.size(); ++i) index[cols[i]] = i;

    auto col_of = [&](const std::string& name, bool required) -> int {
        auto it = index.find(name);
        if (it == index.end()) {
            if (required)
                throw std::runtime_error("load_csv: required column '" + name + "' missing");
            return -1;
        }
        return static_cast<int>(it->second);
    };

    int iy = col_of(schema.y_col, true);
    int ix = schema.x_col.empty() ? -1 : col_of(schema.x_col, true);
    int iz = schema.z_col.empty() ? -1 : col_of(schema.z_col, true);
    int is = schema.s_col.empty() ? col_of("s", false) : col_of(schema.s_col, true);
    int imin = schema.y_min_col.empty() ? col_of("ymin", false) : col_of(schema.y_min_col, true);
    int imax = schema.y_max_col.empty() ? col_of("ymax", false) : col_of(schema.y_max_col, true);
    std::vector<int> iw;
    for (const auto& wc : schema.w_cols) iw.push_back(col_of(wc, true));

    LoadedCsv out;
    ObservedData& d = out.data;
    std::vector<double> wrows;
    std::string line;
    int row = 0;
    int skipped = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++row;
        std::vector<std::string> f = split_csv_line(line);
        auto field = [&](int c) -> const std::string& {
            if (c < 0 || static_cast<std::size_t>(c) >= f.size())
                throw std::invalid_argument("load_csv: row " + std::to_string(row) +
                                            ": too few fields");
            return f[static_cast<std::size_t>(c)];
        };
        if (is >= 0) {
            double sv = parse_number(field(is), row, "s");
            if (sv == 0.0) {
                ++skipped;
                continue;
            }
            if (sv != 1.0)
                throw std::invalid_argument("load_csv: row " + std::to_string(row) +
                                            ": s must be 0 or 1");
        }
        double yv = parse_number(field(iy), row, schema.y_col);
        double xv = 1.0;  // outcome-only files (survey data) treat every row as observed
        if (ix >= 0) {
            xv = parse_number(field(ix), row, schema.x_col);
            if (xv != 0.0 && xv != 1.0)
                throw std::invalid_argument("load_csv: row " + std::to_string(row) +
                                            ": x must be 0 or 1, got '" + field(ix) + "'");
        }
        double lo = imin >= 0 ? parse_number(field(imin), row, "ymin") : schema.global_y_min;
        double hi = imax >= 0 ? parse_number(field(imax), row, "ymax") : schema.global_y_max;
        if (!(lo < hi))
            throw std::invalid_argument("load_csv: row " + std::to_string(row) +
                                        ": bounds must satisfy ymin < ymax");
        if (yv < lo || yv > hi)
            throw std::invalid_argument("load_csv: row " + std::to_string(row) + ": y = " + field(iy) +
                                        " outside bounds [" + std::to_string(lo) + ", " +
                                        std::to_string(hi) + "]");
        d.ids.push_back(row - 1);
        d.y.push_back(yv);
        d.x.push_back(static_cast<int>(xv));
        d.y_min.push_back(lo);
        d.y_max.push_back(hi);
        for (int c : iw) wrows.push_back(parse_number(field(c), row, "w"));
        if (iz >= 0) {
            double zv = parse_number(field(iz), row, schema.z_col);
            if (zv != 0.0 && zv != 1.0)
                throw std::invalid_argument("load_csv: row " + std::to_string(row) +
                                            ": z must be 0 or 1");
            out.z.push_back(static_cast<int>(zv));
        }
    }
    if (d.y.empty()) throw std::runtime_error("load_csv: no data rows in '" + path + "'");
    d.n1 = 0;
    for (int v : d.x) d.n1 += v;
    d.n0 = static_cast<int>(d.x.size()) - d.n1;
    if (ix >= 0 && (d.n1 == 0 || d.n0 == 0))
        throw std::invalid_argument("load_csv: degenerate treatment arm (n1 = " +
                                    std::to_string(d.n1) + " of " + std::to_string(d.n()) +
                                    " rows)");
    if (!iw.empty()) {
        Matrix m(d.y.size(), iw.size());
        m.data = wrows;
        d.w = std::move(m);
    }
    (void)skipped;
    return out;
}

ObservedData load_csv(const std::string& path, const CsvSchema& schema) {
    return load_csv_full(path, schema).data;
}

std::string population_to_json(const Population& pop) {
    nlohmann::json j;
    j["n"] = pop.n_units;
    j["y1"] = pop.y1;
    j["y0"] = pop.y0;
    j["x"] = pop.x;
    if (pop.w) {
        std::vector<std::vector<double>> rows;
        for (std::size_t i = 0; i < pop.w->rows; ++i) {
            std::vector<double> r;
            for (std::size_t k = 0; k < pop.w->cols; ++k) r.push_back((*pop.w)(i, k));
            rows.push_back(std::move(r));
        }
        j["w"] = rows;
    } else {
        j["w"] = nullptr;
    }
    j["s"] = pop.s.empty() ? std::vector<int>(pop.n_units, 1) : pop.s;
    nlohmann::json bounds = nlohmann::json::array();
    for (int i = 0; i < pop.n_units; ++i) bounds.push_back({pop.y_min[i], pop.y_max[i]});
    j["bounds"] = bounds;
    return j.dump(2);
}

Population population_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Population p;
    p.n_units = j.at("n").get<int>();
    p.y1 = j.at("y1").get<std::vector<double>>();
    p.y0 = j.at("y0").get<std::vector<double>>();
    p.x = j.at("x").get<std::vector<int>>();
    if (j.contains("s") && !j["s"].is_null()) p.s = j["s"].get<std::vector<int>>();
    if (j.contains("w") && !j["w"].is_null()) {
        auto rows = j["w"].get<std::vector<std::vector<double>>>();
        if (!rows.empty()) {
            Matrix m(rows.size(), rows[0].size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
            p.w = std::move(m);
        }
    }
    for (const auto& b : j.at("bounds")) {
        p.y_min.push_back(b.at(0).get<double>());
        p.y_max.push_back(b.at(1).get<double>());
    }
    p.validate();
    return p;
}

}  // namespace dbsa
