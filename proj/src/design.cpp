#include "dbsa/design.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace dbsa {

void DesignSpec::validate() const {
    if (n_units <= 0) throw std::invalid_argument("DesignSpec: n_units must be positive");
    if (n_treated_or_sampled <= 0 || n_treated_or_sampled >= n_units)
        throw std::invalid_argument("DesignSpec: need 0 < N1 < N");
    if (source == AssignmentSource::monte_carlo && batch_size < 1)
        throw std::invalid_argument("DesignSpec: batch_size must be >= 1");
}

std::uint64_t count_combinations(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    const std::uint64_t cap = std::numeric_limits<std::int64_t>::max();
    std::uint64_t r = 1;
    for (int i = 1; i <= k; ++i) {
        // r * (n-k+i) / i is always integral; guard the multiply.
        std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
        if (r > cap / num) return cap;
        r = r * num / static_cast<std::uint64_t>(i);
    }
    return r;
}

AssignmentBatch enumerate_assignments(const DesignSpec& spec) {
    spec.validate();
    if (spec.source != AssignmentSource::exhaustive)
        throw std::invalid_argument("enumerate_assignments: spec.source must be exhaustive");
    const int n = spec.n_units;
    const int k = spec.n_treated_or_sampled;
    std::uint64_t total = count_combinations(n, k);
    if (total > spec.enumeration_cap)
        throw std::invalid_argument(
            "enumerate_assignments: C(" + std::to_string(n) + ", " + std::to_string(k) + ") = " +
            std::to_string(total) + " exceeds the enumeration cap of " +
            std::to_string(spec.enumeration_cap) + "; use a Monte Carlo source instead");

    AssignmentBatch batch;
    batch.n = n;
    batch.n1 = k;
    batch.size = static_cast<int>(total);
    batch.source = AssignmentSource::exhaustive;
    batch.treated.reserve(total * static_cast<std::uint64_t>(k));

    std::vector<std::uint32_t> comb(k);
    std::iota(comb.begin(), comb.end(), 0u);
    for (;;) {
        batch.treated.insert(batch.treated.end(), comb.begin(), comb.end());
        // Advance to the next combination in lexicographic order.
        int i = k - 1;
        while (i >= 0 && comb[i] == static_cast<std::uint32_t>(n - k + i)) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < k; ++j) comb[j] = comb[j - 1] + 1;
    }
    return batch;
}

AssignmentBatch sample_assignments(const DesignSpec& spec) {
    spec.validate();
    if (spec.source != AssignmentSource::monte_carlo)
        throw std::invalid_argument("sample_assignments: spec.source must be monte_carlo");
    const int n = spec.n_units;
    const int k = spec.n_treated_or_sampled;
    AssignmentBatch batch;
    batch.n = n;
    batch.n1 = k;
    batch.size = spec.batch_size;
    batch.source = AssignmentSource::monte_carlo;
    batch.seed = spec.seed;
    batch.treated.reserve(static_cast<std::size_t>(spec.batch_size) * k);

    Rng rng(mix_seed(spec.seed, 0x61737369676eULL));
    std::vector<std::uint32_t> pool(n);
    std::vector<std::uint32_t> row(k);
    for (int b = 0; b < spec.batch_size; ++b) {
        std::iota(pool.begin(), pool.end(), 0u);
        for (int i = 0; i < k; ++i) {
            std::uint64_t j = i + rng.below(static_cast<std::uint64_t>(n - i));
            std::swap(pool[i], pool[j]);
        }
        std::copy(pool.begin(), pool.begin() + k, row.begin());
        std::sort(row.begin(), row.end());
        batch.treated.insert(batch.treated.end(), row.begin(), row.end());
    }
    return batch;
}

AssignmentBatch make_batch(const DesignSpec& spec) {
    if (spec.source == AssignmentSource::exhaustive) return enumerate_assignments(spec);
    return sample_assignments(spec);
}

double difference_in_means(std::span<const double> values,
                           std::span<const std::uint32_t> treated_idx, int n) {
    const int n1 = static_cast<int>(treated_idx.size());
    const int n0 = n - n1;
    if (n1 <= 0 || n0 <= 0)
        throw std::invalid_argument("difference_in_means: degenerate margins");
    if (static_cast<int>(values.size()) != n)
        throw std::invalid_argument("difference_in_means: values length disagrees with n");
    double total = 0.0;
    for (double v : values) total += v;
    double s = 0.0;
    for (std::uint32_t i : treated_idx) s += values[i];
    return s / n1 - (total - s) / n0;
}

double difference_in_means(std::span<const double> values, std::span<const int> assignment) {
    if (values.size() != assignment.size())
        throw std::invalid_argument("difference_in_means: length mismatch");
    std::vector<std::uint32_t> idx;
    for (std::size_t i = 0; i < assignment.size(); ++i)
        if (assignment[i] == 1) idx.push_back(static_cast<std::uint32_t>(i));
    return difference_in_means(values, idx, static_cast<int>(values.size()));
}

double balance_probability(const AssignmentBatch& batch, std::span<const double> y1,
                           std::span<const double> y0, double k) {
    if (static_cast<int>(y1.size()) != batch.n || static_cast<int>(y0.size()) != batch.n)
        throw std::invalid_argument("balance_probability: vector length disagrees with batch");
    const double c = 1.0 / batch.n1 + 1.0 / (batch.n - batch.n1);
    double t1 = 0.0, t0 = 0.0;
    for (double v : y1) t1 += v;
    for (double v : y0) t0 += v;
    const double off1 = t1 / (batch.n - batch.n1);
    const double off0 = t0 / (batch.n - batch.n1);
    long count = 0;
    const std::uint32_t* p = batch.treated.data();
    for (int j = 0; j < batch.size; ++j, p += batch.n1) {
        double s1 = 0.0, s0 = 0.0;
        for (int i = 0; i < batch.n1; ++i) {
            s1 += y1[p[i]];
            s0 += y0[p[i]];
        }
        double d1 = c * s1 - off1;
        double d0 = c * s0 - off0;
        if (std::fabs(d1) <= k && std::fabs(d0) <= k) ++count;
    }
    return static_cast<double>(count) / batch.size;
}

double balance_probability_single(const AssignmentBatch& batch, std::span<const double> values,
                                  double k) {
    if (static_cast<int>(values.size()) != batch.n)
        throw std::invalid_argument("balance_probability_single: vector length disagrees");
    const double c = 1.0 / batch.n1 + 1.0 / (batch.n - batch.n1);
    double total = 0.0;
    for (double v : values) total += v;
    const double off = total / (batch.n - batch.n1);
    long count = 0;
    const std::uint32_t* p = batch.treated.data();
    for (int j = 0; j < batch.size; ++j, p += batch.n1) {
        double s = 0.0;
        for (int i = 0; i < batch.n1; ++i) s += values[p[i]];
        if (std::fabs(c * s - off) <= k) ++count;
    }
    return static_cast<double>(count) / batch.size;
}

std::string batch_to_json(const AssignmentBatch& batch) {
    nlohmann::json j;
    j["N"] = batch.n;
    j["N1"] = batch.n1;
    j["B"] = batch.size;
    j["seed"] = batch.seed;
    j["source"] = batch.source == AssignmentSource::exhaustive ? "exhaustive" : "monte_carlo";
    // Row-major bitsets packed as hex strings, one per assignment.
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < batch.size; ++r) {
        std::string bits((batch.n + 3) / 4, '0');
        for (std::uint32_t i : batch.row(r)) {
            int nib = static_cast<int>(i) / 4;
            int off = static_cast<int>(i) % 4;
            int v = bits[nib] >= 'a' ? bits[nib] - 'a' + 10 : bits[nib] - '0';
            v |= 1 << off;
            bits[nib] = v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10);
        }
        rows.push_back(bits);
    }
    j["rows"] = rows;
    return j.dump();
}

AssignmentBatch batch_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    AssignmentBatch batch;
    batch.n = j.at("N").get<int>();
    batch.n1 = j.at("N1").get<int>();
    batch.size = j.at("B").get<int>();
    batch.seed = j.at("seed").get<std::uint64_t>();
    batch.source = j.at("source").get<std::string>() == "exhaustive"
                       ? AssignmentSource::exhaustive
                       : AssignmentSource::monte_carlo;
    for (const auto& row : j.at("rows")) {
        std::string bits = row.get<std::string>();
        std::vector<std::uint32_t> idx;
        for (int i = 0; i < batch.n; ++i) {
            char c = bits[static_cast<std::size_t>(i / 4)];
            int v = c >= 'a' ? c - 'a' + 10 : c - '0';
            if (v & (1 << (i % 4))) idx.push_back(static_cast<std::uint32_t>(i));
        }
        if (static_cast<int>(idx.size()) != batch.n1)
            throw std::runtime_error("batch_from_json: row margin mismatch");
        batch.treated.insert(batch.treated.end(), idx.begin(), idx.end());
    }
    if (static_cast<int>(batch.treated.size()) != batch.size * batch.n1)
        throw std::runtime_error("batch_from_json: row count mismatch");
    return batch;
}

}  // namespace dbsa
