#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dbsa/util.hpp"

namespace dbsa {

enum class DesignKind { uniform_randomization, simple_random_sampling };
enum class AssignmentSource { exhaustive, monte_carlo };

// A design distribution over fixed-margin binary vectors: uniform
// randomization of N1 treated out of N, or simple random sampling of n out
// of N (same support, "treated" read as "sampled").
struct DesignSpec {
    DesignKind kind = DesignKind::uniform_randomization;
    int n_units = 0;
    int n_treated_or_sampled = 0;
    AssignmentSource source = AssignmentSource::exhaustive;
    int batch_size = 1600;          // Monte Carlo only
    std::uint64_t seed = 0;         // Monte Carlo only
    std::uint64_t enumeration_cap = 5000000;

    void validate() const;
};

// A fixed collection of assignment vectors with uniform weights, stored as
// sorted treated-index rows. Drawn once and reused across every K and every
// candidate completion within an analysis.
struct AssignmentBatch {
    int n = 0;
    int n1 = 0;
    int size = 0;
    AssignmentSource source = AssignmentSource::exhaustive;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> treated;  // size * n1, row-major, each row ascending

    std::span<const std::uint32_t> row(int j) const {
        return {treated.data() + static_cast<std::size_t>(j) * n1,
                static_cast<std::size_t>(n1)};
    }
};

// Number of fixed-margin vectors, saturating at 2^63-1 to keep cap checks safe.
std::uint64_t count_combinations(int n, int k);

// All C(N, N1) vectors in lexicographic order of their treated-index tuples.
AssignmentBatch enumerate_assignments(const DesignSpec& spec);

// B vectors drawn uniformly with a partial Fisher-Yates shuffle per draw.
AssignmentBatch sample_assignments(const DesignSpec& spec);

// Convenience: enumerate when feasible under the cap, otherwise sample.
AssignmentBatch make_batch(const DesignSpec& spec);

// Difference in means of `values` between the assigned-1 and assigned-0
// groups for one assignment, given as sorted treated indices.
double difference_in_means(std::span<const double> values,
                           std::span<const std::uint32_t> treated_idx, int n);

// Same, with a dense 0/1 assignment vector.
double difference_in_means(std::span<const double> values, std::span<const int> assignment);

// Fraction of batch rows with |dim(y1)| <= k and |dim(y0)| <= k. Exact cdf
// of the max-imbalance statistic under an exhaustive batch.
double balance_probability(const AssignmentBatch& batch, std::span<const double> y1,
                           std::span<const double> y0, double k);

// Single-vector variant (e.g. the instrument analysis, which constrains only
// the untreated potential outcome).
double balance_probability_single(const AssignmentBatch& batch, std::span<const double> values,
                                  double k);

std::string batch_to_json(const AssignmentBatch& batch);
AssignmentBatch batch_from_json(const std::string& text);

}  // namespace dbsa
