#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "dbsa/design.hpp"
#include "dbsa/population.hpp"
#include "oracle.hpp"

using namespace dbsa;

TEST_CASE("exhaustive enumeration counts") {
    DesignSpec spec;
    spec.n_units = 10;
    spec.n_treated_or_sampled = 5;
    AssignmentBatch b = enumerate_assignments(spec);
    CHECK(b.size == 252);

    spec.n_units = 2;
    spec.n_treated_or_sampled = 1;
    AssignmentBatch b2 = enumerate_assignments(spec);
    CHECK(b2.size == 2);
    CHECK(b2.row(0)[0] == 0);
    CHECK(b2.row(1)[0] == 1);

    spec.n_units = 6;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch b3 = enumerate_assignments(spec);
    CHECK(b3.size == 20);
    for (int j = 0; j < b3.size; ++j) CHECK(b3.row(j).size() == 3);
}

TEST_CASE("enumeration respects lexicographic order and the cap") {
    DesignSpec spec;
    spec.n_units = 5;
    spec.n_treated_or_sampled = 2;
    AssignmentBatch b = enumerate_assignments(spec);
    auto expect = oracle::subsets(5, 2);
    REQUIRE(b.size == static_cast<int>(expect.size()));
    for (int j = 0; j < b.size; ++j)
        for (int t = 0; t < 2; ++t)
            CHECK(b.row(j)[t] == static_cast<std::uint32_t>(expect[j][t]));

    spec.n_units = 40;
    spec.n_treated_or_sampled = 20;
    CHECK_THROWS_WITH_AS(enumerate_assignments(spec), doctest::Contains("Monte Carlo"),
                         std::invalid_argument);
}

TEST_CASE("count_combinations saturates instead of overflowing") {
    CHECK(count_combinations(10, 5) == 252);
    CHECK(count_combinations(722, 297) == static_cast<std::uint64_t>(
                                               std::numeric_limits<std::int64_t>::max()));
}

TEST_CASE("monte carlo sampling is reproducible and on-margin") {
    DesignSpec spec;
    spec.n_units = 20;
    spec.n_treated_or_sampled = 10;
    spec.source = AssignmentSource::monte_carlo;
    spec.batch_size = 1600;
    spec.seed = 7;
    AssignmentBatch a = sample_assignments(spec);
    AssignmentBatch b = sample_assignments(spec);
    CHECK(a.treated == b.treated);
    for (int j = 0; j < a.size; ++j) {
        auto row = a.row(j);
        CHECK(row.size() == 10);
        CHECK(std::is_sorted(row.begin(), row.end()));
        std::set<std::uint32_t> uniq(row.begin(), row.end());
        CHECK(uniq.size() == 10);
    }
    spec.seed = 8;
    AssignmentBatch c = sample_assignments(spec);
    CHECK(a.treated != c.treated);
}

TEST_CASE("difference in means on the example table") {
    Population p = toy_population();
    CHECK(difference_in_means(p.y1, std::span<const int>(p.x)) == doctest::Approx(0.1));
    CHECK(difference_in_means(p.y0, std::span<const int>(p.x)) ==
          doctest::Approx(0.4 / 3.0).epsilon(1e-9));
    std::vector<double> constant(6, 0.3);
    CHECK(difference_in_means(constant, std::span<const int>(p.x)) == doctest::Approx(0.0));
    std::vector<int> degenerate(6, 1);
    CHECK_THROWS_AS(difference_in_means(p.y1, std::span<const int>(degenerate)),
                    std::invalid_argument);
}

TEST_CASE("balance probability extremes") {
    Population p = toy_population();
    DesignSpec spec;
    spec.n_units = 6;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch batch = enumerate_assignments(spec);
    // K at least the spread: always balanced.
    CHECK(balance_probability(batch, p.y1, p.y0, 1.0) == 1.0);
    // K = 0: exact balance is impossible for these values.
    CHECK(balance_probability(batch, p.y1, p.y0, 0.0) == 0.0);
}

TEST_CASE("balance probability equals the enumeration oracle") {
    Population p = toy_population();
    DesignSpec spec;
    spec.n_units = 6;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch batch = enumerate_assignments(spec);
    for (double k : {0.05, 0.1, 0.15, 0.2, 0.3, 0.5}) {
        double got = balance_probability(batch, p.y1, p.y0, k);
        double want = oracle::balance_prob_oracle(p.y1, p.y0, 3, k);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("balance probability is nondecreasing in k") {
    Rng rng(21);
    ObservedData d = oracle::random_dataset(8, 4, rng);
    std::vector<double> y1, y0;
    oracle::random_completion(d, rng, &y1, &y0);
    DesignSpec spec;
    spec.n_units = 8;
    spec.n_treated_or_sampled = 4;
    AssignmentBatch batch = enumerate_assignments(spec);
    double prev = 0.0;
    for (double k = 0.0; k <= 1.0; k += 0.02) {
        double p = balance_probability(batch, y1, y0, k);
        CHECK(p >= prev);
        prev = p;
    }
}

TEST_CASE("balance probability is invariant to consistent relabeling") {
    Rng rng(5);
    std::vector<double> y1(8), y0(8);
    for (int i = 0; i < 8; ++i) {
        y1[i] = rng.uniform01();
        y0[i] = rng.uniform01();
    }
    DesignSpec spec;
    spec.n_units = 8;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch batch = enumerate_assignments(spec);
    // Reverse the unit order; the exhaustive batch maps onto itself.
    std::vector<double> r1(y1.rbegin(), y1.rend());
    std::vector<double> r0(y0.rbegin(), y0.rend());
    for (double k : {0.05, 0.12, 0.25}) {
        CHECK(balance_probability(batch, y1, y0, k) ==
              doctest::Approx(balance_probability(batch, r1, r0, k)).epsilon(1e-12));
    }
}

TEST_CASE("single-vector balance probability") {
    Population p = toy_population();
    DesignSpec spec;
    spec.n_units = 6;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch batch = enumerate_assignments(spec);
    double k = 0.15;
    auto sets = oracle::subsets(6, 3);
    int count = 0;
    for (const auto& s : sets)
        if (std::fabs(oracle::dim_oracle(p.y1, s, 6)) <= k) ++count;
    CHECK(balance_probability_single(batch, p.y1, k) ==
          doctest::Approx(static_cast<double>(count) / 20).epsilon(1e-12));
}

TEST_CASE("batch json round trip") {
    DesignSpec spec;
    spec.n_units = 7;
    spec.n_treated_or_sampled = 3;
    AssignmentBatch b = enumerate_assignments(spec);
    AssignmentBatch c = batch_from_json(batch_to_json(b));
    CHECK(b.treated == c.treated);
    CHECK(b.n == c.n);
    CHECK(b.n1 == c.n1);
}
