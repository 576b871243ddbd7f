#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <fstream>

#include "dbsa/design.hpp"
#include "dbsa/population.hpp"

using namespace dbsa;

namespace {
std::string fixture(const std::string& name) { return std::string(DBSA_FIXTURE_DIR) + "/" + name; }
}

TEST_CASE("toy population reproduces the example table") {
    Population p = toy_population();
    CHECK(p.n_units == 6);
    CHECK(p.y0[0] == 0.1);
    CHECK(p.y0[3] == 0.4);
    CHECK(p.y1[1] == 0.5);
    CHECK(p.y1[5] == 0.8);
    CHECK(p.ate() == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(p.n_treated() == 3);
}

TEST_CASE("toy population realized imbalances") {
    Population p = toy_population();
    double k1 = difference_in_means(p.y1, std::span<const int>(p.x));
    double k0 = difference_in_means(p.y0, std::span<const int>(p.x));
    CHECK(k1 == doctest::Approx(0.1).epsilon(1e-9));
    CHECK(k0 == doctest::Approx(0.4 / 3.0).epsilon(1e-9));
}

TEST_CASE("make_data projects the science table") {
    Population p = toy_population();
    ObservedData d = make_data(p);
    CHECK(d.n() == 6);
    CHECK(d.n1 == 3);
    CHECK(d.n0 == 3);
    CHECK(d.y[0] == 0.1);  // control keeps y0
    CHECK(d.y[3] == 0.6);  // treated keeps y1
    CHECK(d.mean_treated() == doctest::Approx(2.3 / 3.0).epsilon(1e-12));
    // Deterministic and idempotent.
    ObservedData d2 = make_data(p);
    CHECK(d.y == d2.y);
    CHECK(d.x == d2.x);
}

TEST_CASE("make_data respects sampling indicators") {
    Population p = toy_population();
    p.s = {1, 0, 1, 1, 0, 1};
    ObservedData d = make_data(p);
    CHECK(d.n() == 4);
    CHECK(d.ids == std::vector<int>{0, 2, 3, 5});

    p.s = {0, 0, 0, 0, 0, 0};
    ObservedData empty = make_data(p);
    CHECK(empty.n() == 0);
    CHECK(empty.degenerate());
}

TEST_CASE("make_data recomputation oracle under arm swap") {
    Population p = toy_population();
    for (auto& v : p.x) v = 1 - v;
    ObservedData d = make_data(p);
    for (int i = 0; i < 6; ++i) {
        double expect = p.x[i] == 1 ? p.y1[i] : p.y0[i];
        CHECK(d.y[i] == expect);
    }
}

TEST_CASE("population ATE equals mean difference") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
        Population p;
        p.n_units = 8;
        for (int i = 0; i < 8; ++i) {
            p.y0.push_back(rng.uniform01());
            p.y1.push_back(rng.uniform01());
            p.x.push_back(i < 4 ? 1 : 0);
            p.y_min.push_back(0.0);
            p.y_max.push_back(1.0);
        }
        double direct = (vec_mean(p.y1) - vec_mean(p.y0));
        CHECK(std::fabs(p.ate() - direct) < 1e-12);
    }
}

TEST_CASE("load_csv reads the example table") {
    ObservedData d = load_csv(fixture("table1.csv"), CsvSchema{});
    CHECK(d.n1 == 3);
    CHECK(d.n0 == 3);
    CHECK(d.y[0] == 0.1);
    CHECK(d.y[4] == 0.9);
    CHECK(d.ate_hat() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("load_csv failure modes name the row") {
    auto write_tmp = [](const std::string& body) {
        std::string path = "tmp_test_csv.csv";
        std::ofstream out(path);
        out << body;
        return path;
    };
    SUBCASE("degenerate arm") {
        std::string p = write_tmp("y,x\n0.1,1\n0.2,1\n");
        CHECK_THROWS_WITH_AS(load_csv(p, CsvSchema{}),
                             doctest::Contains("degenerate treatment arm"),
                             std::invalid_argument);
    }
    SUBCASE("bound violation") {
        std::string p = write_tmp("y,x\n1.2,1\n0.2,0\n");
        CHECK_THROWS_WITH_AS(load_csv(p, CsvSchema{}), doctest::Contains("row 1"),
                             std::invalid_argument);
    }
    SUBCASE("bad treatment value") {
        std::string p = write_tmp("y,x\n0.5,2\n0.2,0\n");
        CHECK_THROWS_AS(load_csv(p, CsvSchema{}), std::invalid_argument);
    }
    SUBCASE("missing outcome") {
        std::string p = write_tmp("y,x\n,1\n0.2,0\n");
        CHECK_THROWS_AS(load_csv(p, CsvSchema{}), std::invalid_argument);
    }
}

TEST_CASE("load_csv per-unit bounds and sampling column") {
    std::ofstream out("tmp_unit_bounds.csv");
    out << "y,x,ymin,ymax,s\n"
        << "3,1,0,30,1\n"
        << "8,0,0,35,1\n"
        << "9,1,0,28,0\n"
        << "2,0,0,31,1\n";
    out.close();
    ObservedData d = load_csv("tmp_unit_bounds.csv", CsvSchema{});
    CHECK(d.n() == 3);  // s = 0 row dropped
    CHECK(d.y_max[1] == 35.0);
}

TEST_CASE("generate_dgp basics") {
    DgpSpec spec;
    spec.beta = 0.0;
    spec.seed = 3;
    Population p = generate_dgp(spec, 12);
    for (int i = 0; i < 12; ++i) CHECK(p.y1[i] == doctest::Approx(p.y0[i]).epsilon(1e-15));
    CHECK(p.ate() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_THROWS_AS(generate_dgp(spec, 7), std::invalid_argument);
}

TEST_CASE("generate_dgp nesting across sizes") {
    DgpSpec spec;
    spec.seed = 11;
    Population small = generate_dgp(spec, 10);
    Population big = generate_dgp(spec, 20);
    // Per-arm prefixes coincide.
    for (int i = 0; i < 5; ++i) {
        CHECK(small.y1[i] == big.y1[i]);
        CHECK(small.y0[i] == big.y0[i]);
        CHECK(small.x[i] == 1);
    }
    for (int i = 0; i < 5; ++i) {
        CHECK(small.y1[5 + i] == big.y1[10 + i]);
        CHECK(small.y0[5 + i] == big.y0[10 + i]);
    }
}

TEST_CASE("generate_dgp limit mean matches the latent shift") {
    // With the probit link, E[Phi(beta + U)] = Phi(beta / sqrt(2)).
    DgpSpec spec;
    spec.seed = 5;
    spec.n_max = 4000;
    Population p = generate_dgp(spec, 4000);
    double limit = normal_cdf(spec.beta / std::sqrt(2.0)) - 0.5;
    CHECK(p.ate() == doctest::Approx(limit).epsilon(0.05));
}

TEST_CASE("appendix science tables") {
    auto tables = science_tables_appendix();
    REQUIRE(tables.size() == 3);
    CHECK(tables[1].ate() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(tables[0].y0[0] == 0.706);
    CHECK(tables[0].y1[0] == 0.931);
    CHECK(tables[2].y1[9] == 1.0);
    for (const auto& t : tables) {
        CHECK(t.n_units == 10);
        CHECK(t.n_treated() == 5);
        t.validate();
    }
}

TEST_CASE("population json round trip") {
    Population p = toy_population();
    std::string text = population_to_json(p);
    Population q = population_from_json(text);
    CHECK(q.y1 == p.y1);
    CHECK(q.y0 == p.y0);
    CHECK(q.x == p.x);
    CHECK(q.y_min == p.y_min);
}
