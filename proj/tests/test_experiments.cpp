#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "sparsepin/experiments.hpp"

using namespace sparsepin;
using Catch::Approx;

TEST_CASE("key relation: only the origin survives at large f", "[experiments][key-relation]")
{
    KeyRelationConfig cfg;
    cfg.params = {1.0, -1.0, 50.0};
    cfg.tau_replicas = 50;
    cfg.walk_replicas = 200;
    const auto rep = verify_key_relation(cfg);
    CHECK(rep.outcome == Outcome::pass);
    CHECK(std::abs(rep.lhs - 1.0) <= 1e-6);
    CHECK(std::abs(rep.rhs - 1.0) <= 1e-6);
    CHECK(rep.rhs_verdict == Verdict::converged);
}

TEST_CASE("key relation: unit gaps collapse the renewal average", "[experiments][key-relation]")
{
    KeyRelationConfig cfg;
    cfg.kernel = RenewalKernel::dirac(1);
    cfg.params = {1.0, -1.0, 0.3};
    cfg.tau_replicas = 100;
    cfg.walk_replicas = 1000;
    cfg.seed = 21;
    const auto rep = verify_key_relation(cfg);
    REQUIRE(rep.outcome == Outcome::pass);

    // every site is a contact: Z_n = exp(sum_{i <= n} (beta omega_i + h))
    const auto omega = sample_disorder(cfg.disorder, rep.terms, derive_seed(cfg.seed, "omega"));
    double log_term = 0.0, direct = 1.0;
    for (std::size_t n = 1; n <= rep.terms; ++n) {
        log_term += cfg.params.beta * omega[n - 1] + cfg.params.h - cfg.params.f;
        direct += std::exp(log_term);
    }
    CHECK(rep.rhs == Approx(direct).epsilon(1e-12));
}

TEST_CASE("key relation: moderate configuration", "[experiments][key-relation][statistical]")
{
    KeyRelationConfig cfg;
    cfg.tau_replicas = 200;
    cfg.walk_replicas = 200;
    cfg.seed = 5;
    const auto rep = verify_key_relation(cfg);
    CHECK(rep.outcome == Outcome::pass);
    CHECK(rep.finite_r_target_met);
    CHECK(rep.rhs_tail_bound <= 1e-3 * rep.lhs_std_error + 1e-12);
    INFO("lhs " << rep.lhs << " +- " << rep.lhs_std_error << ", rhs " << rep.rhs);
    CHECK(rep.rhs > 1.0);
}

TEST_CASE("key relation over a randomized parameter sweep", "[experiments][key-relation][statistical]")
{
    Rng rng(777);
    int passed = 0;
    const int configs = 20;
    for (int i = 0; i < configs; ++i) {
        KeyRelationConfig cfg;
        const std::size_t n_max = 2 + rng() % 10;
        cfg.kernel = (i % 2 == 0) ? RenewalKernel::power_law(1.5 * rng.uniform(), n_max)
                                  : RenewalKernel::geometric(0.2 + 0.6 * rng.uniform(), n_max);
        cfg.disorder = (i % 3 == 0) ? DisorderSpec::rademacher() : DisorderSpec::gaussian(0.5 + rng.uniform());
        cfg.params = {1.5 * rng.uniform(), -1.5 * rng.uniform() - 0.2, 0.2 + 0.6 * rng.uniform()};
        cfg.tau_replicas = 60;
        cfg.walk_replicas = 100;
        cfg.seed = rng();
        const auto rep = verify_key_relation(cfg);
        INFO("config " << i << ": lhs " << rep.lhs << " rhs " << rep.rhs << " tol " << rep.tolerance);
        CHECK(rep.outcome != Outcome::inconclusive);
        passed += rep.outcome == Outcome::pass;
    }
    CHECK(passed >= 19);
}

TEST_CASE("key relation: a diverging series is inconclusive, not failed", "[experiments][key-relation]")
{
    KeyRelationConfig cfg;
    cfg.params = {0.0, 1.0, 0.0};
    cfg.tau_replicas = 2;
    cfg.walk_replicas = 2;
    cfg.max_terms = 4096;
    const auto rep = verify_key_relation(cfg);
    CHECK(rep.outcome == Outcome::inconclusive);
    CHECK(rep.rhs_verdict == Verdict::diverging);
}

TEST_CASE("grand canonical partial sums decrease in f", "[experiments][property]")
{
    const auto k = RenewalKernel::power_law(1.0, 8);
    const auto omega = sample_disorder(DisorderSpec::gaussian(1.0), 400, 3);
    const auto t = partition_table(omega, k, 1.0, -1.0, 400);
    double previous = std::numeric_limits<double>::infinity();
    for (double f : {0.05, 0.1, 0.3, 1.0, 3.0}) {
        const auto rep = grand_canonical(t, f, 400);
        CHECK(rep.sum() < previous);
        previous = rep.sum();
    }
}

TEST_CASE("tau_mean_lower_bound", "[experiments][tau-mean]")
{
    SECTION("annihilated contacts saturate the bound")
    {
        TauMeanConfig cfg;
        cfg.kernel = RenewalKernel::power_law(0.6, 50);
        for (std::size_t n : {50u, 100u, 400u}) {
            cfg.terms = n;
            const auto rep = tau_mean_lower_bound(cfg);
            CHECK(rep.outcome == Outcome::pass);
            CHECK(std::abs(rep.gap) <= 1e-9);
        }
    }
    SECTION("holds for arbitrary parameters")
    {
        Rng rng(4);
        for (int i = 0; i < 20; ++i) {
            TauMeanConfig cfg;
            cfg.kernel = RenewalKernel::power_law(2.0 * rng.uniform(), 1 + rng() % 40);
            cfg.beta = 2.0 * rng.uniform();
            cfg.h = -5.0 * rng.uniform();
            cfg.seed = rng();
            const auto rep = tau_mean_lower_bound(cfg);
            CHECK(rep.outcome == Outcome::pass);
            CHECK(rep.gap >= -1e-9 * rep.tau_mean);
        }
    }
    SECTION("unit gaps")
    {
        TauMeanConfig cfg;
        cfg.kernel = RenewalKernel::dirac(1);
        cfg.h = -2.0;
        cfg.beta = 1.0;
        const auto rep = tau_mean_lower_bound(cfg);
        CHECK(rep.tau_mean == 1.0);
        CHECK(rep.partial_sum >= 1.0);
    }
    SECTION("too few terms")
    {
        TauMeanConfig cfg;
        cfg.kernel = RenewalKernel::power_law(0.6, 50);
        cfg.terms = 10;
        CHECK_THROWS_AS(tau_mean_lower_bound(cfg), std::invalid_argument);
    }
}

TEST_CASE("classify_regime", "[experiments][regime]")
{
    RegimeRow row;
    row.beta = 1.0;
    row.annealed_critical = annealed_critical_point(DisorderSpec::gaussian(1.0), 1.0);
    CHECK(classify_regime(-0.5, row) == RegimeLabel::boundary);
    CHECK(classify_regime(-0.7, row) == RegimeLabel::case3);
    CHECK(classify_regime(-0.3, row) == RegimeLabel::unresolved);  // no bracket yet
    CHECK(classify_regime(0.0, row) == RegimeLabel::not_covered);

    row.critical = CriticalPointEstimate{};
    row.bracket_lo = -0.25;
    row.bracket_hi = -0.15;
    CHECK(classify_regime(-0.3, row) == RegimeLabel::case2);
    CHECK(classify_regime(-0.2, row) == RegimeLabel::unresolved);
    CHECK(classify_regime(-0.25, row) == RegimeLabel::case2);
    CHECK(classify_regime(-0.1, row) == RegimeLabel::case1);
}

TEST_CASE("compare_scans counts flips", "[experiments][regime]")
{
    RegimeReport a, b;
    a.points.resize(4);
    b.points.resize(4);
    a.points[0].label = RegimeLabel::case1;
    b.points[0].label = RegimeLabel::case1;
    a.points[1].label = RegimeLabel::unresolved;
    b.points[1].label = RegimeLabel::case2;
    a.points[2].label = RegimeLabel::case2;
    b.points[2].label = RegimeLabel::case1;
    a.points[3].label = RegimeLabel::case3;
    b.points[3].label = RegimeLabel::unresolved;
    const auto c = compare_scans(a, b);
    CHECK(c.flips == 1);
    CHECK(c.resolved == 1);
    CHECK(c.unresolved == 1);
}

TEST_CASE("regime_scan on a small grid", "[experiments][regime]")
{
    RegimeScanConfig cfg;
    cfg.betas = {0.0, 1.0};
    cfg.hs = {-0.75, -0.5, -0.35, 0.25};
    cfg.terms = 2000;
    const auto rep = regime_scan(cfg);
    REQUIRE(rep.points.size() == 8);

    CHECK(rep.rows[0].merged);
    CHECK_FALSE(rep.rows[1].merged);
    CHECK(rep.at(0, 0).label == RegimeLabel::case3);
    CHECK(rep.at(0, 3).label == RegimeLabel::not_covered);
    CHECK(rep.at(1, 0).label == RegimeLabel::case3);
    CHECK(rep.at(1, 1).label == RegimeLabel::boundary);
    CHECK(rep.at(1, 2).label == RegimeLabel::case2);
    REQUIRE(rep.rows[1].critical);
    CHECK(rep.rows[1].gap() > 0.0);

    const auto& p = rep.at(1, 2);
    CHECK(p.diagnostics_consistent);
    CHECK(p.annealed_free_energy > 0.0);
    CHECK(p.f_hat < 0.01);  // finite-size residue below the localization threshold
}

TEST_CASE("annealed_transience_check", "[experiments][transience]")
{
    SECTION("beta = 0: escape estimates match 1 / W(R)")
    {
        TransienceConfig cfg;
        cfg.beta = 0.0;
        cfg.h = -1.0;
        cfg.absorbing = {16, 64};
        cfg.environments = 40;
        cfg.walk_replicas = 1000;
        const auto rep = annealed_transience_check(cfg);
        for (const auto& row : rep.rows) {
            CHECK(row.absorbed_fraction == 1.0);
            CHECK(row.escape_agree >= 38);
        }
        CHECK(rep.growth_ratio < 1.5);
    }
    SECTION("beta > 0: every trajectory is absorbed")
    {
        TransienceConfig cfg;
        cfg.beta = 1.0;
        cfg.h = -1.0;
        cfg.absorbing = {32, 128};
        cfg.environments = 100;
        cfg.walk_replicas = 50;
        const auto rep = annealed_transience_check(cfg);
        for (const auto& row : rep.rows) CHECK(row.absorbed_fraction == 1.0);
    }
    SECTION("recurrent control: W(R) = R")
    {
        TransienceConfig cfg;
        cfg.beta = 0.0;
        cfg.h = 0.0;
        cfg.absorbing = {8, 32, 128};
        cfg.environments = 2;
        cfg.walk_replicas = 200;
        const auto rep = annealed_transience_check(cfg);
        CHECK(rep.rows[0].mean_exact_visits == Approx(8.0));
        CHECK(rep.rows[2].mean_exact_visits == Approx(128.0));
        CHECK(rep.growth_ratio == Approx(16.0));
        CHECK(rep.rows[2].mean_mc_visits > rep.rows[0].mean_mc_visits);
    }
}
