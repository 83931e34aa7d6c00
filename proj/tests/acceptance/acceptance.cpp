// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sparsepin/experiments.hpp"
#include "sparsepin/pinning.hpp"
#include "sparsepin/walk.hpp"

using namespace sparsepin;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double limit_seconds;
    std::function<Result()> run;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Random sparse potential; contacts may push uphill as well as downhill.
Potential random_potential(Rng& rng, std::size_t m)
{
    const auto kernel = (rng() % 2) ? RenewalKernel::power_law(1.5 * rng.uniform(), 1 + rng() % 6)
                                    : RenewalKernel::geometric(0.2 + 0.6 * rng.uniform(), 1 + rng() % 6);
    const auto env = sample_environment(kernel, DisorderSpec::gaussian(1.0), m, rng());
    const WalkParams p{rng.uniform(), 2.0 * rng.uniform() - 1.5, 0.5 * rng.uniform()};
    return build_potential(env, p);
}

Result exact_visits()
{
    Rng rng(20260101);
    int agree = 0;
    double worst = 0.0, largest = 0.0;
    for (int i = 0; i < 20; ++i) {
        const std::size_t m = 2 + rng() % 49;
        const auto v = random_potential(rng, m);
        const std::size_t r = 1 + rng() % m;
        const double exact = expected_visits_exact(v, r);
        largest = std::max(largest, exact);
        const auto mc = mc_visits(v, r, 100000, rng());
        const double z = mc.std_error > 0 ? std::abs(mc.mean - exact) / mc.std_error : (mc.mean == exact ? 0.0 : 1e9);
        worst = std::max(worst, z);
        agree += z <= 3.0;
    }
    return {agree >= 19, fmt("%d/20 within 3 SE (largest |z| %.2f, W(R) up to %.1f)", agree, worst, largest)};
}

Result ruin_formula()
{
    Rng rng(17);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t m = 1 + rng() % 10;
        std::vector<double> values(m + 1, 0.0);
        for (std::size_t k = 1; k <= m; ++k) values[k] = values[k - 1] + 4.0 * rng.uniform() - 2.0;
        const Potential v(values);
        const std::size_t c = 1 + rng() % m;
        const std::size_t a = rng() % c;
        const std::size_t b = a + 1 + rng() % (c - a);
        worst = std::max(worst, std::abs(ruin_prob(v, a, b, c) - oracle::harmonic_exit_probability(values, a, b, c)));
    }
    return {worst <= 1e-12, fmt("100 potentials, max abs error %.2e", worst)};
}

Result brute_force()
{
    Rng rng(33);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n_max = 1 + rng() % 4;
        const auto k = (trial % 2) ? RenewalKernel::power_law(2.0 * rng.uniform(), n_max)
                                   : RenewalKernel::geometric(0.1 + 0.8 * rng.uniform(), n_max);
        const double beta = 2.0 * rng.uniform();
        const double h = 4.0 * rng.uniform() - 2.0;
        const auto omega = sample_disorder(DisorderSpec::gaussian(1.0), 12, rng());
        const auto t = partition_table(omega, k, beta, h, 12);
        for (std::size_t n = 0; n <= 12; ++n) {
            const auto bf = brute_force_partition(omega, k, beta, h, n);
            worst = std::max({worst, rel_err(std::exp(t.log_z[n]), bf.z), rel_err(std::exp(t.log_zc[n]), bf.z_pinned)});
        }
    }
    return {worst <= 1e-10, fmt("50 configurations, n <= 12, max rel error %.2e", worst)};
}

Result last_renewal()
{
    double worst = 0.0;
    const std::size_t n = 10000;
    for (const auto& k : {RenewalKernel::power_law(0.6, 1000), RenewalKernel::geometric(0.3, 60)}) {
        const auto omega = sample_disorder(DisorderSpec::gaussian(1.0), n, 8);
        const auto t = partition_table(omega, k, 1.0, -0.1, n);
        for (std::size_t m = 0; m <= n; ++m) {
            const double expect = oracle::last_renewal_sum(t.log_zc, m, [&](std::size_t j) { return k.tail(j); });
            worst = std::max(worst, std::abs(std::expm1(t.log_z[m] - expect)));
        }
    }
    return {worst <= 1e-12, fmt("n <= 1e4, two kernels, max rel error %.2e", worst)};
}

Result key_relation()
{
    KeyRelationConfig main;
    main.kernel = RenewalKernel::power_law(1.0, 8);
    main.disorder = DisorderSpec::gaussian(1.0);
    main.params = {1.0, -1.0, 0.3};
    main.tau_replicas = 1000;
    main.walk_replicas = 1000;
    main.seed = 2024;
    const auto rep = verify_key_relation(main);

    KeyRelationConfig far = main;
    far.params.f = 50.0;
    far.tau_replicas = 100;
    far.walk_replicas = 100;
    const auto trivial = verify_key_relation(far);
    const bool trivial_ok = trivial.outcome == Outcome::pass && std::abs(trivial.lhs - 1.0) <= 1e-6 &&
                            std::abs(trivial.rhs - 1.0) <= 1e-6;

    KeyRelationConfig unit = main;
    unit.kernel = RenewalKernel::dirac(1);
    unit.tau_replicas = 100;
    const auto collapse = verify_key_relation(unit);
    const auto omega = sample_disorder(unit.disorder, collapse.terms, derive_seed(unit.seed, "omega"));
    double log_term = 0.0, direct = 1.0;
    for (std::size_t n = 1; n <= collapse.terms; ++n) {
        log_term += unit.params.beta * omega[n - 1] + unit.params.h - unit.params.f;
        direct += std::exp(log_term);
    }
    const bool collapse_ok = collapse.outcome == Outcome::pass && rel_err(collapse.rhs, direct) <= 1e-12;

    return {rep.outcome == Outcome::pass && trivial_ok && collapse_ok,
            fmt("lhs %.5f +- %.5f, rhs %.5f (tail %.1e, finite-R %.1e, R %zu, N %zu); f=50 %s; dirac(1) %s",
                rep.lhs, rep.lhs_std_error, rep.rhs, rep.rhs_tail_bound, rep.finite_r_bound, rep.absorbing, rep.terms,
                trivial_ok ? "ok" : "FAIL", collapse_ok ? "ok" : "FAIL")};
}

Result homogeneous()
{
    const std::size_t n = 20000;
    const std::vector<double> zeros(n, 0.0);
    const auto est = free_energy_estimate(zeros, RenewalKernel::geometric(0.5, 200), 0.0, std::log(2.0), n);
    const double err = std::abs(est.raw - std::log(1.5));
    return {err <= 1e-3, fmt("(1/n) log z^c_n = %.7f, log(3/2) = %.7f, error %.2e", est.raw, std::log(1.5), err)};
}

Result annealed()
{
    const auto spec = DisorderSpec::gaussian(1.0);
    const double beta = 1.0;
    const std::size_t n = 200, replicas = 1000;
    struct Setup {
        RenewalKernel kernel;
        double h;
        std::uint64_t seed;
    };
    const std::vector<Setup> setups{{RenewalKernel::power_law(0.0, 1000), -0.5, 71},
                                    {RenewalKernel::power_law(0.6, 100), -1.0, 72}};
    bool ok = true;
    std::string detail;
    for (const auto& s : setups) {
        std::vector<double> z(replicas);
        for (std::size_t r = 0; r < replicas; ++r) {
            const auto omega = sample_disorder(spec, n, derive_seed(s.seed, "annealed", r));
            z[r] = std::exp(partition_table(omega, s.kernel, beta, s.h, n).log_z[n]);
        }
        const auto st = sample_stats(z);
        const double target = std::exp(homogeneous_table(s.kernel, s.h + 0.5, n).log_z[n]);
        const double zscore = (st.mean - target) / st.std_error;
        ok = ok && std::abs(zscore) <= 3.0;
        detail += fmt("%s(%g) h=%g: mean %.5f vs %.5f (z %.2f); ", s.kernel.name().c_str(), s.kernel.parameter(), s.h, st.mean, target, zscore);
    }
    return {ok, detail};
}

Result critical_points()
{
    CriticalPointOptions opts;
    opts.n = 20000;
    opts.replicas = 4;
    opts.tol = 0.01;
    opts.seed = 8;
    const auto kernel = RenewalKernel::power_law(0.6, 100);
    const auto spec = DisorderSpec::gaussian(1.0);
    const auto b0 = quenched_critical_point_estimate(spec, kernel, 0.0, opts);
    const auto b1 = quenched_critical_point_estimate(spec, kernel, 1.0, opts);
    const bool ok = std::abs(b0.h_hat) <= 0.02 && b1.h_hat >= -0.5 && b1.h_hat < 0.0;
    return {ok, fmt("beta=0: %.4f; beta=1: %.4f (annealed %.4f)", b0.h_hat, b1.h_hat, b1.annealed)};
}

Result tau_mean()
{
    double worst = 0.0;
    std::size_t checked = 0;
    for (const auto& k : {RenewalKernel::power_law(0.6, 100), RenewalKernel::power_law(1.0, 8), RenewalKernel::geometric(0.5, 40)}) {
        const std::size_t n = 4 * k.n_max();
        const auto omega = sample_disorder(DisorderSpec::gaussian(1.0), n, 9);
        const auto t = partition_table(omega, k, 0.0, -1000.0, n);
        const auto gc = grand_canonical(t, 0.0, n);
        for (std::size_t m = k.n_max(); m <= n; ++m, ++checked)
            worst = std::max(worst, std::abs(std::exp(gc.log_partial_sums[m]) - k.mean()));
    }
    return {worst <= 1e-9, fmt("%zu partial sums with N >= n_max, max |S_N - E(tau_1)| %.2e", checked, worst)};
}

Result regime_scan_sanity()
{
    RegimeScanConfig cfg;
    cfg.kernel = RenewalKernel::power_law(0.6, 100);
    cfg.disorder = DisorderSpec::gaussian(1.0);
    cfg.betas = {0.0, 1.0, 2.0};
    cfg.hs = {-1.5, -0.75, -0.35, -0.1, 0.25};
    cfg.seed = 10;
    const auto base = regime_scan(cfg);
    const auto doubled = regime_scan(cfg.doubled());
    const auto cmp = compare_scans(base, doubled);
    std::string labels;
    for (std::size_t i = 0; i < base.points.size(); ++i)
        labels += (i % cfg.hs.size() == 0 ? (i ? " | " : "") : " ") + to_string(base.points[i].label);
    const std::size_t band = base.count(RegimeLabel::case2);
    return {cmp.flips == 0 && band > 0 && doubled.count(RegimeLabel::case2) > 0,
            fmt("flips %zu, resolved %zu, newly unresolved %zu, case2 points %zu; labels: %s", cmp.flips, cmp.resolved,
                cmp.unresolved, band, labels.c_str())};
}

}  // namespace

int main()
{
    const std::vector<Criterion> criteria{
        {1, "exact finite-R visits", 60, exact_visits},
        {2, "ruin formula vs linear system", 1, ruin_formula},
        {3, "recursions vs brute force", 10, brute_force},
        {4, "last-renewal decomposition", 5, last_renewal},
        {5, "key relation", 300, key_relation},
        {6, "homogeneous free energy", 30, homogeneous},
        {7, "annealed consistency", 60, annealed},
        {8, "critical points", 600, critical_points},
        {9, "E(tau_1) bound", 1, tau_mean},
        {10, "regime scan sanity", 900, regime_scan_sanity},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Result r;
        try {
            r = c.run();
        } catch (const std::exception& e) {
            r = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = r.pass && in_time;
        failed += !pass;
        std::printf("%s  %2d  %-32s %s [%.2f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.title.c_str(),
                    r.detail.c_str(), secs, c.limit_seconds, in_time ? "" : ", over time");
        std::fflush(stdout);
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed ? 1 : 0;
}
