#pragma once

// Cross-checks between the walk and the pinning model: the identity linking
// averaged return counts to the grand canonical sum, the E(tau_1) lower
// bound, the regime classification over a (beta, h) grid, and transience
// checks under the annealed law.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sparsepin/environment.hpp"
#include "sparsepin/numeric.hpp"
#include "sparsepin/parallel.hpp"
#include "sparsepin/pinning.hpp"
#include "sparsepin/random.hpp"
#include "sparsepin/walk.hpp"

namespace sparsepin {

enum class Outcome { pass, fail, inconclusive };

inline std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::inconclusive: return "inconclusive";
    }
    return "unknown";
}

// ------------------------------------------------------------ key relation

struct KeyRelationConfig {
    RenewalKernel kernel = RenewalKernel::power_law(1.0, 8);
    DisorderSpec disorder = DisorderSpec::gaussian(1.0);
    WalkParams params{1.0, -1.0, 0.3};
    std::size_t tau_replicas = 1000;
    std::size_t walk_replicas = 1000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::size_t absorbing = 0;  // R; 0 picks it automatically
    std::size_t terms = 0;      // N; 0 picks it automatically
    std::size_t max_absorbing = 1u << 14;
    std::size_t max_terms = 1u << 20;
    std::uint64_t step_budget = default_step_budget;
    double sigmas = 3.0;
    double relative_slack = 1e-9;
};

struct KeyRelationReport {
    KeyRelationConfig config;
    std::size_t absorbing = 0;
    std::size_t terms = 0;
    // walk side
    double lhs = 0.0;
    double lhs_std_error = 0.0;
    double finite_r_bound = 0.0;  // bound on E_tau sum_{i >= R} e^{V_i}
    bool finite_r_target_met = false;
    // pinning side
    double rhs = 0.0;
    double rhs_tail_bound = 0.0;
    Verdict rhs_verdict = Verdict::inconclusive;
    double rhs_growth_rate = 0.0;
    double tolerance = 0.0;
    Outcome outcome = Outcome::inconclusive;

    [[nodiscard]] double difference() const { return lhs - rhs; }
};

namespace detail {

// sum_{n >= R} Z_n e^{-fn}, bounded by the partial sums from R to N plus the
// geometric tail beyond N.
inline double series_remainder(const GrandCanonicalReport& rep, std::size_t r)
{
    if (r == 0) return rep.sum() + rep.tail_bound;
    if (r > rep.n_terms - 1) return rep.tail_bound;
    const double head = std::exp(rep.log_partial_sums[r - 1]);
    return std::max(0.0, rep.sum() - head) + rep.tail_bound;
}

}  // namespace detail

/// E_tau E[card{n >= 0 : X_n = 0}] against sum_n Z_n e^{-fn} on one shared
/// disorder sequence. The walk side averages mc_visits over independent
/// renewal samples; the pinning side sums the free partition functions.
///
/// The walk is stopped at R, so it estimates E_tau W(R). The missing mass
/// E_tau sum_{i >= R} e^{V_i} equals the series remainder past R and is added
/// to the tolerance. R doubles until that bound drops below a tenth of the
/// predicted standard error.
inline KeyRelationReport verify_key_relation(const KeyRelationConfig& cfg)
{
    cfg.params.validate();
    if (cfg.tau_replicas < 2 || cfg.walk_replicas < 2)
        throw std::invalid_argument("verify_key_relation: need at least 2 tau and 2 walk replicas");

    KeyRelationReport rep;
    rep.config = cfg;
    const auto& k = cfg.kernel;
    const double f = cfg.params.f;

    std::size_t r = cfg.absorbing ? cfg.absorbing : std::max<std::size_t>(16, k.n_max());
    std::size_t n_terms = cfg.terms ? cfg.terms : std::max<std::size_t>({256, 4 * r, 4 * k.n_max()});
    if (n_terms < r) throw std::invalid_argument("verify_key_relation: need N >= R");

    // The omega stream is prefix-stable, so growing N extends the sequence.
    std::vector<double> omega;
    PartitionTable table;
    GrandCanonicalReport gc;
    const auto evaluate = [&](std::size_t n) {
        omega = sample_disorder(cfg.disorder, n, derive_seed(cfg.seed, "omega"));
        table = partition_table(omega, k, cfg.params.beta, cfg.params.h, n);
        gc = grand_canonical(table, f, n);
    };
    const auto predicted_se = [&] {
        const double s = gc.sum();
        const double spread = std::sqrt(std::max(0.0, s * (s - 1.0)));
        return std::max(spread / std::sqrt(static_cast<double>(cfg.tau_replicas * cfg.walk_replicas)), 1e-9 * s);
    };

    evaluate(n_terms);
    for (;;) {
        const bool can_grow_n = !cfg.terms && 2 * n_terms <= cfg.max_terms;
        const bool tail_ok = gc.verdict == Verdict::converged && gc.tail_bound <= 1e-3 * predicted_se();
        if (gc.verdict == Verdict::converged && !cfg.absorbing) {
            while (detail::series_remainder(gc, r) > 0.1 * predicted_se() && 2 * r <= cfg.max_absorbing) r *= 2;
        }
        if ((tail_ok && n_terms >= 2 * r) || !can_grow_n || gc.verdict == Verdict::diverging) break;
        n_terms *= 2;
        evaluate(n_terms);
    }
    r = std::min(r, n_terms);
    rep.absorbing = r;
    rep.terms = n_terms;
    rep.rhs = gc.sum();
    rep.rhs_tail_bound = gc.tail_bound;
    rep.rhs_verdict = gc.verdict;
    rep.rhs_growth_rate = gc.growth_rate;
    if (gc.verdict != Verdict::converged) {
        rep.outcome = Outcome::inconclusive;
        return rep;
    }
    rep.finite_r_bound = detail::series_remainder(gc, r);
    rep.finite_r_target_met = rep.finite_r_bound <= 0.1 * predicted_se();

    std::vector<double> per_tau(cfg.tau_replicas);
    const std::vector<double> omega_r(omega.begin(), omega.begin() + static_cast<std::ptrdiff_t>(r));
    parallel_for_index(cfg.tau_replicas, cfg.workers, [&](std::size_t j) {
        SparseEnvironment env;
        env.horizon = r;
        env.tau = sample_renewal(k, r, derive_seed(cfg.seed, "tau", j));
        env.omega = omega_r;
        const auto v = build_potential(env, cfg.params);
        McOptions mc;
        mc.step_budget = cfg.step_budget;
        per_tau[j] = mc_visits(v, r, cfg.walk_replicas, derive_seed(cfg.seed, "walk", j), mc).mean;
    });
    const auto s = sample_stats(per_tau);
    rep.lhs = s.mean;
    rep.lhs_std_error = s.std_error;
    rep.tolerance = cfg.sigmas * rep.lhs_std_error + rep.rhs_tail_bound + rep.finite_r_bound +
                    cfg.relative_slack * std::abs(rep.rhs);
    rep.outcome = std::abs(rep.lhs - rep.rhs) <= rep.tolerance ? Outcome::pass : Outcome::fail;
    return rep;
}

// ------------------------------------------------------ E(tau_1) lower bound

struct TauMeanConfig {
    RenewalKernel kernel = RenewalKernel::power_law(1.0, 8);
    DisorderSpec disorder = DisorderSpec::gaussian(1.0);
    double beta = 0.0;
    double h = -1000.0;
    std::size_t terms = 0;  // 0 picks 4 n_max
    std::uint64_t seed = 1;
    double slack = 1e-9;
};

struct TauMeanReport {
    TauMeanConfig config;
    std::size_t terms = 0;
    double tau_mean = 0.0;
    double partial_sum = 0.0;
    double gap = 0.0;  // partial_sum - tau_mean
    Outcome outcome = Outcome::fail;
};

/// At f = 0 every Z_n is at least P(tau_1 > n), so the partial sums reach
/// E(tau_1) once N >= n_max - 1.
inline TauMeanReport tau_mean_lower_bound(const TauMeanConfig& cfg)
{
    TauMeanReport rep;
    rep.config = cfg;
    const auto& k = cfg.kernel;
    rep.terms = cfg.terms ? cfg.terms : 4 * k.n_max();
    if (rep.terms + 1 < k.n_max()) throw std::invalid_argument("tau_mean_lower_bound: need N >= n_max - 1");
    const auto omega = sample_disorder(cfg.disorder, rep.terms, derive_seed(cfg.seed, "omega"));
    const auto table = partition_table(omega, k, cfg.beta, cfg.h, rep.terms);
    const auto gc = grand_canonical(table, 0.0, rep.terms);
    rep.tau_mean = k.mean();
    rep.partial_sum = gc.sum();
    rep.gap = rep.partial_sum - rep.tau_mean;
    rep.outcome = rep.gap >= -cfg.slack * rep.tau_mean ? Outcome::pass : Outcome::fail;
    return rep;
}

// ------------------------------------------------------------- regime scan

enum class RegimeLabel { case1, case2, case3, unresolved, boundary, not_covered };

inline std::string to_string(RegimeLabel l)
{
    switch (l) {
    case RegimeLabel::case1: return "case1";
    case RegimeLabel::case2: return "case2";
    case RegimeLabel::case3: return "case3";
    case RegimeLabel::unresolved: return "unresolved";
    case RegimeLabel::boundary: return "boundary";
    case RegimeLabel::not_covered: return "not_covered";
    }
    return "unknown";
}

inline bool is_numbered(RegimeLabel l)
{
    return l == RegimeLabel::case1 || l == RegimeLabel::case2 || l == RegimeLabel::case3;
}

struct RegimeScanConfig {
    RenewalKernel kernel = RenewalKernel::power_law(0.6, 100);
    DisorderSpec disorder = DisorderSpec::gaussian(1.0);
    std::vector<double> betas{0.0, 1.0, 2.0};
    std::vector<double> hs{-1.5, -0.75, -0.35, -0.1, 0.25};
    std::size_t n = 20'000;         // free-energy length
    std::size_t replicas = 4;       // disorder replicas for the critical point
    std::size_t terms = 4000;       // N for the annealed series; quenched series run to max(N, n)
    double tol = 0.01;              // bisection width
    double bracket_margin = 0.05;   // finite-size allowance around the bisection bracket
    double eps_small = 0.01;
    std::uint64_t seed = 1;
    unsigned workers = 1;

    /// Same grid, every budget doubled.
    [[nodiscard]] RegimeScanConfig doubled() const
    {
        RegimeScanConfig c = *this;
        c.n *= 2;
        c.replicas *= 2;
        c.terms *= 2;
        return c;
    }
};

struct SeriesCheck {
    double eps = 0.0;
    Verdict verdict = Verdict::inconclusive;
    double growth_rate = 0.0;
};

struct RegimePoint {
    double beta = 0.0;
    double h = 0.0;
    RegimeLabel label = RegimeLabel::unresolved;
    double f_hat = 0.0;                  // quenched estimate at (beta, h)
    double annealed_free_energy = 0.0;   // homogeneous F at h + log E e^{beta omega}
    std::vector<SeriesCheck> quenched;   // sum_n Z_n^omega e^{-eps n}
    std::vector<SeriesCheck> annealed;   // same with E Z_n
    bool diagnostics_consistent = false;
};

struct RegimeRow {
    double beta = 0.0;
    double annealed_critical = 0.0;
    std::optional<CriticalPointEstimate> critical;
    double bracket_lo = 0.0;  // unresolved band, margin included
    double bracket_hi = 0.0;
    std::string error;        // set when no bracket was found
    bool merged = false;      // beta = 0: cases 2 and 3 coincide

    /// h_c estimate minus the annealed value.
    [[nodiscard]] double gap() const
    {
        return critical ? critical->h_hat - annealed_critical : std::numeric_limits<double>::quiet_NaN();
    }
};

struct RegimeReport {
    RegimeScanConfig config;
    std::vector<RegimeRow> rows;      // one per beta
    std::vector<RegimePoint> points;  // beta-major

    [[nodiscard]] const RegimePoint& at(std::size_t beta_index, std::size_t h_index) const
    {
        return points.at(beta_index * config.hs.size() + h_index);
    }
    [[nodiscard]] std::size_t count(RegimeLabel l) const
    {
        return static_cast<std::size_t>(std::count_if(points.begin(), points.end(),
                                                      [&](const RegimePoint& p) { return p.label == l; }));
    }
};

/// Label from h, the annealed critical point and the quenched bracket. The
/// classification only covers h < 0; an exact tie with the annealed value is left
/// unclassified.
inline RegimeLabel classify_regime(double h, const RegimeRow& row)
{
    if (h >= 0.0) return RegimeLabel::not_covered;
    if (h == row.annealed_critical) return RegimeLabel::boundary;
    if (h < row.annealed_critical) return RegimeLabel::case3;
    if (!row.critical) return RegimeLabel::unresolved;
    if (h <= row.bracket_lo) return RegimeLabel::case2;
    if (h >= row.bracket_hi) return RegimeLabel::case1;
    return RegimeLabel::unresolved;
}

namespace detail {

inline SeriesCheck series_check(const PartitionTable& t, double eps, std::size_t n_terms)
{
    const auto rep = grand_canonical(t, eps, n_terms);
    return {eps, rep.verdict, rep.growth_rate};
}

inline const SeriesCheck* find_check(const std::vector<SeriesCheck>& v, double eps)
{
    for (const auto& c : v)
        if (c.eps == eps) return &c;
    return nullptr;
}

inline bool diagnostics_agree(const RegimePoint& p, double eps_small)
{
    const auto verdict = [](const SeriesCheck* c, Verdict want) { return c && c->verdict == want; };
    switch (p.label) {
    case RegimeLabel::case1:
        return p.f_hat > 0.0 && verdict(find_check(p.quenched, 0.5 * p.f_hat), Verdict::diverging);
    case RegimeLabel::case2:
        return verdict(find_check(p.quenched, eps_small), Verdict::converged) && p.annealed_free_energy > 0.0 &&
               verdict(find_check(p.annealed, 0.5 * p.annealed_free_energy), Verdict::diverging);
    case RegimeLabel::case3: return verdict(find_check(p.annealed, eps_small), Verdict::converged);
    default: return true;
    }
}

}  // namespace detail

/// Classifies every (beta, h) of the grid. Each beta row runs one critical
/// point bisection; points then compare h against h_c^a and the bracket and
/// record grand canonical verdicts for one quenched sequence and for the
/// disorder average (the homogeneous model at h + log E e^{beta omega}).
inline RegimeReport regime_scan(const RegimeScanConfig& cfg)
{
    if (cfg.betas.empty() || cfg.hs.empty()) throw std::invalid_argument("regime_scan: empty grid");
    if (cfg.kernel.n_max() > cfg.terms) throw std::invalid_argument("regime_scan: need N >= n_max");
    for (double b : cfg.betas)
        if (!(b >= 0.0)) throw std::invalid_argument("regime_scan: beta must be >= 0");

    RegimeReport rep;
    rep.config = cfg;
    rep.rows.resize(cfg.betas.size());
    parallel_for_index(cfg.betas.size(), cfg.workers, [&](std::size_t b) {
        RegimeRow& row = rep.rows[b];
        row.beta = cfg.betas[b];
        row.annealed_critical = annealed_critical_point(cfg.disorder, row.beta);
        row.merged = row.beta == 0.0;
        CriticalPointOptions opts;
        opts.n = cfg.n;
        opts.replicas = cfg.replicas;
        opts.tol = cfg.tol;
        opts.seed = derive_seed(cfg.seed, "scan-critical", b);
        try {
            row.critical = quenched_critical_point_estimate(cfg.disorder, cfg.kernel, row.beta, opts);
            row.bracket_lo = row.critical->h_lo - cfg.bracket_margin;
            row.bracket_hi = row.critical->h_hi + cfg.bracket_margin;
        } catch (const BracketNotFound& e) {
            row.error = e.what();
        }
    });

    const std::size_t n_h = cfg.hs.size();
    rep.points.resize(cfg.betas.size() * n_h);
    parallel_for_index(rep.points.size(), cfg.workers, [&](std::size_t idx) {
        const std::size_t b = idx / n_h;
        const RegimeRow& row = rep.rows[b];
        RegimePoint& p = rep.points[idx];
        p.beta = row.beta;
        p.h = cfg.hs[idx % n_h];
        p.label = classify_regime(p.h, row);

        const auto omega = sample_disorder(cfg.disorder, std::max(cfg.terms, cfg.n),
                                           derive_seed(cfg.seed, "scan-omega", b));
        const auto quenched = partition_table(omega, cfg.kernel, p.beta, p.h, std::max(cfg.terms, cfg.n));
        p.f_hat = free_energy_from_table(quenched).f_hat;
        const double shifted = p.h - row.annealed_critical;
        p.annealed_free_energy = homogeneous_free_energy(cfg.kernel, shifted).free_energy;
        const auto annealed = homogeneous_table(cfg.kernel, shifted, cfg.terms);

        std::vector<double> q_eps{0.0, cfg.eps_small};
        if (p.f_hat > 0.0) q_eps.push_back(0.5 * p.f_hat);
        std::vector<double> a_eps{0.0, cfg.eps_small};
        if (p.annealed_free_energy > 0.0) a_eps.push_back(0.5 * p.annealed_free_energy);
        for (double e : q_eps) p.quenched.push_back(detail::series_check(quenched, e, quenched.length()));
        for (double e : a_eps) p.annealed.push_back(detail::series_check(annealed, e, cfg.terms));
        p.diagnostics_consistent = detail::diagnostics_agree(p, cfg.eps_small);
    });
    return rep;
}

struct ScanComparison {
    std::size_t flips = 0;         // numbered case changed to another numbered case
    std::size_t resolved = 0;      // unresolved -> numbered
    std::size_t unresolved = 0;    // numbered -> unresolved
};

/// Compares two scans of the same grid.
inline ScanComparison compare_scans(const RegimeReport& a, const RegimeReport& b)
{
    if (a.points.size() != b.points.size()) throw std::invalid_argument("compare_scans: grids differ");
    ScanComparison c;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        const auto la = a.points[i].label, lb = b.points[i].label;
        if (la == lb) continue;
        if (is_numbered(la) && is_numbered(lb)) ++c.flips;
        else if (is_numbered(lb)) ++c.resolved;
        else if (is_numbered(la)) ++c.unresolved;
        else ++c.flips;  // boundary / not_covered never depend on budgets
    }
    return c;
}

// ------------------------------------------------- annealed transience check

struct TransienceConfig {
    RenewalKernel kernel = RenewalKernel::power_law(1.0, 8);
    DisorderSpec disorder = DisorderSpec::gaussian(1.0);
    double beta = 0.0;
    double h = -1.0;
    std::vector<std::size_t> absorbing{16, 64, 256};
    std::size_t environments = 100;
    std::size_t walk_replicas = 2000;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    std::uint64_t step_budget = 10'000'000;
    double sigmas = 3.0;
};

struct TransienceRow {
    std::size_t absorbing = 0;
    double absorbed_fraction = 0.0;  // trajectories that reached R within budget
    double mean_exact_visits = 0.0;  // environment average of W(R)
    double mean_mc_visits = 0.0;
    std::size_t environments = 0;
    std::size_t escape_agree = 0;    // environments whose escape estimate is within sigmas of 1 / W(R)
};

struct TransienceReport {
    TransienceConfig config;
    std::vector<TransienceRow> rows;
    /// W(R) over the largest R relative to the smallest; stays near 1 when
    /// the visit count saturates and grows like R in the recurrent case.
    double growth_ratio = 0.0;
};

/// Per sampled environment the number of visits to 0 before R is geometric
/// with escape probability 1 / W(R). Estimates it by 1 / mean visits and
/// compares with the exact value.
inline TransienceReport annealed_transience_check(const TransienceConfig& cfg)
{
    if (cfg.absorbing.empty()) throw std::invalid_argument("annealed_transience_check: no R values");
    if (cfg.environments < 1 || cfg.walk_replicas < 2)
        throw std::invalid_argument("annealed_transience_check: need environments >= 1 and walk replicas >= 2");
    const WalkParams params{cfg.beta, cfg.h, 0.0};
    params.validate();

    TransienceReport rep;
    rep.config = cfg;
    for (std::size_t ri = 0; ri < cfg.absorbing.size(); ++ri) {
        const std::size_t r = cfg.absorbing[ri];
        if (r < 1) throw std::invalid_argument("annealed_transience_check: R must be >= 1");
        struct EnvResult {
            double exact = 0.0, mc = 0.0;
            std::size_t absorbed = 0;
            bool agree = false;
        };
        std::vector<EnvResult> res(cfg.environments);
        parallel_for_index(cfg.environments, cfg.workers, [&](std::size_t e) {
            const auto env = sample_environment(cfg.kernel, cfg.disorder, r, derive_seed(cfg.seed, "transience-env", e));
            const auto v = build_potential(env, params);
            const VisitChain chain(v, r);
            std::vector<double> counts;
            counts.reserve(cfg.walk_replicas);
            for (std::size_t i = 0; i < cfg.walk_replicas; ++i) {
                Rng rng(derive_seed(derive_seed(cfg.seed, "transience-walk", e), "r", ri * cfg.walk_replicas + i));
                try {
                    counts.push_back(static_cast<double>(chain.run(rng, cfg.step_budget)));
                } catch (const StepBudgetExceeded&) {
                }
            }
            EnvResult& out = res[e];
            out.exact = expected_visits_exact(v, r);
            out.absorbed = counts.size();
            if (counts.size() >= 2) {
                const auto s = sample_stats(counts);
                out.mc = s.mean;
                const double escape = 1.0 / s.mean;
                const double escape_se = s.std_error / (s.mean * s.mean);
                out.agree = std::abs(escape - 1.0 / out.exact) <= cfg.sigmas * escape_se + 1e-12;
            }
        });
        TransienceRow row;
        row.absorbing = r;
        row.environments = cfg.environments;
        CompensatedSum exact, mc;
        std::size_t absorbed = 0;
        for (const auto& x : res) {
            exact.add(x.exact);
            mc.add(x.mc);
            absorbed += x.absorbed;
            row.escape_agree += x.agree ? 1 : 0;
        }
        const double envs = static_cast<double>(cfg.environments);
        row.mean_exact_visits = exact.value() / envs;
        row.mean_mc_visits = mc.value() / envs;
        row.absorbed_fraction = static_cast<double>(absorbed) / (envs * static_cast<double>(cfg.walk_replicas));
        rep.rows.push_back(row);
    }
    rep.growth_ratio = rep.rows.back().mean_exact_visits / rep.rows.front().mean_exact_visits;
    return rep;
}

}  // namespace sparsepin
