#pragma once

// Disordered pinning model on a renewal: pinned and free partition functions
// by renewal recursion (log domain), the grand canonical series, free-energy
// estimators and the critical points.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsepin/environment.hpp"
#include "sparsepin/numeric.hpp"
#include "sparsepin/parallel.hpp"
#include "sparsepin/random.hpp"

namespace sparsepin {

/// log z^c_m (endpoint pinned) and log Z_m (free) for m = 0..n.
/// Both start at log 1 = 0: the empty configuration counts once.
struct PartitionTable {
    double beta = 0.0;
    double h = 0.0;
    std::vector<double> log_zc;
    std::vector<double> log_z;

    [[nodiscard]] std::size_t length() const noexcept
    {
        return log_zc.empty() ? 0 : log_zc.size() - 1;
    }
};

namespace detail {

// log sum_j e^{a_j + b_j}
inline double log_dot(const double* a, const double* b, std::size_t count) noexcept
{
    double peak = neg_inf;
    for (std::size_t j = 0; j < count; ++j) peak = std::max(peak, a[j] + b[j]);
    if (peak == neg_inf) return neg_inf;
    double acc = 0.0;
    for (std::size_t j = 0; j < count; ++j) acc += std::exp(a[j] + b[j] - peak);
    return peak + std::log(acc);
}

}  // namespace detail

/// z^c_0 = 1, z^c_m = e^{beta omega_m + h} sum_{k=1}^{min(m, n_max)} K(k) z^c_{m-k}.
/// omega[k] is the disorder at site k + 1.
inline PartitionTable pinned_recursion(std::span<const double> omega, const RenewalKernel& kernel,
                                       double beta, double h, std::size_t n)
{
    if (omega.size() < n) throw std::invalid_argument("pinned_recursion: omega shorter than n");
    if (!(beta >= 0.0)) throw std::invalid_argument("pinned_recursion: beta must be >= 0");
    PartitionTable t;
    t.beta = beta;
    t.h = h;
    t.log_zc.assign(n + 1, neg_inf);
    t.log_zc[0] = 0.0;

    // reversed log-kernel so that the window over log_zc[m-k] is contiguous
    const std::size_t n_max = kernel.n_max();
    const auto log_k = kernel.log_weights();
    std::vector<double> rev(log_k.rbegin(), log_k.rend());

    for (std::size_t m = 1; m <= n; ++m) {
        const std::size_t reach = std::min(m, n_max);
        // k runs 1..reach; log_zc[m - k] for k = reach..1 is log_zc[m - reach .. m - 1]
        const double acc = detail::log_dot(rev.data() + (n_max - reach), t.log_zc.data() + (m - reach), reach);
        t.log_zc[m] = acc == neg_inf ? neg_inf : acc + beta * omega[m - 1] + h;
    }
    return t;
}

/// Z_m = sum_{k=0}^{m} z^c_k P(tau_1 > m - k): decomposition on the last
/// renewal point before m.
inline PartitionTable& free_partition(PartitionTable& t, const RenewalKernel& kernel)
{
    const std::size_t n = t.length();
    const std::size_t n_max = kernel.n_max();
    std::vector<double> rev_tail(n_max);  // rev_tail[j] = log tail(n_max - 1 - j)
    for (std::size_t j = 0; j < n_max; ++j) rev_tail[j] = kernel.log_tail(n_max - 1 - j);

    t.log_z.assign(n + 1, neg_inf);
    for (std::size_t m = 0; m <= n; ++m) {
        // k from m - reach + 1 to m, with tail index m - k from reach - 1 down to 0
        const std::size_t reach = std::min(m + 1, n_max);
        t.log_z[m] = detail::log_dot(rev_tail.data() + (n_max - reach), t.log_zc.data() + (m + 1 - reach), reach);
    }
    return t;
}

inline PartitionTable partition_table(std::span<const double> omega, const RenewalKernel& kernel,
                                      double beta, double h, std::size_t n)
{
    auto t = pinned_recursion(omega, kernel, beta, h, n);
    free_partition(t, kernel);
    return t;
}

/// Homogeneous (beta = 0) table with contact reward h.
inline PartitionTable homogeneous_table(const RenewalKernel& kernel, double h, std::size_t n)
{
    const std::vector<double> zeros(n, 0.0);
    return partition_table(zeros, kernel, 0.0, h, n);
}

struct BruteForcePartition {
    double z = 0.0;         // Z_n
    double z_pinned = 0.0;  // z^c_n
};

inline constexpr std::size_t brute_force_limit = 14;

/// Direct enumeration over every contact set in {1..n}.
inline BruteForcePartition brute_force_partition(std::span<const double> omega, const RenewalKernel& kernel,
                                                 double beta, double h, std::size_t n)
{
    if (n > brute_force_limit)
        throw std::invalid_argument("brute_force_partition: n > " + std::to_string(brute_force_limit));
    if (omega.size() < n) throw std::invalid_argument("brute_force_partition: omega shorter than n");
    BruteForcePartition out;
    if (n == 0) return {1.0, 1.0};
    CompensatedSum z, zc;
    const std::uint32_t configs = 1u << n;
    for (std::uint32_t mask = 0; mask < configs; ++mask) {
        double weight = 1.0;
        double energy = 0.0;
        std::size_t last = 0;
        for (std::size_t site = 1; site <= n && weight > 0.0; ++site) {
            if (!(mask >> (site - 1) & 1u)) continue;
            weight *= kernel.weight(site - last);
            energy += beta * omega[site - 1] + h;
            last = site;
        }
        if (weight == 0.0) continue;
        const double w = weight * std::exp(energy);
        z.add(w * kernel.tail(n - last));
        if (last == n) zc.add(w);
    }
    out.z = z.value();
    out.z_pinned = zc.value();
    return out;
}

// ------------------------------------------------------- grand canonical

enum class Series { free, pinned };
enum class Verdict { converged, diverging, inconclusive };

inline std::string to_string(Verdict v)
{
    switch (v) {
    case Verdict::converged: return "converged";
    case Verdict::diverging: return "diverging";
    case Verdict::inconclusive: return "inconclusive";
    }
    return "unknown";
}

struct GrandCanonicalOptions {
    Series series = Series::free;
    double window_fraction = 0.25;
    std::size_t min_window = 16;
    /// |slope| below this is inconclusive
    double delta = 1e-3;
};

struct GrandCanonicalReport {
    double f = 0.0;
    Series series = Series::free;
    std::size_t n_terms = 0;               // N + 1
    std::vector<double> log_partial_sums;  // log S_N for N = 0..
    double growth_rate = 0.0;              // fitted slope of log(Z_n e^{-fn}) over the last window
    Verdict verdict = Verdict::inconclusive;
    double tail_bound = std::numeric_limits<double>::infinity();

    [[nodiscard]] double log_sum() const { return log_partial_sums.back(); }
    [[nodiscard]] double sum() const { return std::exp(log_sum()); }
    /// Partial sum without the n = 0 term (which is 1).
    [[nodiscard]] double sum_without_origin() const { return std::expm1(log_sum()); }
};

/// sum_{n=0}^{N} Z_n e^{-fn} with a convergence verdict.
///
/// On convergence the tail beyond N is bounded by a geometric majorant: with
/// slope s < 0 fitted on the window and C = max_window(log t_n - s n), every
/// term is assumed to satisfy log t_n <= C + s n, giving
/// sum_{n > N} t_n <= e^{C + s(N+1)} / (1 - e^{s}).
inline GrandCanonicalReport grand_canonical(const PartitionTable& t, double f, std::size_t n_last,
                                            const GrandCanonicalOptions& opts = {})
{
    const auto& logs = opts.series == Series::free ? t.log_z : t.log_zc;
    if (logs.size() < n_last + 1)
        throw std::invalid_argument("grand_canonical: table shorter than N");

    GrandCanonicalReport rep;
    rep.f = f;
    rep.series = opts.series;
    rep.n_terms = n_last + 1;
    rep.log_partial_sums.resize(n_last + 1);

    std::vector<double> log_terms(n_last + 1);
    LogSumAccumulator acc;
    for (std::size_t n = 0; n <= n_last; ++n) {
        log_terms[n] = logs[n] == neg_inf ? neg_inf : logs[n] - f * static_cast<double>(n);
        acc.add(log_terms[n]);
        rep.log_partial_sums[n] = acc.log_value();
    }

    const std::size_t window = std::min<std::size_t>(
        n_last + 1,
        std::max<std::size_t>(opts.min_window,
                              static_cast<std::size_t>(opts.window_fraction * static_cast<double>(n_last + 1))));
    std::vector<double> xs, ys;
    for (std::size_t n = n_last + 1 - window; n <= n_last; ++n) {
        if (log_terms[n] == neg_inf) continue;
        xs.push_back(static_cast<double>(n));
        ys.push_back(log_terms[n]);
    }
    if (xs.size() < 2) {
        // vanishing terms across the window
        rep.growth_rate = -std::numeric_limits<double>::infinity();
        rep.verdict = Verdict::converged;
        rep.tail_bound = 0.0;
        return rep;
    }
    const auto fit = least_squares(xs, ys);
    rep.growth_rate = fit.slope;
    if (fit.slope < -opts.delta) {
        double envelope = neg_inf;
        for (std::size_t i = 0; i < xs.size(); ++i) envelope = std::max(envelope, ys[i] - fit.slope * xs[i]);
        const double log_bound = envelope + fit.slope * static_cast<double>(n_last + 1) -
                                 std::log1p(-std::exp(fit.slope));
        rep.verdict = Verdict::converged;
        rep.tail_bound = std::exp(log_bound);
    } else if (fit.slope > opts.delta) {
        rep.verdict = Verdict::diverging;
    }
    return rep;
}

// ------------------------------------------------------------ free energy

struct FreeEnergyEstimate {
    double f_hat = 0.0;          // max(0, raw)
    double raw = 0.0;            // (1/n) log z^c_n
    double window_spread = 0.0;  // max - min of (1/m) log z^c_m over m in [n/2, n]
    std::size_t n = 0;
};

inline FreeEnergyEstimate free_energy_from_table(const PartitionTable& t)
{
    const std::size_t n = t.length();
    if (n < 2) throw std::invalid_argument("free_energy_estimate: need n >= 2");
    FreeEnergyEstimate est;
    est.n = n;
    est.raw = t.log_zc[n] / static_cast<double>(n);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t m = n / 2; m <= n; ++m) {
        if (m == 0 || t.log_zc[m] == neg_inf) continue;
        const double r = t.log_zc[m] / static_cast<double>(m);
        lo = std::min(lo, r);
        hi = std::max(hi, r);
    }
    est.window_spread = hi >= lo ? hi - lo : 0.0;
    est.f_hat = std::max(0.0, est.raw);
    return est;
}

/// (1/n) log z^c_n, clamped at 0, with a window spread diagnostic.
inline FreeEnergyEstimate free_energy_estimate(std::span<const double> omega, const RenewalKernel& kernel,
                                               double beta, double h, std::size_t n)
{
    return free_energy_from_table(pinned_recursion(omega, kernel, beta, h, n));
}

struct HomogeneousSolution {
    double h = 0.0;
    double free_energy = 0.0;
    double residual = 0.0;  // |sum_n K(n) e^{-Fn} - e^{-h}|, zero for h <= 0
};

inline double kernel_laplace(const RenewalKernel& kernel, double s)
{
    CompensatedSum acc;
    const auto w = kernel.weights();
    for (std::size_t n = 1; n <= w.size(); ++n) acc.add(w[n - 1] * std::exp(-s * static_cast<double>(n)));
    return acc.value();
}

/// Free energy of the beta = 0 model: F = 0 for h <= 0, otherwise the root of
/// sum_n K(n) e^{-Fn} = e^{-h}, which lies in (0, h].
inline HomogeneousSolution homogeneous_free_energy(const RenewalKernel& kernel, double h)
{
    HomogeneousSolution sol;
    sol.h = h;
    if (h <= 0.0) return sol;
    const double target = std::exp(-h);
    double lo = 0.0, hi = h;
    for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
        const double mid = 0.5 * (lo + hi);
        (kernel_laplace(kernel, mid) > target ? lo : hi) = mid;
    }
    sol.free_energy = 0.5 * (lo + hi);
    sol.residual = std::abs(kernel_laplace(kernel, sol.free_energy) - target);
    return sol;
}

/// h_c^a(beta) = -log E e^{beta omega}.
inline double annealed_critical_point(const DisorderSpec& spec, double beta)
{
    return 0.0 - log_mgf(spec, beta);  // +0 rather than -0 at beta = 0
}

class BracketNotFound : public std::runtime_error {
public:
    BracketNotFound(double h_min, double h_max, const std::string& why)
        : std::runtime_error("critical point bracket not found in [" + std::to_string(h_min) + ", " +
                             std::to_string(h_max) + "]: " + why),
          h_min_(h_min), h_max_(h_max)
    {
    }
    [[nodiscard]] double h_min() const noexcept { return h_min_; }
    [[nodiscard]] double h_max() const noexcept { return h_max_; }

private:
    double h_min_, h_max_;
};

struct CriticalPointOptions {
    std::size_t n = 20'000;
    std::size_t replicas = 4;
    double tol = 0.01;
    std::uint64_t seed = 1;
    unsigned workers = 1;
    /// search range; NaN picks h_c^a - 1 and 1
    double h_min = std::numeric_limits<double>::quiet_NaN();
    double h_max = std::numeric_limits<double>::quiet_NaN();
    double threshold_floor = 1e-4;
    double spread_factor = 10.0;
};

struct LocalizationTest {
    double h = 0.0;
    double mean_f_hat = 0.0;
    double replica_spread = 0.0;  // max - min of f_hat across replicas
    double window_spread = 0.0;   // largest window spread across replicas
    double threshold = 0.0;
    bool localized = false;
};

struct CriticalPointEstimate {
    double h_hat = 0.0;
    double h_lo = 0.0;  // f_hat(h_lo) <= threshold
    double h_hi = 0.0;  // f_hat(h_hi) > threshold
    double annealed = 0.0;
    std::vector<LocalizationTest> evaluations;
};

/// Evaluates "f_hat > max(floor, factor * window_spread)" on fixed disorder
/// sequences, one per replica; all h share the same sequences.
class LocalizationProbe {
public:
    LocalizationProbe(const DisorderSpec& spec, RenewalKernel kernel, double beta, const CriticalPointOptions& opts)
        : kernel_(std::move(kernel)), beta_(beta), opts_(opts), omegas_(opts.replicas)
    {
        if (opts.replicas < 1) throw std::invalid_argument("critical point: need at least one replica");
        if (opts.n < 2) throw std::invalid_argument("critical point: need n >= 2");
        for (std::size_t r = 0; r < opts.replicas; ++r)
            omegas_[r] = sample_disorder(spec, opts.n, derive_seed(opts.seed, "critical-omega", r));
    }

    [[nodiscard]] std::vector<FreeEnergyEstimate> estimates(double h) const
    {
        std::vector<FreeEnergyEstimate> est(omegas_.size());
        parallel_for_index(omegas_.size(), opts_.workers, [&](std::size_t r) {
            est[r] = free_energy_estimate(omegas_[r], kernel_, beta_, h, opts_.n);
        });
        return est;
    }

    [[nodiscard]] LocalizationTest operator()(double h) const
    {
        const auto est = estimates(h);
        LocalizationTest t;
        t.h = h;
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        CompensatedSum mean;
        for (const auto& e : est) {
            mean.add(e.f_hat);
            t.window_spread = std::max(t.window_spread, e.window_spread);
            lo = std::min(lo, e.f_hat);
            hi = std::max(hi, e.f_hat);
        }
        t.mean_f_hat = mean.value() / static_cast<double>(est.size());
        t.replica_spread = hi - lo;
        t.threshold = std::max(opts_.threshold_floor, opts_.spread_factor * t.window_spread);
        t.localized = t.mean_f_hat > t.threshold;
        return t;
    }

    [[nodiscard]] const std::vector<std::vector<double>>& omegas() const noexcept { return omegas_; }

private:
    RenewalKernel kernel_;
    double beta_;
    CriticalPointOptions opts_;
    std::vector<std::vector<double>> omegas_;
};

/// Bisection on h for the onset of a positive free energy.
inline CriticalPointEstimate quenched_critical_point_estimate(const DisorderSpec& spec, const RenewalKernel& kernel,
                                                              double beta, const CriticalPointOptions& opts = {})
{
    if (!(opts.tol > 0.0)) throw std::invalid_argument("critical point: tol must be positive");
    CriticalPointEstimate out;
    out.annealed = annealed_critical_point(spec, beta);
    double lo = std::isnan(opts.h_min) ? out.annealed - 1.0 : opts.h_min;
    double hi = std::isnan(opts.h_max) ? 1.0 : opts.h_max;
    if (!(lo < hi)) throw std::invalid_argument("critical point: need h_min < h_max");

    const LocalizationProbe probe(spec, kernel, beta, opts);
    const double range_lo = lo, range_hi = hi;
    auto test_lo = probe(lo);
    out.evaluations.push_back(test_lo);
    if (test_lo.localized) throw BracketNotFound(range_lo, range_hi, "localized at h_min");
    auto test_hi = probe(hi);
    out.evaluations.push_back(test_hi);
    if (!test_hi.localized) throw BracketNotFound(range_lo, range_hi, "not localized at h_max");

    while (hi - lo > opts.tol) {
        const double mid = 0.5 * (lo + hi);
        const auto t = probe(mid);
        out.evaluations.push_back(t);
        (t.localized ? hi : lo) = mid;
    }
    out.h_lo = lo;
    out.h_hi = hi;
    out.h_hat = 0.5 * (lo + hi);
    return out;
}

enum class Relevance { relevant, irrelevant };

inline std::string to_string(Relevance r) { return r == Relevance::relevant ? "relevant" : "irrelevant"; }

/// Critical-point-shift relevance for K(n) ~ c n^{-(1+alpha)} with constant c:
/// sum_n n^{-2(1-alpha)} diverges iff alpha >= 1/2.
inline Relevance relevance_classifier(double alpha)
{
    if (!(alpha >= 0.0)) throw std::invalid_argument("relevance_classifier: alpha must be >= 0");
    return alpha >= 0.5 ? Relevance::relevant : Relevance::irrelevant;
}

}  // namespace sparsepin
