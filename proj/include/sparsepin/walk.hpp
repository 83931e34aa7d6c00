#pragma once

// Nearest-neighbour walk in a potential V: exact scale-function formulas and
// seeded Monte Carlo for the folded (birth-and-death) chain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsepin/environment.hpp"
#include "sparsepin/numeric.hpp"
#include "sparsepin/parallel.hpp"
#include "sparsepin/random.hpp"

namespace sparsepin {

struct WalkParams {
    double beta = 0.0;
    double h = 0.0;
    double f = 0.0;

    void validate() const
    {
        if (!(beta >= 0.0)) throw std::invalid_argument("walk params: beta must be >= 0");
        if (!std::isfinite(h) || !std::isfinite(f))
            throw std::invalid_argument("walk params: h and f must be finite");
    }
};

/// Potential V_0..V_M with V_0 = 0.
class Potential {
public:
    Potential() : values_{0.0} {}
    explicit Potential(std::vector<double> values) : values_(std::move(values))
    {
        if (values_.empty() || values_.front() != 0.0)
            throw std::invalid_argument("potential: V_0 must be 0");
    }

    /// M, the last index carrying a value.
    [[nodiscard]] std::size_t horizon() const noexcept { return values_.size() - 1; }
    [[nodiscard]] double operator[](std::size_t i) const { return values_.at(i); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

    /// V_i - V_{i-1} for 1 <= i <= M.
    [[nodiscard]] double delta(std::size_t i) const
    {
        if (i == 0 || i > horizon()) throw std::out_of_range("potential: delta index out of range");
        return values_[i] - values_[i - 1];
    }

private:
    std::vector<double> values_;
};

/// V_i = V_{i-1} + (h + beta omega_i) 1{i in tau} - f.
inline Potential build_potential(const SparseEnvironment& env, const WalkParams& params)
{
    env.validate();
    params.validate();
    const auto mask = env.renewal_mask();
    std::vector<double> v(env.horizon + 1, 0.0);
    for (std::size_t i = 1; i <= env.horizon; ++i) {
        const double contact = mask[i] ? params.h + params.beta * env.omega[i - 1] : 0.0;
        v[i] = v[i - 1] + contact - params.f;
    }
    return Potential(std::move(v));
}

/// Probability of an up-step across a potential increment: 1 / (1 + e^{dv}).
inline double step_prob(double delta_v) noexcept
{
    if (delta_v > 0.0) {
        const double e = std::exp(-delta_v);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(delta_v));
}

/// W(n) = sum_{0 <= k < n} e^{V_k}; may overflow to +inf for large V.
inline double scale_value(const Potential& v, std::size_t n)
{
    if (n > v.horizon() + 1) throw std::out_of_range("scale_value: n exceeds M + 1");
    CompensatedSum s;
    for (std::size_t k = 0; k < n; ++k) s.add(std::exp(v[k]));
    return s.value();
}

/// log W(n); -inf for n = 0.
inline double log_scale_value(const Potential& v, std::size_t n)
{
    if (n > v.horizon() + 1) throw std::out_of_range("log_scale_value: n exceeds M + 1");
    LogSumAccumulator acc;
    for (std::size_t k = 0; k < n; ++k) acc.add(v[k]);
    return acc.log_value();
}

/// P(exit through c before returning to a | start at b)
///   = (W(b) - W(a)) / (W(c) - W(a)),  0 <= a < b <= c <= M + 1.
inline double ruin_prob(const Potential& v, std::size_t a, std::size_t b, std::size_t c)
{
    if (!(a < b && b <= c)) throw std::invalid_argument("ruin_prob: need a < b <= c");
    if (c > v.horizon() + 1) throw std::out_of_range("ruin_prob: c exceeds M + 1");
    if (b == c) return 1.0;
    double peak = v[a];
    for (std::size_t k = a; k < c; ++k) peak = std::max(peak, v[k]);
    CompensatedSum num, den;
    for (std::size_t k = a; k < c; ++k) {
        const double term = std::exp(v[k] - peak);
        den.add(term);
        if (k < b) num.add(term);
    }
    return num.value() / den.value();
}

/// Expected visits to 0 (time 0 included) of the folded chain before it
/// first hits R: W(R) = sum_{i < R} e^{V_i}. The count is geometric with
/// success probability 1 / W(R).
inline double expected_visits_exact(const Potential& v, std::size_t r)
{
    if (r < 1 || r > v.horizon() + 1) throw std::out_of_range("expected_visits_exact: need 1 <= R <= M + 1");
    return scale_value(v, r);
}

inline double log_expected_visits_exact(const Potential& v, std::size_t r)
{
    if (r < 1 || r > v.horizon() + 1)
        throw std::out_of_range("log_expected_visits_exact: need 1 <= R <= M + 1");
    return log_scale_value(v, r);
}

// ------------------------------------------------------------- Monte Carlo

inline constexpr std::uint64_t default_step_budget = 100'000'000;

class StepBudgetExceeded : public std::runtime_error {
public:
    StepBudgetExceeded(std::uint64_t budget, std::size_t absorbing, long long replica = -1)
        : std::runtime_error(message(budget, absorbing, replica)),
          budget_(budget), absorbing_(absorbing), replica_(replica)
    {
    }

    [[nodiscard]] std::uint64_t budget() const noexcept { return budget_; }
    [[nodiscard]] std::size_t absorbing() const noexcept { return absorbing_; }
    /// Replica index, or -1 for a single trajectory.
    [[nodiscard]] long long replica() const noexcept { return replica_; }

private:
    static std::string message(std::uint64_t budget, std::size_t absorbing, long long replica)
    {
        std::string s = "step budget of " + std::to_string(budget) +
                        " exhausted before hitting R = " + std::to_string(absorbing);
        if (replica >= 0) s += " (replica " + std::to_string(replica) + ")";
        return s;
    }

    std::uint64_t budget_;
    std::size_t absorbing_;
    long long replica_;
};

/// Transition table of the folded chain on 0..R: 0 -> 1 surely, i -> i + 1
/// with probability step_prob(V_i - V_{i-1}), absorbed at R.
class VisitChain {
public:
    VisitChain(const Potential& v, std::size_t r) : absorbing_(r)
    {
        if (r < 1 || r > v.horizon() + 1) throw std::out_of_range("visit chain: need 1 <= R <= M + 1");
        thresholds_.assign(r, std::numeric_limits<std::uint64_t>::max());
        for (std::size_t i = 1; i < r; ++i) thresholds_[i] = to_threshold(step_prob(v.delta(i)));
    }

    [[nodiscard]] std::size_t absorbing() const noexcept { return absorbing_; }

    /// One trajectory; returns the number of visits to 0 including time 0.
    std::uint64_t run(Rng& rng, std::uint64_t budget = default_step_budget) const
    {
        std::size_t state = 0;
        std::uint64_t visits = 1;
        for (std::uint64_t step = 0; step < budget; ++step) {
            if (state == 0) {
                state = 1;
            } else if (rng() < thresholds_[state]) {
                ++state;
            } else if (--state == 0) {
                ++visits;
                continue;
            }
            if (state == absorbing_) return visits;
        }
        throw StepBudgetExceeded(budget, absorbing_);
    }

private:
    // up iff a 64-bit draw falls below p * 2^64
    static std::uint64_t to_threshold(double p) noexcept
    {
        if (p >= 1.0) return std::numeric_limits<std::uint64_t>::max();
        return static_cast<std::uint64_t>(std::ldexp(p, 64));
    }

    std::size_t absorbing_;
    std::vector<std::uint64_t> thresholds_;
};

inline std::uint64_t simulate_visits(const Potential& v, std::size_t r, std::uint64_t seed,
                                     std::uint64_t budget = default_step_budget)
{
    VisitChain chain(v, r);
    Rng rng(seed);
    return chain.run(rng, budget);
}

struct McOptions {
    unsigned workers = 1;
    std::uint64_t step_budget = default_step_budget;
};

struct VisitStatistics {
    double mean = 0.0;
    double std_error = 0.0;
    double variance = 0.0;
    double variance_std_error = 0.0;
    std::size_t replicas = 0;
    std::uint64_t seed = 0;
};

/// Visit counts for `replicas` independent trajectories; replica i uses the
/// stream derive_seed(seed, "visits", i).
inline std::vector<std::uint64_t> visit_counts(const Potential& v, std::size_t r,
                                               std::size_t replicas, std::uint64_t seed,
                                               const McOptions& opts = {})
{
    const VisitChain chain(v, r);
    std::vector<std::uint64_t> counts(replicas);
    parallel_for_index(replicas, opts.workers, [&](std::size_t i) {
        Rng rng(derive_seed(seed, "visits", i));
        try {
            counts[i] = chain.run(rng, opts.step_budget);
        } catch (const StepBudgetExceeded& e) {
            throw StepBudgetExceeded(e.budget(), e.absorbing(), static_cast<long long>(i));
        }
    });
    return counts;
}

inline VisitStatistics summarize_visits(std::span<const std::uint64_t> counts, std::uint64_t seed)
{
    const auto s = sample_stats(counts);
    VisitStatistics out;
    out.mean = s.mean;
    out.std_error = s.std_error;
    out.variance = s.variance;
    out.replicas = counts.size();
    out.seed = seed;
    std::vector<double> sq(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        const double d = static_cast<double>(counts[i]) - s.mean;
        sq[i] = d * d;
    }
    out.variance_std_error = sample_stats(sq).std_error;
    return out;
}

inline VisitStatistics mc_visits(const Potential& v, std::size_t r, std::size_t replicas,
                                 std::uint64_t seed, const McOptions& opts = {})
{
    if (replicas < 2) throw std::invalid_argument("mc_visits: need at least 2 replicas");
    const auto counts = visit_counts(v, r, replicas, seed, opts);
    return summarize_visits(counts, seed);
}

// ------------------------------------------------------------------- speed

/// Up-step probabilities of the unfolded walk on sites -L..L.
struct LatticeWalk {
    std::size_t half_width = 0;
    std::vector<double> up_prob;  // index i + half_width

    [[nodiscard]] double up(long long site) const
    {
        return up_prob[static_cast<std::size_t>(site + static_cast<long long>(half_width))];
    }
};

/// How the potential is continued to negative sites for the walk on Z.
enum class LatticeExtension {
    /// independent copy of the environment on the negative half-line
    stationary,
    /// reflection through -1/2 with V_{-1} = 0, i.e. dV_0 = 0, dV_{-k} = -dV_k
    mirrored,
};

/// Generator for the homogeneous potential dV = h - f at every site.
inline auto homogeneous_lattice(const WalkParams& params)
{
    params.validate();
    return [params](std::uint64_t /*seed*/, std::size_t half_width) {
        LatticeWalk w;
        w.half_width = half_width;
        w.up_prob.assign(2 * half_width + 1, step_prob(params.h - params.f));
        return w;
    };
}

/// Generator for the sparse random potential on -L..L.
inline auto sparse_lattice(RenewalKernel kernel, DisorderSpec spec, WalkParams params,
                           LatticeExtension extension = LatticeExtension::stationary)
{
    params.validate();
    return [kernel = std::move(kernel), spec, params, extension](std::uint64_t seed,
                                                                 std::size_t half_width) {
        auto increments = [&](std::uint64_t side_seed) {
            const auto env = sample_environment(kernel, spec, half_width, side_seed);
            const auto mask = env.renewal_mask();
            std::vector<double> dv(half_width + 1, -params.f);  // dv[k] at distance k
            for (std::size_t k = 1; k <= half_width; ++k)
                if (mask[k]) dv[k] += params.h + params.beta * env.omega[k - 1];
            return dv;
        };
        const auto right = increments(derive_seed(seed, "right"));
        LatticeWalk w;
        w.half_width = half_width;
        w.up_prob.resize(2 * half_width + 1);
        const std::size_t centre = half_width;
        for (std::size_t k = 1; k <= half_width; ++k) w.up_prob[centre + k] = step_prob(right[k]);
        if (extension == LatticeExtension::mirrored) {
            w.up_prob[centre] = step_prob(0.0);
            for (std::size_t k = 1; k <= half_width; ++k)
                w.up_prob[centre - k] = step_prob(-right[k]);
        } else {
            // site -k takes the increment at distance k of an independent
            // environment; site 0 carries no disorder.
            const auto left = increments(derive_seed(seed, "left"));
            w.up_prob[centre] = step_prob(-params.f);
            for (std::size_t k = 1; k <= half_width; ++k) w.up_prob[centre - k] = step_prob(left[k]);
        }
        return w;
    };
}

struct SpeedEstimate {
    double speed = 0.0;
    double std_error = 0.0;
    std::size_t replicas = 0;
    std::size_t n_steps = 0;
    std::uint64_t seed = 0;
};

/// Estimates E[X_n / n] for the walk on Z; every replica draws a fresh
/// potential from `generator(seed, n_steps)`.
template <class Generator>
SpeedEstimate mc_speed(Generator&& generator, std::size_t n_steps, std::size_t replicas,
                       std::uint64_t seed, unsigned workers = 1)
{
    if (n_steps < 1) throw std::invalid_argument("mc_speed: n_steps must be >= 1");
    if (replicas < 2) throw std::invalid_argument("mc_speed: need at least 2 replicas");
    std::vector<double> ratios(replicas);
    parallel_for_index(replicas, workers, [&](std::size_t r) {
        const LatticeWalk lattice = generator(derive_seed(seed, "speed-env", r), n_steps);
        Rng rng(derive_seed(seed, "speed-walk", r));
        long long x = 0;
        for (std::size_t s = 0; s < n_steps; ++s) x += rng.uniform() < lattice.up(x) ? 1 : -1;
        ratios[r] = static_cast<double>(x) / static_cast<double>(n_steps);
    });
    const auto s = sample_stats(ratios);
    return SpeedEstimate{s.mean, s.std_error, replicas, n_steps, seed};
}

}  // namespace sparsepin
