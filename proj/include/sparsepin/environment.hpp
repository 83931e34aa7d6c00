#pragma once

// Randomness of a sparse environment: the renewal set of disorder locations
// and the i.i.d. disorder values, with their exact analytic functionals.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sparsepin/numeric.hpp"
#include "sparsepin/random.hpp"

namespace sparsepin {

// ---------------------------------------------------------------- disorder

enum class DisorderFamily { gaussian, rademacher, uniform_centered };

/// Zero-mean disorder law. `scale` is sigma for gaussian, the half width for
/// uniform_centered and unused for rademacher.
class DisorderSpec {
public:
    static DisorderSpec gaussian(double sigma)
    {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("gaussian disorder: sigma must be positive");
        return DisorderSpec(DisorderFamily::gaussian, sigma);
    }
    static DisorderSpec rademacher() { return DisorderSpec(DisorderFamily::rademacher, 1.0); }
    static DisorderSpec uniform_centered(double half_width)
    {
        if (!(half_width > 0.0) || !std::isfinite(half_width))
            throw std::invalid_argument("uniform disorder: half width must be positive");
        return DisorderSpec(DisorderFamily::uniform_centered, half_width);
    }

    [[nodiscard]] DisorderFamily family() const noexcept { return family_; }
    [[nodiscard]] double scale() const noexcept { return scale_; }

    [[nodiscard]] std::string name() const
    {
        switch (family_) {
        case DisorderFamily::gaussian: return "gaussian";
        case DisorderFamily::rademacher: return "rademacher";
        case DisorderFamily::uniform_centered: return "uniform";
        }
        return "unknown";
    }

    [[nodiscard]] double variance() const noexcept
    {
        switch (family_) {
        case DisorderFamily::gaussian: return scale_ * scale_;
        case DisorderFamily::rademacher: return 1.0;
        case DisorderFamily::uniform_centered: return scale_ * scale_ / 3.0;
        }
        return 0.0;
    }

    friend bool operator==(const DisorderSpec&, const DisorderSpec&) = default;

private:
    DisorderSpec(DisorderFamily family, double scale) : family_(family), scale_(scale) {}

    DisorderFamily family_;
    double scale_;
};

/// log E[exp(beta * omega)], closed form per family.
inline double log_mgf(const DisorderSpec& spec, double beta)
{
    if (!(beta >= 0.0)) throw std::invalid_argument("log_mgf: beta must be >= 0");
    switch (spec.family()) {
    case DisorderFamily::gaussian: {
        const double s = spec.scale();
        return 0.5 * beta * beta * s * s;
    }
    case DisorderFamily::rademacher:
        // log cosh b = b + log1p(e^{-2b}) - log 2, stable for large b
        return beta + std::log1p(std::exp(-2.0 * beta)) - std::log(2.0);
    case DisorderFamily::uniform_centered: {
        const double x = spec.scale() * beta;
        if (x < 1e-4) {
            const double x2 = x * x;
            return x2 / 6.0 - x2 * x2 / 180.0;
        }
        // log(sinh x / x) = x - log(2x) + log1p(-e^{-2x})
        return x - std::log(2.0 * x) + std::log1p(-std::exp(-2.0 * x));
    }
    }
    return 0.0;
}

/// n i.i.d. disorder values; element k is the value at site k + 1.
inline std::vector<double> sample_disorder(const DisorderSpec& spec, std::size_t n,
                                           std::uint64_t seed)
{
    std::vector<double> out(n);
    Rng rng(seed);
    switch (spec.family()) {
    case DisorderFamily::gaussian: {
        std::normal_distribution<double> normal(0.0, spec.scale());
        for (auto& x : out) x = normal(rng);
        break;
    }
    case DisorderFamily::rademacher:
        for (auto& x : out) x = (rng() >> 63) ? 1.0 : -1.0;
        break;
    case DisorderFamily::uniform_centered:
        for (auto& x : out) x = spec.scale() * (2.0 * rng.uniform() - 1.0);
        break;
    }
    return out;
}

// ------------------------------------------------------------------ kernel

enum class KernelKind { power_law, geometric, dirac };

/// Inter-arrival law K(n) = P(tau_1 = n) on the finite support 1..n_max.
///
/// Tails are accumulated from the top of the support and the weights are
/// then recovered as successive tail differences, so that
/// tail(n) - tail(n + 1) == K(n + 1) holds bit-for-bit.
class RenewalKernel {
public:
    /// K(n) proportional to n^{-(1 + alpha)} on 1..n_max.
    static RenewalKernel power_law(double alpha, std::size_t n_max)
    {
        if (!(alpha >= 0.0) || !std::isfinite(alpha))
            throw std::invalid_argument("power_law kernel: alpha must be >= 0");
        if (n_max < 1) throw std::invalid_argument("power_law kernel: n_max must be >= 1");
        std::vector<double> raw(n_max);
        for (std::size_t n = 1; n <= n_max; ++n)
            raw[n - 1] = std::pow(static_cast<double>(n), -(1.0 + alpha));
        return RenewalKernel(KernelKind::power_law, alpha, n_max, std::move(raw));
    }

    /// K(n) proportional to (1 - q) q^{n - 1}, renormalized to 1..n_max.
    static RenewalKernel geometric(double q, std::size_t n_max)
    {
        if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("geometric kernel: q must lie in (0,1)");
        if (n_max < 1) throw std::invalid_argument("geometric kernel: n_max must be >= 1");
        std::vector<double> raw(n_max);
        const double log_q = std::log(q);
        for (std::size_t n = 1; n <= n_max; ++n)
            raw[n - 1] = (1.0 - q) * std::exp(log_q * static_cast<double>(n - 1));
        return RenewalKernel(KernelKind::geometric, q, n_max, std::move(raw));
    }

    /// Deterministic gaps of length `step`.
    static RenewalKernel dirac(std::size_t step)
    {
        if (step < 1) throw std::invalid_argument("dirac kernel: step must be >= 1");
        std::vector<double> raw(step, 0.0);
        raw.back() = 1.0;
        return RenewalKernel(KernelKind::dirac, static_cast<double>(step), step, std::move(raw));
    }

    [[nodiscard]] KernelKind kind() const noexcept { return kind_; }
    /// alpha, q or the step length, depending on kind().
    [[nodiscard]] double parameter() const noexcept { return parameter_; }
    [[nodiscard]] std::size_t n_max() const noexcept { return n_max_; }

    /// K(n); zero outside 1..n_max.
    [[nodiscard]] double weight(std::size_t n) const noexcept
    {
        return (n >= 1 && n <= n_max_) ? weights_[n - 1] : 0.0;
    }
    [[nodiscard]] std::span<const double> weights() const noexcept { return weights_; }
    [[nodiscard]] std::span<const double> log_weights() const noexcept { return log_weights_; }

    /// P(tau_1 > n).
    [[nodiscard]] double tail(std::size_t n) const noexcept
    {
        return n < n_max_ ? tails_[n] : 0.0;
    }
    [[nodiscard]] double log_tail(std::size_t n) const noexcept
    {
        return n < n_max_ ? log_tails_[n] : neg_inf;
    }

    /// E(tau_1) = sum_n n K(n) = sum_{n >= 0} P(tau_1 > n).
    [[nodiscard]] double mean() const noexcept { return mean_; }

    /// Draws one gap by inverting the cumulative table.
    [[nodiscard]] std::size_t sample_gap(Rng& rng) const noexcept
    {
        if (kind_ == KernelKind::dirac) return n_max_;
        const double u = rng.uniform();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
        auto idx = static_cast<std::size_t>(it - cumulative_.begin());
        return std::min(idx, n_max_ - 1) + 1;
    }

    [[nodiscard]] std::string name() const
    {
        switch (kind_) {
        case KernelKind::power_law: return "power_law";
        case KernelKind::geometric: return "geometric";
        case KernelKind::dirac: return "dirac";
        }
        return "unknown";
    }

private:
    RenewalKernel(KernelKind kind, double parameter, std::size_t n_max, std::vector<double> raw)
        : kind_(kind), parameter_(parameter), n_max_(n_max)
    {
        CompensatedSum total;
        for (double w : raw) total.add(w);
        const double norm = total.value();

        tails_.assign(n_max_, 0.0);
        CompensatedSum acc;
        for (std::size_t n = n_max_; n-- > 1;) {
            acc.add(raw[n] / norm);
            tails_[n] = acc.value();
        }
        tails_[0] = 1.0;

        weights_.resize(n_max_);
        for (std::size_t n = 1; n <= n_max_; ++n)
            weights_[n - 1] = tails_[n - 1] - (n < n_max_ ? tails_[n] : 0.0);

        log_weights_.resize(n_max_);
        log_tails_.resize(n_max_);
        for (std::size_t i = 0; i < n_max_; ++i) {
            log_weights_[i] = weights_[i] > 0.0 ? std::log(weights_[i]) : neg_inf;
            log_tails_[i] = tails_[i] > 0.0 ? std::log(tails_[i]) : neg_inf;
        }

        if (kind_ != KernelKind::dirac)
            for (double w : weights_)
                if (!(w > 0.0))
                    throw std::invalid_argument(name() + " kernel: weights underflow, reduce n_max");

        CompensatedSum m;
        for (double t : tails_) m.add(t);
        mean_ = m.value();

        cumulative_.resize(n_max_);
        for (std::size_t i = 0; i < n_max_; ++i) cumulative_[i] = 1.0 - (i + 1 < n_max_ ? tails_[i + 1] : 0.0);
    }

    KernelKind kind_;
    double parameter_;
    std::size_t n_max_;
    std::vector<double> weights_;
    std::vector<double> log_weights_;
    std::vector<double> tails_;  // tails_[n] = P(tau_1 > n), n < n_max
    std::vector<double> log_tails_;
    std::vector<double> cumulative_;  // cumulative_[i] = P(tau_1 <= i + 1)
    double mean_ = 0.0;
};

/// Renewal points 0 = tau_0 < tau_1 < ... <= horizon.
inline std::vector<std::size_t> sample_renewal(const RenewalKernel& kernel, std::size_t horizon,
                                               std::uint64_t seed)
{
    std::vector<std::size_t> tau{0};
    Rng rng(seed);
    std::size_t last = 0;
    for (;;) {
        const std::size_t gap = kernel.sample_gap(rng);
        if (gap > horizon - last) break;
        last += gap;
        tau.push_back(last);
    }
    return tau;
}

// ------------------------------------------------------------- environment

/// One realization of the sparse environment on 0..horizon.
/// omega[k] holds the disorder at site k + 1; it exists at every site but
/// only acts where the site belongs to tau.
struct SparseEnvironment {
    std::size_t horizon = 0;
    std::vector<std::size_t> tau{0};
    std::vector<double> omega;

    /// Throws std::invalid_argument when the invariants do not hold.
    void validate() const
    {
        if (tau.empty() || tau.front() != 0)
            throw std::invalid_argument("environment: tau must start at 0");
        for (std::size_t i = 1; i < tau.size(); ++i)
            if (tau[i] <= tau[i - 1])
                throw std::invalid_argument("environment: tau must be strictly increasing");
        if (tau.back() > horizon) throw std::invalid_argument("environment: tau exceeds horizon");
        if (omega.size() != horizon)
            throw std::invalid_argument("environment: omega must have one value per site 1..horizon");
    }

    /// Membership mask over 0..horizon.
    [[nodiscard]] std::vector<char> renewal_mask() const
    {
        std::vector<char> mask(horizon + 1, 0);
        for (std::size_t t : tau) mask[t] = 1;
        return mask;
    }
};

/// Samples tau and omega from independent streams derived from `seed`.
inline SparseEnvironment sample_environment(const RenewalKernel& kernel, const DisorderSpec& spec,
                                            std::size_t horizon, std::uint64_t seed)
{
    SparseEnvironment env;
    env.horizon = horizon;
    env.tau = sample_renewal(kernel, horizon, derive_seed(seed, "tau"));
    env.omega = sample_disorder(spec, horizon, derive_seed(seed, "omega"));
    return env;
}

}  // namespace sparsepin
