#pragma once

// JSON reports and plot-ready CSV tables. Doubles are written in shortest
// round-trip form so files are reproducible byte for byte. Non-finite values
// appear as null in JSON and as inf / -inf / nan in CSV.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "sparsepin/environment.hpp"
#include "sparsepin/experiments.hpp"
#include "sparsepin/pinning.hpp"
#include "sparsepin/walk.hpp"

namespace sparsepin::io {

using json = nlohmann::ordered_json;

inline constexpr int schema_version = 1;

// ------------------------------------------------------------- factories

/// power_law (alpha), geometric (q) or dirac (step, rounded).
inline RenewalKernel make_kernel(const std::string& kind, double param, std::size_t n_max)
{
    if (kind == "power_law") return RenewalKernel::power_law(param, n_max);
    if (kind == "geometric") return RenewalKernel::geometric(param, n_max);
    if (kind == "dirac") {
        if (!(param >= 1.0) || param != std::floor(param))
            throw std::invalid_argument("dirac kernel: step must be a positive integer");
        return RenewalKernel::dirac(static_cast<std::size_t>(param));
    }
    throw std::invalid_argument("unknown kernel '" + kind + "' (power_law, geometric, dirac)");
}

/// gaussian (sigma), rademacher (param ignored) or uniform (half width).
inline DisorderSpec make_disorder(const std::string& family, double param)
{
    if (family == "gaussian") return DisorderSpec::gaussian(param);
    if (family == "rademacher") return DisorderSpec::rademacher();
    if (family == "uniform") return DisorderSpec::uniform_centered(param);
    throw std::invalid_argument("unknown disorder '" + family + "' (gaussian, rademacher, uniform)");
}

inline std::string kind_name(KernelKind k)
{
    switch (k) {
    case KernelKind::power_law: return "power_law";
    case KernelKind::geometric: return "geometric";
    case KernelKind::dirac: return "dirac";
    }
    return "unknown";
}

inline std::string family_name(DisorderFamily f)
{
    switch (f) {
    case DisorderFamily::gaussian: return "gaussian";
    case DisorderFamily::rademacher: return "rademacher";
    case DisorderFamily::uniform_centered: return "uniform";
    }
    return "unknown";
}

// ------------------------------------------------------------------ JSON

inline json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

inline json to_json(const RenewalKernel& k)
{
    return {{"kind", kind_name(k.kind())}, {"parameter", k.parameter()}, {"n_max", k.n_max()}, {"mean", k.mean()}};
}

inline json to_json(const DisorderSpec& d)
{
    return {{"family", family_name(d.family())}, {"scale", d.scale()}, {"variance", d.variance()}};
}

inline json to_json(const WalkParams& p) { return {{"beta", p.beta}, {"h", p.h}, {"f", p.f}}; }

inline json to_json(const SparseEnvironment& env)
{
    json omega = json::array();
    for (double x : env.omega) omega.push_back(number(x));
    return {{"horizon", env.horizon}, {"tau", env.tau}, {"omega", std::move(omega)}};
}

inline SparseEnvironment environment_from_json(const json& j)
{
    SparseEnvironment env;
    try {
        env.horizon = j.at("horizon").get<std::size_t>();
        env.tau = j.at("tau").get<std::vector<std::size_t>>();
        env.omega = j.at("omega").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("environment json: ") + e.what());
    }
    env.validate();
    return env;
}

inline json to_json(const VisitStatistics& s)
{
    return {{"mean", number(s.mean)},
            {"std_error", number(s.std_error)},
            {"variance", number(s.variance)},
            {"variance_std_error", number(s.variance_std_error)},
            {"replicas", s.replicas},
            {"seed", s.seed}};
}

inline json to_json(const FreeEnergyEstimate& e)
{
    return {{"n", e.n}, {"f_hat", number(e.f_hat)}, {"raw", number(e.raw)}, {"window_spread", number(e.window_spread)}};
}

inline json to_json(const HomogeneousSolution& s)
{
    return {{"h", s.h}, {"free_energy", number(s.free_energy)}, {"residual", number(s.residual)}};
}

inline json to_json(const LocalizationTest& t)
{
    return {{"h", t.h},
            {"mean_f_hat", number(t.mean_f_hat)},
            {"replica_spread", number(t.replica_spread)},
            {"window_spread", number(t.window_spread)},
            {"threshold", number(t.threshold)},
            {"localized", t.localized}};
}

inline json to_json(const CriticalPointEstimate& c)
{
    json evals = json::array();
    for (const auto& t : c.evaluations) evals.push_back(to_json(t));
    return {{"h_hat", c.h_hat},
            {"h_lo", c.h_lo},
            {"h_hi", c.h_hi},
            {"annealed", c.annealed},
            {"evaluations", std::move(evals)}};
}

inline json to_json(const GrandCanonicalReport& r)
{
    return {{"f", r.f},
            {"series", r.series == Series::free ? "free" : "pinned"},
            {"n_terms", r.n_terms},
            {"partial_sum", number(r.sum())},
            {"growth_rate", number(r.growth_rate)},
            {"verdict", to_string(r.verdict)},
            {"tail_bound", number(r.tail_bound)}};
}

inline json to_json(const KeyRelationReport& r)
{
    const auto& c = r.config;
    return {{"kind", "key_relation"},
            {"kernel", to_json(c.kernel)},
            {"disorder", to_json(c.disorder)},
            {"params", to_json(c.params)},
            {"seed", c.seed},
            {"tau_replicas", c.tau_replicas},
            {"walk_replicas", c.walk_replicas},
            {"absorbing", r.absorbing},
            {"terms", r.terms},
            {"lhs", {{"mean", number(r.lhs)}, {"std_error", number(r.lhs_std_error)}, {"finite_r_bound", number(r.finite_r_bound)}, {"finite_r_target_met", r.finite_r_target_met}}},
            {"rhs", {{"partial_sum", number(r.rhs)}, {"tail_bound", number(r.rhs_tail_bound)}, {"verdict", to_string(r.rhs_verdict)}, {"growth_rate", number(r.rhs_growth_rate)}}},
            {"difference", number(r.difference())},
            {"tolerance", number(r.tolerance)},
            {"outcome", to_string(r.outcome)}};
}

inline json to_json(const TauMeanReport& r)
{
    return {{"kind", "tau_mean_lower_bound"},
            {"kernel", to_json(r.config.kernel)},
            {"disorder", to_json(r.config.disorder)},
            {"beta", r.config.beta},
            {"h", r.config.h},
            {"seed", r.config.seed},
            {"terms", r.terms},
            {"tau_mean", r.tau_mean},
            {"partial_sum", number(r.partial_sum)},
            {"gap", number(r.gap)},
            {"outcome", to_string(r.outcome)}};
}

inline json to_json(const SeriesCheck& s)
{
    return {{"eps", s.eps}, {"verdict", to_string(s.verdict)}, {"growth_rate", number(s.growth_rate)}};
}

inline json to_json(const RegimeReport& r)
{
    const auto& c = r.config;
    json rows = json::array();
    for (const auto& row : r.rows) {
        json j = {{"beta", row.beta}, {"annealed_critical", row.annealed_critical}, {"merged", row.merged}};
        if (row.critical) {
            j["critical"] = to_json(*row.critical);
            j["unresolved_band"] = {row.bracket_lo, row.bracket_hi};
            j["gap"] = row.gap();
        } else {
            j["critical"] = nullptr;
            j["error"] = row.error;
        }
        rows.push_back(std::move(j));
    }
    json points = json::array();
    for (const auto& p : r.points) {
        json q = json::array(), a = json::array();
        for (const auto& s : p.quenched) q.push_back(to_json(s));
        for (const auto& s : p.annealed) a.push_back(to_json(s));
        points.push_back({{"beta", p.beta},
                          {"h", p.h},
                          {"label", to_string(p.label)},
                          {"f_hat", number(p.f_hat)},
                          {"annealed_free_energy", number(p.annealed_free_energy)},
                          {"quenched", std::move(q)},
                          {"annealed", std::move(a)},
                          {"diagnostics_consistent", p.diagnostics_consistent}});
    }
    return {{"kind", "regime_scan"},
            {"kernel", to_json(c.kernel)},
            {"disorder", to_json(c.disorder)},
            {"betas", c.betas},
            {"hs", c.hs},
            {"n", c.n},
            {"replicas", c.replicas},
            {"terms", c.terms},
            {"tol", c.tol},
            {"bracket_margin", c.bracket_margin},
            {"eps_small", c.eps_small},
            {"seed", c.seed},
            {"rows", std::move(rows)},
            {"points", std::move(points)}};
}

inline json to_json(const TransienceReport& r)
{
    const auto& c = r.config;
    json rows = json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"absorbing", row.absorbing},
                        {"absorbed_fraction", row.absorbed_fraction},
                        {"mean_exact_visits", number(row.mean_exact_visits)},
                        {"mean_mc_visits", number(row.mean_mc_visits)},
                        {"environments", row.environments},
                        {"escape_agree", row.escape_agree}});
    return {{"kind", "annealed_transience"},
            {"kernel", to_json(c.kernel)},
            {"disorder", to_json(c.disorder)},
            {"beta", c.beta},
            {"h", c.h},
            {"seed", c.seed},
            {"walk_replicas", c.walk_replicas},
            {"rows", std::move(rows)},
            {"growth_ratio", number(r.growth_ratio)}};
}

/// Top-level document: schema version, the resolved config and the payload.
inline json document(const std::string& command, const json& config, json payload)
{
    return {{"schema_version", schema_version}, {"command", command}, {"config", config}, {"result", std::move(payload)}};
}

// ------------------------------------------------------------------- CSV

inline std::string format_double(double x)
{
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    if (res.ec != std::errc()) throw std::runtime_error("format_double failed");
    return std::string(buf, res.ptr);
}

/// n,K,tail for n = 0..n_max (K(0) = 0).
inline void write_kernel_csv(std::ostream& os, const RenewalKernel& k)
{
    os << "n,K,tail\n";
    for (std::size_t n = 0; n <= k.n_max(); ++n)
        os << n << ',' << format_double(k.weight(n)) << ',' << format_double(k.tail(n)) << '\n';
}

/// i,V,p_up,W for i = 0..M; p_up(0) = 1 and W(i) = sum_{k < i} e^{V_k}.
inline void write_potential_csv(std::ostream& os, const Potential& v)
{
    os << "i,V,p_up,W\n";
    CompensatedSum w;
    for (std::size_t i = 0; i <= v.horizon(); ++i) {
        const double p = i == 0 ? 1.0 : step_prob(v.delta(i));
        os << i << ',' << format_double(v[i]) << ',' << format_double(p) << ',' << format_double(w.value()) << '\n';
        w.add(std::exp(v[i]));
    }
}

/// n,log_zc,log_z.
inline void write_table_csv(std::ostream& os, const PartitionTable& t)
{
    os << "n,log_zc,log_z\n";
    for (std::size_t n = 0; n <= t.length(); ++n)
        os << n << ',' << format_double(t.log_zc[n]) << ',' << format_double(t.log_z[n]) << '\n';
}

/// One line per grid point.
inline void write_regime_csv(std::ostream& os, const RegimeReport& r)
{
    os << "beta,h,label,annealed_critical,band_lo,band_hi,f_hat,annealed_free_energy,consistent\n";
    const std::size_t n_h = r.config.hs.size();
    for (std::size_t i = 0; i < r.points.size(); ++i) {
        const auto& p = r.points[i];
        const auto& row = r.rows[i / n_h];
        const double nan = std::numeric_limits<double>::quiet_NaN();
        os << format_double(p.beta) << ',' << format_double(p.h) << ',' << to_string(p.label) << ','
           << format_double(row.annealed_critical) << ',' << format_double(row.critical ? row.bracket_lo : nan) << ','
           << format_double(row.critical ? row.bracket_hi : nan) << ',' << format_double(p.f_hat) << ','
           << format_double(p.annealed_free_energy) << ',' << (p.diagnostics_consistent ? 1 : 0) << '\n';
    }
}

}  // namespace sparsepin::io
