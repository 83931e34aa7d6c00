// sparsepin: environments, walks, pinning tables and the cross-checks
// between them. See README.md for the configuration keys.

#include <CLI11.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "sparsepin/environment.hpp"
#include "sparsepin/experiments.hpp"
#include "sparsepin/io.hpp"
#include "sparsepin/parallel.hpp"
#include "sparsepin/pinning.hpp"
#include "sparsepin/walk.hpp"

namespace fs = std::filesystem;
using namespace sparsepin;
using io::json;

namespace {

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_inconclusive = 2;
constexpr int exit_config = 64;

struct Common {
    std::string out;
    std::string name;
    unsigned workers = 1;
    std::uint64_t seed = 1;
    std::string kernel = "power_law";
    double kernel_param = 1.0;
    std::size_t n_max = 8;
    std::string disorder = "gaussian";
    double disorder_param = 1.0;
    double beta = 1.0;
    double h = -1.0;
    double f = 0.3;

    [[nodiscard]] RenewalKernel make_kernel() const { return io::make_kernel(kernel, kernel_param, n_max); }
    [[nodiscard]] DisorderSpec make_disorder() const { return io::make_disorder(disorder, disorder_param); }
    [[nodiscard]] WalkParams params() const { return {beta, h, f}; }
};

struct EnvOpts {
    std::size_t horizon = 100;
};

struct WalkOpts {
    std::size_t horizon = 100;
    std::size_t absorbing = 0;
    std::size_t replicas = 10000;
    std::uint64_t step_budget = default_step_budget;
    std::string env_file;
};

struct PinningOpts {
    std::size_t n = 1000;
    std::size_t terms = 0;
    bool critical = false;
    std::size_t critical_n = 20000;
    std::size_t replicas = 4;
    double tol = 0.01;
    double h_min = std::numeric_limits<double>::quiet_NaN();
    double h_max = std::numeric_limits<double>::quiet_NaN();
};

struct VerifyOpts {
    std::size_t tau_replicas = 1000;
    std::size_t walk_replicas = 1000;
    std::size_t absorbing = 0;
    std::size_t terms = 0;
    std::size_t sweep = 0;
    std::size_t sweep_tau_replicas = 100;
    std::size_t sweep_walk_replicas = 200;
};

struct ScanOpts {
    std::vector<double> betas{0.0, 1.0, 2.0};
    std::vector<double> hs{-1.5, -0.75, -0.35, -0.1, 0.25};
    std::size_t n = 20000;
    std::size_t replicas = 4;
    std::size_t terms = 4000;
    double tol = 0.01;
    double margin = 0.05;
    double eps = 0.01;
    bool doubled_check = false;
};

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolved config restricted to the root keys and the active subcommand.
std::string resolved_config(const CLI::App& app, const std::string& sub)
{
    std::istringstream in(app.config_to_str(true, false));
    std::ostringstream out;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        const auto key = line.substr(0, eq);
        const auto dot = key.find('.');
        if (eq != std::string::npos && line.substr(eq + 1) == "\"\"") continue;  // unset paths
        if (dot == std::string::npos || key.substr(0, dot) == sub) out << line << '\n';
    }
    return out.str();
}

struct Output {
    fs::path dir;
    std::string prefix;
    std::string command;
    std::string config_text;

    [[nodiscard]] fs::path path(const std::string& suffix) const { return dir / (prefix + "." + suffix); }

    std::ofstream open(const std::string& suffix) const
    {
        std::ofstream os(path(suffix));
        if (!os) throw std::runtime_error("cannot write " + path(suffix).string());
        return os;
    }

    void write_json(const std::string& suffix, json payload) const
    {
        auto os = open(suffix);
        json doc = {{"schema_version", io::schema_version},
                    {"command", command},
                    {"config", config_text},
                    {"result", std::move(payload)}};
        os << doc.dump(2) << '\n';
    }

    void write_config() const { open("config.ini") << config_text; }
};

json common_json(const Common& c)
{
    return {{"kernel", io::to_json(c.make_kernel())}, {"disorder", io::to_json(c.make_disorder())}, {"seed", c.seed}};
}

int cmd_env(const Common& c, const EnvOpts& o, const Output& out)
{
    const auto kernel = c.make_kernel();
    const auto disorder = c.make_disorder();
    const auto env = sample_environment(kernel, disorder, o.horizon, derive_seed(c.seed, "env"));
    json payload = common_json(c);
    payload["environment"] = io::to_json(env);
    out.write_json("json", std::move(payload));
    auto os = out.open("kernel.csv");
    io::write_kernel_csv(os, kernel);
    std::cout << "env: horizon " << env.horizon << ", " << env.tau.size() - 1 << " renewal points, E(tau_1) = "
              << kernel.mean() << '\n';
    return exit_pass;
}

int cmd_walk(const Common& c, const WalkOpts& o, const Output& out)
{
    SparseEnvironment env;
    if (!o.env_file.empty()) {
        std::ifstream is(o.env_file);
        if (!is) throw ConfigError("cannot read environment file " + o.env_file);
        json doc;
        try {
            doc = json::parse(is);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("environment file: ") + e.what());
        }
        const json& body = doc.contains("result") ? doc.at("result").at("environment") : doc;
        env = io::environment_from_json(body);
    } else {
        env = sample_environment(c.make_kernel(), c.make_disorder(), o.horizon, derive_seed(c.seed, "env"));
    }
    const std::size_t r = o.absorbing ? o.absorbing : env.horizon;
    if (r < 1 || r > env.horizon) throw ConfigError("absorbing must lie in 1..horizon");
    const auto v = build_potential(env, c.params());
    {
        auto os = out.open("potential.csv");
        io::write_potential_csv(os, v);
    }
    json payload = common_json(c);
    payload["params"] = io::to_json(c.params());
    payload["horizon"] = env.horizon;
    payload["absorbing"] = r;
    payload["exact_visits"] = io::number(expected_visits_exact(v, r));
    payload["log_exact_visits"] = io::number(log_expected_visits_exact(v, r));

    McOptions mc;
    mc.workers = c.workers;
    mc.step_budget = o.step_budget;
    int code = exit_pass;
    try {
        const auto stats = mc_visits(v, r, o.replicas, derive_seed(c.seed, "walk"), mc);
        payload["mc"] = io::to_json(stats);
        const double exact = expected_visits_exact(v, r);
        payload["z_score"] = io::number(stats.std_error > 0 ? (stats.mean - exact) / stats.std_error : 0.0);
        std::cout << "walk: W(R) = " << exact << ", MC " << stats.mean << " +- " << stats.std_error << '\n';
    } catch (const StepBudgetExceeded& e) {
        payload["mc"] = {{"error", e.what()}, {"replica", e.replica()}, {"budget", e.budget()}};
        std::cerr << "walk: " << e.what() << '\n';
        code = exit_inconclusive;
    }
    out.write_json("json", std::move(payload));
    return code;
}

int cmd_pinning(const Common& c, const PinningOpts& o, const Output& out)
{
    const auto kernel = c.make_kernel();
    const auto disorder = c.make_disorder();
    const auto omega = sample_disorder(disorder, o.n, derive_seed(c.seed, "omega"));
    const auto table = partition_table(omega, kernel, c.beta, c.h, o.n);
    {
        auto os = out.open("table.csv");
        io::write_table_csv(os, table);
    }
    json payload = common_json(c);
    payload["beta"] = c.beta;
    payload["h"] = c.h;
    payload["n"] = o.n;
    if (o.n >= 2) payload["free_energy"] = io::to_json(free_energy_from_table(table));
    payload["homogeneous"] = io::to_json(homogeneous_free_energy(kernel, c.h));
    const double hc_a = annealed_critical_point(disorder, c.beta);
    payload["annealed_critical"] = hc_a;
    payload["annealed_free_energy"] = io::to_json(homogeneous_free_energy(kernel, c.h - hc_a));
    payload["relevance"] = kernel.kind() == KernelKind::power_law ? json(to_string(relevance_classifier(kernel.parameter())))
                                                                  : json(nullptr);
    payload["grand_canonical"] = io::to_json(grand_canonical(table, c.f, o.terms ? std::min(o.terms, o.n) : o.n));

    int code = exit_pass;
    if (o.critical) {
        CriticalPointOptions opts;
        opts.n = o.critical_n;
        opts.replicas = o.replicas;
        opts.tol = o.tol;
        opts.h_min = o.h_min;
        opts.h_max = o.h_max;
        opts.seed = derive_seed(c.seed, "critical");
        opts.workers = c.workers;
        try {
            const auto est = quenched_critical_point_estimate(disorder, kernel, c.beta, opts);
            payload["critical"] = io::to_json(est);
            std::cout << "pinning: h_c estimate " << est.h_hat << " in [" << est.h_lo << ", " << est.h_hi
                      << "], annealed " << hc_a << '\n';
        } catch (const BracketNotFound& e) {
            payload["critical"] = {{"error", e.what()}, {"h_min", e.h_min()}, {"h_max", e.h_max()}};
            std::cerr << "pinning: " << e.what() << '\n';
            code = exit_inconclusive;
        }
    }
    if (o.n >= 2)
        std::cout << "pinning: f_hat = " << free_energy_from_table(table).f_hat << " at n = " << o.n << '\n';
    out.write_json("json", std::move(payload));
    return code;
}

int combine(int a, int b)
{
    if (a == exit_fail || b == exit_fail) return exit_fail;
    if (a == exit_inconclusive || b == exit_inconclusive) return exit_inconclusive;
    return exit_pass;
}

int outcome_code(Outcome o)
{
    switch (o) {
    case Outcome::pass: return exit_pass;
    case Outcome::fail: return exit_fail;
    case Outcome::inconclusive: return exit_inconclusive;
    }
    return exit_fail;
}

int cmd_verify(const Common& c, const VerifyOpts& o, const Output& out)
{
    KeyRelationConfig kc;
    kc.kernel = c.make_kernel();
    kc.disorder = c.make_disorder();
    kc.params = c.params();
    kc.tau_replicas = o.tau_replicas;
    kc.walk_replicas = o.walk_replicas;
    kc.absorbing = o.absorbing;
    kc.terms = o.terms;
    kc.seed = c.seed;
    kc.workers = c.workers;
    const auto key = verify_key_relation(kc);
    std::cout << "verify: key relation " << to_string(key.outcome) << " (lhs " << key.lhs << " +- "
              << key.lhs_std_error << ", rhs " << key.rhs << ")\n";

    TauMeanConfig tc;
    tc.kernel = kc.kernel;
    tc.disorder = kc.disorder;
    tc.beta = c.beta;
    tc.h = c.h;
    tc.seed = c.seed;
    const auto tau = tau_mean_lower_bound(tc);
    std::cout << "verify: E(tau_1) bound " << to_string(tau.outcome) << " (S_N " << tau.partial_sum
              << ", E(tau_1) " << tau.tau_mean << ")\n";

    int code = combine(outcome_code(key.outcome), outcome_code(tau.outcome));
    json sweep = json::array();
    Rng rng(derive_seed(c.seed, "sweep"));
    for (std::size_t i = 0; i < o.sweep; ++i) {
        KeyRelationConfig s = kc;
        s.kernel = RenewalKernel::power_law(1.5 * rng.uniform(), 2 + rng() % 10);
        s.params = {1.5 * rng.uniform(), -1.5 * rng.uniform() - 0.2, 0.2 + 0.6 * rng.uniform()};
        s.tau_replicas = o.sweep_tau_replicas;
        s.walk_replicas = o.sweep_walk_replicas;
        s.absorbing = 0;
        s.terms = 0;
        s.seed = rng();
        const auto rep = verify_key_relation(s);
        code = combine(code, outcome_code(rep.outcome));
        sweep.push_back(io::to_json(rep));
    }
    if (o.sweep) std::cout << "verify: sweep of " << o.sweep << " configurations\n";

    out.write_json("json", {{"key_relation", io::to_json(key)}, {"tau_mean", io::to_json(tau)}, {"sweep", std::move(sweep)}});
    return code;
}

int cmd_scan(const Common& c, const ScanOpts& o, const Output& out)
{
    RegimeScanConfig cfg;
    cfg.kernel = c.make_kernel();
    cfg.disorder = c.make_disorder();
    cfg.betas = o.betas;
    cfg.hs = o.hs;
    cfg.n = o.n;
    cfg.replicas = o.replicas;
    cfg.terms = o.terms;
    cfg.tol = o.tol;
    cfg.bracket_margin = o.margin;
    cfg.eps_small = o.eps;
    cfg.seed = c.seed;
    cfg.workers = c.workers;
    const auto rep = regime_scan(cfg);
    {
        auto os = out.open("grid.csv");
        io::write_regime_csv(os, rep);
    }
    json payload = io::to_json(rep);
    int code = exit_pass;
    if (o.doubled_check) {
        const auto doubled = regime_scan(cfg.doubled());
        const auto cmp = compare_scans(rep, doubled);
        payload["doubled"] = {{"flips", cmp.flips}, {"resolved", cmp.resolved}, {"unresolved", cmp.unresolved}};
        if (cmp.flips) code = exit_fail;
        std::cout << "scan: doubled budgets, " << cmp.flips << " flips\n";
    }
    for (const auto& row : rep.rows) {
        std::cout << "scan: beta " << row.beta << ", h_c^a " << row.annealed_critical;
        if (row.critical) std::cout << ", h_c in [" << row.bracket_lo << ", " << row.bracket_hi << "]";
        else std::cout << ", " << row.error;
        std::cout << '\n';
    }
    std::cout << "scan: case1 " << rep.count(RegimeLabel::case1) << ", case2 " << rep.count(RegimeLabel::case2)
              << ", case3 " << rep.count(RegimeLabel::case3) << ", unresolved " << rep.count(RegimeLabel::unresolved)
              << '\n';
    out.write_json("json", std::move(payload));
    return code;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Random walks in sparse random environments and the pinning model"};
    app.set_config("--config", "", "INI/TOML configuration file; command-line flags take precedence")
        ->configurable(false);
    app.set_help_flag("--help", "print help and exit");
    app.require_subcommand(1);
    app.fallthrough();

    Common c;
    app.add_option("--out", c.out, "output directory (default: $SPARSEPIN_OUT or .)")->configurable(false);
    app.add_option("--name", c.name, "file name prefix (default: the subcommand)")->configurable(false);
    app.add_option("--workers", c.workers, "worker threads, 0 = all cores; results do not depend on it")
        ->configurable(false);
    app.add_option("--seed", c.seed, "master seed")->capture_default_str();
    app.add_option("--kernel", c.kernel, "renewal kernel")
        ->check(CLI::IsMember({"power_law", "geometric", "dirac"}))
        ->capture_default_str();
    app.add_option("--kernel-param", c.kernel_param, "alpha (power_law), q (geometric) or step (dirac)")
        ->capture_default_str();
    app.add_option("--n-max", c.n_max, "kernel support 1..n_max (ignored by dirac)")->capture_default_str();
    app.add_option("--disorder", c.disorder, "disorder law")
        ->check(CLI::IsMember({"gaussian", "rademacher", "uniform"}))
        ->capture_default_str();
    app.add_option("--disorder-param", c.disorder_param, "sigma (gaussian) or half width (uniform)")
        ->capture_default_str();
    app.add_option("--beta", c.beta, "disorder strength")->check(CLI::NonNegativeNumber)->capture_default_str();
    app.add_option("--h", c.h, "contact reward")->capture_default_str();
    app.add_option("--f", c.f, "external drift")->capture_default_str();

    EnvOpts env_o;
    auto* env = app.add_subcommand("env", "sample an environment; write it (JSON) and the kernel table (CSV)");
    env->add_option("--horizon", env_o.horizon, "sites 0..horizon")->capture_default_str();

    WalkOpts walk_o;
    auto* walk = app.add_subcommand("walk", "potential table, exact visit counts and their Monte Carlo estimate");
    walk->add_option("--horizon", walk_o.horizon, "sites 0..horizon")->capture_default_str();
    walk->add_option("--absorbing", walk_o.absorbing, "absorbing site R (0 = horizon)")->capture_default_str();
    walk->add_option("--replicas", walk_o.replicas, "Monte Carlo trajectories")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40))
        ->capture_default_str();
    walk->add_option("--step-budget", walk_o.step_budget, "steps allowed per trajectory")->capture_default_str();
    walk->add_option("--env", walk_o.env_file, "environment JSON written by 'env' instead of sampling")
        ->check(CLI::ExistingFile);

    PinningOpts pin_o;
    auto* pin = app.add_subcommand("pinning", "partition table, free energy and critical points");
    pin->add_option("--n", pin_o.n, "system size")->capture_default_str();
    pin->add_option("--terms", pin_o.terms, "terms of the grand canonical sum at f (0 = n)")->capture_default_str();
    pin->add_flag("--critical", pin_o.critical, "estimate the quenched critical point");
    pin->add_option("--critical-n", pin_o.critical_n, "system size for the critical point")->capture_default_str();
    pin->add_option("--replicas", pin_o.replicas, "disorder replicas for the critical point")->capture_default_str();
    pin->add_option("--tol", pin_o.tol, "bisection width")->check(CLI::PositiveNumber)->capture_default_str();
    pin->add_option("--h-min", pin_o.h_min, "lower end of the search range (default: annealed value - 1)");
    pin->add_option("--h-max", pin_o.h_max, "upper end of the search range (default: 1)");

    VerifyOpts ver_o;
    auto* ver = app.add_subcommand("verify", "return counts versus the grand canonical sum, and the E(tau_1) bound");
    ver->add_option("--tau-replicas", ver_o.tau_replicas, "renewal samples")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40))
        ->capture_default_str();
    ver->add_option("--walk-replicas", ver_o.walk_replicas, "walks per renewal sample")
        ->check(CLI::Range(std::size_t{2}, std::size_t{1} << 40))
        ->capture_default_str();
    ver->add_option("--absorbing", ver_o.absorbing, "absorbing site R (0 = automatic)")->capture_default_str();
    ver->add_option("--terms", ver_o.terms, "series length N (0 = automatic)")->capture_default_str();
    ver->add_option("--sweep", ver_o.sweep, "extra randomized configurations")->capture_default_str();
    ver->add_option("--sweep-tau-replicas", ver_o.sweep_tau_replicas)->capture_default_str();
    ver->add_option("--sweep-walk-replicas", ver_o.sweep_walk_replicas)->capture_default_str();

    ScanOpts scan_o;
    auto* scan = app.add_subcommand("scan", "regime classification over a (beta, h) grid");
    scan->add_option("--betas", scan_o.betas, "beta grid")->capture_default_str();
    scan->add_option("--hs", scan_o.hs, "h grid")->capture_default_str();
    scan->add_option("--n", scan_o.n, "system size for free energies")->capture_default_str();
    scan->add_option("--replicas", scan_o.replicas, "disorder replicas for critical points")->capture_default_str();
    scan->add_option("--terms", scan_o.terms, "grand canonical terms")->capture_default_str();
    scan->add_option("--tol", scan_o.tol, "bisection width")->check(CLI::PositiveNumber)->capture_default_str();
    scan->add_option("--margin", scan_o.margin, "finite-size allowance around the critical bracket")
        ->capture_default_str();
    scan->add_option("--eps", scan_o.eps, "small positive drift for the diagnostics")->capture_default_str();
    scan->add_flag("--doubled-check", scan_o.doubled_check, "re-run with doubled budgets and count case flips");

    for (auto* sub : {env, walk, pin, ver, scan}) sub->configurable();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_config;
    }

    CLI::App* active = app.get_subcommands().front();
    Output out;
    out.command = active->get_name();
    out.prefix = c.name.empty() ? out.command : c.name;
    if (c.out.empty()) {
        const char* env_dir = std::getenv("SPARSEPIN_OUT");
        c.out = env_dir && *env_dir ? env_dir : ".";
    }
    out.dir = c.out;
    out.config_text = resolved_config(app, out.command);
    if (c.workers == 0) c.workers = default_workers();

    try {
        (void)c.make_kernel();
        (void)c.make_disorder();
        c.params().validate();
        fs::create_directories(out.dir);
        out.write_config();
        if (active == env) return cmd_env(c, env_o, out);
        if (active == walk) return cmd_walk(c, walk_o, out);
        if (active == pin) return cmd_pinning(c, pin_o, out);
        if (active == ver) return cmd_verify(c, ver_o, out);
        return cmd_scan(c, scan_o, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_fail;
    }
}
