#pragma once

// Reference experiments behind the command-line tool. Each command reads an
// ExperimentConfig, writes its files into config.out and returns an exit code:
//   0 success, 1 bad configuration, 2 NoOverlap, 3 resource guard, 4 invariant violation.
// Output bytes depend only on the config and seed, never on the thread count;
// the only exception is the "# generated ..." first line of CSV files, which
// `timestamp = false` suppresses.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "analysis.hpp"
#include "coupling.hpp"
#include "errors.hpp"
#include "group.hpp"
#include "io.hpp"
#include "measure.hpp"
#include "solver.hpp"

namespace excouple {

enum class MassMode { Auto, Exact, Double };

struct ExperimentConfig {
    std::string group = "Z";
    std::string measure;             ///< measure literal, see io.hpp
    std::string x = "1";
    std::uint64_t n_max = 64;
    std::optional<std::uint64_t> horizon; ///< steps; command-specific default when unset
    std::uint64_t runs = 100'000;
    std::optional<std::uint64_t> seed;
    std::string out = "out";
    NuStrategy nu_strategy = NuStrategy::SingleAtom;
    std::uint64_t fit_lo = 32;
    std::uint64_t fit_hi = 0;        ///< 0: up to n_max
    std::uint64_t tail_rows = 1000;  ///< largest n written to the coupling tail CSV
    std::uint64_t closure_radius = 0; ///< 0: no closure listing
    MassMode mass = MassMode::Auto;
    unsigned threads = 1;
    bool timestamp = true;
    Limits limits = Limits::from_env();

    void validate(bool needs_seed) const {
        if (n_max < 1) throw DomainError("n_max must be positive");
        if (horizon && *horizon < 1) throw DomainError("horizon must be positive");
        if (runs < 1) throw DomainError("runs must be positive");
        if (threads < 1) throw DomainError("threads must be positive");
        if (needs_seed && !seed) throw DomainError("a seed is required (no wall-clock default)");
    }
};

struct CommandResult {
    int exit_code = 0;
    std::string message;
    std::vector<std::filesystem::path> files;
};

namespace detail {

inline std::string timestamp_line() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << "# generated " << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ") << '\n';
    return os.str();
}

class OutputDir {
public:
    OutputDir(const ExperimentConfig& cfg, CommandResult& result) : cfg_(cfg), result_(result) {
        std::filesystem::create_directories(cfg.out);
    }

    std::ofstream open(const std::string& name) {
        auto path = std::filesystem::path(cfg_.out) / name;
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        if (!os) throw Error("cannot write " + path.string());
        result_.files.push_back(path);
        return os;
    }

    std::ofstream open_csv(const std::string& name, const std::string& header) {
        auto os = open(name);
        if (cfg_.timestamp) os << timestamp_line();
        os << header << '\n';
        return os;
    }

    void write_json(const std::string& name, const nlohmann::json& j) { open(name) << j.dump(2) << '\n'; }

private:
    const ExperimentConfig& cfg_;
    CommandResult& result_;
};

inline bool use_exact(const ExperimentConfig& cfg, const Group& g) {
    switch (cfg.mass) {
    case MassMode::Exact: return true;
    case MassMode::Double: return false;
    case MassMode::Auto: return g.cardinality().has_value();
    }
    return false;
}

} // namespace detail

/// Simulates config.runs coupled runs and writes plan.json, runs.jsonl, tail.csv and summary.json.
inline CommandResult cmd_couple(const ExperimentConfig& cfg) {
    cfg.validate(true);
    CommandResult result;
    const Group g = parse_group(cfg.group);
    const ExactMeasure mu = io::parse_measure(g, cfg.measure);
    const Element x = g.parse(cfg.x);
    const std::uint64_t horizon = cfg.horizon.value_or(1'000'000);
    detail::OutputDir out(cfg, result);

    if (g.is_identity(x)) {
        out.write_json("summary.json", {{"x", g.format(x)}, {"identity_shift", true}, {"T", 0}});
        result.message = "x = e: T = 0";
        return result;
    }
    const CouplingPlan plan = build_plan(mu, x, cfg.n_max, cfg.nu_strategy, cfg.limits);
    out.write_json("plan.json", io::plan_to_json(plan));

    const auto runs = simulate_runs(plan, horizon, cfg.runs, *cfg.seed, cfg.threads);
    {
        auto os = out.open("runs.jsonl");
        for (const auto& r : runs) os << io::run_to_json(g, r).dump() << '\n';
    }

    const TailCounter counter(runs);
    const std::uint64_t rows = std::min<std::uint64_t>(runs.front().horizon, cfg.tail_rows);
    {
        auto os = out.open_csv("tail.csv", "n,empirical_tail,ci_low,ci_high");
        for (std::uint64_t n = 0; n <= rows; ++n) {
            auto est = counter.at(n);
            os << n << ',' << io::format_double(est.estimate) << ',' << io::format_double(est.ci_low) << ','
               << io::format_double(est.ci_high) << '\n';
        }
    }

    nlohmann::json summary{{"x", g.format(x)},
                           {"n0", plan.n0},
                           {"nu_mass", plan.nu_mass},
                           {"laziness", plan.laziness},
                           {"runs", runs.size()},
                           {"seed", *cfg.seed},
                           {"horizon", runs.front().horizon},
                           {"horizon_rounded", runs.front().horizon_rounded},
                           {"censored_fraction",
                            static_cast<double>(counter.censored()) / static_cast<double>(counter.total())}};
    if (plan.commutes) {
        // T / n0 has the law of the hitting time of the lazy walk on <x>.
        const auto law = hitting_time_tail(plan.order, plan.laziness, rows / plan.n0);
        summary["hitting_time_sup_distance"] = tail_sup_distance(runs, law, plan.n0);
    }
    out.write_json("summary.json", summary);
    return result;
}

/// Exact TV curve with the coupling bound and a decay fit: tv.csv and fit.json.
inline CommandResult cmd_tv(const ExperimentConfig& cfg) {
    cfg.validate(false);
    CommandResult result;
    const Group g = parse_group(cfg.group);
    const ExactMeasure mu = io::parse_measure(g, cfg.measure);
    const Element x = g.parse(cfg.x);
    detail::OutputDir out(cfg, result);

    const auto curve = detail::use_exact(cfg, g) ? exact_tv_curve(mu, x, cfg.n_max, cfg.limits)
                                                 : exact_tv_curve(mu.cast<double>(), x, cfg.n_max, cfg.limits);

    // Law of T / n0 when the block coupling is successful; otherwise only the trivial bound 2.
    nlohmann::json fit_json;
    std::optional<HittingTimeLaw> law;
    std::uint64_t n0 = 1;
    std::optional<DecayModel> model;
    const auto verdict = gs_membership(mu, x, cfg.n_max, cfg.limits);
    if (g.is_identity(x)) {
        law = HittingTimeLaw::immediate(cfg.n_max);
    } else if (verdict.in_gs()) {
        const auto plan = build_plan(mu, x, cfg.n_max, cfg.nu_strategy, cfg.limits);
        n0 = plan.n0;
        law = hitting_time_tail(plan.order, plan.laziness, cfg.n_max / n0 + 1);
        model = plan.order ? DecayModel::Geometric : DecayModel::PowerLaw;
    }

    std::vector<double> bound(curve.size(), 2.0);
    std::optional<InequalityReport> rep;
    if (law) {
        rep = verify_coupling_inequality(curve, *law, n0);
        bound = rep->bound;
    }
    {
        auto os = out.open_csv("tv.csv", "n,tv,bound_2PTgtn");
        for (std::size_t i = 0; i < curve.size(); ++i)
            os << curve[i].n << ',' << io::format_double(curve[i].tv) << ',' << io::format_double(bound[i]) << '\n';
    }

    double min_tv = curve.front().tv;
    for (const auto& p : curve) min_tv = std::min(min_tv, p.tv);
    fit_json["x"] = g.format(x);
    fit_json["n_max"] = cfg.n_max;
    fit_json["min_tv"] = min_tv;
    fit_json["in_Gs"] = to_string(verdict.gs);
    if (rep)
        fit_json["coupling_inequality"] = {{"holds", rep->holds},
                                           {"worst_slack", rep->worst_slack},
                                           {"worst_n", rep->worst_n}};

    if (!model) {
        fit_json["fit"] = nullptr;
        fit_json["fit_refused"] = g.is_identity(x) ? "x = e: tv is identically 0"
                                                   : "x is not certified in G_s: no decay guarantee";
    } else {
        const std::uint64_t hi = cfg.fit_hi ? cfg.fit_hi : cfg.n_max;
        try {
            const auto fit = fit_decay(curve, *model, cfg.fit_lo, hi);
            nlohmann::json f{{"model", *model == DecayModel::PowerLaw ? "PowerLaw" : "Geometric"},
                             {"C", fit.C},
                             {"fit_range", {fit.n_lo, fit.n_hi}},
                             {"residual", fit.residual}};
            if (*model == DecayModel::PowerLaw)
                f["exponent"] = fit.exponent;
            else
                f["rho"] = fit.rho;
            fit_json["fit"] = f;
        } catch (const DomainError& e) {
            fit_json["fit"] = nullptr;
            fit_json["fit_refused"] = e.what();
            for (const auto& p : curve)
                if (!(p.tv > 0)) {
                    fit_json["converged_at"] = p.n;
                    break;
                }
        }
    }
    out.write_json("fit.json", fit_json);

    if (rep && !rep->holds) {
        result.exit_code = 4;
        result.message = "coupling inequality violated at n = " + std::to_string(*rep->first_violation);
    }
    return result;
}

/// Membership verdict for x (verdict.json) and, when closure_radius > 0, the
/// subgroup generated by A - A (closure.txt, one element per line).
inline CommandResult cmd_solve(const ExperimentConfig& cfg) {
    cfg.validate(false);
    CommandResult result;
    const Group g = parse_group(cfg.group);
    const ExactMeasure mu = io::parse_measure(g, cfg.measure);
    const Element x = g.parse(cfg.x);
    detail::OutputDir out(cfg, result);

    const auto v = gs_membership(mu, x, cfg.n_max, cfg.limits);
    nlohmann::json j{{"x", g.format(x)},
                     {"in_Gp", v.in_gp() ? "Yes" : "NoUpTo"},
                     {"in_Gs", to_string(v.gs)},
                     {"n0", v.gp_n0 ? nlohmann::json(*v.gp_n0) : nlohmann::json(nullptr)},
                     {"n_max", v.n_max}};
    if (cfg.closure_radius > 0) {
        const auto closure = generate_subgroup(g, difference_generators(g, mu.support()), cfg.closure_radius,
                                               cfg.limits.max_atoms);
        auto os = out.open("closure.txt");
        for (const auto& e : closure.elements) os << g.format(e) << '\n';
        j["closure"] = {{"radius", closure.radius},
                        {"complete", closure.complete},
                        {"size", closure.elements.size()},
                        {"contains_x", closure.contains(x)}};
    }
    out.write_json("verdict.json", j);
    return result;
}

/// Simple random walk on F2 started at e and at ab: possible coupling at n0 = 1,
/// TV curve that does not vanish, and the first-letter separation.
inline CommandResult cmd_demo_freegroup(const ExperimentConfig& cfg) {
    cfg.validate(true);
    CommandResult result;
    const Group g = Group::free(2);
    const ExactMeasure mu = io::parse_measure(g, "a;A;b;B");
    const Element x = g.parse("ab");
    const std::uint64_t horizon = cfg.horizon.value_or(200);
    const std::uint64_t n_tv = std::min<std::uint64_t>(cfg.n_max, 12);
    detail::OutputDir out(cfg, result);

    const auto v = gs_membership(mu, x, n_tv, cfg.limits);
    const auto curve = exact_tv_curve(mu.cast<double>(), x, n_tv, cfg.limits);
    {
        auto os = out.open_csv("tv.csv", "n,tv");
        for (const auto& p : curve) os << p.n << ',' << io::format_double(p.tv) << '\n';
    }
    double min_tv = curve.front().tv;
    for (const auto& p : curve) min_tv = std::min(min_tv, p.tv);

    const auto sep = free_group_tail_separation(horizon, cfg.runs, *cfg.seed, cfg.threads);
    nlohmann::json j{{"x", "ab"},
                     {"in_Gp", v.in_gp() ? "Yes" : "NoUpTo"},
                     {"n0", v.gp_n0 ? nlohmann::json(*v.gp_n0) : nlohmann::json(nullptr)},
                     {"in_Gs", to_string(v.gs)},
                     {"min_tv", min_tv},
                     {"tv_n_max", n_tv},
                     {"horizon", sep.horizon},
                     {"runs", sep.runs},
                     {"seed", *cfg.seed},
                     {"P_first_b_S", sep.p_first_b_S},
                     {"ci_S", {sep.ci_S.first, sep.ci_S.second}},
                     {"P_first_b_Sab", sep.p_first_b_Sab},
                     {"ci_Sab", {sep.ci_Sab.first, sep.ci_Sab.second}},
                     {"target_S", sep.target_S},
                     {"target_Sab", sep.target_Sab},
                     {"P1_hits_0", sep.hit_from_1},
                     {"P2_hits_0", sep.hit_from_2}};
    if (sep.pre_asymptotic) j["warning"] = "horizon < 50: first-letter estimates carry pre-asymptotic bias";
    out.write_json("separation.json", j);
    return result;
}

/// Runs a command and maps library errors to exit codes.
template <class Command>
CommandResult run_command(Command&& cmd, const ExperimentConfig& cfg) {
    try {
        return cmd(cfg);
    } catch (const NoOverlap& e) {
        return {2, std::string("NoOverlap: ") + e.what(), {}};
    } catch (const ResourceError& e) {
        return {3, std::string("resource guard: ") + e.what(), {}};
    } catch (const InvariantViolation& e) {
        return {4, std::string("invariant violation: ") + e.what(), {}};
    } catch (const Error& e) {
        return {1, e.what(), {}};
    } catch (const std::filesystem::filesystem_error& e) {
        return {1, e.what(), {}};
    }
}

} // namespace excouple
