#pragma once

// Block/splitting construction of an exact coupling of RW(e, mu) and RW(x, mu).
//
// Steps of S are grouped into blocks of length n0 with products L_i. Each block
// gets a split label K_i drawn conditionally on L_i so that
//     P(L in ., K = 1) = nu,   P(L in ., K = 2) = theta_x^{-1} nu.
// The x-started walk uses block products L'_i = L_i, x^{-1} L_i or x L_i for
// K = 0, 1, 2, which have the same law as L_i. The block walks meet at the
// first block M where e·L_1...L_M = x·L'_1...L'_M, and T = M n0. Steps of S^x
// inside a block are drawn from i.i.d.-mu steps conditioned on their product;
// after T they are the steps of S.

#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "errors.hpp"
#include "group.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace excouple {

enum class NuStrategy { SingleAtom, GreedyMaxMass };

struct CouplingPlan {
    Group group;
    Measure mu;
    Element x;
    Element x_inv;
    std::uint64_t n0 = 0;
    Measure xi;                ///< mu^{n0} ^ theta_x^{-1} mu^{n0}
    std::vector<Element> U;    ///< atoms of xi kept for nu; U and xU are disjoint
    Measure nu;                ///< nu(A) = xi(x^{-1}A intersected with U)
    double nu_mass = 0;
    double laziness = 1;       ///< 1 - 2 nu(G)
    std::vector<Measure> mu_powers; ///< mu^1 .. mu^{n0}
    FiniteOrder order;         ///< order of x, nullopt when infinite
    bool commutes = false;     ///< x commutes with every atom of mu^{n0}
    std::vector<double> p_split_nu;      ///< P(K = 1 | L = l), aligned with mu^{n0} atoms
    std::vector<double> p_split_shifted; ///< P(K = 2 | L = l)
    DiscreteSampler step_sampler;        ///< over mu.atoms()

    const Measure& block_law() const { return mu_powers.back(); }
};

namespace detail {

template <class Mass>
std::vector<Element> choose_u(const Group& g, const Element& x, const AtomicMeasure<Mass>& xi, NuStrategy strategy) {
    // Candidates by decreasing mass, ties by encoding order (atoms are already sorted by encoding).
    std::vector<std::size_t> order(xi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return xi.atoms()[a].second > xi.atoms()[b].second; });

    std::vector<Element> u;
    std::set<Element> in_u;
    for (std::size_t idx : order) {
        const Element& y = xi.atoms()[idx].first;
        Element xy = g.mul_unchecked(x, y);
        if (xy == y) continue;
        if (strategy == NuStrategy::SingleAtom) return {y};
        // U + {y} keeps U and xU disjoint iff y is not in xU and xy is not in U.
        if (in_u.count(xy) || in_u.count(g.mul_unchecked(g.inv_unchecked(x), y))) continue;
        in_u.insert(y);
        u.push_back(y);
    }
    if (u.empty()) throw InvariantViolation("every atom of xi is fixed by x; cannot choose U");
    std::sort(u.begin(), u.end());
    return u;
}

} // namespace detail

/// Builds the coupling plan for the least overlap order n0 <= n_max.
///
/// The overlap and nu are computed in the measure's own mass type (exact for
/// ExactMeasure) and the domination nu + theta_x^{-1} nu <= mu^{n0} is checked
/// there before everything is converted to doubles for sampling.
template <class Mass>
CouplingPlan build_plan(const AtomicMeasure<Mass>& mu, const Element& x, std::uint64_t n_max,
                        NuStrategy strategy = NuStrategy::SingleAtom, const Limits& limits = {}) {
    const Group& g = mu.group();
    g.validate(x);
    if (g.is_identity(x)) throw IdentityShift("x = e: the walks already coincide, T = 0");
    auto overlap = find_overlap_order(mu, x, n_max, limits);
    if (!overlap)
        throw NoOverlap("mu^n ^ theta_x^{-1} mu^n = 0 for every n <= " + std::to_string(n_max) + ": " +
                            g.format(x) + " admits no possible exact coupling up to that order",
                        n_max);

    auto powers = power_table(mu, overlap->n0, limits);
    const auto& block = powers.back();
    auto u = detail::choose_u(g, x, overlap->xi, strategy);
    auto xi_on_u = restrict_to(overlap->xi, [&](const Element& e) { return std::binary_search(u.begin(), u.end(), e); });
    auto nu = shift(x, xi_on_u);

    // theta_x^{-1} nu = xi restricted to U, whose support is disjoint from supp nu = xU.
    std::vector<typename AtomicMeasure<Mass>::Atom> sum_atoms(nu.atoms());
    sum_atoms.insert(sum_atoms.end(), xi_on_u.atoms().begin(), xi_on_u.atoms().end());
    auto sum = AtomicMeasure<Mass>::from_atoms(g, std::move(sum_atoms));
    if (!dominated_by(sum, block, 1e-12))
        throw InvariantViolation("nu + theta_x^{-1} nu is not dominated by mu^{n0}");

    CouplingPlan plan{.group = g,
                      .mu = mu.template cast<double>(),
                      .x = x,
                      .x_inv = g.inv(x),
                      .n0 = overlap->n0,
                      .xi = overlap->xi.template cast<double>(),
                      .U = std::move(u),
                      .nu = nu.template cast<double>(),
                      .nu_mass = MassTraits<Mass>::to_double(nu.total()),
                      .laziness = 0,
                      .mu_powers = {},
                      .order = g.element_order(x, std::numeric_limits<std::uint64_t>::max()),
                      .commutes = false,
                      .p_split_nu = {},
                      .p_split_shifted = {},
                      .step_sampler = {}};
    plan.laziness = MassTraits<Mass>::to_double(Mass(1) - 2 * nu.total());
    if (!(plan.nu_mass > 0) || plan.laziness < 0 || plan.laziness >= 1)
        throw InvariantViolation("nu(G) must lie in (0, 1/2]");

    plan.commutes = g.is_abelian() || std::all_of(block.atoms().begin(), block.atoms().end(), [&](const auto& a) {
                        return g.mul_unchecked(x, a.first) == g.mul_unchecked(a.first, x);
                    });

    for (const auto& [l, m] : block.atoms()) {
        plan.p_split_nu.push_back(MassTraits<Mass>::to_double(nu.mass(l) / m));
        plan.p_split_shifted.push_back(MassTraits<Mass>::to_double(nu.mass(g.mul_unchecked(x, l)) / m));
    }
    plan.mu_powers.reserve(powers.size());
    for (const auto& p : powers) plan.mu_powers.push_back(p.template cast<double>());

    std::vector<double> w;
    for (const auto& a : plan.mu.atoms()) w.push_back(a.second);
    plan.step_sampler = DiscreteSampler(w);
    return plan;
}

/// n0 i.i.d.-mu steps conditioned on their product being `target`, drawn one
/// step at a time: X_1 = s with probability mu(s) mu^{n0-1}(s^{-1} target) / mu^{n0}(target).
inline std::vector<Element> conditional_block_sampler(const CouplingPlan& plan, const Element& target, Rng& rng) {
    const Group& g = plan.group;
    if (plan.block_law().mass(target) <= 0)
        throw TargetNotReachable("mu^{n0} has no mass at " + g.format(target));
    std::vector<Element> out;
    out.reserve(plan.n0);
    Element rest = target;
    std::vector<double> w(plan.mu.size());
    for (std::uint64_t remaining = plan.n0; remaining > 1; --remaining) {
        const Measure& tail_law = plan.mu_powers[remaining - 2];
        double total = 0;
        for (std::size_t k = 0; k < plan.mu.size(); ++k) {
            const auto& [s, m] = plan.mu.atoms()[k];
            w[k] = m * tail_law.mass(g.mul_unchecked(g.inv_unchecked(s), rest));
            total += w[k];
        }
        if (!(total > 0)) throw TargetNotReachable("conditional block law vanished at " + g.format(rest));
        std::size_t pick = DiscreteSampler(w)(rng);
        const Element& s = plan.mu.atoms()[pick].first;
        rest = g.mul_unchecked(g.inv_unchecked(s), rest);
        out.push_back(s);
    }
    if (plan.mu.mass(rest) <= 0) throw TargetNotReachable("last step " + g.format(rest) + " is not an atom of mu");
    out.push_back(std::move(rest));
    return out;
}

struct CouplingTime {
    std::uint64_t value = 0; ///< T when finite, otherwise the censoring horizon
    bool censored = false;

    static CouplingTime finite(std::uint64_t t) { return {t, false}; }
    static CouplingTime censored_at(std::uint64_t h) { return {h, true}; }
    bool is_finite() const noexcept { return !censored; }
    /// Whether T > n is known, and its value. A run censored at h met at no
    /// block boundary up to h, so T > h.
    std::optional<bool> exceeds(std::uint64_t n) const {
        if (!censored) return value > n;
        if (n <= value) return true;
        return std::nullopt;
    }
};

enum class RunDetail {
    TimeOnly, ///< only T
    Blocks,   ///< block products and split labels up to T (or the horizon)
    Steps     ///< step-level paths of both walks up to the horizon
};

struct CouplingRun {
    Element x;
    std::uint64_t n0 = 0;
    double nu_mass = 0;
    CouplingTime T;
    std::uint64_t horizon = 0;      ///< in steps, rounded up to a multiple of n0
    bool horizon_rounded = false;
    std::uint64_t blocks_executed = 0;
    std::uint64_t seed = 0;

    std::vector<std::uint8_t> split_labels; ///< K_i in {0, 1, 2}
    std::vector<Element> blocks_S;          ///< L_i
    std::vector<Element> blocks_Sx;         ///< L'_i

    std::vector<Element> steps_S;  ///< X_i
    std::vector<Element> steps_Sx; ///< X'_i
    std::vector<Element> path_S;   ///< S_0 = e, S_1, ...
    std::vector<Element> path_Sx;  ///< S^x_0 = x, S^x_1, ...
};

namespace detail {

inline std::uint64_t round_up(std::uint64_t horizon, std::uint64_t n0) { return (horizon + n0 - 1) / n0 * n0; }

// Runs the block construction; next_step() yields the steps of S in order.
template <class StepSource>
CouplingRun couple_blocks(const CouplingPlan& plan, std::uint64_t horizon, std::uint64_t seed, RunDetail detail,
                          StepSource&& next_step) {
    if (horizon < 1) throw DomainError("horizon must be >= 1");
    const Group& g = plan.group;
    CouplingRun run;
    run.x = plan.x;
    run.n0 = plan.n0;
    run.nu_mass = plan.nu_mass;
    run.seed = seed;
    run.horizon = round_up(horizon, plan.n0);
    run.horizon_rounded = run.horizon != horizon;
    const std::uint64_t blocks = run.horizon / plan.n0;

    Rng split_rng = make_stream(seed, Stream::Split);
    Rng resample_rng = make_stream(seed, Stream::Resample);
    const bool keep_blocks = detail != RunDetail::TimeOnly;
    const bool keep_steps = detail == RunDetail::Steps;

    Element r = g.identity();
    Element r_x = plan.x;
    std::optional<std::uint64_t> met;
    if (keep_steps) {
        run.path_S.push_back(r);
        run.path_Sx.push_back(r_x);
    }
    std::vector<Element> block_steps;
    for (std::uint64_t i = 1; i <= blocks; ++i) {
        block_steps.clear();
        Element l = g.identity();
        for (std::uint64_t k = 0; k < plan.n0; ++k) {
            block_steps.push_back(next_step());
            g.mul_assign(l, block_steps.back());
        }

        if (met) {
            // After T both walks use the steps of S.
            for (const auto& s : block_steps) {
                run.steps_S.push_back(s);
                run.steps_Sx.push_back(s);
                g.mul_assign(r, s);
                run.path_S.push_back(r);
                run.path_Sx.push_back(r);
            }
            continue;
        }

        std::uint8_t k_label = 0;
        double u = uniform01(split_rng);
        if (auto idx = plan.block_law().index_of(l)) {
            if (u < plan.p_split_nu[*idx])
                k_label = 1;
            else if (u < plan.p_split_nu[*idx] + plan.p_split_shifted[*idx])
                k_label = 2;
        }
        Element l_x = k_label == 0 ? l : g.mul_unchecked(k_label == 1 ? plan.x_inv : plan.x, l);

        if (keep_steps) {
            auto x_steps = k_label == 0 ? block_steps : conditional_block_sampler(plan, l_x, resample_rng);
            for (std::uint64_t k = 0; k < plan.n0; ++k) {
                run.steps_S.push_back(block_steps[k]);
                run.steps_Sx.push_back(x_steps[k]);
                g.mul_assign(r, block_steps[k]);
                g.mul_assign(r_x, x_steps[k]);
                run.path_S.push_back(r);
                run.path_Sx.push_back(r_x);
            }
        } else {
            g.mul_assign(r, l);
            g.mul_assign(r_x, l_x);
        }
        if (keep_blocks) {
            run.split_labels.push_back(k_label);
            run.blocks_S.push_back(std::move(l));
            run.blocks_Sx.push_back(std::move(l_x));
        }
        run.blocks_executed = i;
        if (r == r_x) {
            met = i;
            run.T = CouplingTime::finite(i * plan.n0);
            if (!keep_steps) break;
        }
    }
    if (!met) run.T = CouplingTime::censored_at(run.horizon);
    return run;
}

inline CouplingRun identity_run(const Group& g, const std::vector<Element>& steps, std::uint64_t seed) {
    CouplingRun run;
    run.x = g.identity();
    run.n0 = 1;
    run.T = CouplingTime::finite(0);
    run.horizon = steps.size();
    run.seed = seed;
    run.steps_S = steps;
    run.steps_Sx = steps;
    Element r = g.identity();
    run.path_S.push_back(r);
    for (const auto& s : steps) {
        g.mul_assign(r, s);
        run.path_S.push_back(r);
    }
    run.path_Sx = run.path_S;
    return run;
}

} // namespace detail

/// One coupled run. `seed` is the run's own seed (see derive_seed); the steps of S,
/// the split labels and the conditional resampling each use a separate stream,
/// so T does not depend on the requested detail level.
inline CouplingRun run_coupling(const CouplingPlan& plan, std::uint64_t horizon, std::uint64_t seed,
                                RunDetail detail = RunDetail::TimeOnly) {
    Rng steps = make_stream(seed, Stream::Steps);
    return detail::couple_blocks(plan, horizon, seed, detail,
                                 [&] { return plan.mu.atoms()[plan.step_sampler(steps)].first; });
}

inline CouplingRun run_coupling(const CouplingPlan& plan, std::uint64_t horizon, Rng& rng,
                                RunDetail detail = RunDetail::TimeOnly) {
    return run_coupling(plan, horizon, rng(), detail);
}

/// `runs` independent runs; run i uses derive_seed(master_seed, i).
inline std::vector<CouplingRun> simulate_runs(const CouplingPlan& plan, std::uint64_t horizon, std::size_t runs,
                                              std::uint64_t master_seed, unsigned threads,
                                              RunDetail detail = RunDetail::TimeOnly) {
    std::vector<CouplingRun> out(runs);
    parallel_for(runs, threads, [&](std::size_t i) {
        out[i] = run_coupling(plan, horizon, derive_seed(master_seed, i), detail);
    });
    return out;
}

struct MultiCouplingEntry {
    Element x;
    std::optional<CouplingRun> run;
    std::string error; ///< set when no plan exists for x
};

struct MultiCoupling {
    std::vector<Element> steps_S;
    std::vector<MultiCouplingEntry> entries;
};

/// Couples RW(x, mu) for every x in xs to one shared walk S on a single
/// probability space. Entry k uses derive_seed(seed, k) for its split and
/// resampling streams; S uses the Steps stream of `seed` itself.
template <class Mass>
MultiCoupling multi_couple(const AtomicMeasure<Mass>& mu, const std::vector<Element>& xs, std::uint64_t n_max,
                           std::uint64_t horizon, std::uint64_t seed, NuStrategy strategy = NuStrategy::SingleAtom,
                           const Limits& limits = {}) {
    MultiCoupling out;
    if (xs.empty()) return out;
    const Group& g = mu.group();

    std::vector<std::optional<CouplingPlan>> plans(xs.size());
    std::uint64_t length = horizon;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        MultiCouplingEntry e{xs[k], std::nullopt, {}};
        try {
            plans[k] = build_plan(mu, xs[k], n_max, strategy, limits);
            length = std::max(length, detail::round_up(horizon, plans[k]->n0));
        } catch (const IdentityShift&) {
        } catch (const NoOverlap& err) {
            e.error = err.what();
        }
        out.entries.push_back(std::move(e));
    }

    const auto mu_d = mu.template cast<double>();
    std::vector<double> w;
    for (const auto& a : mu_d.atoms()) w.push_back(a.second);
    DiscreteSampler sampler(w);
    Rng steps = make_stream(seed, Stream::Steps);
    out.steps_S.reserve(length);
    for (std::uint64_t i = 0; i < length; ++i) out.steps_S.push_back(mu_d.atoms()[sampler(steps)].first);

    for (std::size_t k = 0; k < xs.size(); ++k) {
        auto& e = out.entries[k];
        if (!e.error.empty()) continue;
        std::uint64_t entry_seed = derive_seed(seed, k);
        if (g.is_identity(xs[k])) {
            e.run = detail::identity_run(g, {out.steps_S.begin(), out.steps_S.begin() + static_cast<std::ptrdiff_t>(horizon)},
                                         entry_seed);
            continue;
        }
        std::size_t pos = 0;
        e.run = detail::couple_blocks(*plans[k], horizon, entry_seed, RunDetail::Steps,
                                      [&] { return out.steps_S[pos++]; });
    }
    return out;
}

} // namespace excouple
