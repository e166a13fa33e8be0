#pragma once

// Membership in G_p (possible exact coupling) and G_s (successful exact
// coupling) for atomic step distributions, plus the free-group experiment
// separating the two.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "analysis.hpp"
#include "errors.hpp"
#include "group.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace excouple {

/// {a a'^{-1}} and {a^{-1} a'} over all pairs of A, sorted; symmetric and contains e.
inline std::vector<Element> difference_generators(const Group& g, const std::vector<Element>& atoms) {
    if (atoms.empty()) throw DomainError("difference_generators needs a nonempty atom set");
    std::set<Element> out;
    for (const auto& a : atoms) {
        g.validate(a);
        const Element a_inv = g.inv_unchecked(a);
        for (const auto& b : atoms) {
            out.insert(g.mul_unchecked(a, g.inv_unchecked(b)));
            out.insert(g.mul_unchecked(a_inv, b));
        }
    }
    return {out.begin(), out.end()};
}

struct SubgroupClosure {
    std::vector<Element> generators;
    std::vector<Element> elements; ///< sorted by encoding
    std::uint64_t radius = 0;
    bool complete = false;         ///< a full expansion round added nothing

    bool contains(const Element& e) const { return std::binary_search(elements.begin(), elements.end(), e); }
};

/// Breadth-first closure of {e} under right multiplication by the generators and
/// their inverses, for at most `radius` rounds.
inline SubgroupClosure generate_subgroup(const Group& g, const std::vector<Element>& gens, std::uint64_t radius,
                                         std::size_t max_elements = 1'000'000) {
    if (radius < 1) throw DomainError("closure radius must be >= 1");
    std::vector<Element> moves;
    for (const auto& s : gens) {
        g.validate(s);
        moves.push_back(s);
        moves.push_back(g.inv_unchecked(s));
    }
    std::sort(moves.begin(), moves.end());
    moves.erase(std::unique(moves.begin(), moves.end()), moves.end());

    std::unordered_set<Element, ElementHash> seen{g.identity()};
    std::vector<Element> frontier{g.identity()};
    SubgroupClosure c;
    c.generators = gens;
    c.radius = radius;
    auto expand = [&](bool insert) {
        std::vector<Element> next;
        for (const auto& e : frontier)
            for (const auto& s : moves) {
                Element p = g.mul_unchecked(e, s);
                if (seen.count(p)) continue;
                if (!insert) return true;
                seen.insert(p);
                next.push_back(std::move(p));
                if (seen.size() > max_elements)
                    throw ResourceError("subgroup closure exceeds the element guard", max_elements);
            }
        frontier = std::move(next);
        return !frontier.empty();
    };
    bool growing = true;
    for (std::uint64_t round = 0; round < radius && growing; ++round) growing = expand(true);
    // Stabilized within the radius, or the last round left nothing new to add.
    c.complete = !growing || !expand(false);
    c.elements.assign(seen.begin(), seen.end());
    std::sort(c.elements.begin(), c.elements.end());
    return c;
}

enum class GsStatus { Yes, NoUpTo, Unknown };

struct MembershipVerdict {
    Element x;
    std::uint64_t n_max = 0;
    std::optional<std::uint64_t> gp_n0; ///< in G_p: least overlap order, nullopt = NoUpTo(n_max)
    GsStatus gs = GsStatus::NoUpTo;
    bool commutation_holds = false;     ///< x commutes with supp mu^{n0} (true for Abelian groups)

    bool in_gp() const { return gp_n0.has_value(); }
    bool in_gs() const { return gs == GsStatus::Yes; }
};

inline const char* to_string(GsStatus s) {
    switch (s) {
    case GsStatus::Yes: return "Yes";
    case GsStatus::NoUpTo: return "NoUpTo";
    case GsStatus::Unknown: return "Unknown";
    }
    return "?";
}

/// Overlap criterion for G_p; G_s additionally needs the commutation hypothesis,
/// otherwise the verdict is Unknown. NoUpTo(n_max) certifies only n <= n_max.
template <class Mass>
MembershipVerdict gs_membership(const AtomicMeasure<Mass>& mu, const Element& x, std::uint64_t n_max,
                                const Limits& limits = {}) {
    MembershipVerdict v;
    v.x = x;
    v.n_max = n_max;
    auto overlap = find_overlap_order(mu, x, n_max, limits);
    if (!overlap) return v;
    v.gp_n0 = overlap->n0;
    v.commutation_holds = commutes_with_support(x, mu, overlap->n0, limits);
    v.gs = v.commutation_holds ? GsStatus::Yes : GsStatus::Unknown;
    return v;
}

struct GroupPropertyReport {
    std::size_t checked = 0;
    std::vector<std::pair<Element, Element>> violations; ///< (x, y) with x^{-1} y not verdict-Yes
};

/// For each (x, y) with both verdicts Yes at n_max, checks x^{-1} y is Yes at 2 n_max.
template <class Mass>
GroupPropertyReport gs_group_property_check(const AtomicMeasure<Mass>& mu,
                                            const std::vector<std::pair<Element, Element>>& samples,
                                            std::uint64_t n_max, const Limits& limits = {}) {
    const Group& g = mu.group();
    if (!g.is_abelian()) throw DomainError("group property check is for Abelian groups");
    GroupPropertyReport rep;
    for (const auto& [x, y] : samples) {
        if (!gs_membership(mu, x, n_max, limits).in_gs() || !gs_membership(mu, y, n_max, limits).in_gs()) continue;
        ++rep.checked;
        Element z = g.mul(g.inv(x), y);
        if (!gs_membership(mu, z, 2 * n_max, limits).in_gs()) rep.violations.emplace_back(x, y);
    }
    return rep;
}

/// Draws `count` ordered pairs uniformly from the verdict-Yes members of `candidates`.
template <class Mass>
std::vector<std::pair<Element, Element>> sample_yes_pairs(const AtomicMeasure<Mass>& mu,
                                                          const std::vector<Element>& candidates, std::size_t count,
                                                          std::uint64_t n_max, Rng& rng, const Limits& limits = {}) {
    std::vector<Element> yes;
    for (const auto& c : candidates)
        if (gs_membership(mu, c, n_max, limits).in_gs()) yes.push_back(c);
    if (yes.empty()) throw DomainError("no candidate has a Yes verdict");
    std::vector<std::pair<Element, Element>> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t a = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(yes.size()));
        std::size_t b = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(yes.size()));
        out.emplace_back(yes[a], yes[b]);
    }
    return out;
}

/// P_start(W hits 0) for the walk on N stepping +1 w.p. p_up and -1 otherwise,
/// by iterating the absorbing chain on {0, ..., ceiling} until the mass still in
/// play drops below 1e-18. Mass reaching `ceiling` is treated as escaped; with
/// p_up > 1/2 its return probability is ((1 - p_up)/p_up)^ceiling.
inline double gamblers_ruin_hit_probability(std::uint64_t start, double p_up, std::size_t ceiling = 80,
                                            std::size_t max_steps = 1'000'000) {
    if (start == 0) return 1.0;
    if (!(p_up > 0 && p_up < 1)) throw DomainError("p_up must lie in (0, 1)");
    if (start >= ceiling) throw DomainError("start must lie below the ceiling");
    std::vector<double> p(ceiling + 1, 0.0), q(ceiling + 1, 0.0);
    p[start] = 1.0;
    double absorbed = 0.0;
    for (std::size_t step = 0; step < max_steps; ++step) {
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t s = 1; s < ceiling; ++s) {
            q[s + 1] += p_up * p[s];
            q[s - 1] += (1 - p_up) * p[s];
        }
        absorbed += q[0];
        q[0] = 0.0;
        q[ceiling] = 0.0;
        std::swap(p, q);
        double alive = 0.0;
        for (double v : p) alive += v;
        if (alive < 1e-18) break;
    }
    return absorbed;
}

struct SeparationReport {
    std::uint64_t horizon = 0;
    std::size_t runs = 0;
    double p_first_b_S = 0;
    std::pair<double, double> ci_S;
    double p_first_b_Sab = 0;
    std::pair<double, double> ci_Sab;
    double hit_from_1 = 0;     ///< P_1(W hits 0)
    double hit_from_2 = 0;     ///< P_2(W hits 0)
    double target_S = 0.25;    ///< P(lim S starts with b), by symmetry of the four letters
    double target_Sab = 0;     ///< P_2(W hits 0) / 4
    bool pre_asymptotic = false; ///< horizon < 50
};

/// Monte Carlo estimate of P(first letter of S_n = b) for independent simple
/// random walks on F2 started at e and at ab, against the targets 1/4 and
/// P_2(W hits 0) / 4, where W is the length chain away from e (up 3/4, down 1/4).
inline SeparationReport free_group_tail_separation(std::uint64_t horizon, std::size_t runs, std::uint64_t seed,
                                                   unsigned threads = 1) {
    if (runs == 0) throw DomainError("separation experiment needs runs >= 1");
    SeparationReport rep;
    rep.horizon = horizon;
    rep.runs = runs;
    rep.pre_asymptotic = horizon < 50;
    rep.hit_from_1 = gamblers_ruin_hit_probability(1, 0.75);
    rep.hit_from_2 = gamblers_ruin_hit_probability(2, 0.75);
    rep.target_Sab = rep.hit_from_2 * rep.target_S;

    const Group f2 = Group::free(2);
    const Element gens[4] = {{1}, {-1}, {2}, {-2}};
    const Element ab{1, 2};
    constexpr std::int64_t kB = 2;
    std::vector<std::uint8_t> first_b(runs * 2, 0);
    parallel_for(runs, threads, [&](std::size_t i) {
        const std::uint64_t run_seed = derive_seed(seed, i);
        Rng rng_s = make_stream(run_seed, Stream::Steps);
        Rng rng_x = make_stream(run_seed, Stream::Auxiliary);
        Element s = f2.identity();
        Element sx = ab;
        for (std::uint64_t k = 0; k < horizon; ++k) {
            f2.mul_assign(s, gens[rng_s() >> 62]);
            f2.mul_assign(sx, gens[rng_x() >> 62]);
        }
        first_b[2 * i] = !s.code().empty() && s.code().front() == kB;
        first_b[2 * i + 1] = !sx.code().empty() && sx.code().front() == kB;
    });
    std::size_t hits_s = 0, hits_x = 0;
    for (std::size_t i = 0; i < runs; ++i) {
        hits_s += first_b[2 * i];
        hits_x += first_b[2 * i + 1];
    }
    rep.p_first_b_S = static_cast<double>(hits_s) / static_cast<double>(runs);
    rep.p_first_b_Sab = static_cast<double>(hits_x) / static_cast<double>(runs);
    rep.ci_S = wilson_interval(hits_s, runs);
    rep.ci_Sab = wilson_interval(hits_x, runs);
    return rep;
}

} // namespace excouple
