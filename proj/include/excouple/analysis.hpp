#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "coupling.hpp"
#include "errors.hpp"
#include "measure.hpp"

namespace excouple {

/// Law of the hitting time tau of 0 for the lazy symmetric walk on <x> started at 1.
struct HittingTimeLaw {
    FiniteOrder order;             ///< nullopt: walk on Z
    double laziness = 0;
    std::vector<double> tail;      ///< tail[k] = P(tau > k), k = 0..horizon_blocks
    std::vector<double> absorbed;  ///< absorbed[k] = P(tau <= k)

    std::uint64_t horizon_blocks() const { return tail.empty() ? 0 : tail.size() - 1; }

    /// P(T > n) for T = n0 tau. T is a multiple of n0, so T > n iff tau > floor(n / n0).
    double coupling_tail(std::uint64_t n, std::uint64_t n0) const {
        std::uint64_t k = n / n0;
        if (k >= tail.size()) throw DomainError("hitting-time law horizon does not cover n = " + std::to_string(n));
        return tail[k];
    }

    /// The law of T = 0 (x = e).
    static HittingTimeLaw immediate(std::uint64_t horizon_blocks) {
        HittingTimeLaw law;
        law.order = 1;
        law.tail.assign(horizon_blocks + 1, 0.0);
        law.absorbed.assign(horizon_blocks + 1, 1.0);
        return law;
    }
};

/// Exact dynamic program for the absorbed lazy walk: step +1 and -1 with
/// probability (1 - laziness)/2 each, stay otherwise, absorb at 0.
inline HittingTimeLaw hitting_time_tail(FiniteOrder order, double laziness, std::uint64_t horizon_blocks) {
    if (!(laziness >= 0 && laziness < 1)) throw DomainError("laziness must lie in [0, 1)");
    if (horizon_blocks < 1) throw DomainError("horizon_blocks must be >= 1");
    if (order && *order < 2) throw DomainError("<x> is trivial (order < 2): x = e");

    const double move = (1 - laziness) / 2;
    HittingTimeLaw law;
    law.order = order;
    law.laziness = laziness;
    law.tail.reserve(horizon_blocks + 1);
    law.absorbed.reserve(horizon_blocks + 1);

    // Finite order d: residues 0..d-1. Infinite order: started at 1 the walk
    // cannot pass below 0 without being absorbed and is at most 1 + k after k
    // steps, so positions 0..horizon+1 are exact.
    const std::size_t states = order ? static_cast<std::size_t>(*order) : static_cast<std::size_t>(horizon_blocks + 2);
    std::vector<double> p(states, 0.0), q(states, 0.0);
    p[1] = 1.0;
    double absorbed = 0.0;
    law.tail.push_back(1.0);
    law.absorbed.push_back(0.0);
    for (std::uint64_t k = 1; k <= horizon_blocks; ++k) {
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t s = 1; s < states; ++s) {
            if (p[s] == 0.0) continue;
            q[s] += laziness * p[s];
            std::size_t up = order ? (s + 1) % states : s + 1;
            std::size_t down = s - 1;
            if (up < states) q[up] += move * p[s];
            q[down] += move * p[s];
        }
        absorbed += q[0];
        q[0] = 0.0;
        std::swap(p, q);
        double surviving = 0.0;
        for (double v : p) surviving += v;
        law.tail.push_back(surviving);
        law.absorbed.push_back(absorbed);
    }
    return law;
}

struct TvPoint {
    std::uint64_t n;
    double tv;
};

/// ||mu^n - theta_x mu^n|| for n = 1..n_max. With ExactMeasure every value is
/// computed exactly and rounded once.
template <class Mass>
std::vector<TvPoint> exact_tv_curve(const AtomicMeasure<Mass>& mu, const Element& x, std::uint64_t n_max,
                                    const Limits& limits = {}) {
    if (n_max < 1) throw DomainError("n_max must be >= 1");
    mu.group().validate(x);
    std::vector<TvPoint> curve;
    curve.reserve(n_max);
    AtomicMeasure<Mass> p = mu;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        if (n > 1) p = convolve(p, mu, limits);
        curve.push_back({n, MassTraits<Mass>::to_double(tv_distance(p, shift(x, p)))});
    }
    return curve;
}

enum class DecayModel { PowerLaw, Geometric };

struct DecayFit {
    DecayModel model;
    double C = 0;
    double exponent = 0; ///< PowerLaw: tv ~ C n^exponent
    double rho = 0;      ///< Geometric: tv ~ C rho^n
    std::uint64_t n_lo = 0, n_hi = 0;
    double residual = 0; ///< max |log tv - log model| over the fit range
};

/// Least squares on (log n, log tv) or (n, log tv) over n in [n_lo, n_hi].
inline DecayFit fit_decay(std::span<const TvPoint> curve, DecayModel model, std::uint64_t n_lo, std::uint64_t n_hi) {
    std::vector<double> xs, ys;
    for (const auto& pt : curve) {
        if (pt.n < n_lo || pt.n > n_hi) continue;
        if (!(pt.tv > 0))
            throw DomainError("tv vanishes at n = " + std::to_string(pt.n) + " (curve converged); no decay fit");
        xs.push_back(model == DecayModel::PowerLaw ? std::log(static_cast<double>(pt.n)) : static_cast<double>(pt.n));
        ys.push_back(std::log(pt.tv));
    }
    if (xs.size() < 2) throw DomainError("fit range holds fewer than two points");
    const double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;

    DecayFit fit{.model = model, .C = std::exp(intercept), .n_lo = n_lo, .n_hi = n_hi};
    if (model == DecayModel::PowerLaw)
        fit.exponent = slope;
    else
        fit.rho = std::exp(slope);
    for (std::size_t i = 0; i < xs.size(); ++i)
        fit.residual = std::max(fit.residual, std::abs(ys[i] - (intercept + slope * xs[i])));
    return fit;
}

struct InequalityReport {
    bool holds = true;
    double worst_slack = 0;            ///< min over n of 2 P(T > n) - tv_n
    std::uint64_t worst_n = 0;
    std::optional<std::uint64_t> first_violation;
    std::vector<double> bound;         ///< 2 P(T > n), aligned with the curve
};

/// Checks tv_n <= 2 P(T > n) + 1e-10 along the curve, P(T > n) taken from the law of T / n0.
inline InequalityReport verify_coupling_inequality(std::span<const TvPoint> curve, const HittingTimeLaw& law,
                                                   std::uint64_t n0, double tol = 1e-10) {
    InequalityReport rep;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    for (const auto& pt : curve) {
        double b = 2 * law.coupling_tail(pt.n, n0);
        rep.bound.push_back(b);
        double slack = b - pt.tv;
        if (slack < rep.worst_slack) {
            rep.worst_slack = slack;
            rep.worst_n = pt.n;
        }
        if (pt.tv > b + tol && !rep.first_violation) {
            rep.holds = false;
            rep.first_violation = pt.n;
        }
    }
    return rep;
}

struct TailEstimate {
    double estimate = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::size_t used = 0;
    std::size_t excluded_censored = 0; ///< censored before n, so T > n is unknown
};

/// Wilson score interval at z with `hits` successes out of `trials`.
inline std::pair<double, double> wilson_interval(std::size_t hits, std::size_t trials, double z = 1.959963984540054) {
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(hits) / n;
    const double z2 = z * z;
    const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
    return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Sorted coupling times for repeated P(T > n) queries over the same runs.
class TailCounter {
public:
    explicit TailCounter(std::span<const CouplingRun> runs) {
        if (runs.empty()) throw DomainError("empirical tail needs at least one run");
        for (const auto& r : runs) {
            if (r.n0 != runs.front().n0 || r.x != runs.front().x)
                throw DomainError("empirical tail: runs come from different plans");
            (r.T.censored ? censored_ : finite_).push_back(r.T.value);
        }
        std::sort(finite_.begin(), finite_.end());
        std::sort(censored_.begin(), censored_.end());
    }

    TailEstimate at(std::uint64_t n) const {
        // A run censored at h has T > h, so T > n is known for n <= h.
        auto above = [n](const std::vector<std::uint64_t>& v) {
            return static_cast<std::size_t>(v.end() - std::upper_bound(v.begin(), v.end(), n));
        };
        const std::size_t known_censored =
            static_cast<std::size_t>(censored_.end() - std::lower_bound(censored_.begin(), censored_.end(), n));
        TailEstimate est;
        est.used = finite_.size() + known_censored;
        est.excluded_censored = censored_.size() - known_censored;
        if (est.used == 0) throw DomainError("every run is censored below n = " + std::to_string(n));
        const std::size_t hits = above(finite_) + known_censored;
        est.estimate = static_cast<double>(hits) / static_cast<double>(est.used);
        std::tie(est.ci_low, est.ci_high) = wilson_interval(hits, est.used);
        return est;
    }

    std::size_t censored() const noexcept { return censored_.size(); }
    std::size_t total() const noexcept { return finite_.size() + censored_.size(); }

private:
    std::vector<std::uint64_t> finite_, censored_;
};

/// sup over k = 0..law.horizon_blocks() of |empirical P(T > k n0) - P(tau > k)|.
inline double tail_sup_distance(std::span<const CouplingRun> runs, const HittingTimeLaw& law, std::uint64_t n0) {
    TailCounter counter(runs);
    double worst = 0;
    for (std::uint64_t k = 0; k <= law.horizon_blocks(); ++k)
        worst = std::max(worst, std::abs(counter.at(k * n0).estimate - law.tail[k]));
    return worst;
}

/// Monte Carlo estimate of P(T > n) with a Wilson 95% interval. Runs censored
/// before n are excluded and counted in excluded_censored.
inline TailEstimate empirical_tail(std::span<const CouplingRun> runs, std::uint64_t n) {
    return TailCounter(runs).at(n);
}

} // namespace excouple
