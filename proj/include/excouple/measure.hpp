#pragma once

// Finitely supported (sub)probability measures on a discrete group.
//
// Masses are either exact rationals (`ExactMeasure`) or doubles (`Measure`).
// Atoms are stored sorted by canonical encoding; every stored mass is > 0.
// Shift convention, used everywhere: (theta_x mu)(z) = mu(x^{-1} z), i.e. all
// mass is left-multiplied by x. theta_x^{-1} is shift(inverse(x), .).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "errors.hpp"
#include "group.hpp"

namespace excouple {

using Rational = boost::multiprecision::cpp_rational;

template <class Mass>
struct MassTraits;

template <>
struct MassTraits<double> {
    static constexpr bool exact = false;
    static double to_double(double m) { return m; }
    static double from_rational(const Rational& r) { return static_cast<double>(r); }
    /// Atoms below 1e-15 of the total are dropped after every operation.
    static bool negligible(double m, double total) { return !(m > 1e-15 * total); }
    static bool is_one(double m) { return std::abs(m - 1.0) <= 1e-9; }
    static double abs(double m) { return std::abs(m); }
};

template <>
struct MassTraits<Rational> {
    static constexpr bool exact = true;
    static double to_double(const Rational& m) { return static_cast<double>(m); }
    static Rational from_rational(const Rational& r) { return r; }
    static bool negligible(const Rational& m, const Rational&) { return m <= 0; }
    static bool is_one(const Rational& m) { return m == 1; }
    static Rational abs(const Rational& m) { return m < 0 ? Rational(-m) : m; }
};

/// Support-explosion guard shared by every operation that can grow a support.
struct Limits {
    static constexpr std::size_t kDefaultMaxAtoms = 5'000'000;
    std::size_t max_atoms = kDefaultMaxAtoms;

    /// Default limits, overridden by EXCOUPLE_GUARD_ATOMS when set.
    static Limits from_env() {
        Limits l;
        if (const char* v = std::getenv("EXCOUPLE_GUARD_ATOMS")) {
            char* end = nullptr;
            unsigned long long n = std::strtoull(v, &end, 10);
            if (end != v && *end == '\0' && n > 0) l.max_atoms = static_cast<std::size_t>(n);
        }
        return l;
    }
};

template <class Mass>
class AtomicMeasure {
public:
    using Atom = std::pair<Element, Mass>;
    using Traits = MassTraits<Mass>;

    /// The zero measure.
    explicit AtomicMeasure(Group group) : group_(std::move(group)), total_(0) {}

    /// Merges duplicate elements and drops zero-mass atoms. Negative masses are rejected.
    static AtomicMeasure from_atoms(Group group, std::vector<Atom> atoms) {
        for (const auto& [e, m] : atoms) {
            group.validate(e);
            if (m < 0) throw DomainError("negative mass at " + group.format(e));
        }
        std::sort(atoms.begin(), atoms.end(),
                  [](const Atom& a, const Atom& b) { return a.first < b.first; });
        std::vector<Atom> merged;
        merged.reserve(atoms.size());
        for (auto& a : atoms) {
            if (!merged.empty() && merged.back().first == a.first)
                merged.back().second += a.second;
            else
                merged.push_back(std::move(a));
        }
        return AtomicMeasure(std::move(group), std::move(merged), Sorted{});
    }

    static AtomicMeasure point(Group group, Element e, Mass m = Mass(1)) {
        std::vector<Atom> a;
        a.emplace_back(std::move(e), std::move(m));
        return from_atoms(std::move(group), std::move(a));
    }

    static AtomicMeasure uniform(Group group, const std::vector<Element>& elements) {
        if (elements.empty()) throw DomainError("uniform measure needs at least one atom");
        Mass each = Mass(1) / Mass(static_cast<long long>(elements.size()));
        std::vector<Atom> a;
        for (const auto& e : elements) a.emplace_back(e, each);
        return from_atoms(std::move(group), std::move(a));
    }

    const Group& group() const noexcept { return group_; }
    const std::vector<Atom>& atoms() const noexcept { return atoms_; }
    std::size_t size() const noexcept { return atoms_.size(); }
    bool is_zero() const noexcept { return atoms_.empty(); }
    const Mass& total() const noexcept { return total_; }
    bool is_probability() const { return Traits::is_one(total_); }

    Mass mass(const Element& e) const {
        auto it = find(e);
        return it == atoms_.end() ? Mass(0) : it->second;
    }

    /// Index of e in atoms(), if it is an atom.
    std::optional<std::size_t> index_of(const Element& e) const {
        auto it = find(e);
        if (it == atoms_.end()) return std::nullopt;
        return static_cast<std::size_t>(it - atoms_.begin());
    }

    std::vector<Element> support() const {
        std::vector<Element> s;
        s.reserve(atoms_.size());
        for (const auto& a : atoms_) s.push_back(a.first);
        return s;
    }

    template <class Other>
    AtomicMeasure<Other> cast() const {
        std::vector<typename AtomicMeasure<Other>::Atom> a;
        a.reserve(atoms_.size());
        for (const auto& [e, m] : atoms_) {
            if constexpr (std::is_same_v<Other, double>)
                a.emplace_back(e, Traits::to_double(m));
            else
                a.emplace_back(e, Other(m));
        }
        return AtomicMeasure<Other>::from_atoms(group_, std::move(a));
    }

    /// Builds from atoms already sorted by element with unique keys.
    struct Sorted {};
    AtomicMeasure(Group group, std::vector<Atom> sorted_atoms, Sorted) : group_(std::move(group)), total_(0) {
        atoms_ = std::move(sorted_atoms);
        prune();
    }

private:
    typename std::vector<Atom>::const_iterator find(const Element& e) const {
        auto it = std::lower_bound(atoms_.begin(), atoms_.end(), e,
                                   [](const Atom& a, const Element& k) { return a.first < k; });
        if (it != atoms_.end() && it->first == e) return it;
        return atoms_.end();
    }

    void prune() {
        Mass raw(0);
        for (const auto& a : atoms_) raw += a.second;
        std::erase_if(atoms_, [&](const Atom& a) { return Traits::negligible(a.second, raw); });
        total_ = Mass(0);
        for (const auto& a : atoms_) total_ += a.second;
    }

    Group group_;
    std::vector<Atom> atoms_;
    Mass total_;
};

using Measure = AtomicMeasure<double>;
using ExactMeasure = AtomicMeasure<Rational>;

namespace detail {

inline void require_same_group(const Group& a, const Group& b, const char* op) {
    if (!(a == b))
        throw ContextMismatch(std::string(op) + ": measures live on " + a.describe() + " and " + b.describe());
}

template <class Mass>
AtomicMeasure<Mass> from_map(const Group& g, std::unordered_map<Element, Mass, ElementHash>&& acc) {
    std::vector<typename AtomicMeasure<Mass>::Atom> atoms;
    atoms.reserve(acc.size());
    for (auto& kv : acc) atoms.emplace_back(kv.first, std::move(kv.second));
    std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return AtomicMeasure<Mass>(g, std::move(atoms), typename AtomicMeasure<Mass>::Sorted{});
}

} // namespace detail

/// mu1 * mu2: mass of z is the sum of mu1(g) mu2(h) over g·h = z.
template <class Mass>
AtomicMeasure<Mass> convolve(const AtomicMeasure<Mass>& a, const AtomicMeasure<Mass>& b, const Limits& limits = {}) {
    detail::require_same_group(a.group(), b.group(), "convolve");
    const Group& g = a.group();
    std::unordered_map<Element, Mass, ElementHash> acc;
    acc.reserve(std::min(a.size() * b.size(), limits.max_atoms + 1));
    for (const auto& [ea, ma] : a.atoms()) {
        for (const auto& [eb, mb] : b.atoms()) {
            auto [it, inserted] = acc.try_emplace(g.mul_unchecked(ea, eb), Mass(0));
            it->second += ma * mb;
            if (inserted && acc.size() > limits.max_atoms)
                throw ResourceError("convolution support exceeds the atom guard", limits.max_atoms);
        }
    }
    return detail::from_map(g, std::move(acc));
}

/// n-fold convolution by repeated squaring.
template <class Mass>
AtomicMeasure<Mass> power(const AtomicMeasure<Mass>& mu, std::uint64_t n, const Limits& limits = {}) {
    if (n < 1) throw DomainError("convolution power needs n >= 1");
    std::optional<AtomicMeasure<Mass>> result;
    AtomicMeasure<Mass> base = mu;
    while (true) {
        if (n & 1U) result = result ? convolve(*result, base, limits) : base;
        n >>= 1U;
        if (!n) break;
        base = convolve(base, base, limits);
    }
    return *result;
}

/// n-fold convolution by n - 1 successive right convolutions with mu.
template <class Mass>
AtomicMeasure<Mass> power_iterated(const AtomicMeasure<Mass>& mu, std::uint64_t n, const Limits& limits = {}) {
    if (n < 1) throw DomainError("convolution power needs n >= 1");
    AtomicMeasure<Mass> r = mu;
    for (std::uint64_t k = 1; k < n; ++k) r = convolve(r, mu, limits);
    return r;
}

/// mu^1, ..., mu^n.
template <class Mass>
std::vector<AtomicMeasure<Mass>> power_table(const AtomicMeasure<Mass>& mu, std::uint64_t n, const Limits& limits = {}) {
    std::vector<AtomicMeasure<Mass>> t;
    t.reserve(n);
    t.push_back(mu);
    for (std::uint64_t k = 1; k < n; ++k) t.push_back(convolve(t.back(), mu, limits));
    return t;
}

/// theta_x mu: mass of z is mu(x^{-1} z).
template <class Mass>
AtomicMeasure<Mass> shift(const Element& x, const AtomicMeasure<Mass>& mu) {
    const Group& g = mu.group();
    g.validate(x);
    std::vector<typename AtomicMeasure<Mass>::Atom> atoms;
    atoms.reserve(mu.size());
    for (const auto& [e, m] : mu.atoms()) atoms.emplace_back(g.mul_unchecked(x, e), m);
    std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    return AtomicMeasure<Mass>(g, std::move(atoms), typename AtomicMeasure<Mass>::Sorted{});
}

/// Largest measure below both: the atomwise minimum.
template <class Mass>
AtomicMeasure<Mass> meet(const AtomicMeasure<Mass>& a, const AtomicMeasure<Mass>& b) {
    detail::require_same_group(a.group(), b.group(), "meet");
    std::vector<typename AtomicMeasure<Mass>::Atom> out;
    auto i = a.atoms().begin(), j = b.atoms().begin();
    while (i != a.atoms().end() && j != b.atoms().end()) {
        if (i->first < j->first)
            ++i;
        else if (j->first < i->first)
            ++j;
        else {
            out.emplace_back(i->first, std::min(i->second, j->second));
            ++i;
            ++j;
        }
    }
    return AtomicMeasure<Mass>(a.group(), std::move(out), typename AtomicMeasure<Mass>::Sorted{});
}

/// Sum over z of |a(z) - b(z)|.
template <class Mass>
Mass l1_distance(const AtomicMeasure<Mass>& a, const AtomicMeasure<Mass>& b) {
    detail::require_same_group(a.group(), b.group(), "l1_distance");
    Mass s(0);
    auto i = a.atoms().begin(), j = b.atoms().begin();
    while (i != a.atoms().end() || j != b.atoms().end()) {
        if (j == b.atoms().end() || (i != a.atoms().end() && i->first < j->first)) {
            s += i->second;
            ++i;
        } else if (i == a.atoms().end() || j->first < i->first) {
            s += j->second;
            ++j;
        } else {
            s += MassTraits<Mass>::abs(i->second - j->second);
            ++i;
            ++j;
        }
    }
    return s;
}

/// Total variation norm of a - b in the normalization where disjoint point masses are at distance 2.
template <class Mass>
Mass tv_distance(const AtomicMeasure<Mass>& a, const AtomicMeasure<Mass>& b) {
    if (!a.is_probability() || !b.is_probability())
        throw DomainError("tv_distance expects probability measures");
    return l1_distance(a, b);
}

/// Restriction to the atoms satisfying pred.
template <class Mass, class Pred>
AtomicMeasure<Mass> restrict_to(const AtomicMeasure<Mass>& mu, Pred pred) {
    std::vector<typename AtomicMeasure<Mass>::Atom> out;
    for (const auto& a : mu.atoms())
        if (pred(a.first)) out.push_back(a);
    return AtomicMeasure<Mass>(mu.group(), std::move(out), typename AtomicMeasure<Mass>::Sorted{});
}

/// True iff a <= b atomwise, allowing a slack of tol per atom.
template <class Mass>
bool dominated_by(const AtomicMeasure<Mass>& a, const AtomicMeasure<Mass>& b, double tol = 0.0) {
    for (const auto& [e, m] : a.atoms())
        if (MassTraits<Mass>::to_double(m - b.mass(e)) > tol) return false;
    return true;
}

template <class Mass>
struct Overlap {
    std::uint64_t n0;
    AtomicMeasure<Mass> xi; ///< mu^{n0} ^ theta_x^{-1} mu^{n0}
};

/// Least n <= n_max with mu^n ^ theta_x^{-1} mu^n != 0.
template <class Mass>
std::optional<Overlap<Mass>> find_overlap_order(const AtomicMeasure<Mass>& mu, const Element& x, std::uint64_t n_max,
                                                const Limits& limits = {}) {
    if (n_max < 1) throw DomainError("n_max must be >= 1");
    if (!mu.is_probability()) throw DomainError("find_overlap_order expects a probability measure");
    const Group& g = mu.group();
    const Element x_inv = g.inv(x);
    AtomicMeasure<Mass> p = mu;
    for (std::uint64_t n = 1; n <= n_max; ++n) {
        if (n > 1) p = convolve(p, mu, limits);
        auto xi = meet(p, shift(x_inv, p));
        if (!xi.is_zero()) return Overlap<Mass>{n, std::move(xi)};
    }
    return std::nullopt;
}

/// True iff x·s = s·x for every atom s of mu^n.
template <class Mass>
bool commutes_with_support(const Element& x, const AtomicMeasure<Mass>& mu, std::uint64_t n, const Limits& limits = {}) {
    const Group& g = mu.group();
    g.validate(x);
    if (g.is_abelian() || g.is_identity(x)) return true;
    auto p = power(mu, n, limits);
    return std::all_of(p.atoms().begin(), p.atoms().end(), [&](const auto& a) {
        return g.mul_unchecked(x, a.first) == g.mul_unchecked(a.first, x);
    });
}

} // namespace excouple
