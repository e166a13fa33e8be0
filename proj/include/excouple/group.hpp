#pragma once

// Concrete countable discrete groups with canonical element encodings.
//
// Encodings (sequences of int64, compared lexicographically):
//   Lattice(d)   d coordinates
//   Cyclic(m)    one residue in [0, m)
//   Free(r)      reduced word of signed generator indices, +i = i-th letter,
//                -i = its inverse, 1 <= i <= r; the identity is the empty word
//   Product      for each component: its encoding length, then its encoding
//
// Two elements of the same group are equal iff their encodings are equal.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <compare>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/container/small_vector.hpp>
#include <boost/container_hash/hash.hpp>

#include "errors.hpp"

namespace excouple {

using Code = boost::container::small_vector<std::int64_t, 4>;

class Element {
public:
    Element() = default;
    explicit Element(Code code) : code_(std::move(code)) {}
    Element(std::initializer_list<std::int64_t> code) : code_(code) {}

    const Code& code() const noexcept { return code_; }
    Code& mutable_code() noexcept { return code_; }

    friend bool operator==(const Element& a, const Element& b) { return a.code_ == b.code_; }
    friend std::strong_ordering operator<=>(const Element& a, const Element& b) {
        return std::lexicographical_compare_three_way(a.code_.begin(), a.code_.end(),
                                                      b.code_.begin(), b.code_.end());
    }

private:
    Code code_;
};

struct ElementHash {
    std::size_t operator()(const Element& e) const noexcept {
        return boost::hash_range(e.code().begin(), e.code().end());
    }
};

/// Result of element_order: the order if it is finite and at most the probing cap.
using FiniteOrder = std::optional<std::uint64_t>;

class Group {
public:
    enum class Kind { Lattice, Cyclic, Product, Free };

    static Group lattice(int dimension) {
        if (dimension < 1) throw DomainError("lattice dimension must be >= 1");
        return Group(Kind::Lattice, dimension);
    }
    static Group integers() { return lattice(1); }
    static Group cyclic(std::int64_t modulus) {
        if (modulus < 1) throw DomainError("cyclic modulus must be >= 1");
        return Group(Kind::Cyclic, modulus);
    }
    static Group free(int rank) {
        if (rank < 1 || rank > static_cast<int>(kLetters.size()))
            throw DomainError("free group rank must be in [1, " + std::to_string(kLetters.size()) + "]");
        return Group(Kind::Free, rank);
    }
    static Group product(std::vector<Group> factors) {
        if (factors.empty()) throw DomainError("direct product needs at least one factor");
        Group g(Kind::Product, static_cast<std::int64_t>(factors.size()));
        g.factors_ = std::make_shared<const std::vector<Group>>(std::move(factors));
        return g;
    }

    Kind kind() const noexcept { return kind_; }
    /// Dimension, modulus, rank or factor count, depending on kind.
    std::int64_t parameter() const noexcept { return param_; }
    const std::vector<Group>& factors() const {
        static const std::vector<Group> none;
        return factors_ ? *factors_ : none;
    }

    bool is_abelian() const {
        switch (kind_) {
        case Kind::Lattice:
        case Kind::Cyclic: return true;
        case Kind::Free: return param_ == 1;
        case Kind::Product:
            return std::all_of(factors_->begin(), factors_->end(),
                               [](const Group& f) { return f.is_abelian(); });
        }
        return false;
    }

    friend bool operator==(const Group& a, const Group& b) {
        if (a.kind_ != b.kind_ || a.param_ != b.param_) return false;
        if (a.kind_ != Kind::Product) return true;
        return *a.factors_ == *b.factors_;
    }

    Element identity() const {
        Code c;
        append_identity(c);
        return Element(std::move(c));
    }

    bool is_identity(const Element& g) const { return g == identity(); }

    /// Throws MalformedElement unless g is a canonical encoding for this group.
    void validate(const Element& g) const {
        std::size_t pos = 0;
        if (!validate_at(g.code(), pos) || pos != g.code().size())
            throw MalformedElement("element encoding does not match group " + describe());
    }

    bool is_valid(const Element& g) const {
        std::size_t pos = 0;
        return validate_at(g.code(), pos) && pos == g.code().size();
    }

    Element mul(const Element& g, const Element& h) const {
        validate(g);
        validate(h);
        return mul_unchecked(g, h);
    }

    Element inv(const Element& g) const {
        validate(g);
        return inv_unchecked(g);
    }

    /// g·h for encodings already known to be valid.
    Element mul_unchecked(const Element& g, const Element& h) const {
        Code out;
        std::size_t i = 0, j = 0;
        mul_at(g.code(), i, h.code(), j, out);
        return Element(std::move(out));
    }

    Element inv_unchecked(const Element& g) const {
        Code out;
        std::size_t i = 0;
        inv_at(g.code(), i, out);
        return Element(std::move(out));
    }

    /// g <- g·h in place; avoids reallocations on long random-walk paths.
    void mul_assign(Element& g, const Element& h) const {
        if (kind_ == Kind::Free) {
            Code& w = g.mutable_code();
            for (std::int64_t s : h.code()) {
                if (!w.empty() && w.back() == -s)
                    w.pop_back();
                else
                    w.push_back(s);
            }
            return;
        }
        g = mul_unchecked(g, h);
    }

    /// Least d <= cap with g^d = e, computed analytically for every kind.
    FiniteOrder element_order(const Element& g, std::uint64_t cap) const {
        if (cap < 1) throw DomainError("order probing cap must be >= 1");
        validate(g);
        std::size_t pos = 0;
        auto d = order_at(g.code(), pos);
        if (!d || *d > cap) return std::nullopt;
        return d;
    }

    /// Number of elements, or nullopt for infinite groups.
    std::optional<std::uint64_t> cardinality() const {
        switch (kind_) {
        case Kind::Cyclic: return static_cast<std::uint64_t>(param_);
        case Kind::Lattice:
        case Kind::Free: return std::nullopt;
        case Kind::Product: {
            std::uint64_t n = 1;
            for (const auto& f : *factors_) {
                auto c = f.cardinality();
                if (!c) return std::nullopt;
                n *= *c;
            }
            return n;
        }
        }
        return std::nullopt;
    }

    // ---- text syntax ---------------------------------------------------------

    /// "Z", "Z^d", "C<m>", "F<r>", products joined by " x ".
    std::string describe() const {
        switch (kind_) {
        case Kind::Lattice: return param_ == 1 ? "Z" : "Z^" + std::to_string(param_);
        case Kind::Cyclic: return "C" + std::to_string(param_);
        case Kind::Free: return "F" + std::to_string(param_);
        case Kind::Product: {
            std::string s;
            for (const auto& f : *factors_) {
                if (!s.empty()) s += " x ";
                s += f.describe();
            }
            return s;
        }
        }
        return {};
    }

    std::string format(const Element& g) const {
        validate(g);
        std::string out;
        std::size_t pos = 0;
        format_at(g.code(), pos, out);
        return out;
    }

    Element parse(std::string_view text) const {
        Code c;
        parse_into(trim(text), c);
        Element e(std::move(c));
        validate(e);
        return e;
    }

    /// Letters used for free generators; 'e' is reserved for the identity.
    static constexpr std::string_view kLetters = "abcdfghijklmnopqrstuvwxyz";

private:
    Group(Kind k, std::int64_t p) : kind_(k), param_(p) {}

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    }

    static std::int64_t parse_int(std::string_view s) {
        s = trim(s);
        if (!s.empty() && s.front() == '+') s.remove_prefix(1);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty())
            throw MalformedElement("not an integer: '" + std::string(s) + "'");
        return v;
    }

    static std::int64_t mod(std::int64_t a, std::int64_t m) {
        std::int64_t r = a % m;
        return r < 0 ? r + m : r;
    }

    std::size_t fixed_width() const {
        switch (kind_) {
        case Kind::Lattice: return static_cast<std::size_t>(param_);
        case Kind::Cyclic: return 1;
        default: return 0;
        }
    }

    void append_identity(Code& c) const {
        switch (kind_) {
        case Kind::Lattice: c.insert(c.end(), static_cast<std::size_t>(param_), 0); break;
        case Kind::Cyclic: c.push_back(0); break;
        case Kind::Free: break;
        case Kind::Product:
            for (const auto& f : *factors_) {
                std::size_t at = c.size();
                c.push_back(0);
                f.append_identity(c);
                c[at] = static_cast<std::int64_t>(c.size() - at - 1);
            }
            break;
        }
    }

    // Length of this group's encoding starting at pos (free/product read a prefix).
    bool validate_at(const Code& c, std::size_t& pos) const {
        switch (kind_) {
        case Kind::Lattice:
            if (c.size() - pos < static_cast<std::size_t>(param_)) return false;
            pos += static_cast<std::size_t>(param_);
            return true;
        case Kind::Cyclic:
            if (pos >= c.size() || c[pos] < 0 || c[pos] >= param_) return false;
            ++pos;
            return true;
        case Kind::Free: {
            // A bare free group owns the whole remaining encoding.
            std::int64_t prev = 0;
            for (; pos < c.size(); ++pos) {
                std::int64_t s = c[pos];
                if (s == 0 || s > param_ || s < -param_ || s == -prev) return false;
                prev = s;
            }
            return true;
        }
        case Kind::Product:
            for (const auto& f : *factors_) {
                if (pos >= c.size()) return false;
                std::int64_t len = c[pos++];
                if (len < 0 || static_cast<std::size_t>(len) > c.size() - pos) return false;
                Code sub(c.begin() + static_cast<std::ptrdiff_t>(pos),
                         c.begin() + static_cast<std::ptrdiff_t>(pos) + len);
                std::size_t sp = 0;
                if (!f.validate_at(sub, sp) || sp != sub.size()) return false;
                pos += static_cast<std::size_t>(len);
            }
            return true;
        }
        return false;
    }

    // Components of a product encoding, as [begin, end) offsets.
    std::vector<std::pair<std::size_t, std::size_t>> split(const Code& c, std::size_t pos) const {
        std::vector<std::pair<std::size_t, std::size_t>> parts;
        parts.reserve(factors_->size());
        for (std::size_t k = 0; k < factors_->size(); ++k) {
            std::size_t len = static_cast<std::size_t>(c[pos]);
            parts.emplace_back(pos + 1, pos + 1 + len);
            pos += 1 + len;
        }
        return parts;
    }

    static Code slice(const Code& c, std::pair<std::size_t, std::size_t> r) {
        return Code(c.begin() + static_cast<std::ptrdiff_t>(r.first),
                    c.begin() + static_cast<std::ptrdiff_t>(r.second));
    }

    void mul_at(const Code& a, std::size_t& i, const Code& b, std::size_t& j, Code& out) const {
        switch (kind_) {
        case Kind::Lattice:
            for (std::int64_t k = 0; k < param_; ++k) out.push_back(a[i++] + b[j++]);
            return;
        case Kind::Cyclic:
            out.push_back(mod(a[i++] + b[j++], param_));
            return;
        case Kind::Free: {
            std::size_t start = out.size();
            out.insert(out.end(), a.begin() + static_cast<std::ptrdiff_t>(i), a.end());
            i = a.size();
            for (; j < b.size(); ++j) {
                if (out.size() > start && out.back() == -b[j])
                    out.pop_back();
                else
                    out.push_back(b[j]);
            }
            return;
        }
        case Kind::Product: {
            auto pa = split(a, i), pb = split(b, j);
            for (std::size_t k = 0; k < factors_->size(); ++k) {
                Code sa = slice(a, pa[k]), sb = slice(b, pb[k]);
                std::size_t ii = 0, jj = 0;
                std::size_t at = out.size();
                out.push_back(0);
                (*factors_)[k].mul_at(sa, ii, sb, jj, out);
                out[at] = static_cast<std::int64_t>(out.size() - at - 1);
            }
            i = pa.back().second;
            j = pb.back().second;
            return;
        }
        }
    }

    void inv_at(const Code& a, std::size_t& i, Code& out) const {
        switch (kind_) {
        case Kind::Lattice:
            for (std::int64_t k = 0; k < param_; ++k) out.push_back(-a[i++]);
            return;
        case Kind::Cyclic:
            out.push_back(mod(-a[i++], param_));
            return;
        case Kind::Free:
            for (std::size_t k = a.size(); k > i; --k) out.push_back(-a[k - 1]);
            i = a.size();
            return;
        case Kind::Product: {
            auto pa = split(a, i);
            for (std::size_t k = 0; k < factors_->size(); ++k) {
                Code sa = slice(a, pa[k]);
                std::size_t ii = 0;
                std::size_t at = out.size();
                out.push_back(0);
                (*factors_)[k].inv_at(sa, ii, out);
                out[at] = static_cast<std::int64_t>(out.size() - at - 1);
            }
            i = pa.back().second;
            return;
        }
        }
    }

    // nullopt means infinite order.
    std::optional<std::uint64_t> order_at(const Code& a, std::size_t& i) const {
        switch (kind_) {
        case Kind::Lattice: {
            bool zero = true;
            for (std::int64_t k = 0; k < param_; ++k) zero = zero && a[i++] == 0;
            return zero ? std::optional<std::uint64_t>(1) : std::nullopt;
        }
        case Kind::Cyclic: {
            std::int64_t r = a[i++];
            return static_cast<std::uint64_t>(param_ / std::gcd(r, param_));
        }
        case Kind::Free: {
            bool empty = i == a.size();
            i = a.size();
            return empty ? std::optional<std::uint64_t>(1) : std::nullopt;
        }
        case Kind::Product: {
            auto pa = split(a, i);
            std::optional<std::uint64_t> acc = 1;
            for (std::size_t k = 0; k < factors_->size(); ++k) {
                Code sa = slice(a, pa[k]);
                std::size_t ii = 0;
                auto d = (*factors_)[k].order_at(sa, ii);
                if (!d) acc = std::nullopt;
                else if (acc) acc = std::lcm(*acc, *d);
            }
            i = pa.back().second;
            return acc;
        }
        }
        return std::nullopt;
    }

    void format_at(const Code& a, std::size_t& i, std::string& out) const {
        switch (kind_) {
        case Kind::Lattice:
            if (param_ == 1) {
                out += std::to_string(a[i++]);
                return;
            }
            out += '(';
            for (std::int64_t k = 0; k < param_; ++k) {
                if (k) out += ',';
                out += std::to_string(a[i++]);
            }
            out += ')';
            return;
        case Kind::Cyclic:
            out += std::to_string(a[i++]);
            return;
        case Kind::Free:
            if (i == a.size()) {
                out += 'e';
                return;
            }
            for (; i < a.size(); ++i) {
                char letter = kLetters[static_cast<std::size_t>(std::abs(a[i]) - 1)];
                out += a[i] > 0 ? letter : static_cast<char>(letter - 'a' + 'A');
            }
            return;
        case Kind::Product: {
            auto pa = split(a, i);
            out += '[';
            for (std::size_t k = 0; k < factors_->size(); ++k) {
                if (k) out += ';';
                Code sa = slice(a, pa[k]);
                std::size_t ii = 0;
                (*factors_)[k].format_at(sa, ii, out);
            }
            out += ']';
            i = pa.back().second;
            return;
        }
        }
    }

    void parse_into(std::string_view s, Code& out) const {
        switch (kind_) {
        case Kind::Lattice: {
            if (!s.empty() && s.front() == '(') {
                if (s.back() != ')') throw MalformedElement("unbalanced parenthesis in '" + std::string(s) + "'");
                s = s.substr(1, s.size() - 2);
            }
            std::size_t n = 0;
            while (true) {
                auto comma = s.find(',');
                out.push_back(parse_int(s.substr(0, comma)));
                ++n;
                if (comma == std::string_view::npos) break;
                s.remove_prefix(comma + 1);
            }
            if (n != static_cast<std::size_t>(param_))
                throw MalformedElement("expected " + std::to_string(param_) + " coordinates, got " +
                                       std::to_string(n));
            return;
        }
        case Kind::Cyclic:
            out.push_back(mod(parse_int(s), param_));
            return;
        case Kind::Free: {
            if (s == "e" || s == "1" || s.empty()) return;
            std::size_t start = out.size();
            for (char ch : s) {
                bool upper = ch >= 'A' && ch <= 'Z';
                char lower = upper ? static_cast<char>(ch - 'A' + 'a') : ch;
                auto idx = kLetters.find(lower);
                if (idx == std::string_view::npos || static_cast<std::int64_t>(idx) >= param_)
                    throw MalformedElement("bad generator letter '" + std::string(1, ch) + "' for " + describe());
                std::int64_t gen = static_cast<std::int64_t>(idx) + 1;
                std::int64_t sym = upper ? -gen : gen;
                if (out.size() > start && out.back() == -sym)
                    out.pop_back();
                else
                    out.push_back(sym);
            }
            return;
        }
        case Kind::Product: {
            if (s.size() < 2 || s.front() != '[' || s.back() != ']')
                throw MalformedElement("product element must look like [a;b;...]: '" + std::string(s) + "'");
            s = s.substr(1, s.size() - 2);
            std::vector<std::string_view> parts;
            int depth = 0;
            std::size_t begin = 0;
            for (std::size_t k = 0; k < s.size(); ++k) {
                if (s[k] == '[' || s[k] == '(') ++depth;
                else if (s[k] == ']' || s[k] == ')') --depth;
                else if (s[k] == ';' && depth == 0) {
                    parts.push_back(s.substr(begin, k - begin));
                    begin = k + 1;
                }
            }
            parts.push_back(s.substr(begin));
            if (parts.size() != factors_->size())
                throw MalformedElement("expected " + std::to_string(factors_->size()) + " components");
            for (std::size_t k = 0; k < parts.size(); ++k) {
                std::size_t at = out.size();
                out.push_back(0);
                (*factors_)[k].parse_into(trim(parts[k]), out);
                out[at] = static_cast<std::int64_t>(out.size() - at - 1);
            }
            return;
        }
        }
    }

    Kind kind_;
    std::int64_t param_;
    std::shared_ptr<const std::vector<Group>> factors_;
};

/// Parses "Z", "Z^2", "C6", "Z/6", "F2" and products such as "Z^2 x C3".
inline Group parse_group(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    auto number = [](std::string_view s) {
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty())
            throw DomainError("bad group parameter '" + std::string(s) + "'");
        return v;
    };
    auto factor = [&](std::string_view s) -> Group {
        s = trim(s);
        if (s == "Z") return Group::integers();
        if (s.starts_with("Z^")) return Group::lattice(static_cast<int>(number(s.substr(2))));
        if (s.starts_with("Z/")) return Group::cyclic(number(s.substr(2)));
        if (s.starts_with("C")) return Group::cyclic(number(s.substr(1)));
        if (s.starts_with("F")) return Group::free(static_cast<int>(number(s.substr(1))));
        throw DomainError("unknown group '" + std::string(s) + "'");
    };
    std::vector<Group> factors;
    text = trim(text);
    while (true) {
        auto cut = text.find(" x ");
        factors.push_back(factor(text.substr(0, cut)));
        if (cut == std::string_view::npos) break;
        text.remove_prefix(cut + 3);
    }
    if (factors.size() == 1) return factors.front();
    return Group::product(std::move(factors));
}

} // namespace excouple
