#pragma once

// Text formats: measure literals, number formatting, JSON-lines and CSV emission.
//
// Measure literal: entries separated by ';' at bracket depth 0, each entry
// "element:mass" with mass an integer, a fraction "p/q" or a decimal "0.25".
// If no entry carries a mass the measure is uniform over the listed elements,
// e.g. "a;A;b;B" on F2.

#include <charconv>
#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coupling.hpp"
#include "errors.hpp"
#include "group.hpp"
#include "measure.hpp"

namespace excouple::io {

using nlohmann::json;

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Splits on `sep` outside (), [] pairs.
inline std::vector<std::string_view> split_top_level(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    int depth = 0;
    std::size_t begin = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '(' || c == '[') ++depth;
        else if (c == ')' || c == ']') --depth;
        else if (c == sep && depth == 0) {
            out.push_back(s.substr(begin, i - begin));
            begin = i + 1;
        }
    }
    out.push_back(s.substr(begin));
    return out;
}

/// Exact value of "3", "2/7" or "0.125".
inline Rational parse_mass(std::string_view text) {
    text = trim(text);
    auto bad = [&] { return DomainError("bad mass '" + std::string(text) + "'"); };
    if (text.empty()) throw bad();
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        auto num = trim(text.substr(0, slash)), den = trim(text.substr(slash + 1));
        if (num.empty() || den.empty() || den.find_first_not_of("0123456789") != std::string_view::npos ||
            num.find_first_not_of("0123456789") != std::string_view::npos)
            throw bad();
        boost::multiprecision::cpp_int n{std::string(num)}, d{std::string(den)};
        if (d == 0) throw bad();
        return Rational(n, d);
    }
    auto dot = text.find('.');
    std::string digits(text.substr(0, dot));
    std::string frac = dot == std::string_view::npos ? "" : std::string(text.substr(dot + 1));
    if ((digits + frac).empty() || (digits + frac).find_first_not_of("0123456789") != std::string::npos) throw bad();
    boost::multiprecision::cpp_int n(digits.empty() ? std::string("0") : digits);
    boost::multiprecision::cpp_int scale = 1;
    for (char c : frac) {
        n = n * 10 + (c - '0');
        scale *= 10;
    }
    return Rational(n, scale);
}

/// Parses a measure literal; the result must be a probability measure.
inline ExactMeasure parse_measure(const Group& g, std::string_view text) {
    std::vector<std::pair<std::string_view, std::string_view>> entries;
    for (auto part : split_top_level(trim(text), ';')) {
        part = trim(part);
        if (part.empty()) continue;
        auto pieces = split_top_level(part, ':');
        if (pieces.size() > 2) throw DomainError("bad measure entry '" + std::string(part) + "'");
        entries.emplace_back(trim(pieces[0]), pieces.size() == 2 ? trim(pieces[1]) : std::string_view{});
    }
    if (entries.empty()) throw DomainError("empty measure literal");
    const bool weighted = !entries.front().second.empty();
    std::vector<ExactMeasure::Atom> atoms;
    for (const auto& [elem, mass] : entries) {
        if (mass.empty() == weighted) throw DomainError("measure literal mixes weighted and unweighted entries");
        atoms.emplace_back(g.parse(elem), weighted ? parse_mass(mass) : Rational(1, static_cast<long>(entries.size())));
    }
    auto mu = ExactMeasure::from_atoms(g, std::move(atoms));
    if (!mu.is_probability())
        throw DomainError("measure literal has total mass " + mu.total().str() + ", expected 1");
    return mu;
}

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::string format_mass(double m) { return format_double(m); }
inline std::string format_mass(const Rational& m) { return m.str(); }

/// JSON-lines {"element", "mass"}, atoms in canonical-encoding order.
template <class Mass>
void write_measure_jsonl(std::ostream& os, const AtomicMeasure<Mass>& mu) {
    for (const auto& [e, m] : mu.atoms()) {
        json j;
        j["element"] = mu.group().format(e);
        if constexpr (MassTraits<Mass>::exact)
            j["mass"] = format_mass(m);
        else
            j["mass"] = m;
        os << j.dump() << '\n';
    }
}

template <class Mass>
json measure_to_json(const AtomicMeasure<Mass>& mu) {
    json arr = json::array();
    for (const auto& [e, m] : mu.atoms()) {
        if constexpr (MassTraits<Mass>::exact)
            arr.push_back({{"element", mu.group().format(e)}, {"mass", format_mass(m)}});
        else
            arr.push_back({{"element", mu.group().format(e)}, {"mass", m}});
    }
    return arr;
}

/// One run record: {x, n0, nu_mass, T_or_censored, blocks_executed, seed}.
/// T_or_censored is the integer T, or the string "censored:<horizon>".
inline json run_to_json(const Group& g, const CouplingRun& run) {
    json j;
    j["x"] = g.format(run.x);
    j["n0"] = run.n0;
    j["nu_mass"] = run.nu_mass;
    if (run.T.censored)
        j["T_or_censored"] = "censored:" + std::to_string(run.T.value);
    else
        j["T_or_censored"] = run.T.value;
    j["blocks_executed"] = run.blocks_executed;
    j["seed"] = run.seed;
    return j;
}

inline json plan_to_json(const CouplingPlan& plan) {
    const Group& g = plan.group;
    json j;
    j["group"] = g.describe();
    j["x"] = g.format(plan.x);
    j["n0"] = plan.n0;
    j["nu_mass"] = plan.nu_mass;
    j["laziness"] = plan.laziness;
    if (plan.order)
        j["order_of_x"] = *plan.order;
    else
        j["order_of_x"] = "infinite";
    j["commutes_with_support"] = plan.commutes;
    json u = json::array();
    for (const auto& e : plan.U) u.push_back(g.format(e));
    j["U"] = u;
    j["nu"] = measure_to_json(plan.nu);
    j["xi"] = measure_to_json(plan.xi);
    return j;
}

} // namespace excouple::io
