// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "pinnreg/autodiff.hpp"

#include <sstream>

namespace pinnreg::ad {

namespace {

std::string describe(const std::string& op, double arg, std::optional<std::size_t> node) {
    std::ostringstream os;
    os << "autodiff domain error in " << op << " at argument " << arg;
    if (node) os << " (tape node " << *node << ")";
    return os.str();
}

// Below this |cos x| tan is treated as being at a pole.
constexpr double kTanPole = 1e-12;

}  // namespace

DomainError::DomainError(std::string op, double argument, std::optional<std::size_t> node)
    : std::domain_error(describe(op, argument, node)),
      op_(std::move(op)),
      argument_(argument),
      node_(node) {}

namespace detail {

void check_divisor(double d, std::optional<std::size_t> node) {
    if (d == 0.0) throw DomainError("div", d, node);
}

Local local_sin(double x) {
    const double s = std::sin(x);
    return {s, std::cos(x), -s};
}

Local local_cos(double x) {
    const double c = std::cos(x);
    return {c, -std::sin(x), -c};
}

Local local_tan(double x, std::optional<std::size_t> node) {
    const double c = std::cos(x);
    if (std::abs(c) < kTanPole) throw DomainError("tan", x, node);
    const double t = std::tan(x);
    const double sec2 = 1.0 + t * t;
    return {t, sec2, 2.0 * t * sec2};
}

Local local_atan(double x) {
    const double d = 1.0 / (1.0 + x * x);
    return {std::atan(x), d, -2.0 * x * d * d};
}

Local local_exp(double x) {
    const double e = std::exp(x);
    return {e, e, e};
}

Local local_sqrt(double x, std::optional<std::size_t> node) {
    if (x < 0.0) throw DomainError("sqrt", x, node);
    const double s = std::sqrt(x);
    if (s == 0.0) return {0.0, 0.0, 0.0};
    return {s, 0.5 / s, -0.25 / (s * x)};
}

Local local_tanh(double x) {
    const double t = std::tanh(x);
    const double d = 1.0 - t * t;
    return {t, d, -2.0 * t * d};
}

Local local_pow(double x, double e, std::optional<std::size_t> node) {
    const bool integral = std::floor(e) == e;
    if (x < 0.0 && !integral) throw DomainError("pow", x, node);
    if (x == 0.0) {
        if (e < 0.0) throw DomainError("pow", x, node);
        // d/dx x^e at 0: finite only for e >= 1 (second derivative for e >= 2).
        if (e == 0.0) return {1.0, 0.0, 0.0};
        if (e < 1.0) throw DomainError("pow", x, node);
        const double df = (e == 1.0) ? 1.0 : 0.0;
        double d2f = 0.0;
        if (e == 2.0) d2f = 2.0;
        return {0.0, df, d2f};
    }
    const double f = std::pow(x, e);
    return {f, e * std::pow(x, e - 1.0), e * (e - 1.0) * std::pow(x, e - 2.0)};
}

Local local_abs(double x) {
    if (x > 0.0) return {x, 1.0, 0.0};
    if (x < 0.0) return {-x, -1.0, 0.0};
    return {0.0, 0.0, 0.0};
}

Local local_inv(double x, std::optional<std::size_t> node) {
    check_divisor(x, node);
    const double inv = 1.0 / x;
    return {inv, -inv * inv, 2.0 * inv * inv * inv};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(OpKind op, double value, std::uint32_t p0, double d0, std::uint32_t p1, double d1) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.push_back(Node{op, {p0, p1}, {d0, d1}});
    values_.push_back(value);
    return Var(this, index);
}

Var Tape::variable(double value) { return push(OpKind::Leaf, value, kNoParent, 0.0); }

std::vector<Var> Tape::variables(std::span<const double> values) {
    std::vector<Var> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(variable(v));
    return out;
}

std::vector<double> Tape::adjoints(const Var& output) const {
    std::vector<double> adj(nodes_.size(), 0.0);
    adj[output.index()] = 1.0;
    for (std::size_t i = output.index() + 1; i-- > 0;) {
        const double a = adj[i];
        if (a == 0.0) continue;
        const Node& n = nodes_[i];
        if (n.parent[0] != kNoParent) adj[n.parent[0]] += a * n.partial[0];
        if (n.parent[1] != kNoParent) adj[n.parent[1]] += a * n.partial[1];
    }
    return adj;
}

std::vector<double> Tape::gradient(const Var& output, std::span<const Var> leaves) const {
    const std::vector<double> adj = adjoints(output);
    std::vector<double> g;
    g.reserve(leaves.size());
    for (const Var& v : leaves) g.push_back(adj[v.index()]);
    return g;
}

namespace {

Var unary(OpKind op, const Var& x, const detail::Local& l) {
    return x.tape()->push(op, l.f, x.index(), l.df);
}

}  // namespace

Var operator-(const Var& a) { return a.tape()->push(OpKind::Neg, -a.value(), a.index(), -1.0); }

Var operator+(const Var& a, const Var& b) {
    return a.tape()->push(OpKind::Add, a.value() + b.value(), a.index(), 1.0, b.index(), 1.0);
}
Var operator-(const Var& a, const Var& b) {
    return a.tape()->push(OpKind::Sub, a.value() - b.value(), a.index(), 1.0, b.index(), -1.0);
}
Var operator*(const Var& a, const Var& b) {
    const double va = a.value(), vb = b.value();
    return a.tape()->push(OpKind::Mul, va * vb, a.index(), vb, b.index(), va);
}
Var operator/(const Var& a, const Var& b) {
    const double vb = b.value();
    detail::check_divisor(vb, b.index());
    const double q = a.value() / vb;
    return a.tape()->push(OpKind::Div, q, a.index(), 1.0 / vb, b.index(), -q / vb);
}

Var operator+(const Var& a, double c) { return a.tape()->push(OpKind::Add, a.value() + c, a.index(), 1.0); }
Var operator+(double c, const Var& a) { return a + c; }
Var operator-(const Var& a, double c) { return a.tape()->push(OpKind::Sub, a.value() - c, a.index(), 1.0); }
Var operator-(double c, const Var& a) { return a.tape()->push(OpKind::Sub, c - a.value(), a.index(), -1.0); }
Var operator*(const Var& a, double c) { return a.tape()->push(OpKind::Mul, a.value() * c, a.index(), c); }
Var operator*(double c, const Var& a) { return a * c; }
Var operator/(const Var& a, double c) {
    detail::check_divisor(c);
    return a.tape()->push(OpKind::Div, a.value() / c, a.index(), 1.0 / c);
}
Var operator/(double c, const Var& a) {
    const detail::Local l = detail::local_inv(a.value(), a.index());
    return a.tape()->push(OpKind::Div, c * l.f, a.index(), c * l.df);
}

Var& Var::operator+=(const Var& o) { return *this = *this + o; }
Var& Var::operator-=(const Var& o) { return *this = *this - o; }
Var& Var::operator*=(const Var& o) { return *this = *this * o; }
Var& Var::operator/=(const Var& o) { return *this = *this / o; }
Var& Var::operator+=(double c) { return *this = *this + c; }
Var& Var::operator-=(double c) { return *this = *this - c; }
Var& Var::operator*=(double c) { return *this = *this * c; }
Var& Var::operator/=(double c) { return *this = *this / c; }

Var sin(const Var& x) { return unary(OpKind::Sin, x, detail::local_sin(x.value())); }
Var cos(const Var& x) { return unary(OpKind::Cos, x, detail::local_cos(x.value())); }
Var tan(const Var& x) { return unary(OpKind::Tan, x, detail::local_tan(x.value(), x.index())); }
Var atan(const Var& x) { return unary(OpKind::Atan, x, detail::local_atan(x.value())); }
Var exp(const Var& x) { return unary(OpKind::Exp, x, detail::local_exp(x.value())); }
Var sqrt(const Var& x) { return unary(OpKind::Sqrt, x, detail::local_sqrt(x.value(), x.index())); }
Var tanh(const Var& x) { return unary(OpKind::Tanh, x, detail::local_tanh(x.value())); }
Var abs(const Var& x) { return unary(OpKind::Abs, x, detail::local_abs(x.value())); }
Var pow(const Var& x, double e) {
    return unary(OpKind::Pow, x, detail::local_pow(x.value(), e, x.index()));
}

Var max(const Var& a, const Var& b) {
    const double va = a.value(), vb = b.value();
    if (va > vb) return a.tape()->push(OpKind::Max, va, a.index(), 1.0, b.index(), 0.0);
    if (vb > va) return a.tape()->push(OpKind::Max, vb, a.index(), 0.0, b.index(), 1.0);
    return a.tape()->push(OpKind::Max, va + vb - vb, a.index(), 0.0, b.index(), 0.0);
}

Var max(const Var& a, double c) {
    const double va = a.value();
    if (va > c) return a.tape()->push(OpKind::Max, va, a.index(), 1.0);
    return a.tape()->push(OpKind::Max, std::isnan(va) ? va : c, a.index(), 0.0);
}

Var max(double c, const Var& a) { return max(a, c); }

}  // namespace pinnreg::ad
