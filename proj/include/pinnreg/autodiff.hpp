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

#pragma once

// Scalar automatic differentiation.
//
//   Dual       first-order forward mode (one direction)
//   HyperDual  second-order forward mode (two directions + cross term)
//   Tape/Var   reverse mode over an append-only node list
//
// Every type supports the same closed primitive set: + - * /, sin, cos,
// tan, atan, pow (real exponent), exp, sqrt, max, abs, tanh.  At the kink of
// max/abs the derivative is taken as 0.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinnreg::ad {

class DomainError : public std::domain_error {
public:
    DomainError(std::string op, double argument,
                std::optional<std::size_t> node = std::nullopt);

    const std::string& op() const noexcept { return op_; }
    double argument() const noexcept { return argument_; }
    // Index of the offending operand on the tape, reverse mode only.
    std::optional<std::size_t> node() const noexcept { return node_; }

private:
    std::string op_;
    double argument_;
    std::optional<std::size_t> node_;
};

namespace detail {

// Local derivatives of the unary primitives: value, first and second
// derivative at x.  Throws DomainError outside the domain.
struct Local {
    double f, df, d2f;
};

void check_divisor(double d, std::optional<std::size_t> node = std::nullopt);
Local local_sin(double x);
Local local_cos(double x);
Local local_tan(double x, std::optional<std::size_t> node = std::nullopt);
Local local_atan(double x);
Local local_exp(double x);
Local local_sqrt(double x, std::optional<std::size_t> node = std::nullopt);
Local local_tanh(double x);
Local local_pow(double x, double e, std::optional<std::size_t> node = std::nullopt);
Local local_abs(double x);
Local local_inv(double x, std::optional<std::size_t> node = std::nullopt);

}  // namespace detail

// ---------------------------------------------------------------------------
// Dual

struct Dual {
    double value = 0.0;
    double deriv = 0.0;

    constexpr Dual() = default;
    constexpr Dual(double v) : value(v) {}  // NOLINT: implicit constant lift
    constexpr Dual(double v, double d) : value(v), deriv(d) {}

    Dual& operator+=(const Dual& o) { value += o.value; deriv += o.deriv; return *this; }
    Dual& operator-=(const Dual& o) { value -= o.value; deriv -= o.deriv; return *this; }
    Dual& operator*=(const Dual& o) {
        deriv = deriv * o.value + value * o.deriv;
        value *= o.value;
        return *this;
    }
    Dual& operator/=(const Dual& o);
};

inline Dual chain(const Dual& x, const detail::Local& l) { return {l.f, l.df * x.deriv}; }

inline Dual operator-(const Dual& a) { return {-a.value, -a.deriv}; }
inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual& Dual::operator/=(const Dual& o) { return *this *= chain(o, detail::local_inv(o.value)); }

inline Dual sin(const Dual& x) { return chain(x, detail::local_sin(x.value)); }
inline Dual cos(const Dual& x) { return chain(x, detail::local_cos(x.value)); }
inline Dual tan(const Dual& x) { return chain(x, detail::local_tan(x.value)); }
inline Dual atan(const Dual& x) { return chain(x, detail::local_atan(x.value)); }
inline Dual exp(const Dual& x) { return chain(x, detail::local_exp(x.value)); }
inline Dual sqrt(const Dual& x) { return chain(x, detail::local_sqrt(x.value)); }
inline Dual tanh(const Dual& x) { return chain(x, detail::local_tanh(x.value)); }
inline Dual abs(const Dual& x) { return chain(x, detail::local_abs(x.value)); }
inline Dual pow(const Dual& x, double e) { return chain(x, detail::local_pow(x.value, e)); }
inline Dual max(const Dual& a, const Dual& b) {
    if (a.value > b.value) return a;
    if (b.value > a.value) return b;
    return {a.value + b.value - b.value, 0.0};  // NaN in either operand propagates
}

// ---------------------------------------------------------------------------
// HyperDual: f(x + e1 v1 + e2 v2) with e1^2 = e2^2 = 0, e1 e2 != 0.

struct HyperDual {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d12 = 0.0;

    constexpr HyperDual() = default;
    constexpr HyperDual(double v) : value(v) {}  // NOLINT: implicit constant lift
    constexpr HyperDual(double v, double a, double b, double ab) : value(v), d1(a), d2(b), d12(ab) {}

    HyperDual& operator+=(const HyperDual& o) {
        value += o.value; d1 += o.d1; d2 += o.d2; d12 += o.d12;
        return *this;
    }
    HyperDual& operator-=(const HyperDual& o) {
        value -= o.value; d1 -= o.d1; d2 -= o.d2; d12 -= o.d12;
        return *this;
    }
    HyperDual& operator*=(const HyperDual& o) {
        d12 = d12 * o.value + d1 * o.d2 + d2 * o.d1 + value * o.d12;
        d1 = d1 * o.value + value * o.d1;
        d2 = d2 * o.value + value * o.d2;
        value *= o.value;
        return *this;
    }
    HyperDual& operator/=(const HyperDual& o);
};

inline HyperDual chain(const HyperDual& x, const detail::Local& l) {
    return {l.f, l.df * x.d1, l.df * x.d2, l.df * x.d12 + l.d2f * x.d1 * x.d2};
}

inline HyperDual operator-(const HyperDual& a) { return {-a.value, -a.d1, -a.d2, -a.d12}; }
inline HyperDual operator+(HyperDual a, const HyperDual& b) { return a += b; }
inline HyperDual operator-(HyperDual a, const HyperDual& b) { return a -= b; }
inline HyperDual operator*(HyperDual a, const HyperDual& b) { return a *= b; }
inline HyperDual operator/(HyperDual a, const HyperDual& b) { return a /= b; }
inline HyperDual& HyperDual::operator/=(const HyperDual& o) {
    return *this *= chain(o, detail::local_inv(o.value));
}

inline HyperDual sin(const HyperDual& x) { return chain(x, detail::local_sin(x.value)); }
inline HyperDual cos(const HyperDual& x) { return chain(x, detail::local_cos(x.value)); }
inline HyperDual tan(const HyperDual& x) { return chain(x, detail::local_tan(x.value)); }
inline HyperDual atan(const HyperDual& x) { return chain(x, detail::local_atan(x.value)); }
inline HyperDual exp(const HyperDual& x) { return chain(x, detail::local_exp(x.value)); }
inline HyperDual sqrt(const HyperDual& x) { return chain(x, detail::local_sqrt(x.value)); }
inline HyperDual tanh(const HyperDual& x) { return chain(x, detail::local_tanh(x.value)); }
inline HyperDual abs(const HyperDual& x) { return chain(x, detail::local_abs(x.value)); }
inline HyperDual pow(const HyperDual& x, double e) { return chain(x, detail::local_pow(x.value, e)); }
inline HyperDual max(const HyperDual& a, const HyperDual& b) {
    if (a.value > b.value) return a;
    if (b.value > a.value) return b;
    return {a.value + b.value - b.value, 0.0, 0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Reverse mode

enum class OpKind : std::uint8_t {
    Leaf, Add, Sub, Mul, Div, Neg, Sin, Cos, Tan, Atan, Pow, Exp, Sqrt, Max, Abs, Tanh,
};

class Var;

// Append-only record of a scalar computation.  Parents always precede
// children, so a single reverse sweep yields every adjoint.  A tape is
// single-threaded and must outlive the Vars that reference it.
class Tape {
public:
    static constexpr std::uint32_t kNoParent = 0xffffffffu;

    struct Node {
        OpKind op;
        std::uint32_t parent[2];
        double partial[2];
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var variable(double value);
    std::vector<Var> variables(std::span<const double> values);

    // Adjoints d(output)/d(node) for every node on the tape.
    std::vector<double> adjoints(const Var& output) const;
    // Adjoints restricted to the given leaves, in order.
    std::vector<double> gradient(const Var& output, std::span<const Var> leaves) const;

    std::size_t size() const noexcept { return nodes_.size(); }
    const Node& node(std::size_t i) const { return nodes_[i]; }
    double value(std::size_t i) const { return values_[i]; }
    void clear() { nodes_.clear(); values_.clear(); }
    void reserve(std::size_t n) { nodes_.reserve(n); values_.reserve(n); }

    // Internal: used by the operator overloads.
    Var push(OpKind op, double value, std::uint32_t p0, double d0,
             std::uint32_t p1 = kNoParent, double d1 = 0.0);

private:
    std::vector<Node> nodes_;
    std::vector<double> values_;
};

class Var {
public:
    Var() = default;
    Var(Tape* tape, std::uint32_t index) : tape_(tape), index_(index) {}

    double value() const { return tape_->value(index_); }
    std::uint32_t index() const noexcept { return index_; }
    Tape* tape() const noexcept { return tape_; }

    Var& operator+=(const Var& o);
    Var& operator-=(const Var& o);
    Var& operator*=(const Var& o);
    Var& operator/=(const Var& o);
    Var& operator+=(double c);
    Var& operator-=(double c);
    Var& operator*=(double c);
    Var& operator/=(double c);

private:
    Tape* tape_ = nullptr;
    std::uint32_t index_ = 0;
};

Var operator-(const Var& a);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator+(const Var& a, double c);
Var operator+(double c, const Var& a);
Var operator-(const Var& a, double c);
Var operator-(double c, const Var& a);
Var operator*(const Var& a, double c);
Var operator*(double c, const Var& a);
Var operator/(const Var& a, double c);
Var operator/(double c, const Var& a);

Var sin(const Var& x);
Var cos(const Var& x);
Var tan(const Var& x);
Var atan(const Var& x);
Var exp(const Var& x);
Var sqrt(const Var& x);
Var tanh(const Var& x);
Var abs(const Var& x);
Var pow(const Var& x, double e);
Var max(const Var& a, const Var& b);
Var max(const Var& a, double c);
Var max(double c, const Var& a);

// ---------------------------------------------------------------------------
// Scalar-generic helpers

inline double value_of(double x) { return x; }
inline double value_of(const Dual& x) { return x.value; }
inline double value_of(const HyperDual& x) { return x.value; }
inline double value_of(const Var& x) { return x.value(); }

// Mixed-type max for plain doubles, so generic code can call max(T, double).
inline double max(double a, double b) {
    if (a > b) return a;
    if (b > a) return b;
    return a + b - b;  // NaN in either operand propagates
}
inline Dual max(const Dual& a, double c) { return max(a, Dual(c)); }
inline HyperDual max(const HyperDual& a, double c) { return max(a, HyperDual(c)); }

// ---------------------------------------------------------------------------
// Drivers

// Gradient of a scalar function of n inputs.  `f` takes std::span<const Var>
// and returns a Var.
template <class F>
std::vector<double> reverse_gradient(F&& f, std::span<const double> x) {
    Tape tape;
    const std::vector<Var> leaves = tape.variables(x);
    const Var y = f(std::span<const Var>(leaves));
    return tape.gradient(y, leaves);
}

struct Jvp {
    std::vector<double> value;
    std::vector<double> derivative;
};

// Value and Jacobian-vector product Df(x) v.  `f` takes
// std::span<const Dual> and returns a range of Dual.
template <class F>
Jvp directional(F&& f, std::span<const double> x, std::span<const double> v) {
    if (x.size() != v.size()) throw std::invalid_argument("directional: size mismatch");
    std::vector<Dual> in(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) in[i] = Dual(x[i], v[i]);
    const auto out = f(std::span<const Dual>(in));
    Jvp r;
    for (const Dual& y : out) {
        r.value.push_back(y.value);
        r.derivative.push_back(y.deriv);
    }
    return r;
}

struct SecondDirectional {
    std::vector<double> value;
    std::vector<double> first;   // Df v
    std::vector<double> second;  // v^T D^2f v
};

// Value, Df v and v^T D^2 f v via HyperDual with both seeds equal to v.
template <class F>
SecondDirectional second_directional(F&& f, std::span<const double> x, std::span<const double> v) {
    if (x.size() != v.size()) throw std::invalid_argument("second_directional: size mismatch");
    std::vector<HyperDual> in(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) in[i] = HyperDual(x[i], v[i], v[i], 0.0);
    const auto out = f(std::span<const HyperDual>(in));
    SecondDirectional r;
    for (const HyperDual& y : out) {
        r.value.push_back(y.value);
        r.first.push_back(y.d1);
        r.second.push_back(y.d12);
    }
    return r;
}

}  // namespace pinnreg::ad
