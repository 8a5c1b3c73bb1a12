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

// Regulator equations of the helicopter vertical-landing benchmark.
//
// Unknown steady-state maps (pi_phi, pi_theta, c_b) over the exosystem
// state w; yaw is held at zero.  The remaining inputs (c_a, c_TM, c_TT)
// follow from the force balance on the zero-error manifold, and the
// residuals measure how far the induced rotor torque is from producing
// the attitude motion pi(w(t)).

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pinnreg/autodiff.hpp"
#include "pinnreg/heli.hpp"
#include "pinnreg/net.hpp"

namespace pinnreg::regeq {

using heli::HeliParams;

// |c_b| limit of the admissible operating region.
inline constexpr double kBoundaryLimit = 0.3491;
// Margin from pi/2 for angles and floor for clamped cosines.
inline constexpr double kAngleMargin = 1e-6;

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExoState {
    double w1 = 0.0;
    double w2 = 0.0;
};

// A training or evaluation point: exosystem state plus its frequency.
struct Sample {
    double w1 = 0.0;
    double w2 = 0.0;
    double omega = 0.0;
};

std::array<double, 2> exo_rhs(const ExoState& w, double omega);
ExoState exo_solution(const ExoState& w0, double omega, double t);

// Vertical force magnitude required on the zero-error manifold,
// M (g + Omega^2 w1).
template <class T>
T k_of_w(const T& w1, double omega, const HeliParams& hp) {
    return hp.mass * (hp.gravity + omega * omega * w1);
}

enum class Mode {
    Strict,  // angles outside (-pi/2, pi/2) throw InfeasibleError
    Clamp,   // cosines floored at kAngleMargin, infeasibility flagged
};

template <class T>
struct SteadyMapsT {
    T c_a{};
    T c_tm{};
    T c_tt{};
    bool feasible = true;
};
using SteadyMaps = SteadyMapsT<double>;

namespace detail {

template <class T>
T guarded_cos(const T& x, Mode mode, bool& feasible) {
    using std::cos;
    const double half_pi = std::numbers::pi / 2.0;
    if (std::abs(ad::value_of(x)) >= half_pi - kAngleMargin) {
        if (mode == Mode::Strict) throw InfeasibleError("steady_maps: angle outside the open range (-pi/2, pi/2)");
        feasible = false;
    }
    T c = cos(x);
    // Constant with zero derivative, built without a T(double) constructor.
    if (ad::value_of(c) < kAngleMargin) c = c * 0.0 + kAngleMargin;
    return c;
}

}  // namespace detail

// Steady-state inputs from the force balance:
//   tan c_a = -tan pi_theta cos c_b / cos pi_phi
//   c_TM    = cos pi_phi cos pi_theta / (cos c_a cos c_b) k
//   c_TT    = c_TM sin c_b + sin pi_phi cos pi_theta k
// A negative c_TM clears `feasible` in either mode.
template <class T>
SteadyMapsT<T> steady_maps(const T& pi_phi, const T& pi_theta, const T& c_b, double k, Mode mode) {
    using std::atan;
    using std::sin;
    SteadyMapsT<T> m;
    const T cphi = detail::guarded_cos(pi_phi, mode, m.feasible);
    const T ctheta = detail::guarded_cos(pi_theta, mode, m.feasible);
    const T ccb = detail::guarded_cos(c_b, mode, m.feasible);
    const T tan_theta = sin(pi_theta) / ctheta;
    m.c_a = atan(-tan_theta * ccb / cphi);
    // cos(atan(x)) > 0 always; no guard needed.
    using std::cos;
    const T cca = cos(m.c_a);
    m.c_tm = cphi * ctheta / (cca * ccb) * k;
    m.c_tt = m.c_tm * sin(c_b) + sin(pi_phi) * ctheta * k;
    if (ad::value_of(m.c_tm) < 0.0) m.feasible = false;
    return m;
}

SteadyMaps steady_maps(double pi_phi, double pi_theta, double c_b, const ExoState& w, double omega,
                       const HeliParams& hp, Mode mode = Mode::Strict);

// Network outputs and their Lie derivatives, on any scalar type.
template <class T>
struct BundleT {
    std::array<T, 3> out{};  // (pi_phi, pi_theta, c_b)
    std::array<T, 3> l1{};
    std::array<T, 3> l2{};
};

template <class T>
struct ResidualsT {
    T r1{}, r2{}, r3{};
    T bc{};       // max(0, |c_b| - kBoundaryLimit)
    T penalty{};  // negative-thrust magnitude, zero on the feasible set
    bool feasible = true;
};

struct ResidualBreakdown {
    double r1 = 0.0, r2 = 0.0, r3 = 0.0;
    double bc = 0.0;
    double penalty = 0.0;
    double total = 0.0;  // |r1| + |r2| + |r3| + lambda bc + penalty
    bool feasible = true;
};

// Residuals of the compact regulator equations
//   L2 pi_phi   = F1,  L2 pi_theta = F2,  L pi_theta L pi_phi = F3
// where F = B(pi_phi) J^-1 (tau - gyroscopic terms) and tau is the rotor
// torque at the steady-state inputs.  Never throws on infeasible maps; the
// negative part of each thrust enters `penalty` instead.
template <class T>
ResidualsT<T> residuals(const BundleT<T>& b, const ExoState& w, double omega, const HeliParams& hp) {
    using ad::max;
    using std::abs;
    using std::cos;
    using std::sin;
    ResidualsT<T> r;
    const T& pi_phi = b.out[0];
    const T& pi_theta = b.out[1];
    const T& c_b = b.out[2];

    const double k = k_of_w(w.w1, omega, hp);
    const SteadyMapsT<T> m = steady_maps(pi_phi, pi_theta, c_b, k, Mode::Clamp);
    r.feasible = m.feasible;

    r.penalty = max(-m.c_tm, 0.0) + max(-m.c_tt, 0.0);
    if (ad::value_of(r.penalty) > 0.0) r.feasible = false;
    heli::ControlInputsT<T> u{max(m.c_tm, 0.0), max(m.c_tt, 0.0), m.c_a, c_b};
    const heli::WrenchT<T> wr = heli::rotor_wrench(u, hp);

    const T& lphi = b.l1[0];
    const T& ltheta = b.l1[1];
    const T cphi = cos(pi_phi), sphi = sin(pi_phi);

    const T v1 = wr.torque[0] - (hp.jz - hp.jy) * cphi * sphi * ltheta * ltheta;
    const T v2 = wr.torque[1] - (hp.jx - hp.jz) * sphi * lphi * ltheta;
    const T v3 = wr.torque[2] - (hp.jy - hp.jx) * cphi * lphi * ltheta;
    const T u1 = v1 / hp.jx, u2 = v2 / hp.jy, u3 = v3 / hp.jz;

    const T rho1 = u1;
    const T rho2 = cphi * u2 + sphi * u3;
    const T rho3 = -sphi * u2 + cphi * u3;

    r.r1 = b.l2[0] - rho1;
    r.r2 = b.l2[1] - rho2;
    r.r3 = ltheta * lphi - rho3;
    r.bc = max(abs(c_b) - kBoundaryLimit, 0.0);
    return r;
}

// Per-sample objective |r1| + |r2| + |r3| + lambda bc + penalty.
template <class T>
T sample_objective(const ResidualsT<T>& r, double lambda) {
    using std::abs;
    return abs(r.r1) + abs(r.r2) + abs(r.r3) + lambda * r.bc + r.penalty;
}

ResidualBreakdown pde_residuals(const net::LieBundle& lb, const ExoState& w, double omega,
                                const HeliParams& hp, double lambda = 0.1);

struct LossReport {
    double total = 0.0;  // mean per-sample objective
    double pde1 = 0.0, pde2 = 0.0, pde3 = 0.0;
    double bc = 0.0;
    double penalty = 0.0;
    std::size_t infeasible = 0;
};

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Batch mean of the per-sample objective.  Throws std::invalid_argument on
// an empty batch and NonFiniteLoss if the result is not finite.
LossReport loss(const net::MlpParams& p, std::span<const Sample> batch, double lambda, const HeliParams& hp);

// Same as loss, and writes d(total)/d(theta) into grad (resized to p.size()).
LossReport loss_and_gradient(const net::MlpParams& p, std::span<const Sample> batch, double lambda,
                             const HeliParams& hp, std::vector<double>& grad);

// Static regulator solution at w = 0 (all Lie terms vanish): the trim
// (pi_phi, pi_theta, c_b) zeroing the rotor torque with vertical force k.
// Newton iteration with a forward-mode Jacobian.
std::array<double, 3> solve_trim(const HeliParams& hp, double k, std::array<double, 3> guess = {0.0, 0.0, 0.0});

}  // namespace pinnreg::regeq
