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

// Rigid-body helicopter: kinematics, rotor force/torque map, Newton-Euler
// dynamics and a classical RK4 step.
//
// Frames: inertial z points down, so gravity is +M g along the third axis.
// Attitude q = (psi, theta, phi) = (yaw, pitch, roll), R = Rz(psi) Ry(theta) Rx(phi).

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

#include "pinnreg/autodiff.hpp"

namespace pinnreg::heli {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using StateVector = Eigen::Matrix<double, 12, 1>;

class GimbalLockError : public std::runtime_error {
public:
    explicit GimbalLockError(double pitch);
    double pitch() const noexcept { return pitch_; }

private:
    double pitch_;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Pitch margin from +-pi/2 below which D(q) is rejected.
inline constexpr double kGimbalMargin = 1e-6;

struct HeliParams {
    double mass = 4.9;
    double gravity = 9.8;
    double jx = 0.14241;
    double jy = 0.27121;
    double jz = 0.2714;
    double l_m = -0.015;
    double y_m = 0.0;
    double h_m = 0.2943;
    double h_t = 0.1154;
    double l_t = 0.8715;
    double cq_main = 0.00445;  // c_M^Q
    double dq_main = 0.6304;   // D_M^Q
    double cb_main = 25.23;    // c_b^M
    double cq_tail = 0.00506;  // c_T^Q
    double dq_tail = 0.00848;  // D_T^Q
    double ca_main = 25.23;    // c_a^M

    // Throws std::invalid_argument unless mass and inertias are positive.
    void validate() const;
    Mat3 inertia() const { return Vec3(jx, jy, jz).asDiagonal(); }
};

template <class T>
struct ControlInputsT {
    T thrust_main{};  // T_M
    T thrust_tail{};  // T_T
    T tilt_lon{};     // a
    T tilt_lat{};     // b
};
using ControlInputs = ControlInputsT<double>;

template <class T>
struct WrenchT {
    std::array<T, 3> force{};
    std::array<T, 3> torque{};
};
using RotorWrench = WrenchT<double>;

// Body-frame force and torque produced by the main and tail rotors.
// Throws ad::DomainError on negative thrust.
template <class T>
WrenchT<T> rotor_wrench(const ControlInputsT<T>& u, const HeliParams& hp) {
    using std::cos;
    using std::pow;
    using std::sin;
    if (ad::value_of(u.thrust_main) < 0.0) throw ad::DomainError("thrust_main", ad::value_of(u.thrust_main));
    if (ad::value_of(u.thrust_tail) < 0.0) throw ad::DomainError("thrust_tail", ad::value_of(u.thrust_tail));

    const T& a = u.tilt_lon;
    const T& b = u.tilt_lat;
    const T sa = sin(a), ca = cos(a), sb = sin(b), cb = cos(b);

    const T x_m = -u.thrust_main * sa;
    const T y_m = u.thrust_main * sb;
    const T z_m = -u.thrust_main * ca * cb;
    const T y_t = -u.thrust_tail;

    const T q_m = hp.cq_main * pow(u.thrust_main, 1.5) + hp.dq_main;
    const T q_t = hp.cq_tail * pow(u.thrust_tail, 1.5) + hp.dq_tail;

    const T r_m = hp.cb_main * b - q_m * sa;
    const T m_m = hp.ca_main * a + q_m * sb;
    const T n_m = -q_m * ca * cb;
    const T m_t = -q_t;

    const T tf1 = y_m * hp.h_m + z_m * hp.y_m + y_t * hp.h_t;
    const T tf2 = -x_m * hp.h_m + z_m * hp.l_m;
    const T tf3 = -y_m * hp.l_m - y_t * hp.l_t;

    WrenchT<T> w;
    w.force = {x_m, y_m + y_t, z_m};
    w.torque = {r_m + tf1, m_m + m_t + tf2, n_m + tf3};
    return w;
}

struct RigidState {
    Vec3 p = Vec3::Zero();      // inertial position, m
    Vec3 v = Vec3::Zero();      // inertial velocity, m/s
    Vec3 q = Vec3::Zero();      // (psi, theta, phi), rad
    Vec3 omega = Vec3::Zero();  // body angular velocity, rad/s

    StateVector pack() const;
    static RigidState unpack(const StateVector& x);
};

struct BodyWrench {
    Vec3 force = Vec3::Zero();
    Vec3 torque = Vec3::Zero();
};

Mat3 rotation_matrix(const Vec3& q);
Mat3 skew(const Vec3& w);

// q_dot = D(q) omega_b, rows ordered (psi, theta, phi).
Mat3 euler_rate_matrix(const Vec3& q);
// omega_b = D(q)^-1 q_dot.
Mat3 euler_rate_matrix_inverse(const Vec3& q);

// Rotor wrench plus gravity, in body axes.
BodyWrench total_wrench(const RigidState& x, const ControlInputs& u, const HeliParams& hp);
BodyWrench to_body_wrench(const RotorWrench& w);

// State derivative for a given total body wrench (gravity included).
StateVector dynamics(const RigidState& x, const BodyWrench& total, const HeliParams& hp);
StateVector dynamics(const RigidState& x, const ControlInputs& u, const HeliParams& hp);

// Classical fourth-order Runge-Kutta step for x' = f(t, x).
template <class State, class Field>
State rk4(const State& x, double t, double dt, Field&& f) {
    const State k1 = f(t, x);
    const State k2 = f(t + 0.5 * dt, State(x + 0.5 * dt * k1));
    const State k3 = f(t + 0.5 * dt, State(x + 0.5 * dt * k2));
    const State k4 = f(t + dt, State(x + dt * k3));
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Supplies the total body wrench at a stage time and state.
using WrenchProvider = std::function<BodyWrench(double, const RigidState&)>;

// One RK4 step of the helicopter.  Throws DivergenceError if the result is
// not finite.
RigidState rk4_step(const RigidState& x, const WrenchProvider& provider, double t, double dt,
                    const HeliParams& hp);

}  // namespace pinnreg::heli
