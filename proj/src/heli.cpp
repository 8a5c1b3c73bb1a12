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

#include "pinnreg/heli.hpp"

#include <numbers>
#include <string>

namespace pinnreg::heli {

GimbalLockError::GimbalLockError(double pitch)
    : std::runtime_error("gimbal lock: pitch " + std::to_string(pitch) + " rad too close to +-pi/2"),
      pitch_(pitch) {}

void HeliParams::validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("heli.mass must be positive");
    if (!(jx > 0.0) || !(jy > 0.0) || !(jz > 0.0))
        throw std::invalid_argument("heli inertias must be positive");
}

StateVector RigidState::pack() const {
    StateVector x;
    x << p, v, q, omega;
    return x;
}

RigidState RigidState::unpack(const StateVector& x) {
    RigidState s;
    s.p = x.segment<3>(0);
    s.v = x.segment<3>(3);
    s.q = x.segment<3>(6);
    s.omega = x.segment<3>(9);
    return s;
}

Mat3 rotation_matrix(const Vec3& q) {
    const double cy = std::cos(q[0]), sy = std::sin(q[0]);
    const double cp = std::cos(q[1]), sp = std::sin(q[1]);
    const double cr = std::cos(q[2]), sr = std::sin(q[2]);
    Mat3 r;
    r << cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr,
         sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr,
         -sp,     cp * sr,                cp * cr;
    return r;
}

Mat3 skew(const Vec3& w) {
    Mat3 s;
    s << 0.0, -w[2], w[1],
         w[2], 0.0, -w[0],
         -w[1], w[0], 0.0;
    return s;
}

namespace {

void guard_pitch(double theta) {
    if (std::abs(theta) >= std::numbers::pi / 2.0 - kGimbalMargin) throw GimbalLockError(theta);
}

}  // namespace

Mat3 euler_rate_matrix(const Vec3& q) {
    guard_pitch(q[1]);
    const double ct = std::cos(q[1]), tt = std::tan(q[1]);
    const double cr = std::cos(q[2]), sr = std::sin(q[2]);
    Mat3 d;
    d << 0.0, sr / ct, cr / ct,
         0.0, cr,      -sr,
         1.0, sr * tt, cr * tt;
    return d;
}

Mat3 euler_rate_matrix_inverse(const Vec3& q) {
    guard_pitch(q[1]);
    const double ct = std::cos(q[1]), st = std::sin(q[1]);
    const double cr = std::cos(q[2]), sr = std::sin(q[2]);
    Mat3 m;
    m << -st,      0.0, 1.0,
         sr * ct,  cr,  0.0,
         cr * ct,  -sr, 0.0;
    return m;
}

BodyWrench to_body_wrench(const RotorWrench& w) {
    BodyWrench b;
    b.force = Vec3(w.force[0], w.force[1], w.force[2]);
    b.torque = Vec3(w.torque[0], w.torque[1], w.torque[2]);
    return b;
}

BodyWrench total_wrench(const RigidState& x, const ControlInputs& u, const HeliParams& hp) {
    BodyWrench b = to_body_wrench(rotor_wrench(u, hp));
    b.force += rotation_matrix(x.q).transpose() * Vec3(0.0, 0.0, hp.mass * hp.gravity);
    return b;
}

StateVector dynamics(const RigidState& x, const BodyWrench& total, const HeliParams& hp) {
    const Mat3 r = rotation_matrix(x.q);
    const Mat3 d = euler_rate_matrix(x.q);
    const Vec3 j(hp.jx, hp.jy, hp.jz);
    const Vec3 jw = j.cwiseProduct(x.omega);

    StateVector dx;
    dx.segment<3>(0) = x.v;
    dx.segment<3>(3) = r * total.force / hp.mass;
    dx.segment<3>(6) = d * x.omega;
    dx.segment<3>(9) = (total.torque - x.omega.cross(jw)).cwiseQuotient(j);
    return dx;
}

StateVector dynamics(const RigidState& x, const ControlInputs& u, const HeliParams& hp) {
    return dynamics(x, total_wrench(x, u, hp), hp);
}

RigidState rk4_step(const RigidState& x, const WrenchProvider& provider, double t, double dt,
                    const HeliParams& hp) {
    if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
    auto field = [&](double ts, const StateVector& xs) -> StateVector {
        const RigidState s = RigidState::unpack(xs);
        return dynamics(s, provider(ts, s), hp);
    };
    const StateVector next = rk4(x.pack(), t, dt, field);
    if (!next.allFinite()) throw DivergenceError("non-finite state after RK4 step at t=" + std::to_string(t));
    return RigidState::unpack(next);
}

}  // namespace pinnreg::heli
