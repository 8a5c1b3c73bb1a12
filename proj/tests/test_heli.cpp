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

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "pinnreg/heli.hpp"

using namespace pinnreg::heli;

namespace {

Vec3 random_attitude(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> yaw(-3.0, 3.0), tilt(-1.2, 1.2);
    return {yaw(rng), tilt(rng), yaw(rng)};
}

// Rotor map written out a second time, straight from the formulas.
RotorWrench reference_wrench(double tm, double tt, double a, double b, const HeliParams& h) {
    const double xm = -tm * std::sin(a);
    const double ym = tm * std::sin(b);
    const double zm = -tm * std::cos(a) * std::cos(b);
    const double yt = -tt;
    const double qm = h.cq_main * std::pow(tm, 1.5) + h.dq_main;
    const double qt = h.cq_tail * std::pow(tt, 1.5) + h.dq_tail;
    RotorWrench w;
    w.force = {xm, ym + yt, zm};
    w.torque = {h.cb_main * b - qm * std::sin(a) + ym * h.h_m + zm * h.y_m + yt * h.h_t,
                h.ca_main * a + qm * std::sin(b) - qt - xm * h.h_m + zm * h.l_m,
                -qm * std::cos(a) * std::cos(b) - ym * h.l_m - yt * h.l_t};
    return w;
}

}  // namespace

TEST_CASE("defaults match the physical parameter table") {
    const HeliParams h;
    CHECK(h.jx == 0.14241);
    CHECK(h.jy == 0.27121);
    CHECK(h.jz == 0.2714);
    CHECK(h.l_m == -0.015);
    CHECK(h.y_m == 0.0);
    CHECK(h.h_m == 0.2943);
    CHECK(h.h_t == 0.1154);
    CHECK(h.l_t == 0.8715);
    CHECK(h.mass == 4.9);
    CHECK(h.cq_main == 0.00445);
    CHECK(h.dq_main == 0.6304);
    CHECK(h.cb_main == 25.23);
    CHECK(h.cq_tail == 0.00506);
    CHECK(h.dq_tail == 0.00848);
    CHECK(h.ca_main == 25.23);
    CHECK(h.gravity == 9.8);
    CHECK_NOTHROW(h.validate());

    HeliParams bad = h;
    bad.mass = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = h;
    bad.jy = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("rotation matrix is a proper rotation") {
    CHECK(rotation_matrix(Vec3::Zero()).isApprox(Mat3::Identity(), 0.0));
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) {
        const Mat3 r = rotation_matrix(random_attitude(rng));
        CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(r.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("euler rate matrix") {
    // Rows follow the state order (psi, theta, phi), so at q = 0 the map is
    // psi_dot = omega_3, theta_dot = omega_2, phi_dot = omega_1.
    Mat3 flip;
    flip << 0, 0, 1, 0, 1, 0, 1, 0, 0;
    CHECK(euler_rate_matrix(Vec3::Zero()) == flip);
    CHECK_THROWS_AS(euler_rate_matrix(Vec3(0.0, std::numbers::pi / 2 - 1e-7, 0.0)), GimbalLockError);
    CHECK_THROWS_AS(euler_rate_matrix_inverse(Vec3(0.0, -std::numbers::pi / 2, 0.0)), GimbalLockError);
    std::mt19937_64 rng(2);
    for (int i = 0; i < 20; ++i) {
        const Vec3 q = random_attitude(rng);
        CHECK((euler_rate_matrix(q) * euler_rate_matrix_inverse(q) - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
    }
}

TEST_CASE("attitude kinematics agree with the rotation matrix") {
    // dR/dt along q_dot = D(q) omega must equal R skew(omega).
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        const Vec3 q = random_attitude(rng);
        const Vec3 w(u(rng), u(rng), u(rng));
        const Vec3 qdot = euler_rate_matrix(q) * w;
        const double h = 1e-6;
        const Mat3 fd = (rotation_matrix(q + h * qdot) - rotation_matrix(q - h * qdot)) / (2.0 * h);
        CHECK((fd - rotation_matrix(q) * skew(w)).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("euler integration matches a quaternion reference") {
    auto omega_at = [](double t) { return Vec3(0.4 * std::sin(2.0 * t), 0.3 + 0.2 * t, -0.5 * std::cos(t)); };
    Vec3 q(0.2, 0.3, -0.1);
    const Mat3 r0 = rotation_matrix(q);
    Eigen::Quaterniond quat(r0);
    auto quat_rate = [&](double t, const Eigen::Vector4d& c) {
        const Eigen::Quaterniond qq(c[0], c[1], c[2], c[3]);
        const Vec3 w = omega_at(t);
        const Eigen::Quaterniond d = qq * Eigen::Quaterniond(0.0, w.x(), w.y(), w.z());
        return Eigen::Vector4d(0.5 * d.w(), 0.5 * d.x(), 0.5 * d.y(), 0.5 * d.z());
    };
    Eigen::Vector4d qc(quat.w(), quat.x(), quat.y(), quat.z());
    const double dt = 1e-3;
    for (int i = 0; i < 1000; ++i) {
        const double t = i * dt;
        q = rk4(q, t, dt, [&](double s, const Vec3& x) -> Vec3 { return euler_rate_matrix(x) * omega_at(s); });
        qc = rk4(qc, t, dt, quat_rate);
        qc.normalize();
    }
    const Mat3 rq = Eigen::Quaterniond(qc[0], qc[1], qc[2], qc[3]).toRotationMatrix();
    const Eigen::AngleAxisd diff(rotation_matrix(q).transpose() * rq);
    CHECK(std::abs(diff.angle()) <= 1e-5);
}

TEST_CASE("rotor wrench") {
    const HeliParams h;
    SUBCASE("zero inputs leave only the rotor drag torques") {
        const RotorWrench w = rotor_wrench(ControlInputs{}, h);
        CHECK(w.force == std::array<double, 3>{0.0, 0.0, 0.0});
        CHECK(w.torque[0] == 0.0);
        CHECK(w.torque[1] == doctest::Approx(-h.dq_tail));
        CHECK(w.torque[2] == doctest::Approx(-h.dq_main));
    }
    SUBCASE("pure vertical thrust") {
        const RotorWrench w = rotor_wrench(ControlInputs{12.5, 0.0, 0.0, 0.0}, h);
        CHECK(w.force[0] == 0.0);
        CHECK(w.force[1] == 0.0);
        CHECK(w.force[2] == -12.5);
    }
    SUBCASE("independent evaluation at random inputs") {
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> thrust(0.0, 80.0), tilt(-0.4, 0.4);
        for (int i = 0; i < 100; ++i) {
            const ControlInputs u{thrust(rng), thrust(rng) * 0.1, tilt(rng), tilt(rng)};
            const RotorWrench a = rotor_wrench(u, h);
            const RotorWrench b = reference_wrench(u.thrust_main, u.thrust_tail, u.tilt_lon, u.tilt_lat, h);
            for (int k = 0; k < 3; ++k) {
                CHECK(a.force[k] == doctest::Approx(b.force[k]).epsilon(1e-14));
                CHECK(a.torque[k] == doctest::Approx(b.torque[k]).epsilon(1e-14));
            }
        }
    }
    SUBCASE("negative thrust is rejected") {
        CHECK_THROWS_AS(rotor_wrench(ControlInputs{-1.0, 0.0, 0.0, 0.0}, h), pinnreg::ad::DomainError);
        CHECK_THROWS_AS(rotor_wrench(ControlInputs{1.0, -0.1, 0.0, 0.0}, h), pinnreg::ad::DomainError);
    }
}

TEST_CASE("free fall without inputs") {
    const HeliParams h;
    const StateVector d = dynamics(RigidState{}, ControlInputs{}, h);
    CHECK(d.segment<3>(3).isApprox(Vec3(0.0, 0.0, h.gravity)));
}

TEST_CASE("hover trim from the static wrench balance") {
    // Unknowns (T_M, T_T, a, b, phi, theta); zero acceleration at rest.
    const HeliParams h;
    auto residual = [&](const Eigen::Matrix<double, 6, 1>& z) {
        RigidState x;
        x.q = Vec3(0.0, z[5], z[4]);
        const StateVector d = dynamics(x, ControlInputs{z[0], z[1], z[2], z[3]}, h);
        Eigen::Matrix<double, 6, 1> r;
        r << d.segment<3>(3), d.segment<3>(9);
        return r;
    };
    Eigen::Matrix<double, 6, 1> z;
    z << h.mass * h.gravity, 0.5, 0.0, 0.0, 0.0, 0.0;
    for (int it = 0; it < 30; ++it) {
        const auto r = residual(z);
        if (r.cwiseAbs().maxCoeff() < 1e-13) break;
        Eigen::Matrix<double, 6, 6> jac;
        for (int c = 0; c < 6; ++c) {
            auto zp = z, zm = z;
            zp[c] += 1e-7;
            zm[c] -= 1e-7;
            jac.col(c) = (residual(zp) - residual(zm)) / 2e-7;
        }
        z -= jac.partialPivLu().solve(r);
    }
    CHECK(residual(z).cwiseAbs().maxCoeff() <= 1e-6);
    // Three-digit hover values: roll 0.044, pitch 0.018, lateral tilt 0.0061.
    CHECK(std::abs(z[4] - 0.044) <= 5e-4);
    CHECK(std::abs(z[5] - 0.018) <= 5e-4);
    CHECK(std::abs(z[3] - 0.0061) <= 5e-5);
}

TEST_CASE("torque-free rigid body conserves energy and momentum") {
    const HeliParams h;
    RigidState x;
    x.q = Vec3(0.1, 0.2, -0.3);
    x.omega = Vec3(0.7, -0.4, 0.9);
    x.v = Vec3(1.0, 0.0, -0.5);
    const Mat3 j = h.inertia();
    const double e0 = 0.5 * x.omega.dot(j * x.omega);
    const Vec3 l0 = rotation_matrix(x.q) * j * x.omega;
    const WrenchProvider none = [](double, const RigidState&) { return BodyWrench{}; };
    for (int i = 0; i < 100; ++i) x = rk4_step(x, none, i * 0.01, 0.01, h);
    const double e1 = 0.5 * x.omega.dot(j * x.omega);
    CHECK(std::abs(e1 - e0) / e0 <= 1e-8);
    CHECK((rotation_matrix(x.q) * j * x.omega - l0).norm() <= 1e-6 * l0.norm());
    CHECK(x.v.isApprox(Vec3(1.0, 0.0, -0.5), 1e-15));
}

TEST_CASE("rk4 on the harmonic oscillator") {
    using V2 = Eigen::Vector2d;
    const double omega = 1.0;
    auto field = [&](double, const V2& w) { return V2(omega * w[1], -omega * w[0]); };
    auto max_error = [&](double dt) {
        V2 w(1.0, 0.5);
        const V2 w0 = w;
        const long n = std::lround(30.0 / dt);
        double err = 0.0;
        for (long i = 0; i < n; ++i) {
            w = rk4(w, i * dt, dt, field);
            const double t = (i + 1) * dt;
            const V2 exact(w0[0] * std::cos(omega * t) + w0[1] * std::sin(omega * t),
                           -w0[0] * std::sin(omega * t) + w0[1] * std::cos(omega * t));
            err = std::max(err, (w - exact).cwiseAbs().maxCoeff());
        }
        return err;
    };
    const double e1 = max_error(0.01);
    CHECK(e1 <= 1e-6);
    const double e0 = max_error(0.04);
    const double e2 = max_error(0.02);
    CHECK(std::log2(e0 / e2) >= 3.8);

    const V2 still(0.3, -0.2);
    CHECK(rk4(still, 0.0, 0.1, [](double, const V2&) { return V2::Zero().eval(); }) == still);
}

TEST_CASE("rk4 step flags non-finite states") {
    const HeliParams h;
    const WrenchProvider blowup = [](double, const RigidState&) {
        BodyWrench w;
        w.force = Vec3(std::numeric_limits<double>::infinity(), 0.0, 0.0);
        return w;
    };
    CHECK_THROWS_AS(rk4_step(RigidState{}, blowup, 0.0, 0.01, h), DivergenceError);
}

TEST_CASE("state packing round-trips") {
    RigidState x;
    x.p = Vec3(1, 2, 3);
    x.v = Vec3(4, 5, 6);
    x.q = Vec3(0.1, 0.2, 0.3);
    x.omega = Vec3(7, 8, 9);
    const RigidState y = RigidState::unpack(x.pack());
    CHECK(y.p == x.p);
    CHECK(y.v == x.v);
    CHECK(y.q == x.q);
    CHECK(y.omega == x.omega);
}
