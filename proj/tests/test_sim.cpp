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

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pinnreg/sim.hpp"

using namespace pinnreg;
using namespace pinnreg::sim;
using heli::Vec3;

namespace {

// Exact hover maps from the static regulator equations.
ConstantModel trim_model(const HeliParams& hp) {
    const auto t = regeq::solve_trim(hp, regeq::k_of_w(0.0, 1.0, hp));
    return ConstantModel(net::NetOutput{t[0], t[1], t[2]});
}

double max_diff(const BodyWrench& a, const BodyWrench& b) {
    return std::max((a.force - b.force).lpNorm<Eigen::Infinity>(), (a.torque - b.torque).lpNorm<Eigen::Infinity>());
}

}  // namespace

TEST_CASE("gain defaults") {
    const Gains g;
    CHECK(g.kr1 == -2.0);
    CHECK(g.kr2 == -0.1);
    CHECK(g.kl1 == -20.0);
    CHECK(g.kl2 == -0.01);
}

TEST_CASE("manifold initialization") {
    const net::MlpParams p = net::init(4);
    const NetworkModel model(p);
    SUBCASE("origin") {
        const RigidState x = init_on_manifold({0.0, 0.0}, 0.75, model);
        const net::NetOutput o = net::forward(p, 0.0, 0.0, 0.75);
        CHECK(x.p.norm() == 0.0);
        CHECK(x.v.norm() == 0.0);
        CHECK(x.q[0] == 0.0);
        CHECK(x.q[1] == doctest::Approx(o.pi_theta).epsilon(1e-12));
        CHECK(x.q[2] == doctest::Approx(o.pi_phi).epsilon(1e-12));
        CHECK(x.omega.norm() <= 1e-12);
    }
    SUBCASE("off the origin") {
        const RigidState x = init_on_manifold({2.0, -1.0}, 0.5, model);
        CHECK(x.p == Vec3(0.0, 0.0, 2.0));
        CHECK(x.v == Vec3(0.0, 0.0, -0.5));
        const SimResult r = simulate({2.0, -1.0}, 0.5, model, Gains{}, HeliParams{}, SimConfig{0.05, 0.01});
        REQUIRE_FALSE(r.e_z.empty());
        CHECK(r.e_z[0] == 0.0);
    }
}

TEST_CASE("feedback vanishes on the manifold") {
    const HeliParams hp;
    const net::MlpParams p = net::init(9);
    const NetworkModel model(p);
    for (const ExoState w : {ExoState{0.0, 0.0}, ExoState{3.0, 1.5}, ExoState{-1.0, 4.0}}) {
        const RigidState x = init_on_manifold(w, 0.8, model);
        const ControlOutput c = control(x, w, 0.8, model, Gains{}, hp);
        CHECK(max_diff(c.command, c.feedforward) <= 1e-12);
    }
}

TEST_CASE("zero gains give the pure feedforward") {
    const HeliParams hp;
    const net::MlpParams p = net::init(9);
    const NetworkModel model(p);
    RigidState x;
    x.p = Vec3(0.3, -0.2, 1.0);
    x.v = Vec3(0.1, 0.0, -0.4);
    x.q = Vec3(0.2, -0.1, 0.05);
    x.omega = Vec3(0.01, 0.3, -0.2);
    const ControlOutput c = control(x, {2.0, 1.0}, 1.0, model, Gains{0.0, 0.0, 0.0, 0.0}, hp);
    CHECK(max_diff(c.command, c.feedforward) == 0.0);
    const ControlOutput d = control(x, {2.0, 1.0}, 1.0, model, Gains{}, hp);
    CHECK(max_diff(d.command, d.feedforward) > 0.0);
}

TEST_CASE("exact maps hold hover") {
    const HeliParams hp;
    const ConstantModel model = trim_model(hp);
    SUBCASE("open loop for one second") {
        const SimResult r = simulate({0.0, 0.0}, 1.0, model, Gains{0.0, 0.0, 0.0, 0.0}, hp, SimConfig{1.0, 0.01});
        CHECK_FALSE(r.diverged);
        CHECK(r.max_abs_ez <= 1e-6);
    }
    SUBCASE("closed loop for thirty seconds") {
        const SimResult r = simulate({0.0, 0.0}, 1.0, model, Gains{}, hp);
        CHECK_FALSE(r.diverged);
        CHECK(r.t.size() == 3001);
        CHECK(r.t.back() == doctest::Approx(30.0));
        CHECK(r.max_abs_ez <= 1e-3);
    }
}

TEST_CASE("closed loop about hover is asymptotically stable") {
    const HeliParams hp;
    const ConstantModel model = trim_model(hp);
    const RigidState x0 = init_on_manifold({0.0, 0.0}, 1.0, model);
    auto field = [&](const heli::StateVector& s) {
        const RigidState x = RigidState::unpack(s);
        const ControlOutput c = control(x, {0.0, 0.0}, 1.0, model, Gains{}, hp);
        return heli::dynamics(x, applied_wrench(x, c, hp, Actuation::DirectWrench), hp);
    };
    const heli::StateVector s0 = x0.pack();
    CHECK(field(s0).lpNorm<Eigen::Infinity>() <= 1e-9);

    Eigen::Matrix<double, 12, 12> a;
    const double h = 1e-6;
    for (int j = 0; j < 12; ++j) {
        heli::StateVector sp = s0, sm = s0;
        sp[j] += h;
        sm[j] -= h;
        a.col(j) = (field(sp) - field(sm)) / (2.0 * h);
    }
    const Eigen::EigenSolver<Eigen::Matrix<double, 12, 12>> es(a);
    REQUIRE(es.info() == Eigen::Success);
    double worst = -1e9;
    for (int i = 0; i < 12; ++i) worst = std::max(worst, es.eigenvalues()[i].real());
    MESSAGE("largest real part " << worst);
    CHECK(worst < 0.0);
}

TEST_CASE("actuator-inverted mode") {
    const HeliParams hp;
    const ConstantModel model = trim_model(hp);
    const RigidState x0 = init_on_manifold({0.0, 0.0}, 1.0, model);
    const ControlOutput c0 = control(x0, {0.0, 0.0}, 1.0, model, Gains{}, hp);
    CHECK(max_diff(applied_wrench(x0, c0, hp, Actuation::ActuatorInverted),
                   applied_wrench(x0, c0, hp, Actuation::DirectWrench)) <= 1e-9);

    // Off the manifold the inversion still reproduces torque and body-z force.
    RigidState x = x0;
    x.q += Vec3(0.01, -0.02, 0.015);
    x.p[2] += 0.05;
    const ControlOutput c = control(x, {0.0, 0.0}, 1.0, model, Gains{}, hp);
    const BodyWrench inv = applied_wrench(x, c, hp, Actuation::ActuatorInverted);
    const BodyWrench dir = applied_wrench(x, c, hp, Actuation::DirectWrench);
    CHECK((inv.torque - dir.torque).norm() <= 1e-9);
    CHECK(std::abs(inv.force[2] - dir.force[2]) <= 1e-9);

    SimConfig cfg;
    cfg.horizon = 2.0;
    cfg.actuation = Actuation::ActuatorInverted;
    CHECK_FALSE(simulate({0.0, 0.0}, 1.0, model, Gains{}, hp, cfg).diverged);
}

TEST_CASE("divergence stops the rollout") {
    const HeliParams hp;
    const ConstantModel model = trim_model(hp);
    SimConfig cfg;
    cfg.divergence_threshold = 4.0;
    const SimResult r = simulate({5.0, 0.0}, 1.0, model, Gains{}, hp, cfg);
    CHECK(r.diverged);
    REQUIRE(r.diverge_time.has_value());
    CHECK(*r.diverge_time == doctest::Approx(0.01));
    CHECK(r.t.size() == 1);
    CHECK(r.e_z.size() == r.states.size());
    CHECK(r.wrench.size() == r.t.size());
    CHECK(r.mean_abs_ez == 0.0);

    CHECK_THROWS_AS(simulate({0.0, 0.0}, 1.0, model, Gains{}, hp, SimConfig{1.0, 0.0}), std::invalid_argument);
}

TEST_CASE("trajectory csv") {
    const HeliParams hp;
    const SimResult r = simulate({1.0, 0.0}, 1.0, trim_model(hp), Gains{}, hp, SimConfig{0.1, 0.01});
    std::ostringstream os;
    write_trajectory_csv(os, r);
    const std::string s = os.str();
    CHECK(s.rfind("t,w1_ref,e_z,p1,p2,p3,v1,v2,v3,psi,theta,phi,omega1,omega2,omega3,f1,f2,f3,tau1,tau2,tau3\n", 0) ==
          0);
    CHECK(std::count(s.begin(), s.end(), '\n') == 12);
}

TEST_CASE("grid experiment") {
    const HeliParams hp;
    const ConstantModel model = trim_model(hp);
    SimConfig cfg;
    cfg.horizon = 1.0;
    const std::vector<double> w1s = {0.0, 1.0, 2.0};
    const std::vector<double> oms = {0.5, 1.0};
    auto seen = [](double w1, double om) { return w1 == 1.0 && om == 1.0; };
    const auto a = grid_experiment(w1s, oms, model, Gains{}, hp, cfg, seen, 1);
    const auto b = grid_experiment(w1s, oms, model, Gains{}, hp, cfg, seen, 3);
    REQUIRE(a.size() == 6);
    REQUIRE(b.size() == 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].w1_0 == w1s[i / 2]);
        CHECK(a[i].omega == oms[i % 2]);
        CHECK(a[i].mean_abs_ez == b[i].mean_abs_ez);
        CHECK(a[i].diverged == b[i].diverged);
        CHECK(a[i].seen_in_training == seen(a[i].w1_0, a[i].omega));
    }
    // The hover row only sees the trim error of the oracle, which is tiny.
    CHECK(a[0].mean_abs_ez <= 1e-6);
    CHECK(a[1].mean_abs_ez <= 1e-6);

    std::ostringstream os;
    write_grid_csv(os, a);
    CHECK(os.str().rfind("w1_0,omega,mean_abs_ez,diverged,seen_in_training\n", 0) == 0);
    std::istringstream is(os.str());
    const auto back = read_grid_csv(is);
    REQUIRE(back.size() == a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(back[i].w1_0 == a[i].w1_0);
        CHECK(back[i].omega == a[i].omega);
        CHECK(back[i].mean_abs_ez == a[i].mean_abs_ez);
        CHECK(back[i].diverged == a[i].diverged);
        CHECK(back[i].seen_in_training == a[i].seen_in_training);
    }
}

TEST_CASE("error statistics") {
    SUBCASE("single cell") {
        const ErrorStats s = error_stats({GridRow{1.0, 0.5, 0.042, false, true}});
        CHECK(s.mean == 0.042);
        CHECK(s.median == 0.042);
        CHECK(s.cells == 1);
    }
    SUBCASE("diverged cells excluded") {
        std::vector<GridRow> rows;
        for (int i = 0; i < 9; ++i) rows.push_back({double(i), 1.0, 0.01 * (i + 1), false, false});
        rows.push_back({9.0, 1.0, 1e6, true, false});
        rows.push_back({10.0, 1.0, 2.0, false, false});  // outlier
        const ErrorStats s = error_stats(rows, 7);
        CHECK(s.cells == 10);
        CHECK(s.diverged == 1);
        CHECK(s.median == doctest::Approx(0.055));
        CHECK(s.mean == doctest::Approx((0.45 + 2.0) / 10.0));
        CHECK(s.median < s.mean);
        CHECK(s.histogram.edges.size() == 8);
        CHECK(std::accumulate(s.histogram.counts.begin(), s.histogram.counts.end(), std::size_t{0}) == s.cells);
    }
    SUBCASE("nothing left") {
        CHECK_THROWS_AS(error_stats({GridRow{0.0, 1.0, 0.0, true, false}}), EmptyStatistics);
        CHECK_THROWS_AS(error_stats({}), EmptyStatistics);
    }
}
