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

#include "pinnreg/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <istream>
#include <string>
#include <thread>

#include "pinnreg/csv.hpp"

namespace pinnreg::sim {

using heli::Mat3;
using heli::Vec3;

net::LieBundle NetworkModel::evaluate(double w1, double w2, double omega) const {
    return net::lie_bundle_fast(p_, w1, w2, omega);
}

net::LieBundle ConstantModel::evaluate(double, double, double) const {
    net::LieBundle b;
    b.out = out_;
    return b;
}

namespace {

struct Reference {
    Vec3 q;        // (0, pi_theta, pi_phi)
    Vec3 omega_b;  // body rates along the manifold
    heli::ControlInputs u_ff;
};

Reference reference(const net::LieBundle& lb, const ExoState& w, double omega, const HeliParams& hp) {
    Reference r;
    r.q = Vec3(0.0, lb.out.pi_theta, lb.out.pi_phi);
    const Vec3 q_dot(0.0, lb.l1[1], lb.l1[0]);
    r.omega_b = heli::euler_rate_matrix_inverse(r.q) * q_dot;
    const regeq::SteadyMaps m =
        regeq::steady_maps(lb.out.pi_phi, lb.out.pi_theta, lb.out.c_b, w, omega, hp, regeq::Mode::Clamp);
    r.u_ff = {std::max(m.c_tm, 0.0), std::max(m.c_tt, 0.0), m.c_a, lb.out.c_b};
    return r;
}

ControlOutput control_from(const RigidState& x, const net::LieBundle& lb, const ExoState& w, double omega,
                           const Gains& g, const HeliParams& hp) {
    const Reference ref = reference(lb, w, omega, hp);
    ControlOutput c;
    c.u_ff = ref.u_ff;
    c.feedforward = heli::to_body_wrench(heli::rotor_wrench(ref.u_ff, hp));

    // Euler-angle error mapped to body axes, so roll torque answers roll error.
    const Vec3 e_q = heli::euler_rate_matrix_inverse(x.q) * (x.q - ref.q);
    const Vec3 e_w = x.omega - ref.omega_b;
    c.command.torque = c.feedforward.torque + hp.inertia() * (g.kr1 * e_q + g.kr2 * e_w);

    const Vec3 e_p(x.p[0], x.p[1], x.p[2] - w.w1);
    const Vec3 e_v = x.v - Vec3(0.0, 0.0, omega * w.w2);
    const Mat3 r = heli::rotation_matrix(x.q);
    c.command.force = c.feedforward.force + r.transpose() * (g.kl1 * e_p + g.kl2 * e_v);
    return c;
}

Vec3 gravity_body(const RigidState& x, const HeliParams& hp) {
    return heli::rotation_matrix(x.q).transpose() * Vec3(0.0, 0.0, hp.mass * hp.gravity);
}

// Inputs whose rotor torque and vertical body force match the command.
heli::ControlInputs invert_actuators(const BodyWrench& cmd, const heli::ControlInputs& guess, const HeliParams& hp) {
    using ad::Dual;
    std::array<double, 4> u = {guess.thrust_main, guess.thrust_tail, guess.tilt_lon, guess.tilt_lat};
    const std::array<double, 4> target = {cmd.torque[0], cmd.torque[1], cmd.torque[2], cmd.force[2]};
    for (int iter = 0; iter < 20; ++iter) {
        Eigen::Matrix4d jac;
        Eigen::Vector4d f;
        for (int col = 0; col < 4; ++col) {
            std::array<Dual, 4> d{Dual(u[0]), Dual(u[1]), Dual(u[2]), Dual(u[3])};
            d[col].deriv = 1.0;
            const auto w = heli::rotor_wrench(heli::ControlInputsT<Dual>{d[0], d[1], d[2], d[3]}, hp);
            const std::array<Dual, 4> out = {w.torque[0], w.torque[1], w.torque[2], w.force[2]};
            for (int row = 0; row < 4; ++row) {
                jac(row, col) = out[row].deriv;
                f[row] = out[row].value - target[row];
            }
        }
        if (f.lpNorm<Eigen::Infinity>() < 1e-12) break;
        const Eigen::Vector4d step = jac.partialPivLu().solve(f);
        if (!step.allFinite()) break;
        for (int i = 0; i < 4; ++i) u[i] -= step[i];
        u[0] = std::max(u[0], 0.0);
        u[1] = std::max(u[1], 0.0);
    }
    return {u[0], u[1], u[2], u[3]};
}

}  // namespace

RigidState init_on_manifold(const ExoState& w0, double omega, const SteadyStateModel& model) {
    const net::LieBundle lb = model.evaluate(w0.w1, w0.w2, omega);
    RigidState x;
    x.p = Vec3(0.0, 0.0, w0.w1);
    x.v = Vec3(0.0, 0.0, omega * w0.w2);
    x.q = Vec3(0.0, lb.out.pi_theta, lb.out.pi_phi);
    x.omega = heli::euler_rate_matrix_inverse(x.q) * Vec3(0.0, lb.l1[1], lb.l1[0]);
    return x;
}

ControlOutput control(const RigidState& x, const ExoState& w, double omega, const SteadyStateModel& model,
                      const Gains& g, const HeliParams& hp) {
    return control_from(x, model.evaluate(w.w1, w.w2, omega), w, omega, g, hp);
}

BodyWrench applied_wrench(const RigidState& x, const ControlOutput& c, const HeliParams& hp, Actuation mode) {
    BodyWrench out;
    if (mode == Actuation::ActuatorInverted) {
        const heli::ControlInputs u = invert_actuators(c.command, c.u_ff, hp);
        out = heli::to_body_wrench(heli::rotor_wrench(u, hp));
    } else {
        out = c.command;
    }
    out.force += gravity_body(x, hp);
    return out;
}

namespace {

bool out_of_bounds(const RigidState& x, double threshold) {
    const heli::StateVector s = x.pack();
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (!std::isfinite(s[i]) || std::abs(s[i]) > threshold) return true;
    return false;
}

}  // namespace

SimResult simulate(const ExoState& w0, double omega, const SteadyStateModel& model, const Gains& g,
                   const HeliParams& hp, const SimConfig& cfg) {
    if (!(cfg.dt > 0.0) || !(cfg.horizon >= 0.0)) throw std::invalid_argument("sim: dt and horizon must be positive");
    const long steps = std::lround(cfg.horizon / cfg.dt);

    // Network evaluations depend on t only; RK stages 2 and 3 share a time.
    double cached_t = std::nan("");
    net::LieBundle cached;
    auto bundle_at = [&](double t, const ExoState& w) -> const net::LieBundle& {
        if (t != cached_t) {
            cached = model.evaluate(w.w1, w.w2, omega);
            cached_t = t;
        }
        return cached;
    };
    auto wrench_at = [&](double t, const RigidState& x) {
        const ExoState w = regeq::exo_solution(w0, omega, t);
        const ControlOutput c = control_from(x, bundle_at(t, w), w, omega, g, hp);
        return applied_wrench(x, c, hp, cfg.actuation);
    };

    SimResult r;
    r.t.reserve(static_cast<std::size_t>(steps) + 1);
    RigidState x = init_on_manifold(w0, omega, model);
    double sum = 0.0;
    for (long i = 0;; ++i) {
        const double t = static_cast<double>(i) * cfg.dt;
        const ExoState w = regeq::exo_solution(w0, omega, t);
        BodyWrench applied;
        try {
            applied = wrench_at(t, x);
        } catch (const std::exception&) {
            r.diverged = true;
            r.diverge_time = t;
            break;
        }
        const double ez = x.p[2] - w.w1;
        r.t.push_back(t);
        r.w1_ref.push_back(w.w1);
        r.e_z.push_back(ez);
        r.states.push_back(x);
        r.wrench.push_back(applied);
        sum += std::abs(ez);
        r.max_abs_ez = std::max(r.max_abs_ez, std::abs(ez));
        if (i == steps) break;

        try {
            x = heli::rk4_step(x, wrench_at, t, cfg.dt, hp);
        } catch (const std::exception&) {
            r.diverged = true;
        }
        if (r.diverged || out_of_bounds(x, cfg.divergence_threshold)) {
            r.diverged = true;
            r.diverge_time = t + cfg.dt;
            break;
        }
    }
    if (!r.e_z.empty()) r.mean_abs_ez = sum / static_cast<double>(r.e_z.size());
    return r;
}

void write_trajectory_csv(std::ostream& os, const SimResult& r) {
    os << "t,w1_ref,e_z,p1,p2,p3,v1,v2,v3,psi,theta,phi,omega1,omega2,omega3,f1,f2,f3,tau1,tau2,tau3\n";
    std::vector<std::string> cells;
    for (std::size_t i = 0; i < r.t.size(); ++i) {
        cells = {csv::num(r.t[i]), csv::num(r.w1_ref[i]), csv::num(r.e_z[i])};
        const heli::StateVector s = r.states[i].pack();
        for (Eigen::Index k = 0; k < s.size(); ++k) cells.push_back(csv::num(s[k]));
        for (int k = 0; k < 3; ++k) cells.push_back(csv::num(r.wrench[i].force[k]));
        for (int k = 0; k < 3; ++k) cells.push_back(csv::num(r.wrench[i].torque[k]));
        csv::write_row(os, cells);
    }
}

// ---------------------------------------------------------------------------

std::vector<GridRow> grid_experiment(const std::vector<double>& w1_list, const std::vector<double>& omega_list,
                                     const SteadyStateModel& model, const Gains& g, const HeliParams& hp,
                                     const SimConfig& cfg, const SeenPredicate& seen, unsigned workers) {
    std::vector<GridRow> rows;
    for (double a : w1_list)
        for (double om : omega_list) rows.push_back({a, om, 0.0, false, seen ? seen(a, om) : false});

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) {
            const SimResult r = simulate({rows[i].w1_0, 0.0}, rows[i].omega, model, g, hp, cfg);
            rows[i].mean_abs_ez = r.mean_abs_ez;
            rows[i].diverged = r.diverged;
        }
    };
    const unsigned n = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(rows.size())));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows) {
    os << "w1_0,omega,mean_abs_ez,diverged,seen_in_training\n";
    for (const GridRow& r : rows)
        csv::write_row(os, {csv::num(r.w1_0), csv::num(r.omega), csv::num(r.mean_abs_ez), r.diverged ? "1" : "0",
                            r.seen_in_training ? "1" : "0"});
}

std::vector<GridRow> read_grid_csv(std::istream& is) {
    std::vector<GridRow> rows;
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("grid csv: missing header");
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto c = csv::split_line(line);
        if (c.size() != 5) throw std::runtime_error("grid csv line " + std::to_string(lineno) + ": expected 5 cells");
        try {
            rows.push_back({std::stod(c[0]), std::stod(c[1]), std::stod(c[2]), c[3] == "1", c[4] == "1"});
        } catch (const std::logic_error&) {
            throw std::runtime_error("grid csv line " + std::to_string(lineno) + ": malformed number");
        }
    }
    return rows;
}

ErrorStats error_stats(const std::vector<GridRow>& rows, int bins) {
    if (bins < 1) throw std::invalid_argument("error_stats: bins must be at least 1");
    ErrorStats s;
    std::vector<double> v;
    for (const GridRow& r : rows) {
        if (r.diverged) ++s.diverged;
        else v.push_back(r.mean_abs_ez);
    }
    if (v.empty()) throw EmptyStatistics("no non-diverged cells");
    s.cells = v.size();
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    s.mean = sum / static_cast<double>(v.size());
    const std::size_t mid = v.size() / 2;
    s.median = v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);

    const double lo = v.front(), hi = v.back();
    const double width = hi > lo ? (hi - lo) / bins : 1.0;
    s.histogram.edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) s.histogram.edges[static_cast<std::size_t>(i)] = lo + width * i;
    s.histogram.counts.assign(static_cast<std::size_t>(bins), 0);
    for (double x : v) {
        auto b = static_cast<std::size_t>((x - lo) / width);
        s.histogram.counts[std::min(b, static_cast<std::size_t>(bins) - 1)]++;
    }
    return s;
}

}  // namespace pinnreg::sim
