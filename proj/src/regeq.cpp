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

#include "pinnreg/regeq.hpp"

#include <Eigen/Dense>

namespace pinnreg::regeq {

std::array<double, 2> exo_rhs(const ExoState& w, double omega) { return {omega * w.w2, -omega * w.w1}; }

ExoState exo_solution(const ExoState& w0, double omega, double t) {
    const double c = std::cos(omega * t), s = std::sin(omega * t);
    return {w0.w1 * c + w0.w2 * s, -w0.w1 * s + w0.w2 * c};
}

SteadyMaps steady_maps(double pi_phi, double pi_theta, double c_b, const ExoState& w, double omega,
                       const HeliParams& hp, Mode mode) {
    return steady_maps<double>(pi_phi, pi_theta, c_b, k_of_w(w.w1, omega, hp), mode);
}

ResidualBreakdown pde_residuals(const net::LieBundle& lb, const ExoState& w, double omega,
                                const HeliParams& hp, double lambda) {
    BundleT<double> b;
    b.out = lb.out.as_array();
    b.l1 = lb.l1;
    b.l2 = lb.l2;
    const ResidualsT<double> r = residuals(b, w, omega, hp);
    ResidualBreakdown out;
    out.r1 = r.r1;
    out.r2 = r.r2;
    out.r3 = r.r3;
    out.bc = r.bc;
    out.penalty = r.penalty;
    out.feasible = r.feasible;
    out.total = sample_objective(r, lambda);
    return out;
}

namespace {

struct BatchColumns {
    std::vector<double> w1, w2, omega;
};

BatchColumns split(std::span<const Sample> batch) {
    BatchColumns c;
    c.w1.reserve(batch.size());
    c.w2.reserve(batch.size());
    c.omega.reserve(batch.size());
    for (const Sample& s : batch) {
        c.w1.push_back(s.w1);
        c.w2.push_back(s.w2);
        c.omega.push_back(s.omega);
    }
    return c;
}

void accumulate(LossReport& rep, double r1, double r2, double r3, double bc, double penalty, double obj,
                bool feasible) {
    rep.pde1 += std::abs(r1);
    rep.pde2 += std::abs(r2);
    rep.pde3 += std::abs(r3);
    rep.bc += bc;
    rep.penalty += penalty;
    rep.total += obj;
    if (!feasible) ++rep.infeasible;
}

void finish(LossReport& rep, std::size_t n) {
    const double inv = 1.0 / static_cast<double>(n);
    rep.pde1 *= inv;
    rep.pde2 *= inv;
    rep.pde3 *= inv;
    rep.bc *= inv;
    rep.penalty *= inv;
    rep.total *= inv;
    if (!std::isfinite(rep.total)) throw NonFiniteLoss("loss is not finite");
}

}  // namespace

LossReport loss(const net::MlpParams& p, std::span<const Sample> batch, double lambda, const HeliParams& hp) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    const BatchColumns c = split(batch);
    const net::JetOutputs j = net::jet_forward(p, c.w1, c.w2, c.omega);
    LossReport rep;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto col = static_cast<Eigen::Index>(i);
        BundleT<double> b;
        for (int r = 0; r < 3; ++r) {
            b.out[r] = j.value(r, col);
            b.l1[r] = j.d1(r, col);
            b.l2[r] = j.d2(r, col);
        }
        const ResidualsT<double> res = residuals(b, {c.w1[i], c.w2[i]}, c.omega[i], hp);
        accumulate(rep, res.r1, res.r2, res.r3, res.bc, res.penalty, sample_objective(res, lambda),
                   res.feasible);
    }
    finish(rep, batch.size());
    return rep;
}

LossReport loss_and_gradient(const net::MlpParams& p, std::span<const Sample> batch, double lambda,
                             const HeliParams& hp, std::vector<double>& grad) {
    if (batch.empty()) throw std::invalid_argument("loss: empty batch");
    const BatchColumns c = split(batch);
    net::JetCache cache;
    const net::JetOutputs j = net::jet_forward(p, c.w1, c.w2, c.omega, &cache);
    const auto n = static_cast<Eigen::Index>(batch.size());
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    net::JetOutputs adj;
    adj.value.setZero(3, n);
    adj.d1.setZero(3, n);
    adj.d2.setZero(3, n);

    LossReport rep;
    ad::Tape tape;
    tape.reserve(512);
    std::array<double, 9> seeds{};
    for (Eigen::Index i = 0; i < n; ++i) {
        tape.clear();
        for (int r = 0; r < 3; ++r) {
            seeds[r] = j.value(r, i);
            seeds[3 + r] = j.d1(r, i);
            seeds[6 + r] = j.d2(r, i);
        }
        const std::vector<ad::Var> leaves = tape.variables(seeds);
        BundleT<ad::Var> b;
        for (int r = 0; r < 3; ++r) {
            b.out[r] = leaves[r];
            b.l1[r] = leaves[3 + r];
            b.l2[r] = leaves[6 + r];
        }
        const auto idx = static_cast<std::size_t>(i);
        const ResidualsT<ad::Var> res = residuals(b, {c.w1[idx], c.w2[idx]}, c.omega[idx], hp);
        const ad::Var obj = sample_objective(res, lambda);
        accumulate(rep, res.r1.value(), res.r2.value(), res.r3.value(), res.bc.value(), res.penalty.value(),
                   obj.value(), res.feasible);

        const std::vector<double> g = tape.gradient(obj, leaves);
        for (int r = 0; r < 3; ++r) {
            adj.value(r, i) = g[r] * inv_n;
            adj.d1(r, i) = g[3 + r] * inv_n;
            adj.d2(r, i) = g[6 + r] * inv_n;
        }
    }
    finish(rep, batch.size());

    grad.assign(p.size(), 0.0);
    net::jet_backward(p, cache, adj, grad);
    return rep;
}

std::array<double, 3> solve_trim(const HeliParams& hp, double k, std::array<double, 3> guess) {
    using ad::Dual;
    auto torque = [&](const std::array<Dual, 3>& x) {
        const SteadyMapsT<Dual> m = steady_maps(x[0], x[1], x[2], k, Mode::Strict);
        const heli::ControlInputsT<Dual> u{m.c_tm, m.c_tt, m.c_a, x[2]};
        return heli::rotor_wrench(u, hp).torque;
    };

    std::array<double, 3> x = guess;
    for (int iter = 0; iter < 50; ++iter) {
        Eigen::Matrix3d jac;
        Eigen::Vector3d f;
        for (int col = 0; col < 3; ++col) {
            std::array<Dual, 3> xd{Dual(x[0]), Dual(x[1]), Dual(x[2])};
            xd[col].deriv = 1.0;
            const auto t = torque(xd);
            for (int row = 0; row < 3; ++row) {
                jac(row, col) = t[row].deriv;
                f[row] = t[row].value;
            }
        }
        if (f.lpNorm<Eigen::Infinity>() < 1e-14) break;
        const Eigen::Vector3d step = jac.partialPivLu().solve(f);
        for (int i = 0; i < 3; ++i) x[i] -= step[i];
        if (step.lpNorm<Eigen::Infinity>() < 1e-16) break;
    }
    return x;
}

}  // namespace pinnreg::regeq
