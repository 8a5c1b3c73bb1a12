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

// Closed-loop validation of learned steady-state maps.
//
// The controller applies the rotor wrench of the steady-state inputs
// c(w) as feedforward and adds PD corrections on the deviation from the
// zero-error manifold:
//
//   tau = tau_ff + J (Kr1 D(q)^-1 (psi, theta - pi_theta, phi - pi_phi) + Kr2 (omega_b - omega_ref))
//   f   = f_ff + R^T (Kl1 (p1, p2, p3 - w1) + Kl2 (v - v_ref))
//
// which is the law J(alpha + ...) + omega x J omega with alpha the angular
// acceleration produced by tau_ff.  On the manifold both corrections vanish.

#include <functional>
#include <optional>
#include <ostream>
#include <vector>

#include "pinnreg/heli.hpp"
#include "pinnreg/net.hpp"
#include "pinnreg/regeq.hpp"

namespace pinnreg::sim {

using heli::BodyWrench;
using heli::HeliParams;
using heli::RigidState;
using regeq::ExoState;

struct Gains {
    double kr1 = -2.0;
    double kr2 = -0.1;
    double kl1 = -20.0;
    double kl2 = -0.01;
};

enum class Actuation {
    DirectWrench,      // corrections applied as body force/torque
    ActuatorInverted,  // experimental: wrench mapped back through (T_M, T_T, a, b)
};

struct SimConfig {
    double horizon = 30.0;
    double dt = 0.01;
    double divergence_threshold = 1e4;
    Actuation actuation = Actuation::DirectWrench;
};

// Source of (pi_phi, pi_theta, c_b) and their Lie derivatives.
class SteadyStateModel {
public:
    virtual ~SteadyStateModel() = default;
    virtual net::LieBundle evaluate(double w1, double w2, double omega) const = 0;
};

class NetworkModel final : public SteadyStateModel {
public:
    explicit NetworkModel(const net::MlpParams& p) : p_(p) {}
    net::LieBundle evaluate(double w1, double w2, double omega) const override;

private:
    const net::MlpParams& p_;
};

// Fixed maps with vanishing Lie derivatives, e.g. the trim solution.
class ConstantModel final : public SteadyStateModel {
public:
    explicit ConstantModel(net::NetOutput out) : out_(out) {}
    net::LieBundle evaluate(double, double, double) const override;

private:
    net::NetOutput out_;
};

RigidState init_on_manifold(const ExoState& w0, double omega, const SteadyStateModel& model);

struct ControlOutput {
    BodyWrench command;      // f and tau, gravity excluded
    BodyWrench feedforward;  // rotor wrench of the steady-state inputs
    heli::ControlInputs u_ff;
};

ControlOutput control(const RigidState& x, const ExoState& w, double omega, const SteadyStateModel& model,
                      const Gains& g, const HeliParams& hp);

// Total body wrench (gravity included) the plant receives for a control output.
BodyWrench applied_wrench(const RigidState& x, const ControlOutput& c, const HeliParams& hp, Actuation mode);

struct SimResult {
    std::vector<double> t, w1_ref, e_z;
    std::vector<RigidState> states;
    std::vector<BodyWrench> wrench;
    double mean_abs_ez = 0.0;
    double max_abs_ez = 0.0;
    bool diverged = false;
    std::optional<double> diverge_time;
};

SimResult simulate(const ExoState& w0, double omega, const SteadyStateModel& model, const Gains& g,
                   const HeliParams& hp, const SimConfig& cfg = {});

void write_trajectory_csv(std::ostream& os, const SimResult& r);

// ---------------------------------------------------------------------------
// Grid experiments

struct GridRow {
    double w1_0 = 0.0;
    double omega = 0.0;
    double mean_abs_ez = 0.0;
    bool diverged = false;
    bool seen_in_training = false;
};

using SeenPredicate = std::function<bool(double w1_0, double omega)>;

// One closed-loop run per (w1_0, omega) from w0 = (w1_0, 0).  Rows ordered
// w1-major regardless of the number of workers.
std::vector<GridRow> grid_experiment(const std::vector<double>& w1_list, const std::vector<double>& omega_list,
                                     const SteadyStateModel& model, const Gains& g, const HeliParams& hp,
                                     const SimConfig& cfg, const SeenPredicate& seen = {}, unsigned workers = 1);

void write_grid_csv(std::ostream& os, const std::vector<GridRow>& rows);
std::vector<GridRow> read_grid_csv(std::istream& is);

struct Histogram {
    std::vector<double> edges;  // bins + 1 edges
    std::vector<std::size_t> counts;
};

struct ErrorStats {
    double mean = 0.0;
    double median = 0.0;
    std::size_t cells = 0;     // non-diverged
    std::size_t diverged = 0;
    Histogram histogram;
};

class EmptyStatistics : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Statistics of mean_abs_ez over non-diverged cells.  Throws
// EmptyStatistics when every cell diverged (or the table is empty).
ErrorStats error_stats(const std::vector<GridRow>& rows, int bins = 20);

}  // namespace pinnreg::sim
