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

#include <cstdint>
#include <functional>
#include <ostream>
#include <vector>

#include "pinnreg/heli.hpp"
#include "pinnreg/net.hpp"
#include "pinnreg/regeq.hpp"

namespace pinnreg::train {

using SamplePoint = regeq::Sample;

enum class Optimizer { Adam, GradientDescent };

struct TrainConfig {
    std::vector<double> radii = {0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0};
    std::vector<double> omega_set = {0.25, 0.5, 0.75, 1.0};
    double lr_init = 1e-3;
    double lr_final = 1e-6;
    int epochs = 100;
    double lambda = 0.1;
    int batch_size = 1024;
    std::uint64_t seed = 0;
    int target_samples = 24499;
    std::vector<int> layer_dims = net::kDefaultLayerDims;
    Optimizer optimizer = Optimizer::Adam;

    // Throws std::invalid_argument naming the offending field.
    void validate() const;
    double max_radius() const;
    double max_omega() const;
    net::Normalization normalization() const { return {max_radius() > 0.0 ? max_radius() : 1.0, max_omega()}; }
};

// Angular samples per unit radius so that the total count is closest to
// target_samples.
double angular_density(const TrainConfig& cfg);

// Polar training set: on radius r, max(1, round(kappa r)) uniformly spaced
// angles in [0, 2 pi); a zero radius contributes the single point (0, 0).
// Repeated for every frequency in omega_set.
std::vector<SamplePoint> sample_grid(const TrainConfig& cfg);

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    regeq::LossReport loss;  // sample-weighted means over the epoch
    int rejected_steps = 0;
};

struct TrainResult {
    net::MlpParams params;
    std::vector<EpochRecord> history;
};

class TrainingAborted : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Learning rate of a given epoch: geometric from lr_init to lr_final.
double learning_rate(const TrainConfig& cfg, int epoch);

using ProgressFn = std::function<void(const EpochRecord&)>;

// Mini-batch training.  A step whose loss or gradient is not finite is
// skipped and the learning rate halved; ten consecutive failures abort.
TrainResult train(const TrainConfig& cfg, net::MlpParams init, const heli::HeliParams& hp,
                  const ProgressFn& progress = {});

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history);

// ---------------------------------------------------------------------------
// Residual landscape

struct GridSpec {
    enum class Kind { Rect, Polar };
    Kind kind = Kind::Polar;
    double extent = 6.0;  // half-width (rect) or max radius (polar)
    int n1 = 25;          // w1 count (rect) or radius count (polar)
    int n2 = 48;          // w2 count (rect) or angle count (polar)
    std::vector<double> omegas = {1.0};

    std::size_t size() const;
};

struct LandscapeRow {
    double w1 = 0.0, w2 = 0.0, omega = 0.0, loss = 0.0;
    bool operator<(const LandscapeRow& o) const;
};

// Per-point total residual, rows sorted by (w1, w2, omega).
std::vector<LandscapeRow> residual_landscape(const net::MlpParams& p, const GridSpec& spec,
                                             const heli::HeliParams& hp, double lambda);

void write_landscape_csv(std::ostream& os, const std::vector<LandscapeRow>& rows);

}  // namespace pinnreg::train
