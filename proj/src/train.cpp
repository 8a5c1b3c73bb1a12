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

#include "pinnreg/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "pinnreg/csv.hpp"

namespace pinnreg::train {

void TrainConfig::validate() const {
    if (radii.empty()) throw std::invalid_argument("train.radii must not be empty");
    for (std::size_t i = 0; i < radii.size(); ++i) {
        if (!(radii[i] >= 0.0)) throw std::invalid_argument("train.radii must be nonnegative");
        if (i && !(radii[i] > radii[i - 1])) throw std::invalid_argument("train.radii must be strictly ascending");
    }
    if (omega_set.empty()) throw std::invalid_argument("train.omega_set must not be empty");
    for (double w : omega_set)
        if (!(w > 0.0)) throw std::invalid_argument("train.omega_set entries must be positive");
    if (!(lr_init > 0.0) || !(lr_final > 0.0)) throw std::invalid_argument("train learning rates must be positive");
    if (!(lr_final < lr_init)) throw std::invalid_argument("train.lr_final must be below train.lr_init");
    if (epochs < 1) throw std::invalid_argument("train.epochs must be at least 1");
    if (batch_size < 1) throw std::invalid_argument("train.batch_size must be at least 1");
    if (!(lambda >= 0.0)) throw std::invalid_argument("train.lambda must be nonnegative");
    if (target_samples < 1) throw std::invalid_argument("train.target_samples must be at least 1");
}

double TrainConfig::max_radius() const { return radii.empty() ? 0.0 : radii.back(); }

double TrainConfig::max_omega() const { return *std::max_element(omega_set.begin(), omega_set.end()); }

namespace {

long circle_count(double kappa, double r) {
    if (r == 0.0) return 1;
    return std::max(1L, std::lround(kappa * r));
}

long total_count(const TrainConfig& cfg, double kappa) {
    long per_omega = 0;
    for (double r : cfg.radii) per_omega += circle_count(kappa, r);
    return per_omega * static_cast<long>(cfg.omega_set.size());
}

}  // namespace

double angular_density(const TrainConfig& cfg) {
    const double target = cfg.target_samples;
    double lo = 0.0;
    double hi = std::max(1.0, target);
    if (total_count(cfg, hi) < target) return hi;  // all radii zero
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (total_count(cfg, mid) >= target) hi = mid;
        else lo = mid;
    }
    const double err_hi = std::abs(static_cast<double>(total_count(cfg, hi)) - target);
    const double err_lo = std::abs(static_cast<double>(total_count(cfg, lo)) - target);
    return err_lo < err_hi ? lo : hi;
}

std::vector<SamplePoint> sample_grid(const TrainConfig& cfg) {
    const double kappa = angular_density(cfg);
    std::vector<SamplePoint> out;
    for (double omega : cfg.omega_set) {
        for (double r : cfg.radii) {
            const long n = circle_count(kappa, r);
            for (long m = 0; m < n; ++m) {
                const double alpha = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
                out.push_back({r * std::cos(alpha), r * std::sin(alpha), omega});
            }
        }
    }
    return out;
}

double learning_rate(const TrainConfig& cfg, int epoch) {
    if (cfg.epochs <= 1) return cfg.lr_init;
    const double f = static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1);
    return cfg.lr_init * std::pow(cfg.lr_final / cfg.lr_init, f);
}

namespace {

class Adam {
public:
    explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

    void step(std::span<double> x, std::span<const double> g, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(kBeta1, t_);
        const double c2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t i = 0; i < x.size(); ++i) {
            m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g[i];
            v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g[i] * g[i];
            x[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEps);
        }
    }

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;
    std::vector<double> m_, v_;
    long t_ = 0;
};

bool all_finite(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

void add_weighted(regeq::LossReport& acc, const regeq::LossReport& r, double w) {
    acc.total += w * r.total;
    acc.pde1 += w * r.pde1;
    acc.pde2 += w * r.pde2;
    acc.pde3 += w * r.pde3;
    acc.bc += w * r.bc;
    acc.penalty += w * r.penalty;
    acc.infeasible += r.infeasible;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, net::MlpParams init, const heli::HeliParams& hp,
                  const ProgressFn& progress) {
    cfg.validate();
    const std::vector<SamplePoint> samples = sample_grid(cfg);
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), samples.size());

    TrainResult result;
    result.params = std::move(init);
    net::MlpParams& p = result.params;

    Adam adam(p.size());
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<SamplePoint> mb;
    std::vector<double> grad;
    int consecutive_failures = 0;
    double lr_scale = 1.0;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = learning_rate(cfg, epoch) * lr_scale;
        std::size_t seen = 0;

        for (std::size_t start = 0; start < samples.size(); start += batch) {
            const std::size_t end = std::min(samples.size(), start + batch);
            mb.clear();
            for (std::size_t i = start; i < end; ++i) mb.push_back(samples[order[i]]);

            regeq::LossReport rep;
            bool ok = true;
            try {
                rep = regeq::loss_and_gradient(p, mb, cfg.lambda, hp, grad);
                ok = all_finite(grad);
            } catch (const regeq::NonFiniteLoss&) {
                ok = false;
            }
            if (!ok) {
                ++rec.rejected_steps;
                lr_scale *= 0.5;
                rec.lr = learning_rate(cfg, epoch) * lr_scale;
                if (++consecutive_failures >= 10)
                    throw TrainingAborted("training aborted: 10 consecutive non-finite steps");
                continue;
            }
            consecutive_failures = 0;
            add_weighted(rec.loss, rep, static_cast<double>(mb.size()));
            seen += mb.size();

            if (cfg.optimizer == Optimizer::Adam) {
                adam.step(p.values(), grad, rec.lr);
            } else {
                auto x = p.values();
                for (std::size_t i = 0; i < x.size(); ++i) x[i] -= rec.lr * grad[i];
            }
        }
        if (seen) {
            const double inv = 1.0 / static_cast<double>(seen);
            rec.loss.total *= inv;
            rec.loss.pde1 *= inv;
            rec.loss.pde2 *= inv;
            rec.loss.pde3 *= inv;
            rec.loss.bc *= inv;
            rec.loss.penalty *= inv;
        }
        result.history.push_back(rec);
        if (progress) progress(rec);
    }
    return result;
}

void write_history_csv(std::ostream& os, const std::vector<EpochRecord>& history) {
    os << "epoch,lr,L_PDE1,L_PDE2,L_PDE3,L_BC,total\n";
    for (const EpochRecord& r : history) {
        csv::write_row(os, {std::to_string(r.epoch), csv::num(r.lr), csv::num(r.loss.pde1), csv::num(r.loss.pde2),
                            csv::num(r.loss.pde3), csv::num(r.loss.bc), csv::num(r.loss.total)});
    }
}

// ---------------------------------------------------------------------------

std::size_t GridSpec::size() const {
    if (n1 <= 0 || n2 <= 0) return 0;
    return static_cast<std::size_t>(n1) * static_cast<std::size_t>(n2) * omegas.size();
}

bool LandscapeRow::operator<(const LandscapeRow& o) const {
    if (w1 != o.w1) return w1 < o.w1;
    if (w2 != o.w2) return w2 < o.w2;
    return omega < o.omega;
}

namespace {

double linspace(double a, double b, int n, int i) {
    if (n == 1) return a;
    return a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
}

}  // namespace

std::vector<LandscapeRow> residual_landscape(const net::MlpParams& p, const GridSpec& spec,
                                             const heli::HeliParams& hp, double lambda) {
    std::vector<LandscapeRow> rows;
    rows.reserve(spec.size());
    std::vector<double> w1, w2, om;
    for (double omega : spec.omegas) {
        for (int i = 0; i < spec.n1; ++i) {
            for (int j = 0; j < spec.n2; ++j) {
                double a, b;
                if (spec.kind == GridSpec::Kind::Rect) {
                    a = linspace(-spec.extent, spec.extent, spec.n1, i);
                    b = linspace(-spec.extent, spec.extent, spec.n2, j);
                } else {
                    const double r = linspace(0.0, spec.extent, spec.n1, i);
                    const double alpha = 2.0 * std::numbers::pi * j / spec.n2;
                    a = r * std::cos(alpha);
                    b = r * std::sin(alpha);
                }
                w1.push_back(a);
                w2.push_back(b);
                om.push_back(omega);
            }
        }
    }
    if (w1.empty()) return rows;
    const net::JetOutputs j = net::jet_forward(p, w1, w2, om);
    for (std::size_t i = 0; i < w1.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        regeq::BundleT<double> b;
        for (int r = 0; r < 3; ++r) {
            b.out[r] = j.value(r, c);
            b.l1[r] = j.d1(r, c);
            b.l2[r] = j.d2(r, c);
        }
        const auto res = regeq::residuals(b, {w1[i], w2[i]}, om[i], hp);
        rows.push_back({w1[i], w2[i], om[i], regeq::sample_objective(res, lambda)});
    }
    std::sort(rows.begin(), rows.end());
    return rows;
}

void write_landscape_csv(std::ostream& os, const std::vector<LandscapeRow>& rows) {
    os << "w1,w2,omega,loss\n";
    for (const LandscapeRow& r : rows)
        csv::write_row(os, {csv::num(r.w1), csv::num(r.w2), csv::num(r.omega), csv::num(r.loss)});
}

}  // namespace pinnreg::train
