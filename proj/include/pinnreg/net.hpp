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

// Solution operator N(w1, w2, Omega) -> (pi_phi, pi_theta, c_b).
//
// A fully connected tanh network with a linear output layer.  Inputs are
// normalized as (w1 / w_scale, w2 / w_scale, Omega / omega_scale).  Lie
// derivatives along the exosystem field w' = S w hold Omega fixed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pinnreg/autodiff.hpp"

namespace pinnreg::net {

inline const std::vector<int> kDefaultLayerDims = {3, 32, 256, 256, 32, 3};
inline constexpr int kSchemaVersion = 1;

class ModelFormatError : public std::runtime_error {
public:
    ModelFormatError(std::string field, const std::string& what);
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

struct Normalization {
    double w_scale = 6.0;
    double omega_scale = 1.0;

    bool operator==(const Normalization&) const = default;
};

// Parameters stored flat: for each layer k, W_k (dims[k+1] x dims[k],
// row-major) followed by b_k.
class MlpParams {
public:
    MlpParams() = default;
    MlpParams(std::vector<int> layer_dims, Normalization norm);

    const std::vector<int>& layer_dims() const noexcept { return dims_; }
    std::size_t layers() const noexcept { return dims_.size() - 1; }
    const std::string& activation() const noexcept { return activation_; }
    const Normalization& normalization() const noexcept { return norm_; }
    std::size_t size() const noexcept { return values_.size(); }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> weight(std::size_t k);
    std::span<const double> weight(std::size_t k) const;
    std::span<double> bias(std::size_t k);
    std::span<const double> bias(std::size_t k) const;
    std::size_t weight_offset(std::size_t k) const { return offsets_[k]; }
    std::size_t bias_offset(std::size_t k) const {
        return offsets_[k] + static_cast<std::size_t>(dims_[k + 1]) * dims_[k];
    }

    bool operator==(const MlpParams&) const = default;

private:
    std::vector<int> dims_;
    std::string activation_ = "tanh";
    Normalization norm_;
    std::vector<std::size_t> offsets_;
    std::vector<double> values_;
};

struct NetOutput {
    double pi_phi = 0.0;
    double pi_theta = 0.0;
    double c_b = 0.0;

    std::array<double, 3> as_array() const { return {pi_phi, pi_theta, c_b}; }
};

struct LieBundle {
    NetOutput out;
    std::array<double, 3> l1{};  // L_S of each output
    std::array<double, 3> l2{};  // L_S^2 of each output
};

// Glorot-uniform weights and zero biases, deterministic per seed.
MlpParams init(std::uint64_t seed, const std::vector<int>& layer_dims = kDefaultLayerDims,
               Normalization norm = {});

// Network evaluation on any scalar type of the autodiff module.
template <class T>
std::array<T, 3> forward_generic(const MlpParams& p, const T& w1, const T& w2, const T& omega) {
    using std::tanh;
    const auto& dims = p.layer_dims();
    std::vector<T> a = {w1 / p.normalization().w_scale, w2 / p.normalization().w_scale,
                        omega / p.normalization().omega_scale};
    std::vector<T> z;
    for (std::size_t k = 0; k < p.layers(); ++k) {
        const auto w = p.weight(k);
        const auto b = p.bias(k);
        const auto rows = static_cast<std::size_t>(dims[k + 1]);
        const auto cols = static_cast<std::size_t>(dims[k]);
        z.assign(rows, T{});
        for (std::size_t i = 0; i < rows; ++i) {
            T acc = T(b[i]);
            for (std::size_t j = 0; j < cols; ++j) acc += T(w[i * cols + j]) * a[j];
            z[i] = (k + 1 < p.layers()) ? tanh(acc) : acc;
        }
        a.swap(z);
    }
    return {a[0], a[1], a[2]};
}

NetOutput forward(const MlpParams& p, double w1, double w2, double omega);

// Lie derivatives through forward-mode autodiff: HyperDual seeded with S w
// gives (S w)^T H (S w), a Dual pass seeded with S (S w) gives the drift term.
LieBundle lie_bundle(const MlpParams& p, double w1, double w2, double omega);

// ---------------------------------------------------------------------------
// Batched second-order jet propagation (Taylor mode along w' = S w).
//
// Each layer keeps [value | d/dt | d2/dt2] side by side, B columns each, so
// one matrix product advances all three.  jet_backward is the exact adjoint
// of jet_forward; training uses this pair instead of the scalar tape for the
// dense layers.

struct JetCache {
    Eigen::Index batch = 0;
    std::vector<Eigen::MatrixXd> act;  // act[0] = inputs, act[k+1] = output of layer k
    std::vector<Eigen::MatrixXd> pre;  // pre[k] = pre-activation jets of hidden layer k
};

struct JetOutputs {
    Eigen::Matrix<double, 3, Eigen::Dynamic> value, d1, d2;
};

JetOutputs jet_forward(const MlpParams& p, std::span<const double> w1, std::span<const double> w2,
                       std::span<const double> omega, JetCache* cache = nullptr);

// Accumulates dL/dtheta into grad (size p.size()) from adjoints of the outputs.
void jet_backward(const MlpParams& p, const JetCache& cache, const JetOutputs& adjoint,
                  std::span<double> grad);

// Fast single-point Lie bundle through jet_forward.
LieBundle lie_bundle_fast(const MlpParams& p, double w1, double w2, double omega);

// ---------------------------------------------------------------------------
// Serialization (UTF-8 JSON).

std::string to_json(const MlpParams& p);
MlpParams from_json(const std::string& text);
void save(const MlpParams& p, const std::filesystem::path& path);
MlpParams load(const std::filesystem::path& path);

}  // namespace pinnreg::net
