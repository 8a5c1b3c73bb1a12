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

#include "pinnreg/net.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace pinnreg::net {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

ModelFormatError::ModelFormatError(std::string field, const std::string& what)
    : std::runtime_error("model file: field '" + field + "': " + what), field_(std::move(field)) {}

MlpParams::MlpParams(std::vector<int> layer_dims, Normalization norm)
    : dims_(std::move(layer_dims)), norm_(norm) {
    if (dims_.size() < 2) throw std::invalid_argument("MlpParams: need at least input and output layers");
    if (dims_.front() != 3 || dims_.back() != 3)
        throw std::invalid_argument("MlpParams: input and output dimension must be 3");
    std::size_t total = 0;
    for (std::size_t k = 0; k + 1 < dims_.size(); ++k) {
        if (dims_[k] <= 0 || dims_[k + 1] <= 0) throw std::invalid_argument("MlpParams: non-positive layer width");
        offsets_.push_back(total);
        total += static_cast<std::size_t>(dims_[k + 1]) * (dims_[k] + 1);
    }
    values_.assign(total, 0.0);
}

std::span<double> MlpParams::weight(std::size_t k) {
    return std::span<double>(values_).subspan(offsets_[k], static_cast<std::size_t>(dims_[k + 1]) * dims_[k]);
}
std::span<const double> MlpParams::weight(std::size_t k) const {
    return std::span<const double>(values_).subspan(offsets_[k],
                                                    static_cast<std::size_t>(dims_[k + 1]) * dims_[k]);
}
std::span<double> MlpParams::bias(std::size_t k) {
    return std::span<double>(values_).subspan(bias_offset(k), static_cast<std::size_t>(dims_[k + 1]));
}
std::span<const double> MlpParams::bias(std::size_t k) const {
    return std::span<const double>(values_).subspan(bias_offset(k), static_cast<std::size_t>(dims_[k + 1]));
}

MlpParams init(std::uint64_t seed, const std::vector<int>& layer_dims, Normalization norm) {
    MlpParams p(layer_dims, norm);
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < p.layers(); ++k) {
        const double fan_in = layer_dims[k];
        const double fan_out = layer_dims[k + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (double& w : p.weight(k)) w = dist(rng);
    }
    return p;
}

NetOutput forward(const MlpParams& p, double w1, double w2, double omega) {
    const auto y = forward_generic<double>(p, w1, w2, omega);
    return {y[0], y[1], y[2]};
}

LieBundle lie_bundle(const MlpParams& p, double w1, double w2, double omega) {
    using ad::Dual;
    using ad::HyperDual;
    // S w and S (S w) = -Omega^2 w.
    const double v1 = omega * w2, v2 = -omega * w1;
    const double a1 = -omega * omega * w1, a2 = -omega * omega * w2;

    const auto h = forward_generic<HyperDual>(p, HyperDual(w1, v1, v1, 0.0), HyperDual(w2, v2, v2, 0.0),
                                              HyperDual(omega));
    const auto d = forward_generic<Dual>(p, Dual(w1, a1), Dual(w2, a2), Dual(omega));

    LieBundle lb;
    lb.out = {h[0].value, h[1].value, h[2].value};
    for (int i = 0; i < 3; ++i) {
        lb.l1[i] = h[i].d1;
        lb.l2[i] = h[i].d12 + d[i].deriv;
    }
    return lb;
}

// ---------------------------------------------------------------------------
// Jet propagation

namespace {

Eigen::Map<const RowMajor> weight_matrix(const MlpParams& p, std::size_t k) {
    const auto w = p.weight(k);
    return Eigen::Map<const RowMajor>(w.data(), p.layer_dims()[k + 1], p.layer_dims()[k]);
}

}  // namespace

JetOutputs jet_forward(const MlpParams& p, std::span<const double> w1, std::span<const double> w2,
                       std::span<const double> omega, JetCache* cache) {
    const auto n = static_cast<Eigen::Index>(w1.size());
    if (w2.size() != w1.size() || omega.size() != w1.size())
        throw std::invalid_argument("jet_forward: input size mismatch");

    const double ws = p.normalization().w_scale;
    const double os = p.normalization().omega_scale;
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(3, 3 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double a = w1[i], b = w2[i], om = omega[i];
        x(0, i) = a / ws;
        x(1, i) = b / ws;
        x(2, i) = om / os;
        x(0, n + i) = om * b / ws;
        x(1, n + i) = -om * a / ws;
        x(0, 2 * n + i) = -om * om * a / ws;
        x(1, 2 * n + i) = -om * om * b / ws;
    }

    std::vector<Eigen::MatrixXd> local;
    std::vector<Eigen::MatrixXd>& act = cache ? cache->act : local;
    act.clear();
    act.reserve(p.layers() + 1);
    if (cache) cache->pre.clear();
    act.push_back(std::move(x));

    for (std::size_t k = 0; k < p.layers(); ++k) {
        const auto w = weight_matrix(p, k);
        const auto b = Eigen::Map<const Eigen::VectorXd>(p.bias(k).data(), p.layer_dims()[k + 1]);
        Eigen::MatrixXd z = w * act[k];
        z.leftCols(n).colwise() += b;
        if (k + 1 == p.layers()) {
            act.push_back(std::move(z));
            break;
        }
        // tanh jet: a = tanh z, a' = s1 z', a'' = s1 z'' + s2 z'^2.
        Eigen::MatrixXd a(z.rows(), z.cols());
        const Eigen::ArrayXXd a0 = z.leftCols(n).array().tanh();
        const Eigen::ArrayXXd s1 = 1.0 - a0.square();
        const Eigen::ArrayXXd s2 = -2.0 * a0 * s1;
        const auto z1 = z.middleCols(n, n).array();
        const auto z2 = z.rightCols(n).array();
        a.leftCols(n) = a0.matrix();
        a.middleCols(n, n) = (s1 * z1).matrix();
        a.rightCols(n) = (s1 * z2 + s2 * z1.square()).matrix();
        if (cache) cache->pre.push_back(std::move(z));
        act.push_back(std::move(a));
    }

    JetOutputs out;
    const Eigen::MatrixXd& y = act.back();
    out.value = y.leftCols(n);
    out.d1 = y.middleCols(n, n);
    out.d2 = y.rightCols(n);
    if (cache) cache->batch = n;
    return out;
}

void jet_backward(const MlpParams& p, const JetCache& cache, const JetOutputs& adjoint,
                  std::span<double> grad) {
    const Eigen::Index n = cache.batch;
    if (grad.size() != p.size()) throw std::invalid_argument("jet_backward: gradient size mismatch");
    if (cache.act.size() != p.layers() + 1) throw std::invalid_argument("jet_backward: stale cache");

    Eigen::MatrixXd g(3, 3 * n);
    g << adjoint.value, adjoint.d1, adjoint.d2;

    for (std::size_t k = p.layers(); k-- > 0;) {
        const int rows = p.layer_dims()[k + 1];
        const int cols = p.layer_dims()[k];
        Eigen::Map<RowMajor> gw(grad.data() + p.weight_offset(k), rows, cols);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + p.bias_offset(k), rows);
        gw.noalias() += g * cache.act[k].transpose();
        gb += g.leftCols(n).rowwise().sum();
        if (k == 0) break;

        const Eigen::MatrixXd ga = weight_matrix(p, k).transpose() * g;
        // Adjoint of the tanh jet of hidden layer k-1.
        const Eigen::MatrixXd& z = cache.pre[k - 1];
        const Eigen::ArrayXXd a0 = cache.act[k].leftCols(n).array();
        const Eigen::ArrayXXd s1 = 1.0 - a0.square();
        const Eigen::ArrayXXd s2 = -2.0 * a0 * s1;
        const Eigen::ArrayXXd s3 = -2.0 * s1.square() + 4.0 * a0.square() * s1;
        const auto z1 = z.middleCols(n, n).array();
        const auto z2 = z.rightCols(n).array();
        const auto g0 = ga.leftCols(n).array();
        const auto g1 = ga.middleCols(n, n).array();
        const auto g2 = ga.rightCols(n).array();

        Eigen::MatrixXd next(ga.rows(), 3 * n);
        next.leftCols(n) = (g0 * s1 + g1 * z1 * s2 + g2 * (z2 * s2 + z1.square() * s3)).matrix();
        next.middleCols(n, n) = (g1 * s1 + 2.0 * g2 * s2 * z1).matrix();
        next.rightCols(n) = (g2 * s1).matrix();
        g.swap(next);
    }
}

LieBundle lie_bundle_fast(const MlpParams& p, double w1, double w2, double omega) {
    const JetOutputs j = jet_forward(p, std::span<const double>(&w1, 1), std::span<const double>(&w2, 1),
                                     std::span<const double>(&omega, 1));
    LieBundle lb;
    lb.out = {j.value(0, 0), j.value(1, 0), j.value(2, 0)};
    for (int i = 0; i < 3; ++i) {
        lb.l1[i] = j.d1(i, 0);
        lb.l2[i] = j.d2(i, 0);
    }
    return lb;
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_json(const MlpParams& p) {
    nlohmann::ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["layer_dims"] = p.layer_dims();
    j["activation"] = p.activation();
    j["normalization"] = {{"w_scale", p.normalization().w_scale},
                          {"omega_scale", p.normalization().omega_scale}};
    nlohmann::ordered_json weights = nlohmann::ordered_json::array();
    nlohmann::ordered_json biases = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < p.layers(); ++k) {
        const auto w = p.weight(k);
        const auto b = p.bias(k);
        weights.push_back(std::vector<double>(w.begin(), w.end()));
        biases.push_back(std::vector<double>(b.begin(), b.end()));
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j.dump() + "\n";
}

namespace {

const nlohmann::json& require(const nlohmann::json& j, const char* field) {
    if (!j.is_object() || !j.contains(field)) throw ModelFormatError(field, "missing");
    return j.at(field);
}

double require_number(const nlohmann::json& j, const char* field, const std::string& name) {
    const auto& v = require(j, field);
    if (!v.is_number()) throw ModelFormatError(name, "expected a number");
    return v.get<double>();
}

void fill_layer(const nlohmann::json& arr, std::size_t k, std::span<double> dst, const char* field) {
    const std::string name = std::string(field) + "[" + std::to_string(k) + "]";
    if (!arr.is_array() || k >= arr.size()) throw ModelFormatError(name, "missing layer");
    const auto& layer = arr[k];
    if (!layer.is_array()) throw ModelFormatError(name, "expected an array");
    if (layer.size() != dst.size())
        throw ModelFormatError(name, "expected " + std::to_string(dst.size()) + " values, found " +
                                         std::to_string(layer.size()));
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (!layer[i].is_number()) throw ModelFormatError(name, "non-numeric entry");
        dst[i] = layer[i].get<double>();
    }
}

}  // namespace

MlpParams from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ModelFormatError("<document>", e.what());
    }
    const auto& version = require(j, "schema_version");
    if (!version.is_number_integer() || version.get<int>() != kSchemaVersion)
        throw ModelFormatError("schema_version", "unsupported version");

    const auto& dims_json = require(j, "layer_dims");
    if (!dims_json.is_array()) throw ModelFormatError("layer_dims", "expected an array");
    std::vector<int> dims;
    for (const auto& d : dims_json) {
        if (!d.is_number_integer()) throw ModelFormatError("layer_dims", "expected integers");
        dims.push_back(d.get<int>());
    }

    const auto& act = require(j, "activation");
    if (!act.is_string() || act.get<std::string>() != "tanh")
        throw ModelFormatError("activation", "unsupported activation");

    const auto& norm_json = require(j, "normalization");
    Normalization norm;
    norm.w_scale = require_number(norm_json, "w_scale", "normalization.w_scale");
    norm.omega_scale = require_number(norm_json, "omega_scale", "normalization.omega_scale");
    if (!(norm.w_scale > 0.0)) throw ModelFormatError("normalization.w_scale", "must be positive");
    if (!(norm.omega_scale > 0.0)) throw ModelFormatError("normalization.omega_scale", "must be positive");

    MlpParams p;
    try {
        p = MlpParams(dims, norm);
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError("layer_dims", e.what());
    }
    const auto& weights = require(j, "weights");
    const auto& biases = require(j, "biases");
    if (!weights.is_array() || weights.size() != p.layers())
        throw ModelFormatError("weights", "layer count does not match layer_dims");
    if (!biases.is_array() || biases.size() != p.layers())
        throw ModelFormatError("biases", "layer count does not match layer_dims");
    for (std::size_t k = 0; k < p.layers(); ++k) {
        fill_layer(weights, k, p.weight(k), "weights");
        fill_layer(biases, k, p.bias(k), "biases");
    }
    return p;
}

void save(const MlpParams& p, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
    os << to_json(p);
    if (!os) throw std::runtime_error("failed writing " + path.string());
}

MlpParams load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open model file " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return from_json(ss.str());
}

}  // namespace pinnreg::net
