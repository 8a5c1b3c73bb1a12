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

#include "pinnreg/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "pinnreg/csv.hpp"

namespace pinnreg::config {

ConfigError::ConfigError(int line, std::string key, const std::string& what)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + key + ": " + what : key + ": " + what),
      line_(line),
      key_(std::move(key)) {}

bool RunConfig::seen_in_training(double w1_0, double omega) const {
    auto contains = [](const std::vector<double>& v, double x) {
        for (double y : v)
            if (std::abs(y - x) <= 1e-9) return true;
        return false;
    };
    return contains(train.radii, std::abs(w1_0)) && contains(train.omega_set, omega);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Parse failures throw std::invalid_argument; the caller adds line and key.
double to_double(const std::string& s) {
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw std::invalid_argument("expected a finite number, got '" + s + "'");
    return v;
}

long long to_int(const std::string& s) {
    long long v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::invalid_argument("expected an integer, got '" + s + "'");
    return v;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    for (const std::string& cell : csv::split_line(s)) out.push_back(trim(cell));
    return out;
}

std::vector<double> to_doubles(const std::string& s) {
    std::vector<double> v;
    for (const auto& c : split_list(s)) v.push_back(to_double(c));
    return v;
}

// Shortest text that parses back to the same double.
std::string shortest(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + shortest(v[i]);
    return s;
}

struct Binding {
    std::string key;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
};

Binding real(std::string key, double& x) {
    return {std::move(key), [&x](const std::string& s) { x = to_double(s); }, [&x] { return shortest(x); }};
}

Binding reals(std::string key, std::vector<double>& x) {
    return {std::move(key), [&x](const std::string& s) { x = to_doubles(s); }, [&x] { return join(x); }};
}

Binding integer(std::string key, int& x) {
    return {std::move(key),
            [&x](const std::string& s) {
                const long long v = to_int(s);
                if (v < INT32_MIN || v > INT32_MAX) throw std::invalid_argument("integer out of range");
                x = static_cast<int>(v);
            },
            [&x] { return std::to_string(x); }};
}

template <class E>
Binding choice(std::string key, E& x, std::vector<std::pair<std::string, E>> names) {
    return {std::move(key),
            [&x, names](const std::string& s) {
                for (const auto& [n, v] : names)
                    if (n == s) {
                        x = v;
                        return;
                    }
                std::string all;
                for (const auto& [n, v] : names) all += (all.empty() ? "" : "|") + n;
                throw std::invalid_argument("expected one of " + all + ", got '" + s + "'");
            },
            [&x, names] {
                for (const auto& [n, v] : names)
                    if (v == x) return n;
                return std::string("?");
            }};
}

std::vector<Binding> bindings(RunConfig& c) {
    heli::HeliParams& h = c.heli;
    train::TrainConfig& t = c.train;
    std::vector<Binding> b = {
        real("heli.mass", h.mass),
        real("heli.gravity", h.gravity),
        real("heli.jx", h.jx),
        real("heli.jy", h.jy),
        real("heli.jz", h.jz),
        real("heli.l_m", h.l_m),
        real("heli.y_m", h.y_m),
        real("heli.h_m", h.h_m),
        real("heli.h_t", h.h_t),
        real("heli.l_t", h.l_t),
        real("heli.cq_main", h.cq_main),
        real("heli.dq_main", h.dq_main),
        real("heli.cb_main", h.cb_main),
        real("heli.cq_tail", h.cq_tail),
        real("heli.dq_tail", h.dq_tail),
        real("heli.ca_main", h.ca_main),

        reals("train.radii", t.radii),
        reals("train.omega_set", t.omega_set),
        real("train.lr_init", t.lr_init),
        real("train.lr_final", t.lr_final),
        integer("train.epochs", t.epochs),
        real("train.lambda", t.lambda),
        integer("train.batch_size", t.batch_size),
        integer("train.target_samples", t.target_samples),
        {"train.layer_dims",
         [&t](const std::string& s) {
             std::vector<int> dims;
             for (const auto& cell : split_list(s)) dims.push_back(static_cast<int>(to_int(cell)));
             t.layer_dims = dims;
         },
         [&t] {
             std::string s;
             for (std::size_t i = 0; i < t.layer_dims.size(); ++i)
                 s += (i ? ", " : "") + std::to_string(t.layer_dims[i]);
             return s;
         }},
        choice("train.optimizer", t.optimizer,
               {{"adam", train::Optimizer::Adam}, {"gd", train::Optimizer::GradientDescent}}),

        real("gains.kr1", c.gains.kr1),
        real("gains.kr2", c.gains.kr2),
        real("gains.kl1", c.gains.kl1),
        real("gains.kl2", c.gains.kl2),

        real("sim.horizon", c.sim.horizon),
        real("sim.dt", c.sim.dt),
        real("sim.divergence_threshold", c.sim.divergence_threshold),
        choice("sim.actuation", c.sim.actuation,
               {{"direct", sim::Actuation::DirectWrench}, {"inverted", sim::Actuation::ActuatorInverted}}),
        real("sim.w1_0", c.run.w1_0),
        real("sim.omega", c.run.omega),

        reals("grid.w1_list", c.grid.w1_list),
        reals("grid.omega_list", c.grid.omega_list),

        choice("landscape.kind", c.landscape.kind,
               {{"polar", train::GridSpec::Kind::Polar}, {"rect", train::GridSpec::Kind::Rect}}),
        real("landscape.extent", c.landscape.extent),
        integer("landscape.n1", c.landscape.n1),
        integer("landscape.n2", c.landscape.n2),
        reals("landscape.omegas", c.landscape.omegas),

        real("trim.tolerance", c.trim_tolerance),
        {"run.seed",
         [&c](const std::string& s) {
             const long long v = to_int(s);
             if (v < 0) throw std::invalid_argument("seed must be nonnegative");
             c.seed = static_cast<std::uint64_t>(v);
         },
         [&c] { return std::to_string(c.seed); }},
        {"output.dir", [&c](const std::string& s) { c.output_dir = s; }, [&c] { return c.output_dir; }},
    };
    return b;
}

void validate(RunConfig& c) {
    c.train.seed = c.seed;
    auto check = [](const char* key, auto&& f) {
        try {
            f();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(0, key, e.what());
        }
    };
    check("heli", [&] { c.heli.validate(); });
    check("train", [&] { c.train.validate(); });
    if (c.train.layer_dims.size() < 2 || c.train.layer_dims.front() != 3 || c.train.layer_dims.back() != 3)
        throw ConfigError(0, "train.layer_dims", "must start and end with 3");
    if (!(c.sim.dt > 0.0)) throw ConfigError(0, "sim.dt", "must be positive");
    if (!(c.sim.horizon > 0.0)) throw ConfigError(0, "sim.horizon", "must be positive");
    if (!(c.trim_tolerance >= 0.0)) throw ConfigError(0, "trim.tolerance", "must be nonnegative");
}

}  // namespace

RunConfig parse(const std::string& text) {
    RunConfig c;
    std::vector<Binding> b = bindings(c);
    std::set<std::string> seen;
    std::istringstream is(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(lineno, line, "expected 'section.key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = std::find_if(b.begin(), b.end(), [&](const Binding& x) { return x.key == key; });
        if (it == b.end()) throw ConfigError(lineno, key, "unknown key");
        if (!seen.insert(key).second) throw ConfigError(lineno, key, "duplicate key");
        try {
            it->set(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(lineno, key, e.what());
        }
    }
    validate(c);
    return c;
}

RunConfig load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(0, path, "cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string dump(const RunConfig& c) {
    RunConfig copy = c;
    std::string out;
    std::string section;
    for (const Binding& b : bindings(copy)) {
        const std::string s = b.key.substr(0, b.key.find('.'));
        if (!section.empty() && s != section) out += '\n';
        section = s;
        out += b.key + " = " + b.get() + '\n';
    }
    return out;
}

}  // namespace pinnreg::config
