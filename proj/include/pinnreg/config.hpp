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

// Run configuration: line-based `section.key = value` text.  Blank lines
// and lines starting with '#' are ignored; lists are comma-separated.
// Keys not given keep their defaults.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pinnreg/heli.hpp"
#include "pinnreg/sim.hpp"
#include "pinnreg/train.hpp"

namespace pinnreg::config {

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, std::string key, const std::string& what);
    int line() const noexcept { return line_; }
    const std::string& key() const noexcept { return key_; }

private:
    int line_;
    std::string key_;
};

struct GridConfig {
    std::vector<double> w1_list = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> omega_list = {0.25, 0.5, 0.75, 1.0};
};

struct SingleRun {
    double w1_0 = 5.0;
    double omega = 1.0;
};

struct RunConfig {
    heli::HeliParams heli;
    train::TrainConfig train;
    sim::Gains gains;
    sim::SimConfig sim;
    SingleRun run;
    GridConfig grid;
    train::GridSpec landscape;
    double trim_tolerance = 0.02;
    std::uint64_t seed = 0;
    std::string output_dir = ".";

    // Training circles and frequencies contain (w1_0, omega).
    bool seen_in_training(double w1_0, double omega) const;
};

RunConfig parse(const std::string& text);
RunConfig load(const std::string& path);

// Canonical text of every key; parse(dump(c)) dumps identically.
std::string dump(const RunConfig& c);

}  // namespace pinnreg::config
