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

#include "pinnreg/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <thread>

#include "pinnreg/config.hpp"
#include "pinnreg/csv.hpp"
#include "pinnreg/net.hpp"
#include "pinnreg/sim.hpp"
#include "pinnreg/train.hpp"

namespace pinnreg::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string model;
    std::string out;
    std::optional<std::uint64_t> seed;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::optional<double> w1_0, omega, tolerance;
    std::string grid_csv;
    int bins = 20;
};

class Failure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

config::RunConfig load_config(const Options& o) {
    config::RunConfig c = o.config.empty() ? config::parse("") : config::load(o.config);
    if (o.seed) {
        c.seed = *o.seed;
        c.train.seed = *o.seed;
    }
    return c;
}

fs::path output_path(const Options& o, const config::RunConfig& c, const char* fallback) {
    return o.out.empty() ? fs::path(c.output_dir) / fallback : fs::path(o.out);
}

std::ofstream open_output(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream os(p, std::ios::binary);
    if (!os) throw Failure("cannot write " + p.string());
    return os;
}

net::MlpParams load_model(const Options& o) {
    if (o.model.empty()) throw Failure("--model is required");
    return net::load(o.model);
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const config::RunConfig c = load_config(o);
    const fs::path model_path = output_path(o, c, "model.json");
    fs::path history_path = model_path;
    history_path.replace_extension(".history.csv");

    net::MlpParams init = net::init(c.seed, c.train.layer_dims, c.train.normalization());
    const train::TrainResult r = train::train(c.train, std::move(init), c.heli, [&](const train::EpochRecord& e) {
        err << "epoch " << e.epoch << " lr=" << e.lr << " loss=" << e.loss.total
            << (e.rejected_steps ? " rejected=" + std::to_string(e.rejected_steps) : "") << '\n';
    });
    if (model_path.has_parent_path()) fs::create_directories(model_path.parent_path());
    net::save(r.params, model_path);
    std::ofstream hist = open_output(history_path);
    train::write_history_csv(hist, r.history);
    out << "model " << model_path.string() << '\n' << "history " << history_path.string() << '\n';
    return kExitOk;
}

int cmd_landscape(const Options& o, std::ostream& out, std::ostream&) {
    const config::RunConfig c = load_config(o);
    const net::MlpParams p = load_model(o);
    if (!o.config.empty() && p.layer_dims() != c.train.layer_dims)
        throw Failure("model architecture does not match train.layer_dims of " + o.config);
    if (c.landscape.size() == 0) throw Failure("landscape grid is empty");
    const auto rows = train::residual_landscape(p, c.landscape, c.heli, c.train.lambda);
    const fs::path path = output_path(o, c, "landscape.csv");
    std::ofstream os = open_output(path);
    train::write_landscape_csv(os, rows);
    std::vector<double> v;
    for (const auto& r : rows) v.push_back(r.loss);
    std::sort(v.begin(), v.end());
    out << "points " << v.size() << " median_loss " << csv::num(v[v.size() / 2]) << " max_loss "
        << csv::num(v.back()) << '\n';
    return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
    const config::RunConfig c = load_config(o);
    const net::MlpParams p = load_model(o);
    const double w1 = o.w1_0.value_or(c.run.w1_0);
    const double omega = o.omega.value_or(c.run.omega);
    const sim::NetworkModel model(p);
    const sim::SimResult r = sim::simulate({w1, 0.0}, omega, model, c.gains, c.heli, c.sim);
    if (!o.out.empty()) {
        std::ofstream os = open_output(o.out);
        sim::write_trajectory_csv(os, r);
    }
    out << "w1_0=" << csv::num(w1) << " omega=" << csv::num(omega) << " mean_abs_ez=" << csv::num(r.mean_abs_ez)
        << " max_abs_ez=" << csv::num(r.max_abs_ez) << " diverged=" << (r.diverged ? "yes" : "no");
    if (r.diverge_time) out << " diverge_time=" << csv::num(*r.diverge_time);
    out << '\n';
    return r.diverged ? kExitFailure : kExitOk;
}

int cmd_grid(const Options& o, std::ostream& out, std::ostream&) {
    const config::RunConfig c = load_config(o);
    const net::MlpParams p = load_model(o);
    if (c.grid.w1_list.empty() || c.grid.omega_list.empty()) throw Failure("grid lists must not be empty");
    const sim::NetworkModel model(p);
    const auto rows = sim::grid_experiment(
        c.grid.w1_list, c.grid.omega_list, model, c.gains, c.heli, c.sim,
        [&c](double w1, double om) { return c.seen_in_training(w1, om); }, o.workers);
    const fs::path path = output_path(o, c, "grid.csv");
    std::ofstream os = open_output(path);
    sim::write_grid_csv(os, rows);
    const auto diverged = std::count_if(rows.begin(), rows.end(), [](const sim::GridRow& r) { return r.diverged; });
    out << "cells " << rows.size() << " diverged " << diverged << " -> " << path.string() << '\n';
    return kExitOk;
}

int cmd_stats(const Options& o, std::ostream& out, std::ostream&) {
    std::ifstream is(o.grid_csv, std::ios::binary);
    if (!is) throw Failure("cannot read " + o.grid_csv);
    const auto rows = sim::read_grid_csv(is);
    const sim::ErrorStats s = sim::error_stats(rows, o.bins);
    out << "cells " << s.cells << '\n'
        << "diverged " << s.diverged << '\n'
        << "mean " << csv::num(s.mean) << '\n'
        << "median " << csv::num(s.median) << '\n';
    for (std::size_t i = 0; i < s.histogram.counts.size(); ++i)
        out << "bin " << csv::num(s.histogram.edges[i]) << ' ' << csv::num(s.histogram.edges[i + 1]) << ' '
            << s.histogram.counts[i] << '\n';
    return kExitOk;
}

int cmd_trim_check(const Options& o, std::ostream& out, std::ostream&) {
    const config::RunConfig c = load_config(o);
    const net::MlpParams p = load_model(o);
    const double tol = o.tolerance.value_or(c.trim_tolerance);
    bool ok = true;
    for (double omega : c.train.omega_set) {
        const auto y = net::forward(p, 0.0, 0.0, omega).as_array();
        double dev = 0.0;
        for (int i = 0; i < 3; ++i) dev = std::max(dev, std::abs(y[i] - kTrimTarget[i]));
        const bool pass = dev <= tol;
        ok = ok && pass;
        out << "omega=" << csv::num(omega) << " pi_phi=" << csv::num(y[0]) << " pi_theta=" << csv::num(y[1])
            << " c_b=" << csv::num(y[2]) << " max_dev=" << csv::num(dev) << (pass ? " ok" : " FAIL") << '\n';
    }
    out << (ok ? "trim within " : "trim outside ") << csv::num(tol) << '\n';
    return ok ? kExitOk : kExitFailure;
}

int cmd_config_dump(const Options& o, std::ostream& out, std::ostream&) {
    out << config::dump(load_config(o));
    return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Physics-informed regulator-equation solver for the helicopter landing benchmark", "pinnreg"};
    app.require_subcommand(1);
    Options o;

    auto add_config = [&](CLI::App* s) { s->add_option("--config", o.config, "Run configuration file"); };
    auto add_model = [&](CLI::App* s) { s->add_option("--model", o.model, "Model file")->required(); };
    auto add_out = [&](CLI::App* s, const char* what) { s->add_option("--out", o.out, what); };
    auto add_seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Override run.seed"); };

    CLI::App* train = app.add_subcommand("train", "Train a model");
    add_config(train);
    add_out(train, "Model path (default <output.dir>/model.json)");
    add_seed(train);

    CLI::App* landscape = app.add_subcommand("landscape", "Residual landscape CSV");
    add_config(landscape);
    add_model(landscape);
    add_out(landscape, "CSV path (default <output.dir>/landscape.csv)");

    CLI::App* simulate = app.add_subcommand("simulate", "Single closed-loop run");
    add_config(simulate);
    add_model(simulate);
    add_out(simulate, "Trajectory CSV path");
    simulate->add_option("--w1", o.w1_0, "Initial w1 (default sim.w1_0)");
    simulate->add_option("--omega", o.omega, "Exosystem frequency (default sim.omega)");

    CLI::App* grid = app.add_subcommand("grid", "Grid of closed-loop runs");
    add_config(grid);
    add_model(grid);
    add_out(grid, "CSV path (default <output.dir>/grid.csv)");
    grid->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);

    CLI::App* stats = app.add_subcommand("stats", "Statistics of a grid CSV");
    stats->add_option("grid_csv", o.grid_csv, "Grid CSV")->required();
    stats->add_option("--bins", o.bins, "Histogram bins")->check(CLI::PositiveNumber);

    CLI::App* trim = app.add_subcommand("trim-check", "Compare the output at w = 0 with the hover trim");
    add_config(trim);
    add_model(trim);
    trim->add_option("--tolerance", o.tolerance, "Absolute tolerance (default trim.tolerance)")
        ->check(CLI::NonNegativeNumber);

    CLI::App* dump = app.add_subcommand("config-dump", "Print the canonical configuration");
    add_config(dump);
    add_seed(dump);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*train) return cmd_train(o, out, err);
        if (*landscape) return cmd_landscape(o, out, err);
        if (*simulate) return cmd_simulate(o, out, err);
        if (*grid) return cmd_grid(o, out, err);
        if (*stats) return cmd_stats(o, out, err);
        if (*trim) return cmd_trim_check(o, out, err);
        if (*dump) return cmd_config_dump(o, out, err);
    } catch (const config::ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace pinnreg::cli
