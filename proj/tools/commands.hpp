#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace twoscale::cli {

enum ExitCode : int { kOk = 0, kIoError = 1, kParseError = 2, kIdentificationError = 3 };

/// Every knob of a run. Written to meta.json; `replay` feeds it back.
struct RunConfig {
    std::string command;
    std::string input;
    std::string estimates;
    std::string out = "out";
    std::size_t grid_time = 100;
    std::size_t grid_age = 100;
    // unset: taken from the data (estimate, predict) or the scenario (simulate)
    std::optional<double> t_max;
    std::optional<double> a0;
    std::optional<double> a_max;
    std::size_t p = 1;
    std::size_t q = 1;
    std::size_t shared_d = 1;
    std::string method = "direct";
    double tol = 1e-8;
    std::size_t max_iter = 1000;
    std::size_t boot = 100;
    int boot_variant = 1;
    std::string weights = "normal";
    double alpha = 0.05;
    std::uint64_t seed = 1;
    std::size_t threads = 0;
    bool dump_operator = false;
    // simulate
    std::string table = "bias";
    std::vector<std::size_t> n = {100, 200, 400};
    std::size_t reps = 1000;
    double entry_max = 30.0;
    // predict
    std::vector<double> entry_ages;
    std::vector<double> x;
    std::vector<double> z;

    /// Command line that reproduces this configuration.
    std::vector<std::string> to_args() const;
};

/// Runs one command line (without the program name); never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twoscale::cli
