#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "dualstudent/config.hpp"
#include "dualstudent/trainers.hpp"

namespace dualstudent::cli {

enum ExitCode : int { ok = 0, usage = 1, numeric = 2, io = 3 };

/// Runs the configured method on prepared datasets, routing domain
/// adaptation through the target sets.
train::RunResult run_experiment(const config::Experiment& exp, const config::Datasets& data,
                                const train::Hooks& hooks = {});

/// Maps the exception currently being handled to an exit code and prints its
/// message to `err`.
int report_exception(std::ostream& err);

struct TrainRequest {
    std::string config_path;
    std::vector<std::string> overrides;  // section.key=value, applied in order
    std::string out_dir;
};

/// Loads, finalizes and runs one experiment; writes config.resolved,
/// metrics.csv, stable_report.csv and checkpoints/ into out_dir.
void train_to_dir(const config::Experiment& exp, const std::string& out_dir);
config::Experiment load_with_overrides(const std::string& config_path, const std::vector<std::string>& overrides);

/// Directory layout for checkpoints of one run.
std::string checkpoint_path(const std::string& run_dir, const std::string& stage, const std::string& model);

/// Entry point shared by the executable and the tests.
int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dualstudent::cli
