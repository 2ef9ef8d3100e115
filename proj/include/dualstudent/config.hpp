#pragma once

// Experiment files: INI-style text with [data], [model], [train] and
// [analysis] sections. Every key has a default; unknown keys are rejected.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dualstudent/data.hpp"
#include "dualstudent/trainers.hpp"

namespace dualstudent::config {

struct DataConfig {
    std::string generator = "two_moons";  // two_moons | blobs | csv
    std::size_t n_train = 504;
    std::size_t n_test = 1000;
    std::size_t labels = 4;
    double noise = 0.1;        // two_moons
    std::size_t classes = 3;   // blobs
    double separation = 4.0;   // blobs
    std::string train_csv;     // csv
    std::string test_csv;      // csv
    /// 0 follows train.seed.
    std::uint64_t seed = 0;
    data::AugmentPolicy augment;
    // Domain adaptation target: unlabeled shifted rows plus a shifted test set.
    std::size_t n_target = 500;
    data::AffineShift shift{0.6, 1.2, 0.0, 0.0};
};

struct AnalysisConfig {
    bool coupling = false;
    /// Training row to trace; negative disables tracking.
    long long track_sample = -1;
    bool stable_report = true;
    std::size_t checkpoint_every = 0;
};

struct Experiment {
    DataConfig data;
    train::TrainConfig train;
    AnalysisConfig analysis;
};

/// `source` names the input in error messages. Throws ConfigError carrying the
/// line number on malformed lines, unknown sections/keys and bad values.
Experiment parse_experiment(std::istream& in, const std::string& source = "<config>");
/// Throws IoError if the file cannot be read.
Experiment load_experiment(const std::string& path);

/// Copies the base model's slope/dropout/noise into the strong model and
/// checks cross-field constraints. Throws ConfigError.
void finalize(Experiment& exp);

/// Applies "section.key=value"; same validation as the file parser.
void apply_override(Experiment& exp, std::string_view assignment);
void set_value(Experiment& exp, std::string_view section, std::string_view key, std::string_view value);
std::string get_value(const Experiment& exp, std::string_view section, std::string_view key);
/// Every "section.key" in output order.
std::vector<std::string> all_keys();

/// All keys with their current values; parsing it back yields an equal
/// experiment.
void write_resolved(std::ostream& out, const Experiment& exp);
std::string resolved_text(const Experiment& exp);

struct Datasets {
    data::Dataset train;
    data::Dataset test;
    // Domain adaptation only.
    data::Dataset target;
    data::Dataset target_test;
};

/// Deterministic in (data config, effective seed).
Datasets build_datasets(const Experiment& exp);

/// Shortest text that parses back to the same double.
std::string format_shortest(double v);

}  // namespace dualstudent::config
