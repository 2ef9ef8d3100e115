#pragma once

// Training loops: the two-student method, its variants, and the baselines it
// is compared against. Every loop is strictly sequential and fully determined
// by (config, datasets, seed).

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dualstudent/data.hpp"
#include "dualstudent/metrics.hpp"
#include "dualstudent/models.hpp"

namespace dualstudent::train {

enum class Method {
    supervised,
    pi,
    mean_teacher,
    cs_baseline,
    dual_student,
    multiple_student,
    imbalanced_student,
    domain_adapt,
};

std::string_view method_name(Method method);
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view name);

struct TrainConfig {
    Method method = Method::dual_student;
    double lambda1 = 10.0;
    double lambda2 = 1.0;
    double xi = 0.8;
    double alpha = 0.99;
    double gamma0 = 0.1;
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    std::size_t labeled_per_batch = 32;
    std::size_t ramp_epochs = 5;
    double weight_decay = 1e-4;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    models::MlpSpec spec;
    std::optional<models::MlpSpec> strong_spec;
    std::size_t n_students = 4;
    data::AugmentPolicy augment;
    /// Method run by run_domain_adaptation.
    Method da_method = Method::dual_student;
    /// Single-model methods draw their init/noise streams as this student
    /// index, which lines them up with one student of a multi-student run.
    std::size_t stream_index = 0;
    /// Start every student from the same initial weights.
    bool shared_init = false;
    std::string run_id = "run";

    /// Throws ConfigError when a method-specific requirement is violated.
    void validate() const;
};

/// A trained (or training) model as seen by hooks and results.
struct Model {
    std::string name;
    models::MlpSpec spec;
    models::ModelParams params;
};

/// Per-step record of how many samples each model was constrained on.
struct StepRecord {
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::size_t eligible = 0;
    std::vector<std::size_t> terms;  // one entry per model
};

struct Hooks {
    /// Called after every epoch (0-based) with the current models. Rows appended
    /// to `out` are merged into the run's metrics.
    std::function<void(std::size_t epoch, std::span<const Model> models, std::vector<MetricsRow>& out)> on_epoch;
};

struct RunResult {
    std::vector<MetricsRow> metrics;
    std::vector<Model> models;
    /// stable_ratio_trace[model][epoch]; empty rows for models without records.
    std::vector<std::vector<double>> stable_ratio_trace;
    std::vector<StepRecord> steps;
    /// Headline test accuracy of the last epoch.
    double final_accuracy = 0.0;
    std::size_t steps_per_epoch = 0;
};

RunResult train_supervised(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                           const Hooks& hooks = {});
RunResult train_pi(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                   const Hooks& hooks = {});
RunResult train_mean_teacher(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                             const Hooks& hooks = {});
RunResult train_cs_baseline(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                            const Hooks& hooks = {});
RunResult train_dual_student(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                             const Hooks& hooks = {});
RunResult train_multiple_student(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                                 const Hooks& hooks = {});
RunResult train_imbalanced_student(const TrainConfig& cfg, const data::Dataset& train,
                                   const data::Dataset& test, const Hooks& hooks = {});

/// Labeled source rows feed the classification term; unlabeled target rows
/// feed the unsupervised terms; accuracy is measured on target_test. Runs
/// cfg.da_method. An empty target (default-constructed Dataset) runs plain
/// supervised training on the source instead.
RunResult run_domain_adaptation(const TrainConfig& cfg, const data::Dataset& source, const data::Dataset& target,
                                const data::Dataset& target_test, const Hooks& hooks = {});

/// Dispatches on cfg.method (domain_adapt is not accepted here).
RunResult train(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                const Hooks& hooks = {});

/// Fraction of rows whose argmax prediction equals the label.
double accuracy(const models::ModelParams& params, const models::MlpSpec& spec, const data::Dataset& ds);

}  // namespace dualstudent::train
