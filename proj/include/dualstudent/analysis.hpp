#pragma once

// Diagnostics over trained models: how tightly two models are coupled, how
// reliable stable samples are, per-sample probability traces, and the EMA
// convergence check.

#include <cstddef>
#include <string>
#include <vector>

#include "dualstudent/data.hpp"
#include "dualstudent/models.hpp"
#include "dualstudent/trainers.hpp"

namespace dualstudent::analysis {

/// Mean over rows of ‖f_a(x) − f_b(x)‖₂ with eval-mode predictions.
double prediction_distance(const models::ModelParams& params_a, const models::ModelParams& params_b,
                           const models::MlpSpec& spec_a, const models::MlpSpec& spec_b, const data::Dataset& ds);

struct DistanceTrace {
    std::string model_a;
    std::string model_b;
    std::vector<double> weight;      // per epoch
    std::vector<double> prediction;  // per epoch
};

struct ClassReport {
    int label = 0;
    std::size_t count = 0;
    std::size_t stable = 0;
    double acc_all = 0.0;
    double acc_stable = 0.0;  // 0 when no sample of the class is stable
};

struct StableReport {
    std::size_t samples = 0;
    std::size_t stable = 0;
    double stable_ratio = 0.0;
    double acc_all = 0.0;
    double acc_stable = 0.0;  // 0 when nothing is stable
    std::vector<ClassReport> per_class;
};

/// The input perturbation one training forward sees: augmentation followed
/// by the model's own input noise, folded into a single Gaussian.
data::AugmentPolicy training_perturbation(const data::AugmentPolicy& augment, const models::MlpSpec& spec);

/// One augmentation draw per row decides stability; accuracy is measured on
/// the clean rows.
StableReport stable_sample_report(const models::ModelParams& params, const models::MlpSpec& spec,
                                  const data::Dataset& ds, double xi, const data::AugmentPolicy& policy, Rng rng);

/// Records weight and prediction distance between two named models after every
/// epoch and appends them to the run metrics as weight_dist / pred_dist.
class CouplingRecorder {
public:
    CouplingRecorder(std::string model_a, std::string model_b, const data::Dataset& ds);
    void observe(std::span<const train::Model> models, std::vector<MetricsRow>& out);
    const DistanceTrace& trace() const { return trace_; }

private:
    DistanceTrace trace_;
    const data::Dataset* ds_;
};

/// Records every model's probability of the true class for one training row,
/// emitted as track_p_true.<model>.
class SampleTracker {
public:
    SampleTracker(const data::Dataset& train, std::size_t index);
    void observe(std::span<const train::Model> models, std::vector<MetricsRow>& out);
    /// traces()[model][epoch]
    const std::vector<std::vector<double>>& traces() const { return traces_; }
    const std::vector<std::string>& names() const { return names_; }

private:
    Tensor x_;
    int label_;
    std::vector<std::string> names_;
    std::vector<std::vector<double>> traces_;
};

/// Runs each observer in order from a single on_epoch hook. The observers must
/// outlive the returned hooks.
train::Hooks make_hooks(CouplingRecorder* coupling, SampleTracker* tracker);

struct EmaCheck {
    std::vector<double> values;  // s′_1 … s′_T
    std::vector<double> gaps;    // |s′_t − limit|
};

/// s′_t = α·s′_{t−1} + (1 − α)·s_t starting from s′_0 = s0.
EmaCheck ema_convergence_check(const std::vector<double>& sequence, double alpha, double s0, double limit);

/// Smallest t (1-based) such that gaps[t'-1] < eps for every t' ≥ t, or 0 if
/// the tail never stays below eps.
std::size_t settle_step(const std::vector<double>& gaps, double eps);

}  // namespace dualstudent::analysis
