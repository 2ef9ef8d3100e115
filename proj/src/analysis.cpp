#include "dualstudent/analysis.hpp"

#include <cmath>

#include "dualstudent/errors.hpp"
#include "dualstudent/ssl.hpp"

namespace dualstudent::analysis {

namespace {

const train::Model* find_model(std::span<const train::Model> models, const std::string& name) {
    for (const train::Model& m : models) {
        if (m.name == name) return &m;
    }
    return nullptr;
}

}  // namespace

double prediction_distance(const models::ModelParams& params_a, const models::ModelParams& params_b,
                           const models::MlpSpec& spec_a, const models::MlpSpec& spec_b, const data::Dataset& ds) {
    if (spec_a.input_dim() != spec_b.input_dim() || spec_a.class_count() != spec_b.class_count()) {
        throw InputError("prediction_distance: models disagree on input or output dims");
    }
    if (ds.size() == 0) throw InputError("prediction_distance: empty dataset");
    const Tensor pa = models::predict(params_a, spec_a, ds.features);
    const Tensor pb = models::predict(params_b, spec_b, ds.features);
    double total = 0.0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const auto ra = pa.row(r);
        const auto rb = pb.row(r);
        double sq = 0.0;
        for (std::size_t c = 0; c < ra.size(); ++c) sq += (ra[c] - rb[c]) * (ra[c] - rb[c]);
        total += std::sqrt(sq);
    }
    return total / static_cast<double>(ds.size());
}

data::AugmentPolicy training_perturbation(const data::AugmentPolicy& augment, const models::MlpSpec& spec) {
    return {std::hypot(augment.noise_std, spec.input_noise_std), augment.jitter};
}

StableReport stable_sample_report(const models::ModelParams& params, const models::MlpSpec& spec,
                                  const data::Dataset& ds, double xi, const data::AugmentPolicy& policy, Rng rng) {
    if (!(xi >= 0.0 && xi < 1.0)) throw InputError("stable_sample_report: xi must lie in [0, 1)");
    ds.validate();
    const Tensor clean = models::predict(params, spec, ds.features);
    const Tensor noisy = models::predict(params, spec, data::augment(ds.features, policy, rng));

    StableReport report;
    report.samples = ds.size();
    report.per_class.resize(ds.class_count);
    std::size_t correct_all = 0, correct_stable = 0;
    std::vector<std::size_t> class_correct(ds.class_count, 0), class_correct_stable(ds.class_count, 0);
    for (std::size_t r = 0; r < ds.size(); ++r) {
        const bool stable = ssl::stable_flag(clean.row(r), noisy.row(r), xi);
        const bool correct = ssl::predicted_label(clean.row(r)) == ds.labels[r];
        const auto c = static_cast<std::size_t>(ds.labels[r]);
        ++report.per_class[c].count;
        correct_all += correct;
        class_correct[c] += correct;
        if (stable) {
            ++report.stable;
            ++report.per_class[c].stable;
            correct_stable += correct;
            class_correct_stable[c] += correct;
        }
    }
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den ? static_cast<double>(num) / static_cast<double>(den) : 0.0;
    };
    report.stable_ratio = ratio(report.stable, report.samples);
    report.acc_all = ratio(correct_all, report.samples);
    report.acc_stable = ratio(correct_stable, report.stable);
    for (std::size_t c = 0; c < ds.class_count; ++c) {
        ClassReport& cr = report.per_class[c];
        cr.label = static_cast<int>(c);
        cr.acc_all = ratio(class_correct[c], cr.count);
        cr.acc_stable = ratio(class_correct_stable[c], cr.stable);
    }
    return report;
}

CouplingRecorder::CouplingRecorder(std::string model_a, std::string model_b, const data::Dataset& ds)
    : trace_{std::move(model_a), std::move(model_b), {}, {}}, ds_(&ds) {}

void CouplingRecorder::observe(std::span<const train::Model> models, std::vector<MetricsRow>& out) {
    const train::Model* a = find_model(models, trace_.model_a);
    const train::Model* b = find_model(models, trace_.model_b);
    if (!a || !b) throw InputError("coupling: run has no model pair " + trace_.model_a + "/" + trace_.model_b);
    if (a->spec != b->spec) throw InputError("coupling: weight distance needs identical architectures");
    trace_.weight.push_back(models::weight_distance(a->params, b->params));
    trace_.prediction.push_back(prediction_distance(a->params, b->params, a->spec, b->spec, *ds_));
    MetricsRow row;
    row.metric = "weight_dist";
    row.value = trace_.weight.back();
    out.push_back(row);
    row.metric = "pred_dist";
    row.value = trace_.prediction.back();
    out.push_back(row);
}

SampleTracker::SampleTracker(const data::Dataset& train, std::size_t index) {
    if (index >= train.size()) {
        throw InputError("track_sample: index " + std::to_string(index) + " out of range for " +
                         std::to_string(train.size()) + " rows");
    }
    const auto row = train.features.row(index);
    x_ = Tensor::matrix(1, row.size(), std::vector<double>(row.begin(), row.end()));
    label_ = train.labels[index];
}

void SampleTracker::observe(std::span<const train::Model> models, std::vector<MetricsRow>& out) {
    if (names_.empty()) {
        for (const train::Model& m : models) names_.push_back(m.name);
        traces_.resize(models.size());
    }
    if (models.size() != names_.size()) throw StateError("track_sample: model set changed during the run");
    for (std::size_t i = 0; i < models.size(); ++i) {
        const Tensor p = models::predict(models[i].params, models[i].spec, x_);
        const double value = p.values[static_cast<std::size_t>(label_)];
        traces_[i].push_back(value);
        MetricsRow row;
        row.metric = "track_p_true." + models[i].name;
        row.value = value;
        out.push_back(row);
    }
}

train::Hooks make_hooks(CouplingRecorder* coupling, SampleTracker* tracker) {
    train::Hooks hooks;
    if (!coupling && !tracker) return hooks;
    hooks.on_epoch = [coupling, tracker](std::size_t, std::span<const train::Model> models,
                                         std::vector<MetricsRow>& out) {
        if (coupling) coupling->observe(models, out);
        if (tracker) tracker->observe(models, out);
    };
    return hooks;
}

EmaCheck ema_convergence_check(const std::vector<double>& sequence, double alpha, double s0, double limit) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("ema_convergence_check: alpha must lie in [0, 1]");
    EmaCheck out;
    out.values.reserve(sequence.size());
    out.gaps.reserve(sequence.size());
    double s = s0;
    for (double x : sequence) {
        s = alpha * s + (1.0 - alpha) * x;
        out.values.push_back(s);
        out.gaps.push_back(std::abs(s - limit));
    }
    return out;
}

std::size_t settle_step(const std::vector<double>& gaps, double eps) {
    std::size_t t = gaps.size();
    while (t > 0 && gaps[t - 1] < eps) --t;
    return t == gaps.size() ? 0 : t + 1;
}

}  // namespace dualstudent::analysis
