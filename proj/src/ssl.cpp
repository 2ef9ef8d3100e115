#include "dualstudent/ssl.hpp"

#include <algorithm>

#include "dualstudent/errors.hpp"

namespace dualstudent::ssl {

int predicted_label(std::span<const double> probs_row) {
    if (probs_row.empty()) throw InputError("predicted_label: empty row");
    // max_element returns the first maximum.
    return static_cast<int>(std::max_element(probs_row.begin(), probs_row.end()) - probs_row.begin());
}

bool stable_flag(std::span<const double> probs_x, std::span<const double> probs_xbar, double xi) {
    if (probs_x.size() != probs_xbar.size()) throw ShapeError("stable_flag: row length mismatch");
    const bool same_label = predicted_label(probs_x) == predicted_label(probs_xbar);
    const double conf_x = *std::max_element(probs_x.begin(), probs_x.end());
    const double conf_xbar = *std::max_element(probs_xbar.begin(), probs_xbar.end());
    return same_label && (conf_x > xi || conf_xbar > xi);
}

double stability_score(std::span<const double> probs_x, std::span<const double> probs_xbar) {
    if (probs_x.size() != probs_xbar.size()) throw ShapeError("stability_score: row length mismatch");
    double total = 0.0;
    for (std::size_t c = 0; c < probs_x.size(); ++c) {
        const double d = probs_x[c] - probs_xbar[c];
        total += d * d;
    }
    return total;
}

StabilityRecord make_record(std::span<const double> probs_x, std::span<const double> probs_xbar, double xi) {
    StabilityRecord rec;
    rec.label = predicted_label(probs_x);
    rec.confidence = probs_x[static_cast<std::size_t>(rec.label)];
    rec.stable = stable_flag(probs_x, probs_xbar, xi);
    rec.score = stability_score(probs_x, probs_xbar);
    return rec;
}

std::vector<StabilityRecord> stability_records(const Tensor& probs_x, const Tensor& probs_xbar, double xi) {
    require_same_shape(probs_x, probs_xbar, "stability_records");
    std::vector<StabilityRecord> recs;
    recs.reserve(probs_x.rows());
    for (std::size_t r = 0; r < probs_x.rows(); ++r) recs.push_back(make_record(probs_x.row(r), probs_xbar.row(r), xi));
    return recs;
}

Receiver stabilization_receiver(const StabilityRecord& rec_i, const StabilityRecord& rec_j) {
    if (rec_i.stable && rec_j.stable) {
        if (rec_i.score > rec_j.score) return Receiver::student_i;
        if (rec_j.score > rec_i.score) return Receiver::student_j;
        return Receiver::none;
    }
    if (rec_j.stable) return Receiver::student_i;
    if (rec_i.stable) return Receiver::student_j;
    return Receiver::none;
}

StabilizationLoss stabilization_loss(std::span<const StabilityRecord> recs_i,
                                     std::span<const StabilityRecord> recs_j, Var probs_i_x, Var probs_j_x,
                                     std::span<const std::uint8_t> eligible) {
    const Tensor& pi = probs_i_x.value();
    const Tensor& pj = probs_j_x.value();
    require_same_shape(pi, pj, "stabilization_loss");
    const std::size_t rows = pi.rows();
    if (recs_i.size() != rows || recs_j.size() != rows || (!eligible.empty() && eligible.size() != rows)) {
        throw InputError("stabilization_loss: records, predictions and mask must cover the same samples");
    }
    StabilizationLoss out;
    out.weights_i.assign(rows, 0.0);
    out.weights_j.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        if (!eligible.empty() && !eligible[r]) continue;
        switch (stabilization_receiver(recs_i[r], recs_j[r])) {
            case Receiver::student_i: out.weights_i[r] = 1.0; ++out.count_i; break;
            case Receiver::student_j: out.weights_j[r] = 1.0; ++out.count_j; break;
            case Receiver::none: break;
        }
    }
    const double denominator = static_cast<double>(rows);
    out.loss_i = weighted_row_sq_dist(probs_i_x, detach(probs_j_x), out.weights_i, denominator);
    out.loss_j = weighted_row_sq_dist(probs_j_x, detach(probs_i_x), out.weights_j, denominator);
    return out;
}

Var consistency_loss(Var probs_x, Var probs_xbar) { return mse(probs_x, detach(probs_xbar)); }

Var classification_loss(Var probs, std::span<const int> labels, std::span<const std::uint8_t> labeled_mask) {
    if (labeled_mask.size() != labels.size()) throw ShapeError("classification_loss: mask length mismatch");
    return cross_entropy(probs, labels, labeled_mask);
}

LossBreakdown total_loss(double cls, double con, double sta, double lambda1, double lambda2, double ramp) {
    if (!(ramp >= 0.0 && ramp <= 1.0)) throw InputError("total_loss: ramp must lie in [0, 1]");
    return LossBreakdown{cls, con, sta, cls + lambda1 * con + lambda2 * ramp * sta, ramp};
}

Var total_loss(Var cls, Var con, Var sta, double lambda1, double lambda2, double ramp) {
    if (!(ramp >= 0.0 && ramp <= 1.0)) throw InputError("total_loss: ramp must lie in [0, 1]");
    Var total = cls;
    if (lambda1 != 0.0) total = add(total, scale(con, lambda1));
    const double sta_coef = lambda2 * ramp;
    if (sta_coef != 0.0) total = add(total, scale(sta, sta_coef));
    return total;
}

double rampup(std::size_t epoch, std::size_t ramp_epochs) {
    if (ramp_epochs == 0) return 1.0;
    return std::min(1.0, static_cast<double>(epoch + 1) / static_cast<double>(ramp_epochs));
}

}  // namespace dualstudent::ssl
