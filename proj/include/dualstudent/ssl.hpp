#pragma once

// Loss terms of the two-student method and the stable-sample machinery.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "dualstudent/graph.hpp"

namespace dualstudent::ssl {

/// Per-sample stability of one student.
struct StabilityRecord {
    int label = 0;            // argmax of f(θ, x)
    double confidence = 0.0;  // max of f(θ, x)
    bool stable = false;
    double score = 0.0;       // ‖f(θ, x) − f(θ, x̄)‖²; consulted only when stable

    friend bool operator==(const StabilityRecord&, const StabilityRecord&) = default;
};

struct LossBreakdown {
    double cls = 0.0;
    double con = 0.0;
    double sta = 0.0;
    double total = 0.0;
    double ramp = 0.0;
};

/// Index of the largest entry; ties go to the lowest index.
int predicted_label(std::span<const double> probs_row);

/// Same predicted label on x and x̄, and at least one of the two maxima above xi.
bool stable_flag(std::span<const double> probs_x, std::span<const double> probs_xbar, double xi);

/// Squared Euclidean distance between the two prediction rows.
double stability_score(std::span<const double> probs_x, std::span<const double> probs_xbar);

StabilityRecord make_record(std::span<const double> probs_x, std::span<const double> probs_xbar, double xi);

/// One record per row of the two [b×n] prediction matrices.
std::vector<StabilityRecord> stability_records(const Tensor& probs_x, const Tensor& probs_xbar, double xi);

/// Which student, if any, receives the stabilization term for one sample.
enum class Receiver : std::uint8_t { none, student_i, student_j };

/// Exactly the three cases: both unstable → none; one stable → the other
/// receives; both stable → the one with strictly larger score receives, ties → none.
Receiver stabilization_receiver(const StabilityRecord& rec_i, const StabilityRecord& rec_j);

struct StabilizationLoss {
    Var loss_i;
    Var loss_j;
    std::vector<double> weights_i;  // 1 where student i receives a term
    std::vector<double> weights_j;
    std::size_t count_i = 0;
    std::size_t count_j = 0;
};

/// Gated inter-student MSE. The guiding student's prediction is detached, so
/// each term only moves the receiving student. Rows with eligible[r] == 0 get
/// no term; an empty mask makes every row eligible. Both losses are divided
/// by the full row count.
StabilizationLoss stabilization_loss(std::span<const StabilityRecord> recs_i,
                                     std::span<const StabilityRecord> recs_j, Var probs_i_x, Var probs_j_x,
                                     std::span<const std::uint8_t> eligible = {});

/// mse(probs_x, detach(probs_xbar)).
Var consistency_loss(Var probs_x, Var probs_xbar);

/// Cross-entropy over rows with labeled_mask set; 0 if there are none.
Var classification_loss(Var probs, std::span<const int> labels, std::span<const std::uint8_t> labeled_mask);

/// total = cls + λ₁·con + λ₂·ramp·sta
LossBreakdown total_loss(double cls, double con, double sta, double lambda1, double lambda2, double ramp);

/// Graph form of total_loss. Terms whose coefficient is exactly zero are left
/// out of the graph so they contribute no gradient at all.
Var total_loss(Var cls, Var con, Var sta, double lambda1, double lambda2, double ramp);

/// Linear ramp min(1, (epoch + 1) / ramp_epochs); 1 when ramp_epochs == 0.
double rampup(std::size_t epoch, std::size_t ramp_epochs);

}  // namespace dualstudent::ssl
