#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "dualstudent/graph.hpp"
#include "dualstudent/rng.hpp"
#include "dualstudent/tensor.hpp"

namespace dualstudent::data {

struct Dataset {
    Tensor features;  // [m×d]
    Labels labels;
    Mask labeled_mask;
    std::size_t class_count = 2;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
    std::size_t labeled_count() const;
    /// Throws InputError on inconsistent sizes or out-of-range labels.
    void validate() const;
    /// Rows in `indices` order.
    Dataset subset(const std::vector<std::size_t>& indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

struct AugmentPolicy {
    double noise_std = 0.0;
    /// Per-row uniform translation in [−jitter, jitter] on every coordinate.
    double jitter = 0.0;
};

struct Batch {
    Tensor x;
    Tensor x_bar;
    Labels labels;
    Mask labeled_mask;
    std::vector<std::size_t> source_rows;

    std::size_t size() const { return labels.size(); }
};

/// Two interleaving half circles, ⌈m/2⌉ points of class 0 and ⌊m/2⌋ of class 1.
Dataset two_moons(std::size_t m, double noise, Rng rng);

/// Unit-variance isotropic clusters centred on a circle of radius `separation`.
Dataset gaussian_blobs(std::size_t m, std::size_t n_classes, double separation, Rng rng);

/// Marks exactly k_labels rows as labeled, per-class counts differing by at
/// most one where the classes allow it.
Dataset make_ssl_split(const Dataset& ds, std::size_t k_labels, Rng rng);

Tensor augment(const Tensor& x, const AugmentPolicy& policy, Rng rng);

struct AffineShift {
    double rotation = 0.0;  // radians
    double scale = 1.0;
    double translate_x = 0.0;
    double translate_y = 0.0;
};

/// x ↦ c + scale·R(rotation)·(x − c) + t with c the feature centroid. Labels
/// are kept; the labeled mask is cleared. 2-D features only.
Dataset domain_shift(const Dataset& ds, const AffineShift& shift);

/// Rows of `a` followed by rows of `b`.
Dataset concat(const Dataset& a, const Dataset& b);

/// Header f0,...,f{d-1},label,labeled; doubles with 17 significant digits.
void write_csv(std::ostream& out, const Dataset& ds);
/// class_count = max(min_classes, largest label + 1).
Dataset read_csv(std::istream& in, std::size_t min_classes = 2);
void save_csv(const std::string& path, const Dataset& ds);
Dataset load_csv(const std::string& path, std::size_t min_classes = 2);

enum class UnlabeledPool {
    all_rows,        // every row also serves as an unlabeled sample
    unlabeled_rows,  // only rows whose labeled flag is clear
};

/// Endless stream of batches. Each batch holds `labeled_per_batch` labeled
/// rows (drawn from a reshuffled queue, repeating when the labeled pool is
/// small) followed by up to batch_size − labeled_per_batch rows of the
/// unlabeled pool. An epoch is one pass over the unlabeled pool; when that pool
/// is empty or there are no unlabeled slots, an epoch is one pass over the
/// labeled rows instead. x and x̄ are two independent augmentations.
class BatchIterator {
public:
    BatchIterator(const Dataset& ds, std::size_t batch_size, std::size_t labeled_per_batch,
                  AugmentPolicy policy, Rng rng, UnlabeledPool pool = UnlabeledPool::all_rows);

    std::size_t steps_per_epoch() const { return steps_per_epoch_; }
    Batch next();

private:
    std::size_t take_labeled();
    void start_epoch();

    const Dataset* ds_;
    std::size_t batch_size_;
    std::size_t labeled_per_batch_;
    AugmentPolicy policy_;
    Rng rng_;
    std::vector<std::size_t> pool_;
    std::vector<std::size_t> labeled_;
    std::vector<std::size_t> labeled_queue_;
    std::size_t labeled_pos_ = 0;
    std::size_t labeled_shuffles_ = 0;
    std::vector<std::size_t> epoch_order_;
    std::size_t epoch_pos_ = 0;
    std::size_t epoch_ = 0;
    std::size_t step_in_epoch_ = 0;
    std::size_t batches_emitted_ = 0;
    std::size_t steps_per_epoch_ = 0;
    bool labeled_only_ = false;
};

/// Fisher–Yates with the given stream.
void shuffle(std::vector<std::size_t>& v, Rng& rng);

}  // namespace dualstudent::data
