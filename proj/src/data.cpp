#include "dualstudent/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "dualstudent/errors.hpp"

namespace dualstudent::data {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

std::size_t Dataset::labeled_count() const {
    return static_cast<std::size_t>(std::count(labeled_mask.begin(), labeled_mask.end(), std::uint8_t{1}));
}

void Dataset::validate() const {
    if (features.rank() != 2) throw InputError("dataset: features must be a matrix");
    if (features.rows() != labels.size() || labeled_mask.size() != labels.size()) {
        throw InputError("dataset: features, labels and mask disagree on the row count");
    }
    if (class_count < 2) throw InputError("dataset: need at least two classes");
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= class_count) {
            throw InputError("dataset: label " + std::to_string(y) + " outside [0, " + std::to_string(class_count) + ")");
        }
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
    if (indices.empty()) throw InputError("dataset: empty subset");
    const std::size_t d = dim();
    Dataset out;
    out.class_count = class_count;
    std::vector<double> values;
    values.reserve(indices.size() * d);
    for (std::size_t i : indices) {
        const auto row = features.row(i);
        values.insert(values.end(), row.begin(), row.end());
        out.labels.push_back(labels[i]);
        out.labeled_mask.push_back(labeled_mask[i]);
    }
    out.features = Tensor::matrix(indices.size(), d, std::move(values));
    return out;
}

namespace {

Dataset shuffled_rows(Dataset ds, Rng rng) {
    std::vector<std::size_t> order(ds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(order, rng);
    return ds.subset(order);
}

}  // namespace

Dataset two_moons(std::size_t m, double noise, Rng rng) {
    if (m < 2) throw InputError("two_moons: need at least two samples");
    if (!(noise >= 0.0)) throw InputError("two_moons: noise must be non-negative");
    Dataset ds;
    ds.class_count = 2;
    std::vector<double> values;
    values.reserve(2 * m);
    Rng angles = rng.derive(stream_tag("angle"));
    Rng jitter = rng.derive(stream_tag("noise"));
    const std::size_t upper = (m + 1) / 2;
    for (std::size_t i = 0; i < m; ++i) {
        const double t = std::numbers::pi * angles.uniform();
        const int label = i < upper ? 0 : 1;
        double x = label == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = label == 0 ? std::sin(t) : 0.5 - std::sin(t);
        if (noise > 0.0) {
            x += noise * jitter.normal();
            y += noise * jitter.normal();
        }
        values.push_back(x);
        values.push_back(y);
        ds.labels.push_back(label);
    }
    ds.features = Tensor::matrix(m, 2, std::move(values));
    ds.labeled_mask.assign(m, 0);
    return shuffled_rows(std::move(ds), rng.derive(stream_tag("order")));
}

Dataset gaussian_blobs(std::size_t m, std::size_t n_classes, double separation, Rng rng) {
    if (n_classes < 2) throw InputError("gaussian_blobs: need at least two classes");
    if (m < n_classes) throw InputError("gaussian_blobs: fewer samples than classes");
    Dataset ds;
    ds.class_count = n_classes;
    std::vector<double> values;
    values.reserve(2 * m);
    Rng noise = rng.derive(stream_tag("noise"));
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t c = i % n_classes;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_classes);
        values.push_back(separation * std::cos(angle) + noise.normal());
        values.push_back(separation * std::sin(angle) + noise.normal());
        ds.labels.push_back(static_cast<int>(c));
    }
    ds.features = Tensor::matrix(m, 2, std::move(values));
    ds.labeled_mask.assign(m, 0);
    return shuffled_rows(std::move(ds), rng.derive(stream_tag("order")));
}

Dataset make_ssl_split(const Dataset& ds, std::size_t k_labels, Rng rng) {
    ds.validate();
    if (k_labels > ds.size()) {
        throw InputError("make_ssl_split: asked for " + std::to_string(k_labels) + " labels from " +
                         std::to_string(ds.size()) + " samples");
    }
    const std::size_t n = ds.class_count;
    std::vector<std::vector<std::size_t>> by_class(n);
    for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);
    for (std::size_t c = 0; c < n; ++c) {
        Rng class_rng = rng.derive(c);
        shuffle(by_class[c], class_rng);
    }
    // Round-robin over classes keeps per-class counts within one of each
    // other; classes that run dry are skipped.
    std::vector<std::size_t> taken(n, 0);
    Dataset out = ds;
    out.labeled_mask.assign(ds.size(), 0);
    std::size_t remaining = k_labels;
    while (remaining > 0) {
        for (std::size_t c = 0; c < n && remaining > 0; ++c) {
            if (taken[c] < by_class[c].size()) {
                out.labeled_mask[by_class[c][taken[c]++]] = 1;
                --remaining;
            }
        }
    }
    return out;
}

Tensor augment(const Tensor& x, const AugmentPolicy& policy, Rng rng) {
    if (!(policy.noise_std >= 0.0) || !(policy.jitter >= 0.0)) {
        throw InputError("augment: noise and jitter must be non-negative");
    }
    Tensor out = x;
    out.clear_grad();
    if (policy.noise_std > 0.0) {
        Rng noise = rng.derive(stream_tag("noise"));
        for (double& v : out.values) v += policy.noise_std * noise.normal();
    }
    if (policy.jitter > 0.0) {
        Rng shift = rng.derive(stream_tag("jitter"));
        for (double& v : out.values) v += policy.jitter * (2.0 * shift.uniform() - 1.0);
    }
    return out;
}

Dataset domain_shift(const Dataset& ds, const AffineShift& shift) {
    ds.validate();
    if (ds.dim() != 2) throw InputError("domain_shift: affine shift needs 2-D features, got " + std::to_string(ds.dim()));
    const std::size_t m = ds.size();
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        cx += ds.features.at(i, 0);
        cy += ds.features.at(i, 1);
    }
    cx /= static_cast<double>(m);
    cy /= static_cast<double>(m);
    const double c = std::cos(shift.rotation), s = std::sin(shift.rotation);
    Dataset out = ds;
    for (std::size_t i = 0; i < m; ++i) {
        const double dx = ds.features.at(i, 0) - cx;
        const double dy = ds.features.at(i, 1) - cy;
        out.features.at(i, 0) = cx + shift.scale * (c * dx - s * dy) + shift.translate_x;
        out.features.at(i, 1) = cy + shift.scale * (s * dx + c * dy) + shift.translate_y;
    }
    out.labeled_mask.assign(m, 0);
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim() != b.dim()) throw InputError("concat: feature dimensions differ");
    Dataset out;
    out.class_count = std::max(a.class_count, b.class_count);
    std::vector<double> values = a.features.values;
    values.insert(values.end(), b.features.values.begin(), b.features.values.end());
    out.features = Tensor::matrix(a.size() + b.size(), a.dim(), std::move(values));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    out.labeled_mask = a.labeled_mask;
    out.labeled_mask.insert(out.labeled_mask.end(), b.labeled_mask.begin(), b.labeled_mask.end());
    return out;
}

void write_csv(std::ostream& out, const Dataset& ds) {
    ds.validate();
    const std::size_t d = ds.dim();
    for (std::size_t c = 0; c < d; ++c) out << 'f' << c << ',';
    out << "label,labeled\n";
    char buf[40];
    for (std::size_t i = 0; i < ds.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", ds.features.at(i, c));
            out << buf << ',';
        }
        out << ds.labels[i] << ',' << static_cast<int>(ds.labeled_mask[i]) << '\n';
    }
}

Dataset read_csv(std::istream& in, std::size_t min_classes) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("dataset csv: missing header");
    std::vector<std::string> header;
    {
        std::istringstream hs(line);
        for (std::string cell; std::getline(hs, cell, ',');) header.push_back(cell);
    }
    if (header.size() < 3 || header[header.size() - 2] != "label" || header.back() != "labeled") {
        throw InputError("dataset csv: header must be f0,...,label,labeled");
    }
    const std::size_t d = header.size() - 2;
    for (std::size_t c = 0; c < d; ++c) {
        if (header[c] != "f" + std::to_string(c)) throw InputError("dataset csv: unexpected column " + header[c]);
    }
    Dataset ds;
    std::vector<double> values;
    std::size_t line_no = 1;
    int max_label = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::vector<std::string> cells;
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != d + 2) throw InputError("dataset csv: line " + std::to_string(line_no) + " has wrong column count");
        try {
            for (std::size_t c = 0; c < d; ++c) {
                double v = 0.0;
                const auto res = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), v);
                if (res.ec != std::errc{} || res.ptr != cells[c].data() + cells[c].size()) {
                    throw std::invalid_argument("not a number");
                }
                values.push_back(v);
            }
            const int label = std::stoi(cells[d]);
            const int flag = std::stoi(cells[d + 1]);
            if (label < 0 || (flag != 0 && flag != 1)) throw std::invalid_argument("range");
            ds.labels.push_back(label);
            ds.labeled_mask.push_back(static_cast<std::uint8_t>(flag));
            max_label = std::max(max_label, label);
        } catch (const std::exception&) {
            throw InputError("dataset csv: bad value on line " + std::to_string(line_no));
        }
    }
    if (ds.labels.empty()) throw InputError("dataset csv: no rows");
    ds.features = Tensor::matrix(ds.labels.size(), d, std::move(values));
    ds.class_count = std::max(min_classes, static_cast<std::size_t>(max_label + 1));
    ds.validate();
    return ds;
}

void save_csv(const std::string& path, const Dataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    write_csv(out, ds);
}

Dataset load_csv(const std::string& path, std::size_t min_classes) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    return read_csv(in, min_classes);
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, std::size_t labeled_per_batch,
                             AugmentPolicy policy, Rng rng, UnlabeledPool pool)
    : ds_(&ds), batch_size_(batch_size), labeled_per_batch_(labeled_per_batch), policy_(policy), rng_(rng) {
    ds.validate();
    if (batch_size == 0) throw InputError("batch_iter: batch size must be positive");
    if (labeled_per_batch > batch_size) throw InputError("batch_iter: more labeled rows than the batch holds");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labeled_mask[i]) labeled_.push_back(i);
        if (pool == UnlabeledPool::all_rows || !ds.labeled_mask[i]) pool_.push_back(i);
    }
    if (labeled_per_batch > 0 && labeled_.empty()) {
        throw InputError("batch_iter: batches need labeled rows but the dataset has none");
    }
    const std::size_t unlabeled_slots = batch_size - labeled_per_batch;
    labeled_only_ = unlabeled_slots == 0 || pool_.empty();
    if (labeled_only_) {
        if (labeled_per_batch == 0) throw InputError("batch_iter: batch composition admits no rows");
        steps_per_epoch_ = (labeled_.size() + labeled_per_batch - 1) / labeled_per_batch;
    } else {
        steps_per_epoch_ = (pool_.size() + unlabeled_slots - 1) / unlabeled_slots;
    }
    start_epoch();
}

void BatchIterator::start_epoch() {
    epoch_order_ = labeled_only_ ? labeled_ : pool_;
    Rng order = rng_.derive(stream_tag("pool")).derive(epoch_);
    shuffle(epoch_order_, order);
    epoch_pos_ = 0;
    step_in_epoch_ = 0;
}

std::size_t BatchIterator::take_labeled() {
    if (labeled_pos_ == labeled_queue_.size()) {
        labeled_queue_ = labeled_;
        Rng order = rng_.derive(stream_tag("labeled")).derive(labeled_shuffles_++);
        shuffle(labeled_queue_, order);
        labeled_pos_ = 0;
    }
    return labeled_queue_[labeled_pos_++];
}

Batch BatchIterator::next() {
    if (step_in_epoch_ == steps_per_epoch_) {
        ++epoch_;
        start_epoch();
    }
    std::vector<std::size_t> rows;
    Mask mask;
    if (labeled_only_) {
        const std::size_t take = std::min(labeled_per_batch_, epoch_order_.size() - epoch_pos_);
        for (std::size_t i = 0; i < take; ++i) rows.push_back(epoch_order_[epoch_pos_++]);
        mask.assign(rows.size(), 1);
    } else {
        for (std::size_t i = 0; i < labeled_per_batch_; ++i) rows.push_back(take_labeled());
        mask.assign(rows.size(), 1);
        const std::size_t take = std::min(batch_size_ - labeled_per_batch_, epoch_order_.size() - epoch_pos_);
        for (std::size_t i = 0; i < take; ++i) {
            rows.push_back(epoch_order_[epoch_pos_++]);
            mask.push_back(0);
        }
    }
    ++step_in_epoch_;

    Batch batch;
    const Dataset picked = ds_->subset(rows);
    Rng views = rng_.derive(stream_tag("augment")).derive(batches_emitted_++);
    batch.x = augment(picked.features, policy_, views.derive(0));
    batch.x_bar = augment(picked.features, policy_, views.derive(1));
    batch.labels = picked.labels;
    batch.labeled_mask = std::move(mask);
    batch.source_rows = std::move(rows);
    return batch;
}

}  // namespace dualstudent::data
