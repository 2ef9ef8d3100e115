#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "dualstudent/data.hpp"
#include "dualstudent/errors.hpp"

using namespace dualstudent;
using data::Dataset;

namespace {

std::vector<std::size_t> class_counts(const Dataset& ds, bool labeled_only) {
    std::vector<std::size_t> counts(ds.class_count, 0);
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (!labeled_only || ds.labeled_mask[i]) ++counts[static_cast<std::size_t>(ds.labels[i])];
    return counts;
}

double dist(double ax, double ay, double bx, double by) { return std::hypot(ax - bx, ay - by); }

}  // namespace

TEST(TwoMoons, BalancedAndReproducible) {
    auto ds = data::two_moons(100, 0.1, Rng(1));
    EXPECT_EQ(ds.size(), 100u);
    EXPECT_EQ(ds.dim(), 2u);
    EXPECT_EQ(class_counts(ds, false), (std::vector<std::size_t>{50, 50}));
    EXPECT_EQ(ds.labeled_count(), 0u);
    EXPECT_EQ(ds, data::two_moons(100, 0.1, Rng(1)));
    EXPECT_NE(ds, data::two_moons(100, 0.1, Rng(2)));
    EXPECT_THROW(data::two_moons(1, 0.1, Rng(1)), InputError);
}

TEST(TwoMoons, NoiselessPointsLieOnArcs) {
    auto ds = data::two_moons(200, 0.0, Rng(3));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double x = ds.features.at(i, 0), y = ds.features.at(i, 1);
        if (ds.labels[i] == 0) {
            EXPECT_NEAR(dist(x, y, 0.0, 0.0), 1.0, 1e-12);
            EXPECT_GE(y, -1e-12);
        } else {
            EXPECT_NEAR(dist(x, y, 1.0, 0.5), 1.0, 1e-12);
            EXPECT_LE(y, 0.5 + 1e-12);
        }
    }
}

TEST(GaussianBlobs, BalancedReproducibleAndSeparable) {
    auto ds = data::gaussian_blobs(90, 3, 4.0, Rng(2));
    EXPECT_EQ(class_counts(ds, false), (std::vector<std::size_t>{30, 30, 30}));
    EXPECT_EQ(ds, data::gaussian_blobs(90, 3, 4.0, Rng(2)));
    EXPECT_THROW(data::gaussian_blobs(90, 1, 4.0, Rng(2)), InputError);

    // Nearest-centroid oracle on widely separated clusters.
    auto wide = data::gaussian_blobs(600, 5, 50.0, Rng(4));
    std::vector<double> cx(5, 0), cy(5, 0), n(5, 0);
    for (std::size_t i = 0; i < wide.size(); ++i) {
        auto c = static_cast<std::size_t>(wide.labels[i]);
        cx[c] += wide.features.at(i, 0);
        cy[c] += wide.features.at(i, 1);
        n[c] += 1;
    }
    for (std::size_t c = 0; c < 5; ++c) {
        cx[c] /= n[c];
        cy[c] /= n[c];
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < wide.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 5; ++c)
            if (dist(wide.features.at(i, 0), wide.features.at(i, 1), cx[c], cy[c]) <
                dist(wide.features.at(i, 0), wide.features.at(i, 1), cx[best], cy[best]))
                best = c;
        correct += static_cast<int>(best) == wide.labels[i];
    }
    EXPECT_EQ(correct, wide.size());
}

TEST(SslSplit, BalancedLabels) {
    auto ds = data::two_moons(504, 0.1, Rng(1));
    auto split = data::make_ssl_split(ds, 4, Rng(5));
    EXPECT_EQ(split.labeled_count(), 4u);
    EXPECT_EQ(class_counts(split, true), (std::vector<std::size_t>{2, 2}));
    EXPECT_EQ(split.features, ds.features);
    EXPECT_EQ(split.labels, ds.labels);

    EXPECT_EQ(data::make_ssl_split(ds, 0, Rng(5)).labeled_count(), 0u);
    EXPECT_EQ(data::make_ssl_split(ds, ds.size(), Rng(5)).labeled_count(), ds.size());
    EXPECT_THROW(data::make_ssl_split(ds, ds.size() + 1, Rng(5)), InputError);
}

TEST(SslSplit, PerClassCountsDifferByAtMostOne) {
    for (std::size_t k = 0; k <= 40; ++k) {
        auto ds = data::gaussian_blobs(120, 7, 3.0, Rng(k));
        auto counts = class_counts(data::make_ssl_split(ds, k, Rng(k + 1)), true);
        auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
        EXPECT_LE(*hi - *lo, 1u) << k;
    }
}

TEST(Augment, IdentityIndependenceAndMeanDisplacement) {
    Tensor x = Tensor::filled({1000, 100}, 0.25);
    EXPECT_EQ(data::augment(x, {}, Rng(1)), x);
    data::AugmentPolicy policy{0.15, 0.05};
    Tensor a = data::augment(x, policy, Rng(1));
    EXPECT_EQ(a, data::augment(x, policy, Rng(1)));
    EXPECT_NE(a, data::augment(x, policy, Rng(2)));
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.values[i] - x.values[i];
    const double n = static_cast<double>(a.size());
    const double sd = std::sqrt(0.15 * 0.15 + 0.05 * 0.05 / 3.0);
    EXPECT_LT(std::abs(s / n), 3 * sd / std::sqrt(n));
    EXPECT_THROW(data::augment(x, {-1.0, 0.0}, Rng(1)), InputError);
}

TEST(DomainShift, IdentityAndLabelPreservation) {
    auto ds = data::make_ssl_split(data::two_moons(50, 0.1, Rng(1)), 10, Rng(2));
    auto same = data::domain_shift(ds, {0.0, 1.0, 0.0, 0.0});
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        EXPECT_NEAR(same.features.values[i], ds.features.values[i], 1e-12);
    EXPECT_EQ(same.labeled_count(), 0u);
    auto moved = data::domain_shift(ds, {0.6, 1.2, 0.3, -0.2});
    EXPECT_EQ(moved.labels, ds.labels);
}

TEST(DomainShift, HalfTurnNegatesAboutCentroid) {
    Dataset ds;
    ds.features = Tensor::matrix(3, 2, {0, 0, 2, 0, 1, 3});
    ds.labels = {0, 1, 0};
    ds.labeled_mask = {1, 1, 1};
    // centroid (1, 1)
    auto r = data::domain_shift(ds, {std::numbers::pi, 1.0, 0.0, 0.0});
    const double expect[] = {2, 2, 0, 2, 1, -1};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(r.features.values[i], expect[i], 1e-12);
}

TEST(DomainShift, InvertibleAndTwoDimensionalOnly) {
    auto ds = data::two_moons(60, 0.1, Rng(4));
    auto fwd = data::domain_shift(ds, {0.6, 1.2, 0.0, 0.0});
    // Centroid is fixed by a pure rotation/scale, so the inverse map undoes it.
    auto back = data::domain_shift(fwd, {-0.6, 1.0 / 1.2, 0.0, 0.0});
    for (std::size_t i = 0; i < ds.features.size(); ++i)
        EXPECT_NEAR(back.features.values[i], ds.features.values[i], 1e-12);

    Dataset three;
    three.features = Tensor::zeros({2, 3});
    three.labels = {0, 1};
    three.labeled_mask = {0, 0};
    EXPECT_THROW(data::domain_shift(three, {}), InputError);
}

TEST(Csv, RoundTripIsExact) {
    auto ds = data::make_ssl_split(data::two_moons(30, 0.2, Rng(8)), 6, Rng(9));
    ds.features.values[0] = 1.0 / 3.0;
    ds.features.values[1] = 1.7e-317;
    std::stringstream ss;
    data::write_csv(ss, ds);
    EXPECT_EQ(ss.str().substr(0, 19), "f0,f1,label,labeled");
    auto back = data::read_csv(ss);
    EXPECT_EQ(back, ds);
}

TEST(Csv, MalformedInputThrows) {
    std::stringstream bad_header("x,y\n1,2\n");
    EXPECT_THROW(data::read_csv(bad_header), InputError);
    std::stringstream bad_value("f0,label,labeled\nabc,0,1\n");
    EXPECT_THROW(data::read_csv(bad_value), InputError);
    std::stringstream bad_flag("f0,label,labeled\n1.0,0,2\n");
    EXPECT_THROW(data::read_csv(bad_flag), InputError);
    EXPECT_THROW(data::load_csv("/nonexistent/file.csv"), IoError);
}

TEST(BatchIterator, SmallLabeledPoolRepeatsAndFillsQuota) {
    auto ds = data::make_ssl_split(data::two_moons(40, 0.1, Rng(1)), 4, Rng(2));
    data::BatchIterator it(ds, 10, 5, {}, Rng(3));
    std::map<std::size_t, std::size_t> seen;
    for (int b = 0; b < 8; ++b) {
        auto batch = it.next();
        std::size_t labeled = 0;
        for (std::size_t r = 0; r < batch.size(); ++r) {
            if (batch.labeled_mask[r]) {
                ++labeled;
                EXPECT_TRUE(ds.labeled_mask[batch.source_rows[r]]);
                ++seen[batch.source_rows[r]];
            }
        }
        EXPECT_EQ(labeled, 5u);
    }
    EXPECT_EQ(seen.size(), 4u);
    for (auto& [row, n] : seen) EXPECT_EQ(n, 10u);
}

TEST(BatchIterator, EveryPoolRowOncePerEpoch) {
    auto ds = data::make_ssl_split(data::two_moons(103, 0.1, Rng(1)), 4, Rng(2));
    for (auto pool : {data::UnlabeledPool::all_rows, data::UnlabeledPool::unlabeled_rows}) {
        data::BatchIterator it(ds, 16, 6, {0.1, 0.0}, Rng(3), pool);
        const std::size_t pool_size = pool == data::UnlabeledPool::all_rows ? 103 : 99;
        EXPECT_EQ(it.steps_per_epoch(), (pool_size + 9) / 10);
        for (int epoch = 0; epoch < 3; ++epoch) {
            std::vector<std::size_t> counts(ds.size(), 0);
            for (std::size_t s = 0; s < it.steps_per_epoch(); ++s) {
                auto b = it.next();
                for (std::size_t r = 0; r < b.size(); ++r)
                    if (!b.labeled_mask[r]) ++counts[b.source_rows[r]];
            }
            for (std::size_t i = 0; i < ds.size(); ++i) {
                bool in_pool = pool == data::UnlabeledPool::all_rows || !ds.labeled_mask[i];
                EXPECT_EQ(counts[i], in_pool ? 1u : 0u);
            }
        }
    }
}

TEST(BatchIterator, ViewsAreIndependentAugmentationsOfSameRows) {
    auto ds = data::make_ssl_split(data::two_moons(50, 0.1, Rng(1)), 4, Rng(2));
    data::BatchIterator it(ds, 8, 2, {0.1, 0.0}, Rng(3));
    auto b = it.next();
    EXPECT_NE(b.x, b.x_bar);
    for (std::size_t r = 0; r < b.size(); ++r) {
        for (std::size_t c = 0; c < 2; ++c) {
            EXPECT_NEAR(b.x.at(r, c), ds.features.at(b.source_rows[r], c), 0.8);
            EXPECT_EQ(b.labels[r], ds.labels[b.source_rows[r]]);
        }
    }
}

TEST(BatchIterator, DeterministicAndSupervisedComposition) {
    auto ds = data::make_ssl_split(data::two_moons(50, 0.1, Rng(1)), 50, Rng(2));
    data::BatchIterator a(ds, 10, 10, {0.1, 0.0}, Rng(3)), b(ds, 10, 10, {0.1, 0.0}, Rng(3));
    EXPECT_EQ(a.steps_per_epoch(), 5u);
    for (int i = 0; i < 12; ++i) {
        auto x = a.next(), y = b.next();
        EXPECT_EQ(x.x, y.x);
        EXPECT_EQ(x.source_rows, y.source_rows);
        for (auto m : x.labeled_mask) EXPECT_EQ(m, 1);
    }
}

TEST(BatchIterator, ImpossibleCompositionThrows) {
    auto ds = data::two_moons(20, 0.1, Rng(1));
    EXPECT_THROW(data::BatchIterator(ds, 4, 5, {}, Rng()), InputError);
    EXPECT_THROW(data::BatchIterator(ds, 4, 2, {}, Rng()), InputError);
    EXPECT_THROW(data::BatchIterator(ds, 0, 0, {}, Rng()), InputError);
}
