#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dualstudent/errors.hpp"
#include "dualstudent/models.hpp"

using namespace dualstudent;
using models::Mode;
using models::MlpSpec;
using models::ModelParams;

namespace {

Tensor random_inputs(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Rng rng(seed);
    Tensor x = Tensor::zeros({rows, cols});
    for (auto& v : x.values) v = 4.0 * rng.uniform() - 2.0;
    return x;
}

Tensor run_forward(ModelParams& p, const MlpSpec& spec, const Tensor& x, Mode mode, Rng rng) {
    Graph g;
    return models::forward(g, p, spec, g.constant(x), mode, rng).value();
}

ModelParams scalar_params(double v) { return ModelParams{{Tensor::scalar(v)}}; }

}  // namespace

TEST(MlpSpec, Validation) {
    EXPECT_THROW((MlpSpec{{2, 2}}).validate(), ConfigError);
    EXPECT_THROW((MlpSpec{{2, 8, 1}}).validate(), ConfigError);
    MlpSpec bad_dropout{{2, 8, 2}, 0.1, 1.0, 0.0};
    EXPECT_THROW(bad_dropout.validate(), ConfigError);
    MlpSpec bad_noise{{2, 8, 2}, 0.1, 0.0, -1.0};
    EXPECT_THROW(bad_noise.validate(), ConfigError);
    EXPECT_NO_THROW((MlpSpec{{2, 8, 2}}).validate());
}

TEST(InitParams, DeterministicAndSeedSensitive) {
    MlpSpec spec;
    auto a = models::init_params(spec, Rng(1));
    EXPECT_EQ(a, models::init_params(spec, Rng(1)));
    EXPECT_GT(models::weight_distance(a, models::init_params(spec, Rng(2))), 0.0);
    EXPECT_TRUE(a.matches(spec));
    EXPECT_EQ(a.parameter_count(), 2u * 64 + 64 + 64u * 64 + 64 + 64u * 2 + 2);
    for (std::size_t l = 0; l < spec.layer_count(); ++l)
        for (double b : a.bias(l).values) EXPECT_EQ(b, 0.0);
}

TEST(InitParams, HeScaleSampleStatistics) {
    MlpSpec spec{{1000, 1000, 2}};
    auto p = models::init_params(spec, Rng(5));
    const auto& w = p.weight(0).values;
    double s = 0, s2 = 0;
    for (double v : w) {
        s += v;
        s2 += v * v;
    }
    const double n = static_cast<double>(w.size());
    const double std = std::sqrt(s2 / n - (s / n) * (s / n));
    EXPECT_NEAR(std, std::sqrt(2.0 / 1000.0), 0.05 * std::sqrt(2.0 / 1000.0));
}

TEST(Forward, EvalIsDeterministicAndRowsNormalized) {
    MlpSpec spec{{2, 16, 16, 3}, 0.1, 0.3, 0.2};
    auto p = models::init_params(spec, Rng(3));
    Tensor x = random_inputs(20, 2, 4);
    Tensor a = run_forward(p, spec, x, Mode::eval, Rng(1));
    Tensor b = run_forward(p, spec, x, Mode::eval, Rng(2));
    EXPECT_EQ(a, b);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0;
        for (double v : a.row(r)) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
    EXPECT_EQ(a, models::predict(p, spec, x));
}

TEST(Forward, NoiselessTrainEqualsEval) {
    MlpSpec spec{{2, 16, 16, 3}};
    auto p = models::init_params(spec, Rng(3));
    Tensor x = random_inputs(10, 2, 8);
    EXPECT_EQ(run_forward(p, spec, x, Mode::train, Rng(9)), run_forward(p, spec, x, Mode::eval, Rng(9)));
}

TEST(Forward, NoisyTrainDependsOnStream) {
    MlpSpec spec{{2, 16, 16, 3}, 0.1, 0.2, 0.1};
    auto p = models::init_params(spec, Rng(3));
    Tensor x = random_inputs(10, 2, 8);
    Tensor a = run_forward(p, spec, x, Mode::train, Rng(1));
    EXPECT_EQ(a, run_forward(p, spec, x, Mode::train, Rng(1)));
    EXPECT_NE(a, run_forward(p, spec, x, Mode::train, Rng(2)));
}

TEST(Forward, InputDimensionMismatchThrows) {
    MlpSpec spec;
    auto p = models::init_params(spec, Rng(1));
    EXPECT_THROW(run_forward(p, spec, random_inputs(3, 5, 1), Mode::eval, Rng()), ShapeError);
}

TEST(Forward, GradientMatchesFiniteDifferences) {
    MlpSpec spec{{3, 5, 4, 3}};
    auto params = models::init_params(spec, Rng(12));
    Tensor x = random_inputs(6, 3, 13);
    Tensor target = random_inputs(6, 3, 14);
    auto loss_value = [&](ModelParams& p, bool grad) {
        Graph g;
        Var out = grad ? models::forward(g, p, spec, g.constant(x), Mode::eval, Rng())
                       : models::forward_frozen(g, p, spec, g.constant(x), Mode::eval, Rng());
        Var loss = mse(out, g.constant(target));
        if (grad) g.backward(loss);
        return loss.value().values[0];
    };
    loss_value(params, true);
    const double h = 1e-6;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        ASSERT_TRUE(params.tensors[t].has_grad());
        for (std::size_t i = 0; i < params.tensors[t].size(); ++i) {
            ModelParams plus = params, minus = params;
            plus.tensors[t].values[i] += h;
            minus.tensors[t].values[i] -= h;
            double numeric = (loss_value(plus, false) - loss_value(minus, false)) / (2 * h);
            double analytic = params.tensors[t].grad[i];
            double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            EXPECT_LT(std::abs(numeric - analytic) / denom, 1e-4) << t << ":" << i;
        }
    }
}

TEST(EmaUpdate, DegenerateCoefficients) {
    MlpSpec spec;
    auto student = models::init_params(spec, Rng(1));
    auto teacher = models::init_params(spec, Rng(2));
    auto kept = teacher;
    models::ema_update(kept, student, 1.0);
    EXPECT_EQ(kept, teacher);
    models::ema_update(teacher, student, 0.0);
    EXPECT_EQ(teacher, student);
}

TEST(EmaUpdate, GeometricClosedForm) {
    auto teacher = scalar_params(0.0);
    auto student = scalar_params(1.0);
    for (int t = 1; t <= 300; ++t) {
        models::ema_update(teacher, student, 0.99);
        EXPECT_NEAR(teacher.tensors[0].values[0], 1.0 - std::pow(0.99, t), 1e-13) << t;
    }
    auto once = scalar_params(0.0);
    models::ema_update(once, student, 0.99);
    EXPECT_NEAR(once.tensors[0].values[0], 0.01, 1e-16);
}

TEST(EmaUpdate, ConvexCombinationPerEntry) {
    MlpSpec spec;
    auto student = models::init_params(spec, Rng(4));
    auto teacher = models::init_params(spec, Rng(5));
    auto before = teacher;
    models::ema_update(teacher, student, 0.7);
    for (std::size_t t = 0; t < teacher.tensors.size(); ++t)
        for (std::size_t i = 0; i < teacher.tensors[t].size(); ++i) {
            double lo = std::min(before.tensors[t].values[i], student.tensors[t].values[i]);
            double hi = std::max(before.tensors[t].values[i], student.tensors[t].values[i]);
            EXPECT_GE(teacher.tensors[t].values[i], lo);
            EXPECT_LE(teacher.tensors[t].values[i], hi);
        }
}

TEST(EmaUpdate, Errors) {
    auto a = models::init_params(MlpSpec{{2, 4, 2}}, Rng(1));
    auto b = models::init_params(MlpSpec{{2, 5, 2}}, Rng(1));
    EXPECT_THROW(models::ema_update(a, b, 0.5), ShapeError);
    auto c = a;
    EXPECT_THROW(models::ema_update(a, c, 1.5), InputError);
}

TEST(WeightDistance, HandValueAndMetricProperties) {
    EXPECT_DOUBLE_EQ(models::weight_distance(scalar_params(3), scalar_params(7)), 4.0);
    MlpSpec spec{{2, 8, 2}};
    auto a = models::init_params(spec, Rng(1));
    auto b = models::init_params(spec, Rng(2));
    EXPECT_EQ(models::weight_distance(a, a), 0.0);
    EXPECT_DOUBLE_EQ(models::weight_distance(a, b), models::weight_distance(b, a));
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto x = models::init_params(spec, Rng(100 + s));
        auto y = models::init_params(spec, Rng(200 + s));
        auto z = models::init_params(spec, Rng(300 + s));
        EXPECT_LE(models::weight_distance(x, z),
                  models::weight_distance(x, y) + models::weight_distance(y, z) + 1e-12);
    }
    auto other = models::init_params(MlpSpec{{2, 9, 2}}, Rng(1));
    EXPECT_THROW(models::weight_distance(a, other), ShapeError);
}

TEST(Checkpoint, RoundTripIsBitExact) {
    MlpSpec spec{{2, 7, 5, 3}, 0.2, 0.1, 0.05};
    auto p = models::init_params(spec, Rng(77));
    p.bias(1).values[2] = 1.0 / 3.0;
    p.weight(0).values[0] = 5e-324;
    std::stringstream ss;
    models::write_checkpoint(ss, spec, p);
    MlpSpec spec2;
    ModelParams p2;
    models::read_checkpoint(ss, spec2, p2);
    EXPECT_EQ(spec2, spec);
    EXPECT_EQ(p2, p);
}

TEST(Checkpoint, CorruptInputThrows) {
    std::stringstream ss("not a checkpoint\n");
    MlpSpec spec;
    ModelParams p;
    EXPECT_THROW(models::read_checkpoint(ss, spec, p), InputError);
    EXPECT_THROW(models::load_checkpoint("/nonexistent/dir/x.ckpt", spec, p), IoError);
}
