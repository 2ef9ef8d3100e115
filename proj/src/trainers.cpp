#include "dualstudent/trainers.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "dualstudent/errors.hpp"
#include "dualstudent/optim.hpp"
#include "dualstudent/ssl.hpp"

namespace dualstudent::train {

namespace {

constexpr std::array<std::pair<Method, std::string_view>, 8> kMethodNames{{
    {Method::supervised, "supervised"},
    {Method::pi, "pi"},
    {Method::mean_teacher, "mean_teacher"},
    {Method::cs_baseline, "cs_baseline"},
    {Method::dual_student, "dual_student"},
    {Method::multiple_student, "multiple_student"},
    {Method::imbalanced_student, "imbalanced_student"},
    {Method::domain_adapt, "domain_adapt"},
}};

struct Slot {
    Model model;
    std::optional<SgdState> opt;
    Rng noise;
    bool has_records = false;

    // Epoch accumulators.
    double cls = 0.0, con = 0.0, sta = 0.0, total = 0.0;
    std::size_t steps = 0, stable = 0, considered = 0, terms = 0;

    void reset_epoch() {
        cls = con = sta = total = 0.0;
        steps = stable = considered = terms = 0;
    }
};

struct StepContext {
    std::size_t epoch = 0;
    std::size_t step = 0;  // global, from 1
    double lr = 0.0;
    double ramp = 1.0;
};

void check_finite(double value, const StepContext& ctx, const std::string& what) {
    if (!std::isfinite(value)) {
        throw NumericError("non-finite " + what + " at step " + std::to_string(ctx.step) + " (epoch " +
                           std::to_string(ctx.epoch + 1) + ")");
    }
}

struct Pass {
    Var px;
    Var pxbar;
    Var cls;
    Var con;
    bool has_xbar = false;
};

// Student forward on both views; the x̄ branch is frozen since it only serves
// as a target.
Pass student_pass(Graph& g, Slot& s, const data::Batch& batch, const StepContext& ctx, bool need_xbar) {
    Pass p;
    const Rng step_rng = s.noise.derive(ctx.step);
    p.px = models::forward(g, s.model.params, s.model.spec, g.constant(batch.x), models::Mode::train,
                           step_rng.derive(0));
    p.cls = ssl::classification_loss(p.px, batch.labels, batch.labeled_mask);
    if (need_xbar) {
        p.pxbar = models::forward_frozen(g, s.model.params, s.model.spec, g.constant(batch.x_bar),
                                         models::Mode::train, step_rng.derive(1));
        p.con = ssl::consistency_loss(p.px, p.pxbar);
        p.has_xbar = true;
    } else {
        p.con = p.cls;
    }
    return p;
}

void apply_step(Slot& s, double lr) { sgd_step(s.model.params.tensors, *s.opt, lr); }

void accumulate(Slot& s, double cls, double con, double sta, double total) {
    s.cls += cls;
    s.con += con;
    s.sta += sta;
    s.total += total;
    ++s.steps;
}

class Session {
public:
    Session(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test, const Hooks& hooks,
            data::UnlabeledPool pool = data::UnlabeledPool::all_rows)
        : cfg_(cfg), train_(train), test_(test), hooks_(hooks), base_(cfg.seed),
          batches_(train, cfg.batch_size, cfg.labeled_per_batch, cfg.augment,
                   base_.derive(stream_tag("batches")), pool) {
        test.validate();
        if (train.dim() != test.dim()) throw ConfigError("train and test sets have different feature dimensions");
    }

    Slot& add_student(const std::string& name, const models::MlpSpec& spec, std::size_t index) {
        if (spec.input_dim() != train_.dim()) {
            throw ConfigError("model input dim " + std::to_string(spec.input_dim()) + " does not match data dim " +
                              std::to_string(train_.dim()));
        }
        if (spec.class_count() < train_.class_count) throw ConfigError("model has fewer outputs than the data has classes");
        const std::size_t init_index = cfg_.shared_init ? 0 : index;
        Slot s;
        s.model = Model{name, spec, models::init_params(spec, base_.derive(stream_tag("init")).derive(init_index))};
        s.opt = SgdState::for_params(s.model.params.tensors, cfg_.momentum, cfg_.weight_decay);
        s.noise = base_.derive(stream_tag("student-noise")).derive(index);
        slots_.push_back(std::move(s));
        return slots_.back();
    }

    void add_teacher(const std::string& name, std::size_t student) {
        Slot t;
        t.model = Model{name, slots_[student].model.spec, slots_[student].model.params};
        t.noise = base_.derive(stream_tag("teacher-noise"));
        slots_.push_back(std::move(t));
    }

    std::vector<Slot>& slots() { return slots_; }
    Rng base() const { return base_; }

    template <typename StepFn, typename HeadlineFn>
    RunResult run(StepFn&& step_fn, HeadlineFn&& headline) {
        RunResult result;
        result.steps_per_epoch = batches_.steps_per_epoch();
        result.stable_ratio_trace.resize(slots_.size());
        const auto n_total = static_cast<std::int64_t>(cfg_.epochs * result.steps_per_epoch);
        const std::string method(method_name(cfg_.method));
        const auto emit = [&](std::size_t epoch, const std::string& metric, double value) {
            result.metrics.push_back(MetricsRow{cfg_.run_id, method, cfg_.seed, epoch + 1, metric, value});
        };
        StepContext ctx;
        for (std::size_t epoch = 0; epoch < cfg_.epochs; ++epoch) {
            for (Slot& s : slots_) s.reset_epoch();
            ctx.epoch = epoch;
            ctx.ramp = ssl::rampup(epoch, cfg_.ramp_epochs);
            for (std::size_t k = 0; k < result.steps_per_epoch; ++k) {
                ++ctx.step;
                ctx.lr = cosine_lr(static_cast<std::int64_t>(ctx.step), n_total, cfg_.gamma0);
                const data::Batch batch = batches_.next();
                StepRecord rec;
                rec.epoch = epoch;
                rec.step = ctx.step;
                rec.terms.assign(slots_.size(), 0);
                step_fn(batch, ctx, rec);
                for (const Slot& s : slots_) {
                    if (!s.model.params.all_finite()) {
                        throw NumericError("non-finite parameters in " + s.model.name + " at step " +
                                           std::to_string(ctx.step));
                    }
                }
                result.steps.push_back(std::move(rec));
            }

            std::vector<double> test_acc;
            for (std::size_t m = 0; m < slots_.size(); ++m) {
                Slot& s = slots_[m];
                const std::string& name = s.model.name;
                test_acc.push_back(accuracy(s.model.params, s.model.spec, test_));
                emit(epoch, "test_acc." + name, test_acc.back());
                emit(epoch, "train_acc." + name, accuracy(s.model.params, s.model.spec, train_));
                if (s.opt && s.steps > 0) {
                    const double n = static_cast<double>(s.steps);
                    emit(epoch, "loss_cls." + name, s.cls / n);
                    emit(epoch, "loss_con." + name, s.con / n);
                    emit(epoch, "loss_sta." + name, s.sta / n);
                    emit(epoch, "loss_total." + name, s.total / n);
                }
                if (s.has_records) {
                    const double ratio = s.considered ? static_cast<double>(s.stable) / static_cast<double>(s.considered) : 0.0;
                    result.stable_ratio_trace[m].push_back(ratio);
                    emit(epoch, "stable_ratio." + name, ratio);
                    emit(epoch, "sta_terms." + name, static_cast<double>(s.terms));
                }
            }
            result.final_accuracy = headline(test_acc);
            emit(epoch, "test_acc", result.final_accuracy);
            emit(epoch, "lr", ctx.lr);

            if (hooks_.on_epoch) {
                std::vector<Model> view;
                view.reserve(slots_.size());
                for (const Slot& s : slots_) view.push_back(s.model);
                std::vector<MetricsRow> extra;
                hooks_.on_epoch(epoch, view, extra);
                for (MetricsRow& row : extra) {
                    row.run_id = cfg_.run_id;
                    row.method = method;
                    row.seed = cfg_.seed;
                    row.epoch = epoch + 1;
                    result.metrics.push_back(std::move(row));
                }
            }
        }
        for (const Slot& s : slots_) result.models.push_back(s.model);
        return result;
    }

private:
    const TrainConfig& cfg_;
    const data::Dataset& train_;
    const data::Dataset& test_;
    const Hooks& hooks_;
    Rng base_;
    data::BatchIterator batches_;
    std::vector<Slot> slots_;
};

std::string student_name(std::size_t index) { return "s" + std::to_string(index); }

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// One update of a student pair on a shared batch. `gated` selects the
// stabilization constraint; otherwise every unlabeled row gets a plain
// detached MSE in both directions.
void pair_step(Slot& a, Slot& b, std::size_t ia, std::size_t ib, const data::Batch& batch,
               const StepContext& ctx, const TrainConfig& cfg, bool gated, StepRecord& rec) {
    Graph g;
    Pass pa = student_pass(g, a, batch, ctx, true);
    Pass pb = student_pass(g, b, batch, ctx, true);

    Mask eligible(batch.size());
    std::size_t eligible_count = 0;
    for (std::size_t r = 0; r < batch.size(); ++r) {
        eligible[r] = batch.labeled_mask[r] ? 0 : 1;
        eligible_count += eligible[r];
    }
    rec.eligible = eligible_count;

    const auto recs_a = ssl::stability_records(pa.px.value(), pa.pxbar.value(), cfg.xi);
    const auto recs_b = ssl::stability_records(pb.px.value(), pb.pxbar.value(), cfg.xi);
    for (std::size_t r = 0; r < batch.size(); ++r) {
        if (!eligible[r]) continue;
        a.stable += recs_a[r].stable;
        b.stable += recs_b[r].stable;
    }
    a.considered += eligible_count;
    b.considered += eligible_count;
    a.has_records = b.has_records = true;

    Var sta_a, sta_b;
    std::size_t terms_a = 0, terms_b = 0;
    if (gated) {
        ssl::StabilizationLoss stab = ssl::stabilization_loss(recs_a, recs_b, pa.px, pb.px, eligible);
        sta_a = stab.loss_i;
        sta_b = stab.loss_j;
        terms_a = stab.count_i;
        terms_b = stab.count_j;
    } else {
        std::vector<double> weights(eligible.begin(), eligible.end());
        const double denom = static_cast<double>(batch.size());
        sta_a = weighted_row_sq_dist(pa.px, detach(pb.px), weights, denom);
        sta_b = weighted_row_sq_dist(pb.px, detach(pa.px), weights, denom);
        terms_a = terms_b = eligible_count;
    }
    rec.terms[ia] = terms_a;
    rec.terms[ib] = terms_b;
    a.terms += terms_a;
    b.terms += terms_b;

    Var total_a = ssl::total_loss(pa.cls, pa.con, sta_a, cfg.lambda1, cfg.lambda2, ctx.ramp);
    Var total_b = ssl::total_loss(pb.cls, pb.con, sta_b, cfg.lambda1, cfg.lambda2, ctx.ramp);
    const double va = total_a.value().values[0];
    const double vb = total_b.value().values[0];
    check_finite(va, ctx, "loss of " + a.model.name);
    check_finite(vb, ctx, "loss of " + b.model.name);
    g.backward(add(total_a, total_b));
    apply_step(a, ctx.lr);
    apply_step(b, ctx.lr);
    accumulate(a, pa.cls.value().values[0], pa.con.value().values[0], sta_a.value().values[0], va);
    accumulate(b, pb.cls.value().values[0], pb.con.value().values[0], sta_b.value().values[0], vb);
}

void require_method(const TrainConfig& cfg, Method expected) {
    if (cfg.method != expected) {
        throw ConfigError("config method is " + std::string(method_name(cfg.method)) + ", expected " +
                          std::string(method_name(expected)));
    }
    cfg.validate();
}

RunResult run_pair_method(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                          const Hooks& hooks, bool gated, const models::MlpSpec& second_spec,
                          data::UnlabeledPool pool, bool headline_first) {
    Session session(cfg, train, test, hooks, pool);
    session.add_student(student_name(0), cfg.spec, 0);
    session.add_student(student_name(1), second_spec, 1);
    auto& slots = session.slots();
    return session.run(
        [&](const data::Batch& batch, const StepContext& ctx, StepRecord& rec) {
            pair_step(slots[0], slots[1], 0, 1, batch, ctx, cfg, gated, rec);
        },
        [&](const std::vector<double>& acc) { return headline_first ? acc[0] : mean_of(acc); });
}

RunResult run_supervised(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                         const Hooks& hooks, data::UnlabeledPool pool) {
    Session session(cfg, train, test, hooks, pool);
    Slot& s = session.add_student(student_name(cfg.stream_index), cfg.spec, cfg.stream_index);
    return session.run(
        [&](const data::Batch& batch, const StepContext& ctx, StepRecord&) {
            Graph g;
            Pass p = student_pass(g, s, batch, ctx, false);
            const double loss = p.cls.value().values[0];
            check_finite(loss, ctx, "loss");
            g.backward(p.cls);
            apply_step(s, ctx.lr);
            accumulate(s, loss, 0.0, 0.0, loss);
        },
        [](const std::vector<double>& acc) { return acc[0]; });
}

RunResult run_pi(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test, const Hooks& hooks,
                 data::UnlabeledPool pool) {
    Session session(cfg, train, test, hooks, pool);
    Slot& s = session.add_student(student_name(cfg.stream_index), cfg.spec, cfg.stream_index);
    return session.run(
        [&](const data::Batch& batch, const StepContext& ctx, StepRecord&) {
            Graph g;
            Pass p = student_pass(g, s, batch, ctx, true);
            Var total = ssl::total_loss(p.cls, p.con, p.cls, cfg.lambda1, 0.0, ctx.ramp);
            const double loss = total.value().values[0];
            check_finite(loss, ctx, "loss");
            g.backward(total);
            apply_step(s, ctx.lr);
            accumulate(s, p.cls.value().values[0], p.con.value().values[0], 0.0, loss);
        },
        [](const std::vector<double>& acc) { return acc[0]; });
}

RunResult run_mean_teacher(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                           const Hooks& hooks, data::UnlabeledPool pool) {
    Session session(cfg, train, test, hooks, pool);
    session.add_student("student", cfg.spec, cfg.stream_index);
    session.add_teacher("teacher", 0);
    auto& slots = session.slots();
    return session.run(
        [&](const data::Batch& batch, const StepContext& ctx, StepRecord&) {
            Slot& student = slots[0];
            Slot& teacher = slots[1];
            Graph g;
            Pass p = student_pass(g, student, batch, ctx, false);
            Var target = models::forward_frozen(g, teacher.model.params, teacher.model.spec, g.constant(batch.x_bar),
                                                models::Mode::train, teacher.noise.derive(ctx.step).derive(1));
            Var con = ssl::consistency_loss(p.px, target);
            // The consistency weight ramps like the stabilization weight does.
            Var total = ssl::total_loss(p.cls, con, p.cls, cfg.lambda1 * ctx.ramp, 0.0, 1.0);
            const double loss = total.value().values[0];
            check_finite(loss, ctx, "loss");
            g.backward(total);
            apply_step(student, ctx.lr);
            models::ema_update(teacher.model.params, student.model.params, cfg.alpha);
            accumulate(student, p.cls.value().values[0], con.value().values[0], 0.0, loss);
        },
        [](const std::vector<double>& acc) { return acc[1]; });
}

RunResult run_multiple(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                       const Hooks& hooks, data::UnlabeledPool pool) {
    Session session(cfg, train, test, hooks, pool);
    for (std::size_t k = 0; k < cfg.n_students; ++k) session.add_student(student_name(k), cfg.spec, k);
    auto& slots = session.slots();
    const Rng pairing = session.base().derive(stream_tag("pairing"));
    return session.run(
        [&](const data::Batch& batch, const StepContext& ctx, StepRecord& rec) {
            std::vector<std::size_t> order(cfg.n_students);
            std::iota(order.begin(), order.end(), std::size_t{0});
            Rng shuffle_rng = pairing.derive(ctx.step);
            data::shuffle(order, shuffle_rng);
            for (std::size_t k = 0; k + 1 < order.size(); k += 2) {
                const std::size_t i = std::min(order[k], order[k + 1]);
                const std::size_t j = std::max(order[k], order[k + 1]);
                pair_step(slots[i], slots[j], i, j, batch, ctx, cfg, true, rec);
            }
        },
        [](const std::vector<double>& acc) { return mean_of(acc); });
}

RunResult dispatch(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                   const Hooks& hooks, data::UnlabeledPool pool) {
    switch (cfg.method) {
        case Method::supervised: return run_supervised(cfg, train, test, hooks, pool);
        case Method::pi: return run_pi(cfg, train, test, hooks, pool);
        case Method::mean_teacher: return run_mean_teacher(cfg, train, test, hooks, pool);
        case Method::cs_baseline: return run_pair_method(cfg, train, test, hooks, false, cfg.spec, pool, false);
        case Method::dual_student: return run_pair_method(cfg, train, test, hooks, true, cfg.spec, pool, false);
        case Method::multiple_student: return run_multiple(cfg, train, test, hooks, pool);
        case Method::imbalanced_student:
            return run_pair_method(cfg, train, test, hooks, true, *cfg.strong_spec, pool, true);
        case Method::domain_adapt: break;
    }
    throw ConfigError("domain_adapt runs through run_domain_adaptation");
}

}  // namespace

std::string_view method_name(Method method) {
    for (const auto& [m, name] : kMethodNames) {
        if (m == method) return name;
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (const auto& [m, n] : kMethodNames) {
        if (n == name) return m;
    }
    throw ConfigError("unknown method '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    spec.validate();
    const auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (epochs == 0) fail("train: epochs must be positive");
    if (batch_size == 0) fail("train: batch_size must be positive");
    if (labeled_per_batch > batch_size) fail("train: labeled_per_batch exceeds batch_size");
    if (!(xi >= 0.0 && xi < 1.0)) fail("train: xi must lie in [0, 1)");
    if (!(alpha >= 0.0 && alpha <= 1.0)) fail("train: alpha must lie in [0, 1]");
    if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) fail("train: lambda1 and lambda2 must be non-negative");
    if (!(gamma0 >= 0.0)) fail("train: gamma0 must be non-negative");
    if (!(weight_decay >= 0.0)) fail("train: weight_decay must be non-negative");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("train: momentum must lie in [0, 1)");
    const Method effective = method == Method::domain_adapt ? da_method : method;
    if (effective == Method::domain_adapt) fail("train: da_method cannot be domain_adapt");
    if (effective == Method::multiple_student && (n_students < 2 || n_students % 2 != 0)) {
        fail("train: multiple_student needs an even n_students >= 2, got " + std::to_string(n_students));
    }
    if (effective == Method::imbalanced_student) {
        if (!strong_spec) fail("train: imbalanced_student needs a strong model spec");
        strong_spec->validate();
        if (strong_spec->input_dim() != spec.input_dim() || strong_spec->class_count() != spec.class_count()) {
            fail("train: strong model must share input and output dims with the base model");
        }
    }
}

double accuracy(const models::ModelParams& params, const models::MlpSpec& spec, const data::Dataset& ds) {
    const Tensor probs = models::predict(params, spec, ds.features);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < ds.size(); ++r) correct += ssl::predicted_label(probs.row(r)) == ds.labels[r];
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

RunResult train_supervised(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                           const Hooks& hooks) {
    require_method(cfg, Method::supervised);
    return run_supervised(cfg, train, test, hooks, data::UnlabeledPool::all_rows);
}

RunResult train_pi(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test, const Hooks& hooks) {
    require_method(cfg, Method::pi);
    return run_pi(cfg, train, test, hooks, data::UnlabeledPool::all_rows);
}

RunResult train_mean_teacher(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                             const Hooks& hooks) {
    require_method(cfg, Method::mean_teacher);
    return run_mean_teacher(cfg, train, test, hooks, data::UnlabeledPool::all_rows);
}

RunResult train_cs_baseline(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                            const Hooks& hooks) {
    require_method(cfg, Method::cs_baseline);
    return run_pair_method(cfg, train, test, hooks, false, cfg.spec, data::UnlabeledPool::all_rows, false);
}

RunResult train_dual_student(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                             const Hooks& hooks) {
    require_method(cfg, Method::dual_student);
    return run_pair_method(cfg, train, test, hooks, true, cfg.spec, data::UnlabeledPool::all_rows, false);
}

RunResult train_multiple_student(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                                 const Hooks& hooks) {
    require_method(cfg, Method::multiple_student);
    return run_multiple(cfg, train, test, hooks, data::UnlabeledPool::all_rows);
}

RunResult train_imbalanced_student(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test,
                                   const Hooks& hooks) {
    require_method(cfg, Method::imbalanced_student);
    return run_pair_method(cfg, train, test, hooks, true, *cfg.strong_spec, data::UnlabeledPool::all_rows, true);
}

RunResult run_domain_adaptation(const TrainConfig& cfg, const data::Dataset& source, const data::Dataset& target,
                                const data::Dataset& target_test, const Hooks& hooks) {
    TrainConfig inner = cfg;
    inner.method = cfg.method == Method::domain_adapt ? cfg.da_method : cfg.method;
    inner.validate();
    source.validate();
    if (source.labeled_count() == 0) throw ConfigError("domain adaptation: source domain has no labeled rows");
    if (target.size() > 0) {
        target.validate();
        if (target.labeled_count() > 0) throw ConfigError("domain adaptation: target domain must be unlabeled");
        const data::Dataset merged = data::concat(source, target);
        return dispatch(inner, merged, target_test, hooks, data::UnlabeledPool::unlabeled_rows);
    }
    // Nothing to adapt to: plain supervised training on the source.
    inner.method = Method::supervised;
    return dispatch(inner, source, target_test, hooks, data::UnlabeledPool::all_rows);
}

RunResult train(const TrainConfig& cfg, const data::Dataset& train, const data::Dataset& test, const Hooks& hooks) {
    cfg.validate();
    return dispatch(cfg, train, test, hooks, data::UnlabeledPool::all_rows);
}

}  // namespace dualstudent::train
