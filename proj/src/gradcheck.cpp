#include "dualstudent/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <ostream>

#include "dualstudent/errors.hpp"
#include "dualstudent/graph.hpp"
#include "dualstudent/metrics.hpp"
#include "dualstudent/models.hpp"
#include "dualstudent/ssl.hpp"

namespace dualstudent::gradcheck {

namespace {

constexpr const char* kComposite = "dual_student_loss";

using Builder = std::function<Var(Graph&, const std::vector<Var>&)>;

Tensor random_matrix(std::size_t rows, std::size_t cols, Rng rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(rows * cols);
    for (double& x : v) x = lo + (hi - lo) * rng.uniform();
    return Tensor::matrix(rows, cols, std::move(v));
}

// Keeps entries away from the kink of leaky_relu.
Tensor away_from_zero(Tensor t) {
    for (double& x : t.values) {
        if (std::abs(x) < 0.05) x = x < 0 ? x - 0.1 : x + 0.1;
    }
    return t;
}

// Fixed random projection to a scalar, so every output entry gets a distinct
// upstream gradient.
Var reduce(Graph& g, Var out) {
    const std::size_t n = out.value().cols();
    Tensor r = random_matrix(n, 1, Rng(99).derive(stream_tag("projection")).derive(n));
    return sum(matmul(out, g.constant(std::move(r))));
}

Entry check_op(const std::string& name, const Builder& build, const Builder& numeric_build,
               const std::vector<Tensor>& inputs, const Options& options) {
    Graph g;
    std::vector<Var> vars;
    for (const Tensor& t : inputs) vars.push_back(g.input(t));
    g.backward(build(g, vars));
    const double corrupt = options.corrupt_op == name ? 1.01 : 1.0;

    const auto evaluate = [&](const std::vector<Tensor>& at) {
        Graph h;
        std::vector<Var> v;
        for (const Tensor& t : at) v.push_back(h.input(t));
        return numeric_build(h, v).value().values[0];
    };

    Entry entry{name, 0.0, kOpThreshold, 0, false};
    std::vector<Tensor> probe = inputs;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto grad = g.grad(vars[i]);
        for (std::size_t j = 0; j < inputs[i].values.size(); ++j) {
            const double x0 = inputs[i].values[j];
            probe[i].values[j] = x0 + options.step;
            const double up = evaluate(probe);
            probe[i].values[j] = x0 - options.step;
            const double down = evaluate(probe);
            probe[i].values[j] = x0;
            const double numeric = (up - down) / (2.0 * options.step);
            const double analytic = (grad.empty() ? 0.0 : grad[j]) * corrupt;
            entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric));
            ++entry.checked;
        }
    }
    entry.passed = entry.max_rel_error < entry.threshold;
    return entry;
}

Entry check_op(const std::string& name, const Builder& build, const std::vector<Tensor>& inputs,
               const Options& options) {
    return check_op(name, build, build, inputs, options);
}

// Loss of the two-student step for a small fixture. The analytic side uses the
// library loss functions; the numeric side differentiates each student's own
// total with every detached quantity (x̄ target, partner prediction, gate)
// frozen at the base point, which is what the detach semantics promise.
Entry check_composite(const Options& options) {
    models::MlpSpec spec;
    spec.layer_widths = {2, 6, 6, 3};
    spec.activation_slope = 0.1;
    spec.dropout_p = 0.2;
    spec.input_noise_std = 0.1;
    const Rng base(2024);
    std::array<models::ModelParams, 2> params{models::init_params(spec, base.derive(1)),
                                              models::init_params(spec, base.derive(2))};
    const std::size_t rows = 10;
    const Tensor x = random_matrix(rows, 2, base.derive(3), -2.0, 2.0);
    Tensor x_bar = x;
    Rng jitter = base.derive(4);
    for (double& v : x_bar.values) v += 0.6 * jitter.normal();
    const Labels labels{0, 1, 2, 0, 1, 2, 0, 1, 2, 0};
    const Mask labeled{1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
    Mask eligible(rows);
    for (std::size_t r = 0; r < rows; ++r) eligible[r] = labeled[r] ? 0 : 1;
    const double xi = 0.4, lambda1 = 10.0, lambda2 = 1.0, ramp = 1.0;
    const std::array<Rng, 2> noise{base.derive(5), base.derive(6)};

    // Analytic pass.
    Graph g;
    std::array<Var, 2> px, pxb, cls, con;
    for (std::size_t s = 0; s < 2; ++s) {
        px[s] = models::forward(g, params[s], spec, g.constant(x), models::Mode::train, noise[s].derive(0));
        pxb[s] = models::forward_frozen(g, params[s], spec, g.constant(x_bar), models::Mode::train, noise[s].derive(1));
        cls[s] = ssl::classification_loss(px[s], labels, labeled);
        con[s] = ssl::consistency_loss(px[s], pxb[s]);
    }
    const auto recs0 = ssl::stability_records(px[0].value(), pxb[0].value(), xi);
    const auto recs1 = ssl::stability_records(px[1].value(), pxb[1].value(), xi);
    ssl::StabilizationLoss stab = ssl::stabilization_loss(recs0, recs1, px[0], px[1], eligible);
    if (stab.count_i == 0 || stab.count_j == 0) {
        throw StateError("gradcheck: composite fixture must route stabilization terms to both students");
    }
    const Var total0 = ssl::total_loss(cls[0], con[0], stab.loss_i, lambda1, lambda2, ramp);
    const Var total1 = ssl::total_loss(cls[1], con[1], stab.loss_j, lambda1, lambda2, ramp);
    g.backward(add(total0, total1));

    const std::array<Tensor, 2> frozen_xbar{pxb[0].value(), pxb[1].value()};
    const std::array<Tensor, 2> frozen_partner{px[1].value(), px[0].value()};
    const std::array<std::vector<double>, 2> weights{stab.weights_i, stab.weights_j};

    const auto own_total = [&](std::size_t s, models::ModelParams& p) {
        Graph h;
        Var out = models::forward_frozen(h, p, spec, h.constant(x), models::Mode::train, noise[s].derive(0));
        Var c = cross_entropy(out, labels, labeled);
        Var k = mse(out, h.constant(frozen_xbar[s]));
        Var st = weighted_row_sq_dist(out, h.constant(frozen_partner[s]), weights[s], static_cast<double>(rows));
        return c.value().values[0] + lambda1 * k.value().values[0] + lambda2 * ramp * st.value().values[0];
    };

    const double corrupt = options.corrupt_op == kComposite ? 1.01 : 1.0;
    Entry entry{kComposite, 0.0, kCompositeThreshold, 0, false};
    for (std::size_t s = 0; s < 2; ++s) {
        models::ModelParams probe = params[s];
        for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
            for (std::size_t j = 0; j < probe.tensors[t].values.size(); ++j) {
                const double w0 = params[s].tensors[t].values[j];
                probe.tensors[t].values[j] = w0 + options.step;
                const double up = own_total(s, probe);
                probe.tensors[t].values[j] = w0 - options.step;
                const double down = own_total(s, probe);
                probe.tensors[t].values[j] = w0;
                const double numeric = (up - down) / (2.0 * options.step);
                const double analytic = params[s].tensors[t].grad[j] * corrupt;
                entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic, numeric));
                ++entry.checked;
            }
        }
    }
    entry.passed = entry.max_rel_error < entry.threshold;
    return entry;
}

}  // namespace

double relative_error(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / scale;
}

bool Report::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const Entry& e) { return e.passed; });
}

std::string Report::first_failure() const {
    for (const Entry& e : entries) {
        if (!e.passed) return e.op;
    }
    return {};
}

std::vector<std::string> op_names() {
    return {"matmul", "add_bias", "leaky_relu", "softmax", "cross_entropy", "softmax_cross_entropy",
            "weighted_row_sq_dist", "mse", "dropout", "gaussian_noise", "detach", "sum", "scale", "add", kComposite};
}

Report run(const Options& options) {
    if (!options.corrupt_op.empty()) {
        const auto names = op_names();
        if (std::find(names.begin(), names.end(), options.corrupt_op) == names.end()) {
            throw InputError("gradcheck: unknown op '" + options.corrupt_op + "'");
        }
    }
    const Rng rng(7);
    const auto mat = [&](std::size_t r, std::size_t c, std::uint64_t id) { return random_matrix(r, c, rng.derive(id)); };
    Report report;
    auto& out = report.entries;

    out.push_back(check_op(
        "matmul", [](Graph& g, const std::vector<Var>& v) { return reduce(g, matmul(v[0], v[1])); },
        {mat(4, 3, 1), mat(3, 5, 2)}, options));
    out.push_back(check_op(
        "add_bias", [](Graph& g, const std::vector<Var>& v) { return reduce(g, add_bias(v[0], v[1])); },
        {mat(4, 3, 3), Tensor({3}, mat(1, 3, 4).values)}, options));
    out.push_back(check_op(
        "leaky_relu", [](Graph& g, const std::vector<Var>& v) { return reduce(g, leaky_relu(v[0], 0.1)); },
        {away_from_zero(mat(4, 5, 5))}, options));
    out.push_back(check_op(
        "softmax", [](Graph& g, const std::vector<Var>& v) { return reduce(g, softmax(v[0])); },
        {mat(4, 3, 6)}, options));
    {
        const Labels labels{0, 2, 1, 2};
        const Mask mask{1, 0, 1, 1};
        out.push_back(check_op(
            "cross_entropy", [labels, mask](Graph&, const std::vector<Var>& v) { return cross_entropy(v[0], labels, mask); },
            {random_matrix(4, 3, rng.derive(7), 0.2, 0.9)}, options));
    }
    {
        const Labels labels{1, 0, 2, 2};
        const Mask mask{1, 1, 0, 1};
        out.push_back(check_op(
            "softmax_cross_entropy",
            [labels, mask](Graph&, const std::vector<Var>& v) { return cross_entropy(softmax(v[0]), labels, mask); },
            {random_matrix(4, 3, rng.derive(21), -3.0, 3.0)}, options));
    }
    {
        const std::vector<double> weights{1.0, 0.0, 1.0, 1.0};
        out.push_back(check_op(
            "weighted_row_sq_dist",
            [weights](Graph&, const std::vector<Var>& v) { return weighted_row_sq_dist(v[0], v[1], weights, 4.0); },
            {mat(4, 3, 8), mat(4, 3, 9)}, options));
    }
    out.push_back(check_op(
        "mse", [](Graph&, const std::vector<Var>& v) { return mse(v[0], v[1]); }, {mat(4, 3, 10), mat(4, 3, 11)},
        options));
    out.push_back(check_op(
        "dropout",
        [rng](Graph& g, const std::vector<Var>& v) {
            Rng mask_rng = rng.derive(12);
            return reduce(g, dropout(v[0], 0.3, mask_rng, true));
        },
        {mat(4, 5, 13)}, options));
    out.push_back(check_op(
        "gaussian_noise",
        [rng](Graph& g, const std::vector<Var>& v) {
            Rng noise_rng = rng.derive(14);
            return reduce(g, leaky_relu(gaussian_noise(v[0], 0.5, noise_rng), 0.1));
        },
        {mat(4, 3, 15)}, options));
    {
        const Tensor x0 = away_from_zero(mat(4, 3, 16));
        const Tensor frozen = [&] {
            Graph g;
            return softmax(g.constant(x0)).value();
        }();
        out.push_back(check_op(
            "detach",
            [](Graph&, const std::vector<Var>& v) { return mse(leaky_relu(v[0], 0.1), detach(softmax(v[0]))); },
            [frozen](Graph& g, const std::vector<Var>& v) { return mse(leaky_relu(v[0], 0.1), g.constant(frozen)); },
            {x0}, options));
    }
    out.push_back(check_op(
        "sum", [](Graph&, const std::vector<Var>& v) { return sum(v[0]); }, {mat(3, 4, 17)}, options));
    out.push_back(check_op(
        "scale", [](Graph& g, const std::vector<Var>& v) { return reduce(g, scale(v[0], -1.7)); }, {mat(4, 3, 18)},
        options));
    out.push_back(check_op(
        "add", [](Graph& g, const std::vector<Var>& v) { return reduce(g, add(v[0], v[1])); },
        {mat(4, 3, 19), mat(4, 3, 20)}, options));
    out.push_back(check_composite(options));
    return report;
}

void write_csv(std::ostream& out, const Report& report) {
    out << "op,max_rel_error,threshold,checked,passed\n";
    for (const Entry& e : report.entries) {
        out << e.op << ',' << format_real(e.max_rel_error) << ',' << format_real(e.threshold) << ',' << e.checked << ','
            << (e.passed ? "true" : "false") << '\n';
    }
}

}  // namespace dualstudent::gradcheck
