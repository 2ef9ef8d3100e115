#include "dualstudent/models.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "dualstudent/errors.hpp"
#include "dualstudent/kernels.hpp"

namespace dualstudent::models {

namespace {

constexpr const char* kCheckpointMagic = "dualstudent-checkpoint";
constexpr int kCheckpointVersion = 1;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
    double v = 0.0;
    const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc{} || res.ptr != token.data() + token.size()) {
        throw InputError("checkpoint: bad number '" + token + "'");
    }
    return v;
}

void expect_word(std::istream& in, const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) throw InputError("checkpoint: expected '" + word + "', got '" + got + "'");
}

template <typename ForwardParam>
Var forward_impl(Graph&, const MlpSpec& spec, Var x, Mode mode, Rng rng, ForwardParam&& param_var) {
    const Tensor& xv = x.value();
    if (xv.rank() != 2 || xv.shape[1] != spec.input_dim()) {
        throw ShapeError("forward: input " + shape_string(xv.shape) + " does not match input dim " +
                         std::to_string(spec.input_dim()));
    }
    const bool training = mode == Mode::train;
    Var h = x;
    if (training && spec.input_noise_std > 0.0) {
        Rng noise = rng.derive(stream_tag("input-noise"));
        h = gaussian_noise(h, spec.input_noise_std, noise);
    }
    const std::size_t layers = spec.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        h = add_bias(matmul(h, param_var(2 * l)), param_var(2 * l + 1));
        if (l + 1 == layers) break;
        h = leaky_relu(h, spec.activation_slope);
        if (training && spec.dropout_p > 0.0) {
            Rng drop = rng.derive(stream_tag("dropout") + l);
            h = dropout(h, spec.dropout_p, drop, true);
        }
    }
    return softmax(h);
}

}  // namespace

void MlpSpec::validate() const {
    if (layer_widths.size() < 3) throw ConfigError("model: need at least one hidden layer");
    for (std::size_t w : layer_widths) {
        if (w == 0) throw ConfigError("model: layer widths must be positive");
    }
    if (class_count() < 2) throw ConfigError("model: class count must be at least 2");
    if (!(activation_slope >= 0.0 && activation_slope < 1.0)) throw ConfigError("model: slope must lie in [0, 1)");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("model: dropout must lie in [0, 1)");
    if (!(input_noise_std >= 0.0)) throw ConfigError("model: input noise must be non-negative");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const Tensor& t : tensors) n += t.size();
    return n;
}

bool ModelParams::all_finite() const {
    for (const Tensor& t : tensors) {
        if (!t.all_finite()) return false;
    }
    return true;
}

bool ModelParams::matches(const MlpSpec& spec) const {
    if (tensors.size() != 2 * spec.layer_count()) return false;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        if (weight(l).shape != Shape{spec.layer_widths[l], spec.layer_widths[l + 1]}) return false;
        if (bias(l).shape != Shape{spec.layer_widths[l + 1]}) return false;
    }
    return true;
}

ModelParams init_params(const MlpSpec& spec, Rng rng) {
    spec.validate();
    ModelParams params;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t fan_in = spec.layer_widths[l];
        const std::size_t fan_out = spec.layer_widths[l + 1];
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        Rng layer_rng = rng.derive(l);
        Tensor w = Tensor::zeros({fan_in, fan_out});
        for (double& v : w.values) v = std * layer_rng.normal();
        params.tensors.push_back(std::move(w));
        params.tensors.push_back(Tensor::zeros({fan_out}));
    }
    return params;
}

Var forward(Graph& graph, ModelParams& params, const MlpSpec& spec, Var x, Mode mode, Rng rng) {
    if (!params.matches(spec)) throw ShapeError("forward: parameters do not match the model spec");
    return forward_impl(graph, spec, x, mode, rng,
                        [&](std::size_t i) { return graph.parameter(params.tensors[i]); });
}

Var forward_frozen(Graph& graph, const ModelParams& params, const MlpSpec& spec, Var x, Mode mode, Rng rng) {
    if (!params.matches(spec)) throw ShapeError("forward: parameters do not match the model spec");
    return forward_impl(graph, spec, x, mode, rng,
                        [&](std::size_t i) { return graph.constant(params.tensors[i]); });
}

Tensor predict(const ModelParams& params, const MlpSpec& spec, const Tensor& x) {
    Graph graph;
    Var in = graph.constant(x);
    return forward_frozen(graph, params, spec, in, Mode::eval, Rng{}).value();
}

void ema_update(ModelParams& teacher, const ModelParams& student, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("ema_update: alpha must lie in [0, 1]");
    if (teacher.tensors.size() != student.tensors.size()) throw ShapeError("ema_update: tensor count mismatch");
    for (std::size_t i = 0; i < teacher.tensors.size(); ++i) {
        require_same_shape(teacher.tensors[i], student.tensors[i], "ema_update");
    }
    const auto& ks = kernels::active();
    for (std::size_t i = 0; i < teacher.tensors.size(); ++i) {
        ks.lerp(alpha, student.tensors[i].values, teacher.tensors[i].values);
    }
}

double weight_distance(const ModelParams& a, const ModelParams& b) {
    if (a.tensors.size() != b.tensors.size()) throw ShapeError("weight_distance: tensor count mismatch");
    const auto& ks = kernels::active();
    double total = 0.0;
    for (std::size_t i = 0; i < a.tensors.size(); ++i) {
        require_same_shape(a.tensors[i], b.tensors[i], "weight_distance");
        total += ks.sum_sq_diff(a.tensors[i].values, b.tensors[i].values);
    }
    return std::sqrt(total);
}

void write_checkpoint(std::ostream& out, const MlpSpec& spec, const ModelParams& params) {
    out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n';
    out << "widths";
    for (std::size_t w : spec.layer_widths) out << ' ' << w;
    out << "\nslope " << format_double(spec.activation_slope) << "\ndropout " << format_double(spec.dropout_p)
        << "\ninput_noise " << format_double(spec.input_noise_std) << "\ntensors " << params.tensors.size() << '\n';
    for (const Tensor& t : params.tensors) {
        out << "tensor " << t.rank();
        for (std::size_t d : t.shape) out << ' ' << d;
        out << '\n';
        for (std::size_t i = 0; i < t.size(); ++i) out << (i ? " " : "") << format_double(t.values[i]);
        out << '\n';
    }
}

void read_checkpoint(std::istream& in, MlpSpec& spec, ModelParams& params) {
    expect_word(in, kCheckpointMagic);
    int version = 0;
    if (!(in >> version) || version != kCheckpointVersion) throw InputError("checkpoint: unsupported version");
    expect_word(in, "widths");
    MlpSpec loaded;
    loaded.layer_widths.clear();
    std::string line;
    std::getline(in, line);
    std::istringstream widths(line);
    for (std::size_t w; widths >> w;) loaded.layer_widths.push_back(w);
    std::string token;
    expect_word(in, "slope");
    in >> token;
    loaded.activation_slope = parse_double(token);
    expect_word(in, "dropout");
    in >> token;
    loaded.dropout_p = parse_double(token);
    expect_word(in, "input_noise");
    in >> token;
    loaded.input_noise_std = parse_double(token);
    loaded.validate();
    expect_word(in, "tensors");
    std::size_t count = 0;
    in >> count;
    ModelParams out;
    for (std::size_t i = 0; i < count; ++i) {
        expect_word(in, "tensor");
        std::size_t rank = 0;
        in >> rank;
        Shape shape(rank);
        for (std::size_t& d : shape) in >> d;
        if (!in) throw InputError("checkpoint: truncated tensor header");
        std::vector<double> values(element_count(shape));
        for (double& v : values) {
            if (!(in >> token)) throw InputError("checkpoint: truncated tensor values");
            v = parse_double(token);
        }
        out.tensors.emplace_back(std::move(shape), std::move(values));
    }
    if (!out.matches(loaded)) throw InputError("checkpoint: tensors do not match the stored spec");
    spec = std::move(loaded);
    params = std::move(out);
}

void save_checkpoint(const std::string& path, const MlpSpec& spec, const ModelParams& params) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path);
    write_checkpoint(out, spec, params);
    if (!out) throw IoError("failed writing checkpoint " + path);
}

void load_checkpoint(const std::string& path, MlpSpec& spec, ModelParams& params) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint " + path);
    read_checkpoint(in, spec, params);
}

}  // namespace dualstudent::models
