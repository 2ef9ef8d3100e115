#include "dualstudent/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>

#include "dualstudent/errors.hpp"

namespace dualstudent::config {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_real(std::string_view v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) throw ConfigError("expected a number, got '" + std::string(v) + "'");
    return out;
}

template <typename Int>
Int parse_int(std::string_view v) {
    Int out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError("expected an integer, got '" + std::string(v) + "'");
    }
    return out;
}

bool parse_bool(std::string_view v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("expected true or false, got '" + std::string(v) + "'");
}

std::vector<std::size_t> parse_widths(std::string_view v) {
    std::vector<std::size_t> out;
    while (!v.empty()) {
        const auto comma = v.find(',');
        out.push_back(parse_int<std::size_t>(trim(v.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        v.remove_prefix(comma + 1);
    }
    if (out.empty()) throw ConfigError("expected a comma-separated width list");
    return out;
}

std::string format_widths(const std::vector<std::size_t>& w) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(w[i]);
    }
    return out;
}

struct Key {
    std::string_view section;
    std::string_view name;
    std::function<void(Experiment&, std::string_view)> set;
    std::function<std::string(const Experiment&)> get;
};

template <typename Ref>
Key real_key(std::string_view sec, std::string_view name, Ref ref) {
    return {sec, name, [ref](Experiment& e, std::string_view v) { ref(e) = parse_real(v); },
            [ref](const Experiment& e) { return format_shortest(ref(e)); }};
}

template <typename Int, typename Ref>
Key int_key(std::string_view sec, std::string_view name, Ref ref) {
    return {sec, name, [ref](Experiment& e, std::string_view v) { ref(e) = parse_int<Int>(v); },
            [ref](const Experiment& e) { return std::to_string(ref(e)); }};
}

template <typename Ref>
Key bool_key(std::string_view sec, std::string_view name, Ref ref) {
    return {sec, name, [ref](Experiment& e, std::string_view v) { ref(e) = parse_bool(v); },
            [ref](const Experiment& e) { return std::string(ref(e) ? "true" : "false"); }};
}

template <typename Ref>
Key string_key(std::string_view sec, std::string_view name, Ref ref) {
    return {sec, name, [ref](Experiment& e, std::string_view v) { ref(e) = std::string(v); },
            [ref](const Experiment& e) { return ref(e); }};
}

template <typename Ref>
Key method_key(std::string_view sec, std::string_view name, Ref ref) {
    return {sec, name, [ref](Experiment& e, std::string_view v) { ref(e) = train::parse_method(v); },
            [ref](const Experiment& e) { return std::string(train::method_name(ref(e))); }};
}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k;
        k.push_back(string_key("data", "generator", [](auto& e) -> auto& { return e.data.generator; }));
        k.push_back(int_key<std::size_t>("data", "n_train", [](auto& e) -> auto& { return e.data.n_train; }));
        k.push_back(int_key<std::size_t>("data", "n_test", [](auto& e) -> auto& { return e.data.n_test; }));
        k.push_back(int_key<std::size_t>("data", "labels", [](auto& e) -> auto& { return e.data.labels; }));
        k.push_back(real_key("data", "noise", [](auto& e) -> auto& { return e.data.noise; }));
        k.push_back(int_key<std::size_t>("data", "classes", [](auto& e) -> auto& { return e.data.classes; }));
        k.push_back(real_key("data", "separation", [](auto& e) -> auto& { return e.data.separation; }));
        k.push_back(string_key("data", "train_csv", [](auto& e) -> auto& { return e.data.train_csv; }));
        k.push_back(string_key("data", "test_csv", [](auto& e) -> auto& { return e.data.test_csv; }));
        k.push_back(int_key<std::uint64_t>("data", "seed", [](auto& e) -> auto& { return e.data.seed; }));
        k.push_back(real_key("data", "augment_noise", [](auto& e) -> auto& { return e.data.augment.noise_std; }));
        k.push_back(real_key("data", "augment_jitter", [](auto& e) -> auto& { return e.data.augment.jitter; }));
        k.push_back(int_key<std::size_t>("data", "n_target", [](auto& e) -> auto& { return e.data.n_target; }));
        k.push_back(real_key("data", "shift_rotation", [](auto& e) -> auto& { return e.data.shift.rotation; }));
        k.push_back(real_key("data", "shift_scale", [](auto& e) -> auto& { return e.data.shift.scale; }));
        k.push_back(real_key("data", "shift_x", [](auto& e) -> auto& { return e.data.shift.translate_x; }));
        k.push_back(real_key("data", "shift_y", [](auto& e) -> auto& { return e.data.shift.translate_y; }));

        k.push_back(Key{"model", "widths",
                        [](Experiment& e, std::string_view v) { e.train.spec.layer_widths = parse_widths(v); },
                        [](const Experiment& e) { return format_widths(e.train.spec.layer_widths); }});
        k.push_back(real_key("model", "slope", [](auto& e) -> auto& { return e.train.spec.activation_slope; }));
        k.push_back(real_key("model", "dropout", [](auto& e) -> auto& { return e.train.spec.dropout_p; }));
        k.push_back(real_key("model", "input_noise", [](auto& e) -> auto& { return e.train.spec.input_noise_std; }));
        // The strong model copies slope/dropout/noise from the base model at
        // resolve time; only its widths are configurable.
        k.push_back(Key{"model", "strong_widths",
                        [](Experiment& e, std::string_view v) {
                            if (v.empty() || v == "none") {
                                e.train.strong_spec.reset();
                            } else {
                                models::MlpSpec s = e.train.spec;
                                s.layer_widths = parse_widths(v);
                                e.train.strong_spec = s;
                            }
                        },
                        [](const Experiment& e) {
                            return e.train.strong_spec ? format_widths(e.train.strong_spec->layer_widths)
                                                       : std::string("none");
                        }});

        k.push_back(method_key("train", "method", [](auto& e) -> auto& { return e.train.method; }));
        k.push_back(method_key("train", "da_method", [](auto& e) -> auto& { return e.train.da_method; }));
        k.push_back(real_key("train", "lambda1", [](auto& e) -> auto& { return e.train.lambda1; }));
        k.push_back(real_key("train", "lambda2", [](auto& e) -> auto& { return e.train.lambda2; }));
        k.push_back(real_key("train", "xi", [](auto& e) -> auto& { return e.train.xi; }));
        k.push_back(real_key("train", "alpha", [](auto& e) -> auto& { return e.train.alpha; }));
        k.push_back(real_key("train", "gamma0", [](auto& e) -> auto& { return e.train.gamma0; }));
        k.push_back(int_key<std::size_t>("train", "epochs", [](auto& e) -> auto& { return e.train.epochs; }));
        k.push_back(int_key<std::size_t>("train", "batch_size", [](auto& e) -> auto& { return e.train.batch_size; }));
        k.push_back(int_key<std::size_t>("train", "labeled_per_batch",
                                         [](auto& e) -> auto& { return e.train.labeled_per_batch; }));
        k.push_back(int_key<std::size_t>("train", "ramp_epochs", [](auto& e) -> auto& { return e.train.ramp_epochs; }));
        k.push_back(real_key("train", "weight_decay", [](auto& e) -> auto& { return e.train.weight_decay; }));
        k.push_back(real_key("train", "momentum", [](auto& e) -> auto& { return e.train.momentum; }));
        k.push_back(int_key<std::uint64_t>("train", "seed", [](auto& e) -> auto& { return e.train.seed; }));
        k.push_back(int_key<std::size_t>("train", "n_students", [](auto& e) -> auto& { return e.train.n_students; }));
        k.push_back(int_key<std::size_t>("train", "stream_index", [](auto& e) -> auto& { return e.train.stream_index; }));
        k.push_back(bool_key("train", "shared_init", [](auto& e) -> auto& { return e.train.shared_init; }));
        k.push_back(string_key("train", "run_id", [](auto& e) -> auto& { return e.train.run_id; }));

        k.push_back(bool_key("analysis", "coupling", [](auto& e) -> auto& { return e.analysis.coupling; }));
        k.push_back(int_key<long long>("analysis", "track_sample", [](auto& e) -> auto& { return e.analysis.track_sample; }));
        k.push_back(bool_key("analysis", "stable_report", [](auto& e) -> auto& { return e.analysis.stable_report; }));
        k.push_back(int_key<std::size_t>("analysis", "checkpoint_every",
                                         [](auto& e) -> auto& { return e.analysis.checkpoint_every; }));
        return k;
    }();
    return keys;
}

const Key& find_key(std::string_view section, std::string_view name) {
    bool section_known = false;
    for (const Key& k : registry()) {
        if (k.section != section) continue;
        section_known = true;
        if (k.name == name) return k;
    }
    if (!section_known) throw ConfigError("unknown section [" + std::string(section) + "]");
    throw ConfigError("unknown key '" + std::string(name) + "' in [" + std::string(section) + "]");
}

}  // namespace

std::string format_shortest(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void set_value(Experiment& exp, std::string_view section, std::string_view key, std::string_view value) {
    const Key& k = find_key(section, key);
    try {
        k.set(exp, value);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(section) + "." + std::string(key) + ": " + e.what());
    }
}

std::string get_value(const Experiment& exp, std::string_view section, std::string_view key) {
    return find_key(section, key).get(exp);
}

std::vector<std::string> all_keys() {
    std::vector<std::string> out;
    for (const Key& k : registry()) out.push_back(std::string(k.section) + "." + std::string(k.name));
    return out;
}

Experiment parse_experiment(std::istream& in, const std::string& source) {
    Experiment exp;
    std::string section;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view t = trim(line);
        if (t.empty() || t.front() == '#' || t.front() == ';') continue;
        const auto fail = [&](const std::string& msg) {
            throw ConfigError(source + ":" + std::to_string(line_no) + ": " + msg);
        };
        if (t.front() == '[') {
            if (t.back() != ']') fail("unterminated section header");
            section = std::string(trim(t.substr(1, t.size() - 2)));
            bool known = false;
            for (const Key& k : registry()) known = known || k.section == section;
            if (!known) fail("unknown section [" + section + "]");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) fail("expected 'key = value'");
        if (section.empty()) fail("key outside of any section");
        try {
            set_value(exp, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ConfigError& e) {
            fail(e.what());
        }
    }
    return exp;
}

Experiment load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file " + path);
    return parse_experiment(in, path);
}

void apply_override(Experiment& exp, std::string_view assignment) {
    const auto eq = assignment.find('=');
    const auto dot = assignment.find('.');
    if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq) {
        throw ConfigError("override '" + std::string(assignment) + "' is not of the form section.key=value");
    }
    set_value(exp, trim(assignment.substr(0, dot)), trim(assignment.substr(dot + 1, eq - dot - 1)),
              trim(assignment.substr(eq + 1)));
}

void write_resolved(std::ostream& out, const Experiment& exp) {
    std::string_view section;
    for (const Key& k : registry()) {
        if (k.section != section) {
            if (!section.empty()) out << '\n';
            section = k.section;
            out << '[' << section << "]\n";
        }
        out << k.name << " = " << k.get(exp) << '\n';
    }
}

std::string resolved_text(const Experiment& exp) {
    std::ostringstream out;
    write_resolved(out, exp);
    return out.str();
}

void finalize(Experiment& exp) {
    exp.train.augment = exp.data.augment;
    if (exp.train.strong_spec) {
        models::MlpSpec strong = exp.train.spec;
        strong.layer_widths = exp.train.strong_spec->layer_widths;
        exp.train.strong_spec = strong;
    }
    exp.train.validate();
    const DataConfig& d = exp.data;
    const auto fail = [](const std::string& msg) { throw ConfigError("data: " + msg); };
    if (d.generator == "two_moons" || d.generator == "blobs") {
        if (d.n_train == 0 || d.n_test == 0) fail("n_train and n_test must be positive");
        if (exp.train.spec.input_dim() != 2) fail("generated data is 2-D but model.widths starts with " +
                                                  std::to_string(exp.train.spec.input_dim()));
        const std::size_t classes = d.generator == "blobs" ? d.classes : 2;
        if (d.generator == "blobs" && classes < 2) fail("blobs need at least 2 classes");
        if (exp.train.spec.class_count() != classes) {
            fail("model.widths ends with " + std::to_string(exp.train.spec.class_count()) + " but the data has " +
                 std::to_string(classes) + " classes");
        }
        if (exp.train.method != train::Method::domain_adapt && d.labels > d.n_train) {
            fail("labels exceeds n_train");
        }
        if (!(d.noise >= 0.0)) fail("noise must be non-negative");
    } else if (d.generator != "csv") {
        fail("unknown generator '" + d.generator + "' (two_moons, blobs, csv)");
    }
    if (!(d.augment.noise_std >= 0.0) || !(d.augment.jitter >= 0.0)) fail("augmentation must be non-negative");
    if (!(d.shift.scale > 0.0)) fail("shift_scale must be positive");
}

Datasets build_datasets(const Experiment& exp) {
    const DataConfig& d = exp.data;
    const Rng base = Rng(d.seed ? d.seed : exp.train.seed).derive(stream_tag("data"));
    const auto generate = [&](std::size_t m, const char* tag) {
        const Rng rng = base.derive(stream_tag(tag));
        if (d.generator == "two_moons") return data::two_moons(m, d.noise, rng);
        if (d.generator == "blobs") return data::gaussian_blobs(m, d.classes, d.separation, rng);
        throw ConfigError("data.generator: unknown generator '" + d.generator + "' (two_moons, blobs, csv)");
    };

    const bool domain = exp.train.method == train::Method::domain_adapt;
    Datasets out;
    if (d.generator == "csv") {
        if (d.train_csv.empty() || d.test_csv.empty()) throw ConfigError("data: csv generator needs train_csv and test_csv");
        const std::size_t min_classes = exp.train.spec.class_count();
        out.train = data::load_csv(d.train_csv, min_classes);
        out.test = data::load_csv(d.test_csv, min_classes);
        out.train.class_count = out.test.class_count = std::max(out.train.class_count, out.test.class_count);
        if (!domain && out.train.labeled_count() == 0 && d.labels > 0) {
            out.train = data::make_ssl_split(out.train, d.labels, base.derive(stream_tag("split")));
        }
    } else {
        out.train = generate(d.n_train, "train");
        out.test = generate(d.n_test, "test");
        if (!domain) out.train = data::make_ssl_split(out.train, d.labels, base.derive(stream_tag("split")));
    }

    if (domain) {
        // The source is fully labeled. Target rows and target test rows are
        // shifted together so both see the same transform.
        out.train.labeled_mask.assign(out.train.size(), 1);
        data::Dataset target = d.generator == "csv" ? out.test : generate(d.n_target + d.n_test, "target");
        target.class_count = out.train.class_count;
        const data::Dataset shifted = data::domain_shift(target, d.shift);
        const std::size_t n_target = d.generator == "csv" ? 0 : d.n_target;
        std::vector<std::size_t> first(n_target), second(shifted.size() - n_target);
        for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
        for (std::size_t i = 0; i < second.size(); ++i) second[i] = n_target + i;
        if (n_target > 0) out.target = shifted.subset(first);
        out.target_test = shifted.subset(second);
    }
    return out;
}

}  // namespace dualstudent::config
