#include "dualstudent/cli.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dualstudent/analysis.hpp"
#include "dualstudent/errors.hpp"
#include "dualstudent/gradcheck.hpp"
#include "dualstudent/metrics.hpp"
#include "dualstudent/models.hpp"

namespace dualstudent::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kEnvOut = "DUALSTUDENT_OUT";
const std::vector<std::string> kAnalyses{"stable-report", "ema-check", "coupling"};

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

std::string default_out(const std::string& leaf) {
    const char* root = std::getenv(kEnvOut);
    return (fs::path(root && *root ? root : "runs") / leaf).string();
}

bool has_students(train::Method m) {
    return m != train::Method::supervised && m != train::Method::pi && m != train::Method::mean_teacher;
}

const data::Dataset& eval_set(const config::Experiment& exp, const config::Datasets& data) {
    return exp.train.method == train::Method::domain_adapt ? data.target_test : data.test;
}

// Coupling defaults to the two models a run trains side by side.
std::pair<std::string, std::string> default_pair(const config::Experiment& exp) {
    const train::Method m =
        exp.train.method == train::Method::domain_adapt ? exp.train.da_method : exp.train.method;
    if (m == train::Method::mean_teacher) return {"student", "teacher"};
    if (has_students(m)) return {"s0", "s1"};
    throw ConfigError("analysis.coupling needs a method that trains two models");
}

std::vector<MetricsRow> stable_rows(const config::Experiment& exp, const data::Dataset& ds,
                                    const std::vector<train::Model>& models, double xi, std::size_t epoch) {
    std::vector<MetricsRow> rows;
    const std::string method(train::method_name(exp.train.method));
    const auto emit = [&](const std::string& metric, double value) {
        rows.push_back(MetricsRow{exp.train.run_id, method, exp.train.seed, epoch, metric, value});
    };
    for (const train::Model& m : models) {
        const analysis::StableReport r =
            analysis::stable_sample_report(m.params, m.spec, ds, xi, analysis::training_perturbation(exp.data.augment, m.spec),
                                           Rng(exp.train.seed).derive(stream_tag("stable-report")));
        emit("stable_ratio." + m.name, r.stable_ratio);
        emit("acc_all." + m.name, r.acc_all);
        emit("acc_stable." + m.name, r.acc_stable);
        for (const analysis::ClassReport& c : r.per_class) {
            const std::string suffix = "." + m.name + ".c" + std::to_string(c.label);
            emit("stable_ratio" + suffix, c.count ? static_cast<double>(c.stable) / static_cast<double>(c.count) : 0.0);
            emit("acc_all" + suffix, c.acc_all);
            emit("acc_stable" + suffix, c.acc_stable);
        }
    }
    return rows;
}

std::string metrics_text(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    write_metrics_csv(out, rows);
    return out.str();
}

void save_models(const std::string& run_dir, const std::string& stage, std::span<const train::Model> models) {
    ensure_dir((fs::path(run_dir) / "checkpoints" / stage).string());
    for (const train::Model& m : models) models::save_checkpoint(checkpoint_path(run_dir, stage, m.name), m.spec, m.params);
}

std::string epoch_stage(std::size_t epoch) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "epoch_%04zu", epoch);
    return buf;
}

// ---- sweep ------------------------------------------------------------------

struct SweepMember {
    std::string value;
    std::uint64_t seed = 0;
    std::string dir;
    double final_accuracy = 0.0;
};

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& overrides, const std::string& key,
              const std::vector<std::string>& values, const std::vector<std::uint64_t>& seeds, std::string out_dir,
              std::size_t jobs, std::ostream& out) {
    if (values.empty()) throw ConfigError("sweep: --values is empty");
    if (seeds.empty()) throw ConfigError("sweep: --seeds is empty");
    const config::Experiment base = load_with_overrides(config_path, overrides);
    const auto dot = key.find('.');
    if (dot == std::string::npos) throw ConfigError("sweep: key must look like section.key, got '" + key + "'");
    const std::string section = key.substr(0, dot), name = key.substr(dot + 1);
    {
        // Numeric keys only; a probe parse rejects everything else early.
        config::Experiment probe = base;
        config::get_value(probe, section, name);
        for (const std::string& v : values) {
            double parsed = 0.0;
            const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), parsed);
            if (ec != std::errc{} || ptr != v.data() + v.size()) {
                throw ConfigError("sweep: value '" + v + "' for " + key + " is not numeric");
            }
            config::set_value(probe, section, name, v);
            config::finalize(probe);
        }
    }
    if (out_dir.empty()) out_dir = default_out(base.train.run_id + "-sweep");
    ensure_dir(out_dir);

    std::vector<SweepMember> members;
    for (const std::string& v : values) {
        for (std::uint64_t s : seeds) {
            members.push_back({v, s, (fs::path(out_dir) / (key + "=" + v) / ("seed_" + std::to_string(s))).string(), 0.0});
        }
    }
    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::exception_ptr failure;
    const auto worker = [&] {
        for (std::size_t i = next++; i < members.size(); i = next++) {
            try {
                config::Experiment exp = base;
                config::set_value(exp, section, name, members[i].value);
                exp.train.seed = members[i].seed;
                exp.train.run_id = base.train.run_id + "/" + key + "=" + members[i].value + "/seed_" +
                                   std::to_string(members[i].seed);
                config::finalize(exp);
                train_to_dir(exp, members[i].dir);
                members[i].final_accuracy = final_value(load_metrics_csv((fs::path(members[i].dir) / "metrics.csv").string()), "test_acc");
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = members.size();
            }
        }
    };
    jobs = std::clamp<std::size_t>(jobs, 1, members.size());
    std::vector<std::thread> pool;
    for (std::size_t j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::ostringstream summary;
    summary << "key,value,runs,mean_test_acc,std_test_acc\n";
    for (const std::string& v : values) {
        std::vector<double> acc;
        for (const SweepMember& m : members) {
            if (m.value == v) acc.push_back(m.final_accuracy);
        }
        double mean = 0.0;
        for (double a : acc) mean += a;
        mean /= static_cast<double>(acc.size());
        double var = 0.0;
        for (double a : acc) var += (a - mean) * (a - mean);
        const double sd = acc.size() > 1 ? std::sqrt(var / static_cast<double>(acc.size() - 1)) : 0.0;
        summary << key << ',' << v << ',' << acc.size() << ',' << format_real(mean) << ',' << format_real(sd) << '\n';
        out << key << '=' << v << "  mean " << format_real(mean) << "  std " << format_real(sd) << '\n';
    }
    write_text((fs::path(out_dir) / "summary.csv").string(), summary.str());
    return ok;
}

// ---- analyze ----------------------------------------------------------------

struct AnalyzeArgs {
    std::string name;
    std::vector<std::string> runs;
    std::string out;
    std::string model;
    std::string model_a;
    std::string model_b;
    double xi = -1.0;  // negative: the run's configured xi
    double alpha = 0.99;
    double ratio = 0.9;
    double s0 = 1.0;
    double limit = 0.0;
    std::size_t length = 2000;
    std::string sequence;
};

config::Experiment load_run_config(const std::string& run_dir) {
    config::Experiment exp = config::load_experiment((fs::path(run_dir) / "config.resolved").string());
    config::finalize(exp);
    return exp;
}

std::vector<std::string> models_in(const std::string& run_dir, const std::string& stage) {
    std::vector<std::string> names;
    const fs::path dir = fs::path(run_dir) / "checkpoints" / stage;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.path().extension() == ".ckpt") names.push_back(entry.path().stem().string());
    }
    if (ec) throw IoError("cannot list " + dir.string());
    std::sort(names.begin(), names.end());
    return names;
}

train::Model load_model(const std::string& run_dir, const std::string& stage, const std::string& name) {
    train::Model m;
    m.name = name;
    models::load_checkpoint(checkpoint_path(run_dir, stage, name), m.spec, m.params);
    return m;
}

int analyze_stable_report(const AnalyzeArgs& a, std::ostream& out) {
    if (a.runs.size() != 1) throw ConfigError("stable-report takes exactly one --run");
    const std::string& run = a.runs.front();
    const config::Experiment exp = load_run_config(run);
    const config::Datasets data = config::build_datasets(exp);
    std::vector<train::Model> models;
    for (const std::string& name : models_in(run, "final")) {
        if (a.model.empty() || a.model == name) models.push_back(load_model(run, "final", name));
    }
    if (models.empty()) throw InputError("stable-report: no matching checkpoints in " + run);
    const double xi = a.xi >= 0.0 ? a.xi : exp.train.xi;
    const auto rows = stable_rows(exp, eval_set(exp, data), models, xi, exp.train.epochs);
    const std::string path = a.out.empty() ? (fs::path(run) / "stable_report.csv").string() : a.out;
    write_text(path, metrics_text(rows));
    out << "wrote " << path << '\n';
    return ok;
}

int analyze_ema_check(const AnalyzeArgs& a, std::ostream& out) {
    std::vector<double> seq;
    if (!a.sequence.empty()) {
        std::ifstream in(a.sequence);
        if (!in) throw IoError("cannot read sequence file " + a.sequence);
        for (double v; in >> v;) seq.push_back(v);
        if (!in.eof()) throw InputError("ema-check: " + a.sequence + " holds a non-numeric entry");
    } else {
        double s = 1.0;
        for (std::size_t t = 1; t <= a.length; ++t) {
            s *= a.ratio;
            seq.push_back(s);
        }
    }
    const analysis::EmaCheck check = analysis::ema_convergence_check(seq, a.alpha, a.s0, a.limit);
    std::vector<MetricsRow> rows;
    for (std::size_t t = 0; t < seq.size(); ++t) {
        rows.push_back({"ema-check", "analysis", 0, t + 1, "ema_value", check.values[t]});
        rows.push_back({"ema-check", "analysis", 0, t + 1, "ema_gap", check.gaps[t]});
    }
    const std::string path = a.out.empty() ? default_out("ema-check.csv") : a.out;
    if (fs::path(path).has_parent_path()) ensure_dir(fs::path(path).parent_path().string());
    write_text(path, metrics_text(rows));
    for (double eps : {1e-2, 1e-3}) {
        out << "gap stays below " << format_real(eps) << " from t = " << analysis::settle_step(check.gaps, eps) << '\n';
    }
    out << "wrote " << path << '\n';
    return ok;
}

int analyze_coupling(const AnalyzeArgs& a, std::ostream& out) {
    if (a.runs.empty() || a.runs.size() > 2) throw ConfigError("coupling takes one or two --run directories");
    const std::string& run_a = a.runs.front();
    const std::string& run_b = a.runs.back();
    const config::Experiment exp = load_run_config(run_a);
    const config::Datasets data = config::build_datasets(exp);
    std::string name_a = a.model_a, name_b = a.model_b;
    if (name_a.empty() || name_b.empty()) {
        const auto names_a = models_in(run_a, "final");
        const auto names_b = models_in(run_b, "final");
        if (a.runs.size() == 1) {
            if (names_a.size() < 2) throw InputError("coupling: " + run_a + " holds fewer than two models");
            if (name_a.empty()) name_a = names_a[0];
            if (name_b.empty()) name_b = names_a[1];
        } else {
            if (names_a.empty() || names_b.empty()) throw InputError("coupling: run directory without checkpoints");
            if (name_a.empty()) name_a = names_a[0];
            if (name_b.empty()) name_b = names_b[0];
        }
    }
    // Every stage present in both runs, in epoch order, then the final one.
    std::vector<std::string> stages;
    const fs::path ckpt = fs::path(run_a) / "checkpoints";
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(ckpt, ec)) {
        const std::string stage = entry.path().filename().string();
        if (stage.rfind("epoch_", 0) == 0 && fs::exists(checkpoint_path(run_b, stage, name_b)) &&
            fs::exists(checkpoint_path(run_a, stage, name_a))) {
            stages.push_back(stage);
        }
    }
    if (ec) throw IoError("cannot list " + ckpt.string());
    std::sort(stages.begin(), stages.end());
    stages.push_back("final");

    std::vector<MetricsRow> rows;
    for (const std::string& stage : stages) {
        const train::Model ma = load_model(run_a, stage, name_a);
        const train::Model mb = load_model(run_b, stage, name_b);
        const std::size_t epoch = stage == "final" ? exp.train.epochs : std::stoul(stage.substr(6));
        if (ma.spec != mb.spec) throw InputError("coupling: models have different architectures");
        rows.push_back({"coupling", "analysis", exp.train.seed, epoch, "weight_dist",
                        models::weight_distance(ma.params, mb.params)});
        rows.push_back({"coupling", "analysis", exp.train.seed, epoch, "pred_dist",
                        analysis::prediction_distance(ma.params, mb.params, ma.spec, mb.spec, eval_set(exp, data))});
    }
    // A final stage that duplicates the last epoch stage adds nothing.
    if (rows.size() >= 4 && rows[rows.size() - 4].epoch == rows.back().epoch) rows.resize(rows.size() - 2);
    const std::string path = a.out.empty() ? (fs::path(run_a) / "coupling.csv").string() : a.out;
    write_text(path, metrics_text(rows));
    out << name_a << " vs " << name_b << ": weight_dist " << format_real(rows[rows.size() - 2].value) << ", pred_dist "
        << format_real(rows.back().value) << '\n';
    out << "wrote " << path << '\n';
    return ok;
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
    if (a.name == "stable-report") return analyze_stable_report(a, out);
    if (a.name == "ema-check") return analyze_ema_check(a, out);
    if (a.name == "coupling") return analyze_coupling(a, out);
    err << "unknown analysis '" << a.name << "'; valid names:";
    for (const std::string& n : kAnalyses) err << ' ' << n;
    err << '\n';
    return usage;
}

int cmd_gradcheck(const std::string& out_dir, const std::string& corrupt, std::ostream& out, std::ostream& err) {
    gradcheck::Options options;
    options.corrupt_op = corrupt;
    const gradcheck::Report report = gradcheck::run(options);
    for (const gradcheck::Entry& e : report.entries) {
        out << (e.passed ? "ok   " : "FAIL ") << e.op << "  max rel err " << format_real(e.max_rel_error) << " (limit "
            << format_real(e.threshold) << ")\n";
    }
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ostringstream csv;
        gradcheck::write_csv(csv, report);
        write_text((fs::path(out_dir) / "gradcheck.csv").string(), csv.str());
    }
    if (!report.passed()) {
        err << "gradient check failed for op " << report.first_failure() << '\n';
        return numeric;
    }
    return ok;
}

}  // namespace

train::RunResult run_experiment(const config::Experiment& exp, const config::Datasets& data,
                                const train::Hooks& hooks) {
    if (exp.train.method == train::Method::domain_adapt) {
        return train::run_domain_adaptation(exp.train, data.train, data.target, data.target_test, hooks);
    }
    return train::train(exp.train, data.train, data.test, hooks);
}

int report_exception(std::ostream& err) {
    try {
        throw;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return usage;
    } catch (const InputError& e) {
        err << "input error: " << e.what() << '\n';
        return usage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << '\n';
        return numeric;
    } catch (const IoError& e) {
        err << "i/o error: " << e.what() << '\n';
        return io;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    }
}

std::string checkpoint_path(const std::string& run_dir, const std::string& stage, const std::string& model) {
    return (fs::path(run_dir) / "checkpoints" / stage / (model + ".ckpt")).string();
}

config::Experiment load_with_overrides(const std::string& config_path, const std::vector<std::string>& overrides) {
    config::Experiment exp = config::load_experiment(config_path);
    for (const std::string& o : overrides) config::apply_override(exp, o);
    config::finalize(exp);
    return exp;
}

void train_to_dir(const config::Experiment& exp, const std::string& out_dir) {
    ensure_dir(out_dir);
    write_text((fs::path(out_dir) / "config.resolved").string(), config::resolved_text(exp));
    const config::Datasets data = config::build_datasets(exp);
    const data::Dataset& evaluation = eval_set(exp, data);

    std::optional<analysis::CouplingRecorder> coupling;
    if (exp.analysis.coupling) {
        const auto [a, b] = default_pair(exp);
        coupling.emplace(a, b, evaluation);
    }
    std::optional<analysis::SampleTracker> tracker;
    if (exp.analysis.track_sample >= 0) {
        tracker.emplace(data.train, static_cast<std::size_t>(exp.analysis.track_sample));
    }
    train::Hooks hooks = analysis::make_hooks(coupling ? &*coupling : nullptr, tracker ? &*tracker : nullptr);
    if (exp.analysis.checkpoint_every > 0) {
        hooks.on_epoch = [inner = hooks.on_epoch, every = exp.analysis.checkpoint_every, out_dir](
                             std::size_t epoch, std::span<const train::Model> models, std::vector<MetricsRow>& rows) {
            if (inner) inner(epoch, models, rows);
            if ((epoch + 1) % every == 0) save_models(out_dir, epoch_stage(epoch + 1), models);
        };
    }

    const train::RunResult result = run_experiment(exp, data, hooks);
    write_text((fs::path(out_dir) / "metrics.csv").string(), metrics_text(result.metrics));
    save_models(out_dir, "final", result.models);
    if (exp.analysis.stable_report) {
        write_text((fs::path(out_dir) / "stable_report.csv").string(),
                   metrics_text(stable_rows(exp, evaluation, result.models, exp.train.xi, exp.train.epochs)));
    }
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-student semi-supervised training lab"};
    app.require_subcommand(1);
    app.footer(
        "Config precedence, lowest to highest: built-in defaults, the config file, --set overrides in the\n"
        "order given, then the dedicated --seed/--method/--epochs flags.\n"
        "Default output root: $DUALSTUDENT_OUT, or ./runs when unset.\n"
        "Exit codes: 0 success, 1 usage/config, 2 numeric failure, 3 I/O.");

    std::string config_path, out_dir, method, corrupt, sweep_key, values_text, seeds_text = "1";
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::size_t jobs = 1;
    AnalyzeArgs analyze_args;

    CLI::App* train_cmd = app.add_subcommand("train", "Run one experiment");
    train_cmd->add_option("config", config_path, "Experiment file")->required();
    train_cmd->add_option("--set", overrides, "section.key=value override (repeatable)");
    train_cmd->add_option("--seed", seed, "Run seed");
    train_cmd->add_option("--method", method, "Training method");
    train_cmd->add_option("--epochs", epochs, "Epoch count");
    train_cmd->add_option("--out", out_dir, "Output directory");

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "Run one experiment per (value, seed)");
    sweep_cmd->add_option("config", config_path, "Experiment file")->required();
    sweep_cmd->add_option("--key", sweep_key, "Numeric key to sweep, e.g. train.xi")->required();
    sweep_cmd->add_option("--values", values_text, "Comma-separated values")->required();
    sweep_cmd->add_option("--seeds", seeds_text, "Comma-separated seeds")->capture_default_str();
    sweep_cmd->add_option("--set", overrides, "section.key=value override (repeatable)");
    sweep_cmd->add_option("--method", method, "Training method");
    sweep_cmd->add_option("--epochs", epochs, "Epoch count");
    sweep_cmd->add_option("--jobs", jobs, "Parallel runs")->capture_default_str();
    sweep_cmd->add_option("--out", out_dir, "Output directory");

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    grad_cmd->add_option("--out", out_dir, "Directory for gradcheck.csv");
    grad_cmd->add_option("--corrupt", corrupt, "Perturb this op's analytic gradient (negative control)");

    CLI::App* an_cmd = app.add_subcommand("analyze", "Diagnostics: stable-report, ema-check, coupling");
    an_cmd->add_option("name", analyze_args.name, "Analysis name")->required();
    an_cmd->add_option("--run", analyze_args.runs, "Run directory (repeat for coupling across runs)");
    an_cmd->add_option("--out", analyze_args.out, "Output CSV path");
    an_cmd->add_option("--model", analyze_args.model, "stable-report: only this model");
    an_cmd->add_option("--model-a", analyze_args.model_a, "coupling: model in the first run");
    an_cmd->add_option("--model-b", analyze_args.model_b, "coupling: model in the second run");
    an_cmd->add_option("--xi", analyze_args.xi, "stable-report: confidence threshold (default: run's xi)");
    an_cmd->add_option("--alpha", analyze_args.alpha, "ema-check: smoothing coefficient")->capture_default_str();
    an_cmd->add_option("--ratio", analyze_args.ratio, "ema-check: s_t = ratio^t")->capture_default_str();
    an_cmd->add_option("--length", analyze_args.length, "ema-check: sequence length")->capture_default_str();
    an_cmd->add_option("--s0", analyze_args.s0, "ema-check: initial EMA value")->capture_default_str();
    an_cmd->add_option("--limit", analyze_args.limit, "ema-check: limit S of the sequence")->capture_default_str();
    an_cmd->add_option("--sequence", analyze_args.sequence, "ema-check: whitespace-separated sequence file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return ok;
    } catch (const CLI::ParseError& e) {
        err << e.what() << '\n';
        for (const CLI::App* sub : app.get_subcommands()) err << sub->help();
        if (app.get_subcommands().empty()) err << app.help();
        return usage;
    }

    try {
        const auto cli_overrides = [&] {
            std::vector<std::string> all = overrides;
            if (seed) all.push_back("train.seed=" + std::to_string(*seed));
            if (!method.empty()) all.push_back("train.method=" + method);
            if (epochs) all.push_back("train.epochs=" + std::to_string(*epochs));
            return all;
        };
        if (train_cmd->parsed()) {
            const config::Experiment exp = load_with_overrides(config_path, cli_overrides());
            if (out_dir.empty()) out_dir = default_out(exp.train.run_id);
            train_to_dir(exp, out_dir);
            const auto metrics = load_metrics_csv((fs::path(out_dir) / "metrics.csv").string());
            out << train::method_name(exp.train.method) << " seed " << exp.train.seed << ": final test_acc "
                << format_real(final_value(metrics, "test_acc")) << "\nwrote " << out_dir << '\n';
            return ok;
        }
        if (sweep_cmd->parsed()) {
            std::vector<std::uint64_t> seeds;
            for (const std::string& s : split_list(seeds_text)) {
                std::uint64_t v = 0;
                const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
                if (ec != std::errc{} || ptr != s.data() + s.size()) throw ConfigError("sweep: bad seed '" + s + "'");
                seeds.push_back(v);
            }
            return cmd_sweep(config_path, cli_overrides(), sweep_key, split_list(values_text), seeds, out_dir, jobs, out);
        }
        if (grad_cmd->parsed()) return cmd_gradcheck(out_dir, corrupt, out, err);
        return cmd_analyze(analyze_args, out, err);
    } catch (...) {
        return report_exception(err);
    }
}

}  // namespace dualstudent::cli
