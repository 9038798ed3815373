#include "badhash/experiment.hpp"

#include "badhash/desk_dataset.hpp"
#include "badhash/error.hpp"
#include "badhash/image_io.hpp"
#include "badhash/plots.hpp"
#include "badhash/torch_util.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

namespace badhash {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------- config

void ExperimentConfig::apply_seed(std::uint64_t s) {
    seed = s;
    hash.seed = s;
    if (surrogate) surrogate->seed = s;
    labcln.seed = s;
    gan.seed = s;
}

void ExperimentConfig::validate() const {
    if (name.empty()) throw ConfigError("experiment name must not be empty");
    if (data.name.empty()) throw ConfigError("data.name must not be empty");
    if (data.classes < 2) throw ConfigError("data.classes must be at least 2");
    if (data.generate && data.classes + data.open_set_classes > kDeskShapeFamilies) {
        throw ConfigError("the desk generator has only " + std::to_string(kDeskShapeFamilies) + " shape families");
    }
    if (data.query_count == 0) throw ConfigError("data.query_count must be positive");
    if (data.side < 8 || data.side % 4 != 0) throw ConfigError("data.side must be a multiple of 4, at least 8");
    hash.validate();
    surrogate_config().validate();
    if (surrogate_config().code_length != hash.code_length) {
        throw ConfigError("surrogate and victim must share the code length");
    }
    labcln.validate();
    gan.validate();
    if (attack.target_label == attack.confusing_label) throw ConfigError("target and confusing labels must differ");
    if (!(attack.poison_rate >= 0.0 && attack.poison_rate < 1.0)) throw ConfigError("attack.poison_rate must lie in [0, 1)");
    if (data.generate) {
        if (attack.target_label >= data.classes || attack.confusing_label >= data.classes) {
            throw ConfigError("target and confusing labels must be below data.classes");
        }
    }
    if (attack.open_set_queries == 0 && attack.in_distribution_queries == 0) {
        throw ConfigError("at least one poisoned query source is required");
    }
    if (eval.topk == 0) throw ConfigError("eval.topk must be positive");
    if (!(eval.residual_magnification > 0.0)) throw ConfigError("eval.residual_magnification must be positive");
    for (auto n : eval.precision_ns) {
        if (n == 0) throw ConfigError("eval.precision_ns entries must be positive");
    }
    if (!(badnets.poison_rate >= 0.0 && badnets.poison_rate < 1.0)) throw ConfigError("badnets.poison_rate must lie in [0, 1)");
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
    const auto key = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    json* node = &doc;
    std::stringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        if (!node->is_object()) throw ConfigError("override '" + key + "' walks into a scalar");
        node = &(*node)[parts[i]];
        if (node->is_null()) *node = json::object();
    }
    if (!node->is_object()) throw ConfigError("override '" + key + "' walks into a scalar");
    (*node)[parts.back()] = value;
}

namespace {

// Reads the keys of one config section and rejects unknown ones.
class Section {
public:
    Section(json doc, std::string name) : name_(std::move(name)), doc_(std::move(doc)) {
        if (!doc_.is_null() && !doc_.is_object()) throw ConfigError("config section '" + name_ + "' must be an object");
    }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!doc_.is_object() || !doc_.contains(key)) return;
        try {
            out = doc_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(name_ + "." + key + ": " + e.what());
        }
    }

    void finish() const {
        if (!doc_.is_object()) return;
        for (const auto& [k, v] : doc_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown config key '" + name_ + "." + k + "'");
        }
    }

private:
    std::string name_;
    json doc_;
    std::set<std::string> seen_;
};

json section_of(const json& doc, const std::string& key) { return doc.contains(key) ? doc.at(key) : json(); }

json hash_to_json(const HashTrainConfig& c) {
    return {{"method", to_string(c.method)},   {"backbone", c.backbone},
            {"K", c.code_length},              {"base_width", c.base_width},
            {"epochs", c.epochs},              {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate}, {"quantization_weight", c.quantization_weight},
            {"hashnet_alpha", c.hashnet_alpha}};
}

HashTrainConfig hash_from_json(const json& doc, const std::string& name, const HashTrainConfig& defaults) {
    HashTrainConfig c = defaults;
    Section s(doc, name);
    std::string method = to_string(c.method);
    s.get("method", method);
    try {
        c.method = parse_hash_method(method);
    } catch (const Error& e) {
        throw ConfigError(name + ".method: " + e.what());
    }
    s.get("backbone", c.backbone);
    s.get("K", c.code_length);
    s.get("base_width", c.base_width);
    s.get("epochs", c.epochs);
    s.get("batch_size", c.batch_size);
    s.get("learning_rate", c.learning_rate);
    s.get("quantization_weight", c.quantization_weight);
    s.get("hashnet_alpha", c.hashnet_alpha);
    s.finish();
    return c;
}

} // namespace

json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir.string();
    j["data"] = {{"root", c.data.root.string()},
                 {"name", c.data.name},
                 {"open_set", c.data.open_set},
                 {"query_count", c.data.query_count},
                 {"train_count", c.data.train_count},
                 {"generate", c.data.generate},
                 {"classes", c.data.classes},
                 {"open_set_classes", c.data.open_set_classes},
                 {"per_class", c.data.per_class},
                 {"side", c.data.side}};
    j["hash"] = hash_to_json(c.hash);
    if (c.surrogate) j["surrogate"] = hash_to_json(*c.surrogate);
    j["attack"] = {{"target_label", c.attack.target_label},
                   {"confusing_label", c.attack.confusing_label},
                   {"poison_rate", c.attack.poison_rate},
                   {"open_set_queries", c.attack.open_set_queries},
                   {"in_distribution_queries", c.attack.in_distribution_queries}};
    j["labcln"] = {{"latent_width", c.labcln.latent_width}, {"tau", c.labcln.tau},
                   {"alpha", c.labcln.alpha},               {"beta", c.labcln.beta},
                   {"lambda", c.labcln.lambda},             {"epsilon_a", c.labcln.epsilon_a},
                   {"epsilon_b", c.labcln.epsilon_b},       {"epochs", c.labcln.epochs},
                   {"batch_size", c.labcln.batch_size},     {"learning_rate", c.labcln.learning_rate}};
    j["gan"] = {{"alpha1", c.gan.alpha1},
                {"alpha2", c.gan.alpha2},
                {"alpha3", c.gan.alpha3},
                {"learning_rate", c.gan.learning_rate},
                {"epochs", c.gan.epochs},
                {"batch_size", c.gan.batch_size},
                {"train_samples", c.gan.train_samples},
                {"max_perturbation", c.gan.max_perturbation},
                {"generator_width", c.gan.generator_width},
                {"discriminator_width", c.gan.discriminator_width},
                {"perceptual", to_string(c.gan.perceptual)}};
    j["eval"] = {{"topk", c.eval.topk},
                 {"precision_ns", c.eval.precision_ns},
                 {"pr_points", c.eval.pr_points},
                 {"residual_magnification", c.eval.residual_magnification},
                 {"residual_count", c.eval.residual_count}};
    j["badnets"] = {{"poison_rate", c.badnets.poison_rate}, {"patch_size", c.badnets.patch_size}};
    return j;
}

ExperimentConfig config_from_json(const json& doc, const fs::path& base_dir) {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    ExperimentConfig c;
    Section top(doc, "config");
    top.get("name", c.name);
    std::uint64_t seed = 0;
    top.get("seed", seed);
    std::string out = c.output_dir.string();
    top.get("output_dir", out);
    c.output_dir = out;
    for (const auto* key : {"data", "hash", "surrogate", "attack", "labcln", "gan", "eval", "badnets"}) {
        json ignored;
        top.get(key, ignored);
    }
    top.finish();

    {
        Section s(section_of(doc, "data"), "data");
        std::string root = c.data.root.string();
        s.get("root", root);
        c.data.root = root;
        s.get("name", c.data.name);
        s.get("open_set", c.data.open_set);
        s.get("query_count", c.data.query_count);
        s.get("train_count", c.data.train_count);
        s.get("generate", c.data.generate);
        s.get("classes", c.data.classes);
        s.get("open_set_classes", c.data.open_set_classes);
        s.get("per_class", c.data.per_class);
        s.get("side", c.data.side);
        s.finish();
    }
    if (c.data.root.is_relative() && !base_dir.empty()) c.data.root = base_dir / c.data.root;

    c.hash = hash_from_json(section_of(doc, "hash"), "hash", c.hash);
    if (doc.contains("surrogate") && !doc.at("surrogate").is_null()) {
        c.surrogate = hash_from_json(doc.at("surrogate"), "surrogate", c.hash);
    }
    {
        Section s(section_of(doc, "attack"), "attack");
        s.get("target_label", c.attack.target_label);
        s.get("confusing_label", c.attack.confusing_label);
        s.get("poison_rate", c.attack.poison_rate);
        s.get("open_set_queries", c.attack.open_set_queries);
        s.get("in_distribution_queries", c.attack.in_distribution_queries);
        s.finish();
    }
    {
        Section s(section_of(doc, "labcln"), "labcln");
        s.get("latent_width", c.labcln.latent_width);
        s.get("tau", c.labcln.tau);
        s.get("alpha", c.labcln.alpha);
        s.get("beta", c.labcln.beta);
        s.get("lambda", c.labcln.lambda);
        s.get("epsilon_a", c.labcln.epsilon_a);
        s.get("epsilon_b", c.labcln.epsilon_b);
        s.get("epochs", c.labcln.epochs);
        s.get("batch_size", c.labcln.batch_size);
        s.get("learning_rate", c.labcln.learning_rate);
        s.finish();
    }
    {
        Section s(section_of(doc, "gan"), "gan");
        s.get("alpha1", c.gan.alpha1);
        s.get("alpha2", c.gan.alpha2);
        s.get("alpha3", c.gan.alpha3);
        s.get("learning_rate", c.gan.learning_rate);
        s.get("epochs", c.gan.epochs);
        s.get("batch_size", c.gan.batch_size);
        s.get("train_samples", c.gan.train_samples);
        s.get("max_perturbation", c.gan.max_perturbation);
        s.get("generator_width", c.gan.generator_width);
        s.get("discriminator_width", c.gan.discriminator_width);
        std::string perceptual = to_string(c.gan.perceptual);
        s.get("perceptual", perceptual);
        c.gan.perceptual = parse_perceptual_kind(perceptual);
        s.finish();
    }
    {
        Section s(section_of(doc, "eval"), "eval");
        s.get("topk", c.eval.topk);
        s.get("precision_ns", c.eval.precision_ns);
        s.get("pr_points", c.eval.pr_points);
        s.get("residual_magnification", c.eval.residual_magnification);
        s.get("residual_count", c.eval.residual_count);
        s.finish();
    }
    {
        Section s(section_of(doc, "badnets"), "badnets");
        s.get("poison_rate", c.badnets.poison_rate);
        s.get("patch_size", c.badnets.patch_size);
        s.finish();
    }
    c.labcln.code_length = c.surrogate_config().code_length;
    c.apply_seed(seed);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path, const ConfigOverrides& overrides) {
    json doc;
    {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open config " + path.string());
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    for (const auto& a : overrides.assignments) apply_override(doc, a);
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.output_dir) doc["output_dir"] = overrides.output_dir->string();
    return config_from_json(doc, path.parent_path());
}

// ---------------------------------------------------------------- helpers

namespace {

class RunLock {
public:
    explicit RunLock(const fs::path& dir) : path_(dir / "run.lock") {
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd >= 0) {
                const auto pid = std::to_string(::getpid()) + "\n";
                if (::write(fd, pid.data(), pid.size()) < 0) {
                    ::close(fd);
                    throw StageError("lock", "cannot write " + path_.string());
                }
                ::close(fd);
                return;
            }
            std::ifstream in(path_);
            long pid = 0;
            in >> pid;
            if (pid > 0 && pid != ::getpid() && ::kill(static_cast<pid_t>(pid), 0) == 0) {
                throw StageError("lock", "run directory is owned by process " + std::to_string(pid));
            }
            fs::remove(path_);
        }
        throw StageError("lock", "cannot acquire " + path_.string());
    }
    ~RunLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    fs::path path_;
};

bool stage_done(const fs::path& dir) { return fs::exists(dir / ".done"); }

void mark_done(const fs::path& dir) {
    std::ofstream(dir / ".done") << "ok\n";
}

template <class F>
auto guarded(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const ConfigError&) {
        throw;
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, e.what());
    }
}

fs::path fresh_stage_dir(const fs::path& dir) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string label_string(const LabelVector& l) {
    std::string s;
    for (std::size_t i = 0; i < l.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(static_cast<int>(l[i]));
    }
    return s;
}

void write_label_tsv(std::span<const LabeledSample> samples, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    for (const auto& s : samples) out << s.id << "\t" << label_string(s.label) << "\n";
}

std::vector<LabelVector> read_label_tsv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    std::vector<LabelVector> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError(path.string() + ": expected id<TAB>label");
        LabelVector l;
        std::stringstream ss(line.substr(tab + 1));
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            if (cell != "0" && cell != "1") throw FormatError(path.string() + ": label entries must be 0 or 1");
            l.push_back(cell == "1" ? 1 : 0);
        }
        out.push_back(std::move(l));
    }
    return out;
}

void ensure_datasets(const ExperimentConfig& c) {
    if (!c.data.generate) return;
    const auto main_dir = c.data.root / c.data.name;
    if (!fs::exists(main_dir / "labels.tsv")) {
        DeskDatasetOptions o;
        o.classes = c.data.classes;
        o.first_family = 0;
        o.per_class = c.data.per_class;
        o.side = c.data.side;
        o.seed = c.seed;
        write_desk_dataset(main_dir, o);
    }
    const auto open_dir = c.data.root / c.data.open_set;
    if (c.attack.open_set_queries > 0 && !fs::exists(open_dir / "labels.tsv")) {
        DeskDatasetOptions o;
        o.classes = c.data.open_set_classes;
        o.first_family = c.data.classes;
        o.per_class = c.data.per_class;
        o.side = c.data.side;
        o.seed = c.seed + 1;
        write_desk_dataset(open_dir, o);
    }
}

struct RunData {
    DatasetSplit split;
    std::vector<LabeledSample> open_queries;
    std::vector<LabeledSample> id_queries;
};

RunData load_run_data(const ExperimentConfig& c) {
    ensure_datasets(c);
    RunData d;
    d.split = load_dataset(c.data.root, c.data.name, c.seed, {c.data.query_count, c.data.train_count});
    if (c.attack.target_label >= d.split.class_count || c.attack.confusing_label >= d.split.class_count) {
        throw ConfigError("target/confusing label out of range for " + std::to_string(d.split.class_count) + " classes");
    }
    if (c.attack.open_set_queries > 0) {
        auto open = load_image_folder(c.data.root / c.data.open_set);
        if (open.empty()) throw LoadError("open-set dataset is empty");
        auto perm = seeded_permutation(open.size(), c.seed ^ 0x0BE45E7ull);
        perm.resize(std::min(perm.size(), c.attack.open_set_queries));
        std::sort(perm.begin(), perm.end());
        for (auto i : perm) d.open_queries.push_back(std::move(open[i]));
    }
    std::vector<std::size_t> non_target;
    for (std::size_t i = 0; i < d.split.queries.size(); ++i) {
        if (d.split.queries[i].class_index() != c.attack.target_label) non_target.push_back(i);
    }
    auto perm = seeded_permutation(non_target.size(), c.seed ^ 0x1D0E5ull);
    perm.resize(std::min(perm.size(), c.attack.in_distribution_queries));
    std::sort(perm.begin(), perm.end());
    for (auto p : perm) d.id_queries.push_back(d.split.queries[non_target[p]]);
    return d;
}

std::string query_manifest(const RunData& d) {
    std::string m = split_manifest(d.split);
    m += "[open_set_queries]\n";
    for (const auto& s : d.open_queries) m += s.id + "\n";
    m += "[in_distribution_queries]\n";
    for (const auto& s : d.id_queries) m += s.id + "\n";
    return m;
}

std::string read_text(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw LoadError("cannot write " + p.string());
    out << text;
}

void write_labcln_log(std::span<const LabclnEpochRecord> log, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "epoch,contrastive,quantization,classification,total\n" << std::setprecision(10);
    for (const auto& r : log) {
        out << r.epoch << "," << r.contrastive << "," << r.quantization << "," << r.classification << "," << r.total << "\n";
    }
}

void write_stealth_csv(std::span<const std::string> originals, std::span<const std::string> poisoned,
                       std::span<const StealthReport> reports, const StealthSummary& summary, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "original,poisoned,mse,psnr,ssim\n" << std::setprecision(10);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        out << originals[i] << "," << poisoned[i] << "," << reports[i].mse << "," << reports[i].psnr << ","
            << reports[i].ssim << "\n";
    }
    out << "mean,," << summary.mean.mse << "," << summary.mean.psnr << "," << summary.mean.ssim << "\n";
    out << "count,," << summary.count << ",,\n";
}

StealthSummary summarize(std::span<const StealthReport> reports) {
    StealthSummary s;
    s.mean = {0.0, 0.0, 0.0};
    s.count = reports.size();
    if (reports.empty()) {
        s.mean.psnr = std::numeric_limits<double>::infinity();
        s.mean.ssim = 1.0;
        return s;
    }
    double psnr_sum = 0.0;
    std::size_t finite = 0;
    for (const auto& r : reports) {
        s.mean.mse += r.mse;
        s.mean.ssim += r.ssim;
        if (std::isfinite(r.psnr)) {
            psnr_sum += r.psnr;
            ++finite;
        }
    }
    s.mean.mse /= static_cast<double>(reports.size());
    s.mean.ssim /= static_cast<double>(reports.size());
    s.mean.psnr = finite == 0 ? std::numeric_limits<double>::infinity() : psnr_sum / static_cast<double>(finite);
    return s;
}

json stealth_json(const StealthSummary& s) {
    const auto num = [](double v) { return std::isfinite(v) ? json(v) : json("inf"); };
    return {{"MSE", s.mean.mse}, {"PSNR", num(s.mean.psnr)}, {"SSIM", s.mean.ssim}, {"count", s.count}};
}

json evaluation_json(const ModelEvaluation& e) {
    return {{"MAP", e.map},
            {"t-MAP", e.t_map_open_set},
            {"t-MAP_in_distribution", e.t_map_in_distribution},
            {"t-MAP_open_set_unpoisoned", e.t_map_open_set_clean},
            {"hamming_to_target_class", e.distance_to_target},
            {"hamming_to_own_class", e.distance_to_own_class}};
}

std::vector<LabeledSample> substitute_poisoned(const std::vector<LabeledSample>& train, const PoisonPlan& plan,
                                               const torch::Tensor& images) {
    if (images.size(0) != static_cast<std::int64_t>(plan.poisoned_indices.size())) {
        throw FormatError("poisoned image archive does not match the poison plan");
    }
    auto out = train;
    for (std::size_t k = 0; k < plan.poisoned_indices.size(); ++k) {
        const auto i = plan.poisoned_indices[k];
        if (i >= out.size()) throw FormatError("poison plan index out of range");
        out[i].image = images[static_cast<std::int64_t>(k)].clone();
        out[i].id += "#poisoned";
    }
    return out;
}

std::vector<LabeledSample> apply_to_samples(std::span<const LabeledSample> samples, const Poisoner& poisoner) {
    std::vector<LabeledSample> out(samples.begin(), samples.end());
    if (samples.empty()) return out;
    const auto poisoned = poisoner(stack_images(samples));
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].image = poisoned[static_cast<std::int64_t>(i)].clone();
        out[i].id += "#poisoned";
    }
    return out;
}

void plot_training_log(const fs::path& csv, const fs::path& png, const std::string& title,
                       std::vector<std::string> columns) {
    PlotSpec spec;
    spec.title = title;
    spec.x_column = "epoch";
    spec.y_columns = std::move(columns);
    plot_csv(csv, png, spec);
}

double mean_distance_to_class(const BipolarCode& code, std::span<const BipolarCode> db, std::span<const LabelVector> labels,
                              std::size_t cls) {
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < db.size(); ++i) {
        if (cls < labels[i].size() && labels[i][cls]) {
            sum += hamming_distance(code, db[i]);
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

struct QuerySets {
    std::vector<LabeledSample> poisoned_open;
    std::vector<LabeledSample> poisoned_id;
};

// Writes code dumps and label files for one model, then reads them back to
// build the reports.
ModelEvaluation evaluate_model(HashModel& model, const RunData& d, const QuerySets& q, const ExperimentConfig& c,
                               const fs::path& dir) {
    fs::create_directories(dir / "codes");
    const auto db = encode_codes(model, d.split.database);
    const auto queries = encode_codes(model, d.split.queries);
    write_code_dump(dir / "codes" / "database.bhcd", db);
    write_label_tsv(d.split.database, dir / "codes" / "database_labels.tsv");
    write_code_dump(dir / "codes" / "queries.bhcd", queries);
    write_label_tsv(d.split.queries, dir / "codes" / "queries_labels.tsv");
    if (!q.poisoned_open.empty()) {
        write_code_dump(dir / "codes" / "poisoned_open.bhcd", encode_codes(model, q.poisoned_open));
        write_label_tsv(q.poisoned_open, dir / "codes" / "poisoned_open_labels.tsv");
    }

    const auto evaluation = evaluate_code_dir(dir / "codes", c.attack.target_label, c.eval);
    ModelEvaluation e;
    e.map = evaluation.clean.map;
    e.t_map_open_set = evaluation.t_map_open_set.value_or(0.0);

    const auto db_labels = labels_of(d.split.database);
    const auto topk = std::min(c.eval.topk, db.size());
    if (!d.open_queries.empty()) {
        e.t_map_open_set_clean = t_map(encode_codes(model, d.open_queries), c.attack.target_label, db, db_labels, topk);
    }
    if (!q.poisoned_id.empty()) {
        const auto codes = encode_codes(model, q.poisoned_id);
        e.t_map_in_distribution = t_map(codes, c.attack.target_label, db, db_labels, topk);
        for (std::size_t i = 0; i < codes.size(); ++i) {
            e.distance_to_target += mean_distance_to_class(codes[i], db, db_labels, c.attack.target_label);
            e.distance_to_own_class += mean_distance_to_class(codes[i], db, db_labels, q.poisoned_id[i].class_index());
        }
        e.distance_to_target /= static_cast<double>(codes.size());
        e.distance_to_own_class /= static_cast<double>(codes.size());
    }

    auto report = evaluation.clean;
    report.t_map = e.t_map_open_set;
    write_report_json(report, dir / "report.json");
    write_pr_csv(report.pr_points, dir / "pr.csv");
    write_precision_csv(report.precision_at, dir / "precision_at.csv");
    plot_csv(dir / "pr.csv", dir / "pr.png", {"PR curve", "recall", {"precision"}, false, 640, 480});
    plot_csv(dir / "precision_at.csv", dir / "precision_at.png", {"precision@N", "n", {"precision"}, true, 640, 480});
    write_json(evaluation_json(e), dir / "evaluation.json");
    return e;
}

ModelEvaluation evaluation_from_json(const json& j) {
    ModelEvaluation e;
    e.map = j.at("MAP").get<double>();
    e.t_map_open_set = j.at("t-MAP").get<double>();
    e.t_map_in_distribution = j.at("t-MAP_in_distribution").get<double>();
    e.t_map_open_set_clean = j.at("t-MAP_open_set_unpoisoned").get<double>();
    e.distance_to_target = j.at("hamming_to_target_class").get<double>();
    e.distance_to_own_class = j.at("hamming_to_own_class").get<double>();
    return e;
}

StealthSummary stealth_from_json(const json& j) {
    StealthSummary s;
    s.mean.mse = j.at("MSE").get<double>();
    s.mean.psnr = j.at("PSNR").is_string() ? std::numeric_limits<double>::infinity() : j.at("PSNR").get<double>();
    s.mean.ssim = j.at("SSIM").get<double>();
    s.count = j.at("count").get<std::size_t>();
    return s;
}

std::string setting_label(const ExperimentConfig& c) {
    std::ostringstream ss;
    ss << "B-" << c.surrogate_config().backbone << "/T-" << c.hash.backbone << "/" << to_string(c.hash.method) << "/K"
       << c.hash.code_length << "/target" << c.attack.target_label;
    return ss.str();
}

json comparable_config(const ExperimentConfig& c) {
    auto j = config_to_json(c);
    j.erase("output_dir");
    return j;
}

struct StagePaths {
    fs::path root;
    fs::path data() const { return root / "data"; }
    fs::path clean() const { return root / "clean"; }
    fs::path surrogate() const { return root / "surrogate"; }
    fs::path labcln() const { return root / "labcln"; }
    fs::path gan() const { return root / "gan"; }
    fs::path poison() const { return root / "poison"; }
    fs::path victim() const { return root / "victim"; }
    fs::path eval() const { return root / "eval"; }
};

void copy_stage(const fs::path& from, const fs::path& to) {
    if (!stage_done(from) || stage_done(to)) return;
    fs::remove_all(to);
    fs::copy(from, to, fs::copy_options::recursive);
}

void check_run_config(const ExperimentConfig& c, const fs::path& root) {
    const auto stored = root / "config.json";
    if (fs::exists(stored)) {
        auto previous = read_json(stored);
        previous.erase("output_dir");
        if (previous != comparable_config(c)) {
            throw ConfigError("run directory " + root.string() + " holds results of a different config");
        }
    }
    write_json(config_to_json(c), stored);
}

TriggerGan load_gan(const StagePaths& p) { return load_trigger_gan(p.gan() / "trigger"); }

ConfusingRepresentation load_anchor_rb(const StagePaths& p) {
    const auto j = read_json(p.labcln() / "anchor.json");
    ConfusingRepresentation r;
    r.vector = j.at("r_b").get<std::vector<float>>();
    r.source_class = j.at("confusing_label").get<std::size_t>();
    r.epsilon = j.at("epsilon").get<double>();
    return r;
}

} // namespace

// ---------------------------------------------------------------- pipeline

json PipelineSummary::to_json() const {
    return {{"setting", setting},
            {"clean", evaluation_json(clean)},
            {"victim", evaluation_json(victim)},
            {"stealth", stealth_json(stealth)},
            {"query_stealth", stealth_json(query_stealth)},
            {"poisoned_count", poisoned_count},
            {"train_size", train_size},
            {"surrogate_checkpoint_hash", surrogate_checkpoint_hash}};
}

PipelineSummary run_pipeline(const ExperimentConfig& c, const PipelineOptions& options) {
    c.validate();
    const StagePaths p{c.output_dir};
    fs::create_directories(p.root);
    RunLock lock(p.root);
    check_run_config(c, p.root);

    if (options.reuse_from) {
        static const std::set<std::string> reusable{"clean", "surrogate", "labcln", "gan", "poison", "victim"};
        guarded("reuse", [&] {
            for (const auto& stage : options.reuse_stages) {
                if (!reusable.count(stage)) throw ConfigError("stage '" + stage + "' cannot be reused");
                copy_stage(*options.reuse_from / stage, p.root / stage);
            }
        });
    }

    // data
    const auto data = guarded("data", [&] {
        auto d = load_run_data(c);
        fs::create_directories(p.data());
        const auto manifest = query_manifest(d);
        const auto stored = p.data() / "split_manifest.txt";
        if (stage_done(p.data()) && read_text(stored) != manifest) {
            throw FormatError("dataset contents changed since the run started");
        }
        write_text(stored, manifest);
        mark_done(p.data());
        return d;
    });
    const auto& split = data.split;

    // clean
    guarded("clean", [&] {
        if (stage_done(p.clean())) return;
        fresh_stage_dir(p.clean());
        HashTrainLog log;
        auto model = train_clean(split, c.hash, &log);
        model.info.training_method = to_string(c.hash.method);
        save_hash_model(model, p.clean() / "model");
        log.write_csv(p.clean() / "train_log.csv");
        plot_training_log(p.clean() / "train_log.csv", p.clean() / "train_loss.png", "clean model loss", {"loss"});
        mark_done(p.clean());
    });

    // surrogate
    guarded("surrogate", [&] {
        if (stage_done(p.surrogate())) return;
        fresh_stage_dir(p.surrogate());
        // The same recipe and seed would reproduce the clean model.
        if (!c.surrogate || (hash_to_json(*c.surrogate) == hash_to_json(c.hash) && c.surrogate->seed == c.hash.seed)) {
            fs::copy_file(p.clean() / "model.pt", p.surrogate() / "model.pt");
            fs::copy_file(p.clean() / "model.json", p.surrogate() / "model.json");
        } else {
            HashTrainLog log;
            auto model = train_hash_model(split.train, split.class_count, *c.surrogate, &log);
            model.info.training_method = to_string(c.surrogate->method);
            save_hash_model(model, p.surrogate() / "model");
            log.write_csv(p.surrogate() / "train_log.csv");
        }
        mark_done(p.surrogate());
    });
    const auto surrogate_hash = guarded("surrogate", [&] { return file_sha256(p.surrogate() / "model.pt"); });

    // labcln
    guarded("labcln", [&] {
        if (stage_done(p.labcln())) return;
        fresh_stage_dir(p.labcln());
        std::vector<LabclnEpochRecord> log;
        auto model = train_labcln(split.class_count, c.labcln, &log);
        save_labcln(model, p.labcln() / "model");
        write_labcln_log(log, p.labcln() / "train_log.csv");
        plot_training_log(p.labcln() / "train_log.csv", p.labcln() / "train_loss.png", "LabCLN loss",
                          {"contrastive", "classification", "total"});
        const auto h_c = centroid_code(model, c.attack.confusing_label);
        const auto r_b = confusing_representation(model, c.attack.confusing_label);
        json anchor;
        anchor["confusing_label"] = c.attack.confusing_label;
        anchor["predicted_label"] = labcln_predict(model, c.attack.confusing_label);
        anchor["centroid_code"] = h_c.code.bits();
        anchor["epsilon"] = r_b.epsilon;
        anchor["r_b"] = r_b.vector;
        write_json(anchor, p.labcln() / "anchor.json");
        mark_done(p.labcln());
    });

    // gan
    guarded("gan", [&] {
        if (stage_done(p.gan())) {
            GanSidecar sidecar;
            load_trigger_gan(p.gan() / "trigger", &sidecar);
            if (sidecar.surrogate_checkpoint_hash != surrogate_hash) {
                throw FormatError("trigger generator was trained against a different surrogate checkpoint");
            }
            return;
        }
        fresh_stage_dir(p.gan());
        auto surrogate = load_hash_model(p.surrogate() / "model");
        auto labcln = load_labcln(p.labcln() / "model");
        const auto h_c = centroid_code(labcln, c.attack.confusing_label);
        const auto r_b = load_anchor_rb(p);
        std::vector<GanEpochRecord> log;
        train_trigger_gan(split.train, split.class_count, r_b, h_c, surrogate, c.attack.target_label, c.gan, &log,
                          p.gan() / "trigger", surrogate_hash);
        write_gan_log_csv(log, p.gan() / "train_log.csv");
        plot_training_log(p.gan() / "train_log.csv", p.gan() / "train_loss.png", "trigger GAN losses",
                          {"L_h", "L_r", "L_bd", "L_D"});
        mark_done(p.gan());
    });

    // poison
    guarded("poison", [&] {
        if (stage_done(p.poison())) return;
        fresh_stage_dir(p.poison());
        auto gan = load_gan(p);
        const auto r_b = load_anchor_rb(p);
        const auto poisoner = make_poisoner(gan.generator, r_b);
        const auto set = build_poisoned_set(split, poisoner, c.attack.target_label, c.attack.confusing_label,
                                            c.attack.poison_rate, c.seed);
        save_poison_plan(set.plan, p.poison() / "plan.json");
        std::vector<torch::Tensor> images;
        std::vector<std::string> originals, poisoned_ids;
        std::vector<StealthReport> reports;
        fs::create_directories(p.poison() / "images");
        fs::create_directories(p.poison() / "residuals");
        for (std::size_t k = 0; k < set.plan.poisoned_indices.size(); ++k) {
            const auto i = set.plan.poisoned_indices[k];
            const auto& orig = split.train[i].image;
            const auto& pois = set.samples[i].image;
            images.push_back(pois);
            originals.push_back(split.train[i].id);
            poisoned_ids.push_back(set.samples[i].id);
            reports.push_back(stealth_report(orig, pois));
            std::ostringstream stem;
            stem << std::setw(4) << std::setfill('0') << k;
            write_png(p.poison() / "images" / (stem.str() + ".png"), pois, 16);
            if (k < c.eval.residual_count) {
                write_png(p.poison() / "residuals" / (stem.str() + "_original.png"), orig, 8);
                write_png(p.poison() / "residuals" / (stem.str() + "_poisoned.png"), pois, 16);
                write_png(p.poison() / "residuals" / (stem.str() + "_residual.png"),
                          residual_map(orig, pois, c.eval.residual_magnification), 8);
            }
        }
        const auto& s = split.train.front().image;
        const auto stacked = images.empty() ? torch::empty({0, s.size(0), s.size(1), s.size(2)}) : torch::stack(images);
        torch::save(stacked, (p.poison() / "images.pt").string());
        const auto summary = summarize(reports);
        write_stealth_csv(originals, poisoned_ids, reports, summary, p.poison() / "stealth.csv");
        write_json(stealth_json(summary), p.poison() / "stealth.json");
        mark_done(p.poison());
    });

    // victim
    guarded("victim", [&] {
        if (stage_done(p.victim())) return;
        fresh_stage_dir(p.victim());
        const auto plan = load_poison_plan(p.poison() / "plan.json");
        torch::Tensor images;
        torch::load(images, (p.poison() / "images.pt").string());
        const auto train = substitute_poisoned(split.train, plan, images);
        HashTrainLog log;
        auto model = train_victim(train, split.class_count, c.hash, &log);
        model.info.training_method = to_string(c.hash.method);
        save_hash_model(model, p.victim() / "model");
        log.write_csv(p.victim() / "train_log.csv");
        plot_training_log(p.victim() / "train_log.csv", p.victim() / "train_loss.png", "victim model loss", {"loss"});
        mark_done(p.victim());
    });

    // eval
    return guarded("eval", [&] {
        PipelineSummary summary;
        summary.setting = setting_label(c);
        summary.train_size = split.train.size();
        summary.surrogate_checkpoint_hash = surrogate_hash;
        summary.poisoned_count = load_poison_plan(p.poison() / "plan.json").poisoned_indices.size();
        summary.stealth = stealth_from_json(read_json(p.poison() / "stealth.json"));

        if (stage_done(p.eval()) && !options.force_eval) {
            summary.clean = evaluation_from_json(read_json(p.eval() / "clean" / "evaluation.json"));
            summary.victim = evaluation_from_json(read_json(p.eval() / "victim" / "evaluation.json"));
            summary.query_stealth = stealth_from_json(read_json(p.eval() / "query_stealth.json"));
        } else {
            fresh_stage_dir(p.eval());
            auto gan = load_gan(p);
            const auto poisoner = make_poisoner(gan.generator, load_anchor_rb(p));
            QuerySets q;
            q.poisoned_open = apply_to_samples(data.open_queries, poisoner);
            q.poisoned_id = apply_to_samples(data.id_queries, poisoner);
            std::vector<StealthReport> reports;
            for (std::size_t i = 0; i < q.poisoned_open.size(); ++i) {
                reports.push_back(stealth_report(data.open_queries[i].image, q.poisoned_open[i].image));
            }
            for (std::size_t i = 0; i < q.poisoned_id.size(); ++i) {
                reports.push_back(stealth_report(data.id_queries[i].image, q.poisoned_id[i].image));
            }
            summary.query_stealth = summarize(reports);
            write_json(stealth_json(summary.query_stealth), p.eval() / "query_stealth.json");

            auto clean = load_hash_model(p.clean() / "model");
            auto victim = load_hash_model(p.victim() / "model");
            summary.clean = evaluate_model(clean, data, q, c, p.eval() / "clean");
            summary.victim = evaluate_model(victim, data, q, c, p.eval() / "victim");
            mark_done(p.eval());
        }

        json doc;
        doc["schema_version"] = kSummarySchemaVersion;
        doc["name"] = c.name;
        doc["seed"] = c.seed;
        doc["target_label"] = c.attack.target_label;
        doc["confusing_label"] = c.attack.confusing_label;
        doc["target_class_name"] = split.class_names.at(c.attack.target_label);
        doc["confusing_class_name"] = split.class_names.at(c.attack.confusing_label);
        doc["poison_rate"] = c.attack.poison_rate;
        doc["settings"] = json::array({summary.to_json()});
        write_json(doc, p.root / "summary.json");
        return summary;
    });
}

// ---------------------------------------------------------------- transfer

json TransferSummary::to_json() const {
    json rows = json::array();
    for (const auto& [label, s] : targets) {
        rows.push_back({{"setting", basic_backbone + " / " + label},
                        {"clean", {{"MAP", s.clean.map}, {"t-MAP", s.clean.t_map_open_set}}},
                        {"victim", {{"MAP", s.victim.map}, {"t-MAP", s.victim.t_map_open_set}}}});
    }
    return {{"schema_version", kSummarySchemaVersion}, {"basic", basic_backbone}, {"rows", rows}};
}

TransferSummary run_transfer_check(const ExperimentConfig& first, const ExperimentConfig& second, const fs::path& out_dir) {
    first.validate();
    second.validate();
    const auto a = config_to_json(first);
    const auto b = config_to_json(second);
    for (const auto* key : {"data", "seed", "attack", "labcln", "gan", "eval"}) {
        if (a.at(key) != b.at(key)) throw ConfigError(std::string("transfer configs disagree on '") + key + "'");
    }
    if (hash_to_json(first.surrogate_config()) != hash_to_json(second.surrogate_config())) {
        throw ConfigError("transfer configs must share the surrogate model");
    }
    TransferSummary summary;
    summary.basic_backbone = "B-" + first.surrogate_config().backbone;

    auto label_a = "T-" + first.hash.backbone;
    auto label_b = "T-" + second.hash.backbone;
    if (label_b == label_a) label_b += "-2";
    auto ca = first;
    ca.output_dir = out_dir / label_a;
    auto cb = second;
    cb.output_dir = out_dir / label_b;
    const auto sa = run_pipeline(ca);
    PipelineOptions reuse;
    reuse.reuse_from = ca.output_dir;
    const auto sb = run_pipeline(cb, reuse);
    summary.targets = {{label_a, sa}, {label_b, sb}};
    write_json(summary.to_json(), out_dir / "transfer.json");
    return summary;
}

// ---------------------------------------------------------------- comparison

void write_comparison_csv(std::span<const ComparisonRow> rows, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "Method,MAP,t-MAP,MSE,PSNR,SSIM\n" << std::setprecision(6) << std::fixed;
    for (const auto& r : rows) {
        out << r.method << "," << r.map << "," << r.t_map << "," << r.stealth.mse << "," << r.stealth.psnr << ","
            << r.stealth.ssim << "\n";
    }
}

std::vector<ComparisonRow> run_comparison(const ExperimentConfig& c) {
    const auto badhash = run_pipeline(c);
    const StagePaths p{c.output_dir};
    RunLock lock(p.root);
    const auto dir = p.root / "badnets";

    const auto row = guarded("badnets", [&] {
        const auto data = load_run_data(c);
        const auto& split = data.split;
        const auto side = static_cast<std::size_t>(std::min(split.train.front().image.size(1), split.train.front().image.size(2)));
        const auto patch = c.badnets.patch_size == 0 ? badnets_patch_size(side) : c.badnets.patch_size;
        ComparisonRow r;
        r.method = "BadNets";
        if (stage_done(dir)) {
            const auto j = read_json(dir / "result.json");
            r.map = j.at("MAP").get<double>();
            r.t_map = j.at("t-MAP").get<double>();
            r.stealth = stealth_from_json(j.at("stealth")).mean;
            return r;
        }
        fresh_stage_dir(dir);
        const auto set = build_badnets_set(split, c.attack.target_label, c.badnets.poison_rate, patch, c.seed);
        std::vector<StealthReport> reports;
        for (auto i : set.poisoned_indices) reports.push_back(stealth_report(split.train[i].image, set.samples[i].image));
        const auto stealth = summarize(reports);

        HashTrainLog log;
        auto model = train_victim(set.samples, split.class_count, c.hash, &log);
        save_hash_model(model, dir / "model");
        log.write_csv(dir / "train_log.csv");

        const Poisoner patcher = [patch](const torch::Tensor& batch) {
            std::vector<torch::Tensor> out;
            for (std::int64_t i = 0; i < batch.size(0); ++i) out.push_back(apply_badnets_patch(batch[i], patch));
            return torch::stack(out);
        };
        const auto queries = apply_to_samples(data.open_queries.empty() ? data.id_queries : data.open_queries, patcher);
        const auto db = encode_codes(model, split.database);
        const auto db_labels = labels_of(split.database);
        const auto topk = std::min(c.eval.topk, db.size());
        r.map = mean_average_precision(encode_codes(model, split.queries), labels_of(split.queries), db, db_labels, topk);
        r.t_map = t_map(encode_codes(model, queries), c.attack.target_label, db, db_labels, topk);
        r.stealth = stealth.mean;
        write_json({{"MAP", r.map}, {"t-MAP", r.t_map}, {"stealth", stealth_json(stealth)}, {"patch_size", patch},
                    {"poisoned_count", set.poisoned_indices.size()}},
                   dir / "result.json");
        mark_done(dir);
        return r;
    });

    std::vector<ComparisonRow> rows;
    rows.push_back(row);
    const bool open = c.attack.open_set_queries > 0;
    rows.push_back({"BadHash", badhash.victim.map, open ? badhash.victim.t_map_open_set : badhash.victim.t_map_in_distribution,
                    badhash.stealth.mean});
    write_comparison_csv(rows, p.root / "comparison.csv");
    return rows;
}

// ---------------------------------------------------------------- embeddings

void dump_embeddings(HashModel& model, std::span<const LabeledSample> samples, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    const auto k = model.info.code_length;
    out << "sample_id\tlabel";
    for (int i = 0; i < k; ++i) out << "\tu" << i;
    for (int i = 0; i < k; ++i) out << "\tb" << i;
    out << "\n" << std::setprecision(8);
    if (samples.empty()) return;
    const auto relaxed = encode_relaxed_batched(model, stack_images(samples)).to(torch::kFloat32).contiguous();
    const auto* u = relaxed.data_ptr<float>();
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const auto row = std::span<const float>(u + r * static_cast<std::size_t>(k), static_cast<std::size_t>(k));
        out << samples[r].id << "\t" << label_string(samples[r].label);
        for (auto v : row) out << "\t" << v;
        const auto code = binarize(row);
        for (auto b : code.bits()) out << "\t" << static_cast<int>(b);
        out << "\n";
    }
}

void dump_run_embeddings(const ExperimentConfig& c, const std::string& model_name, const std::string& subset,
                         const fs::path& out) {
    static const std::set<std::string> models{"clean", "surrogate", "victim"};
    static const std::set<std::string> subsets{"train", "database", "queries", "open-set", "poisoned"};
    if (!models.count(model_name)) throw ConfigError("unknown model '" + model_name + "'");
    if (!subsets.count(subset)) throw ConfigError("unknown subset '" + subset + "'");
    const StagePaths p{c.output_dir};
    const auto stem = (model_name == "clean" ? p.clean() : model_name == "surrogate" ? p.surrogate() : p.victim()) / "model";
    guarded("dump-embeddings", [&] {
        if (!fs::exists(path_with_suffix(stem, ".json"))) {
            throw LoadError("no " + model_name + " model in " + c.output_dir.string() + "; run the pipeline first");
        }
        auto model = load_hash_model(stem);
        const auto data = load_run_data(c);
        if (subset == "train") return dump_embeddings(model, data.split.train, out);
        if (subset == "database") return dump_embeddings(model, data.split.database, out);
        if (subset == "queries") return dump_embeddings(model, data.split.queries, out);
        if (subset == "open-set") return dump_embeddings(model, data.open_queries, out);
        auto gan = load_gan(p);
        const auto poisoned = apply_to_samples(data.id_queries, make_poisoner(gan.generator, load_anchor_rb(p)));
        dump_embeddings(model, poisoned, out);
    });
}

// ---------------------------------------------------------------- code dirs

CodeDirEvaluation evaluate_code_dir(const fs::path& dir, std::size_t target_label, const EvalConfig& eval) {
    const auto db = read_code_dump(dir / "database.bhcd");
    const auto db_labels = read_label_tsv(dir / "database_labels.tsv");
    const auto q = read_code_dump(dir / "queries.bhcd");
    const auto q_labels = read_label_tsv(dir / "queries_labels.tsv");
    if (db.size() != db_labels.size() || q.size() != q_labels.size()) {
        throw FormatError("code dump and label file sizes differ in " + dir.string());
    }
    if (db.empty()) throw FormatError("empty database in " + dir.string());
    const auto topk = std::min(eval.topk, db.size());

    CodeDirEvaluation out;
    out.clean.topk = topk;
    out.clean.query_count = q.size();
    out.clean.map = mean_average_precision(q, q_labels, db, db_labels, topk);
    // PR and precision@N use full-depth rankings so recall reaches 1.
    const auto full = rank_all(q, q_labels, db, db_labels, db.size());
    out.clean.pr_points = pr_curve(full, eval.pr_points);
    out.clean.precision_at = precision_at_topN(full, eval.precision_ns);
    if (fs::exists(dir / "poisoned_open.bhcd")) {
        const auto poisoned = read_code_dump(dir / "poisoned_open.bhcd");
        if (!poisoned.empty()) {
            out.t_map_open_set = t_map(poisoned, target_label, db, db_labels, topk);
            out.clean.t_map = *out.t_map_open_set;
        }
    }
    return out;
}

} // namespace badhash
