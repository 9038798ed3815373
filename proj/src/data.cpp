#include "badhash/data.hpp"

#include "badhash/error.hpp"
#include "badhash/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace badhash {

namespace fs = std::filesystem;

std::size_t LabeledSample::class_index() const {
    for (std::size_t i = 0; i < label.size(); ++i) {
        if (label[i]) return i;
    }
    throw DomainError("sample " + id + " has an empty label");
}

namespace {

LabelVector parse_label(const std::string& field, std::size_t line_no) {
    LabelVector label;
    std::stringstream ss(field);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok == "0") label.push_back(0);
        else if (tok == "1") label.push_back(1);
        else throw FormatError("labels.tsv line " + std::to_string(line_no) + ": label entries must be 0 or 1");
    }
    if (std::none_of(label.begin(), label.end(), [](auto v) { return v != 0; })) {
        throw FormatError("labels.tsv line " + std::to_string(line_no) + ": label has no nonzero entry");
    }
    return label;
}

std::size_t count_images(const fs::path& dir) {
    std::size_t n = 0;
    for (const auto& cls : fs::directory_iterator(dir)) {
        if (!cls.is_directory()) continue;
        for (const auto& f : fs::directory_iterator(cls.path())) {
            const auto ext = f.path().extension().string();
            if (f.is_regular_file() && (ext == ".png" || ext == ".PNG")) ++n;
        }
    }
    return n;
}

std::vector<LabeledSample> pick(const std::vector<LabeledSample>& all, const std::vector<std::size_t>& idx) {
    std::vector<LabeledSample> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(all[i]);
    return out;
}

} // namespace

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

std::vector<LabeledSample> load_image_folder(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw LoadError("dataset directory not found: " + dir.string());
    const auto manifest = dir / "labels.tsv";
    std::ifstream in(manifest);
    if (!in) throw LoadError("missing labels.tsv in " + dir.string());

    std::vector<std::pair<std::string, LabelVector>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw FormatError("labels.tsv line " + std::to_string(line_no) + ": missing tab");
        rows.emplace_back(line.substr(0, tab), parse_label(line.substr(tab + 1), line_no));
        if (rows.back().second.size() != rows.front().second.size()) {
            throw FormatError("labels.tsv line " + std::to_string(line_no) + ": inconsistent label length");
        }
    }
    const auto on_disk = count_images(dir);
    if (on_disk != rows.size()) {
        throw FormatError("labels.tsv lists " + std::to_string(rows.size()) + " images but " +
                          std::to_string(on_disk) + " are on disk in " + dir.string());
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<LabeledSample> samples;
    samples.reserve(rows.size());
    std::vector<std::int64_t> shape;
    for (auto& [path, label] : rows) {
        const auto full = dir / path;
        if (!fs::exists(full)) throw FormatError("labels.tsv references missing image " + path);
        auto image = read_image(full);
        if (shape.empty()) shape = image.sizes().vec();
        if (image.sizes().vec() != shape) throw FormatError("image " + path + " differs in shape from the first image");
        samples.push_back({path, std::move(image), std::move(label)});
    }
    return samples;
}

DatasetSplit load_dataset(const fs::path& root, const std::string& name, std::uint64_t seed,
                          const SplitOptions& options) {
    auto all = load_image_folder(root / name);
    if (options.query_count >= all.size()) throw ConfigError("query_count must be smaller than the dataset");

    DatasetSplit split;
    split.name = name;
    split.seed = seed;
    split.class_count = all.front().label.size();
    split.class_names.assign(split.class_count, {});
    for (const auto& s : all) {
        const auto c = s.class_index();
        if (split.class_names[c].empty()) split.class_names[c] = fs::path(s.id).parent_path().string();
    }
    for (std::size_t c = 0; c < split.class_count; ++c) {
        if (split.class_names[c].empty()) split.class_names[c] = "class_" + std::to_string(c);
    }

    const auto perm = seeded_permutation(all.size(), seed);
    std::vector<std::size_t> query_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(options.query_count));
    std::vector<std::size_t> db_idx(perm.begin() + static_cast<std::ptrdiff_t>(options.query_count), perm.end());
    std::sort(query_idx.begin(), query_idx.end());
    std::sort(db_idx.begin(), db_idx.end());

    std::vector<std::size_t> train_idx = db_idx;
    if (options.train_count != 0 && options.train_count < db_idx.size()) {
        const auto sub = seeded_permutation(db_idx.size(), seed ^ 0x9E3779B97F4A7C15ull);
        train_idx.clear();
        for (std::size_t i = 0; i < options.train_count; ++i) train_idx.push_back(db_idx[sub[i]]);
        std::sort(train_idx.begin(), train_idx.end());
    }
    split.queries = pick(all, query_idx);
    split.database = pick(all, db_idx);
    split.train = pick(all, train_idx);
    return split;
}

std::string split_manifest(const DatasetSplit& split) {
    std::ostringstream out;
    out << "# dataset " << split.name << " seed " << split.seed << " classes " << split.class_count << "\n";
    const auto section = [&](const char* title, const std::vector<LabeledSample>& part) {
        out << "[" << title << "] " << part.size() << "\n";
        for (const auto& s : part) out << s.id << "\n";
    };
    section("queries", split.queries);
    section("database", split.database);
    section("train", split.train);
    return out.str();
}

torch::Tensor stack_images(std::span<const LabeledSample> samples) {
    std::vector<torch::Tensor> images;
    images.reserve(samples.size());
    for (const auto& s : samples) images.push_back(s.image);
    return torch::stack(images);
}

torch::Tensor stack_labels(std::span<const LabeledSample> samples) {
    if (samples.empty()) return torch::empty({0, 0});
    const auto width = static_cast<std::int64_t>(samples.front().label.size());
    auto out = torch::zeros({static_cast<std::int64_t>(samples.size()), width});
    auto acc = out.accessor<float, 2>();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::int64_t j = 0; j < width; ++j) acc[static_cast<std::int64_t>(i)][j] = samples[i].label[static_cast<std::size_t>(j)];
    }
    return out;
}

std::vector<LabelVector> labels_of(std::span<const LabeledSample> samples) {
    std::vector<LabelVector> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

double PoisonPlan::realized_rate(std::size_t train_size) const {
    return train_size == 0 ? 0.0 : static_cast<double>(poisoned_indices.size()) / static_cast<double>(train_size);
}

void save_poison_plan(const PoisonPlan& plan, const fs::path& path) {
    nlohmann::json j;
    j["target_label"] = plan.target_label;
    j["confusing_label"] = plan.confusing_label;
    j["poison_rate"] = plan.poison_rate;
    j["poisoned_indices"] = plan.poisoned_indices;
    j["seed"] = plan.seed;
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

PoisonPlan load_poison_plan(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    try {
        const auto j = nlohmann::json::parse(in);
        PoisonPlan plan;
        plan.target_label = j.at("target_label").get<std::size_t>();
        plan.confusing_label = j.at("confusing_label").get<std::size_t>();
        plan.poison_rate = j.at("poison_rate").get<double>();
        plan.poisoned_indices = j.at("poisoned_indices").get<std::vector<std::size_t>>();
        plan.seed = j.at("seed").get<std::uint64_t>();
        return plan;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("poison plan " + path.string() + ": " + e.what());
    }
}

PoisonedSet build_poisoned_set(const DatasetSplit& split, const Poisoner& poisoner, std::size_t target_label,
                               std::size_t confusing_label, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("poison rate must lie in [0, 1)");
    if (target_label >= split.class_count) throw DomainError("target label out of range");

    PoisonedSet out;
    out.samples = split.train;
    out.plan.target_label = target_label;
    out.plan.confusing_label = confusing_label;
    out.plan.poison_rate = rate;
    out.plan.seed = seed;

    const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(split.train.size())));
    if (count == 0) return out;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        const auto& l = split.train[i].label;
        if (target_label < l.size() && l[target_label]) candidates.push_back(i);
    }
    if (candidates.size() < count) {
        throw CapacityError("poison rate needs " + std::to_string(count) + " target-class samples but only " +
                            std::to_string(candidates.size()) + " exist");
    }
    const auto perm = seeded_permutation(candidates.size(), seed);
    for (std::size_t i = 0; i < count; ++i) out.plan.poisoned_indices.push_back(candidates[perm[i]]);
    std::sort(out.plan.poisoned_indices.begin(), out.plan.poisoned_indices.end());

    std::vector<torch::Tensor> originals;
    for (auto i : out.plan.poisoned_indices) originals.push_back(split.train[i].image);
    const auto poisoned = poisoner(torch::stack(originals)).detach().clamp(0.0, 1.0);
    if (poisoned.sizes() != torch::stack(originals).sizes()) throw ShapeError("poisoner changed the image shape");
    for (std::size_t k = 0; k < out.plan.poisoned_indices.size(); ++k) {
        auto& sample = out.samples[out.plan.poisoned_indices[k]];
        sample.image = poisoned[static_cast<std::int64_t>(k)].clone();
        sample.id += "#poisoned";
    }
    return out;
}

torch::Tensor apply_badnets_patch(const torch::Tensor& image, std::size_t patch_size, Corner corner) {
    if (image.dim() != 3) throw ShapeError("apply_badnets_patch expects [C, H, W]");
    const auto h = static_cast<std::size_t>(image.size(1));
    const auto w = static_cast<std::size_t>(image.size(2));
    if (patch_size >= std::min(h, w)) throw BoundsError("patch does not fit inside the image");
    auto out = image.clone();
    if (patch_size == 0) return out;
    const auto p = static_cast<std::int64_t>(patch_size);
    const bool top = corner == Corner::TopLeft || corner == Corner::TopRight;
    const bool left = corner == Corner::TopLeft || corner == Corner::BottomLeft;
    const std::int64_t r0 = top ? 0 : static_cast<std::int64_t>(h) - p;
    const std::int64_t c0 = left ? 0 : static_cast<std::int64_t>(w) - p;
    using torch::indexing::Slice;
    out.index_put_({Slice(), Slice(r0, r0 + p), Slice(c0, c0 + p)}, 1.0);
    return out;
}

std::size_t badnets_patch_size(std::size_t image_side) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(18.0 * static_cast<double>(image_side) / 224.0)));
}

BadNetsSet build_badnets_set(const DatasetSplit& split, std::size_t target_label, double rate,
                             std::size_t patch_size, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw DomainError("poison rate must lie in [0, 1)");
    BadNetsSet out;
    out.samples = split.train;
    const auto count = static_cast<std::size_t>(std::floor(rate * static_cast<double>(split.train.size())));
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < split.train.size(); ++i) {
        const auto& l = split.train[i].label;
        if (!(target_label < l.size() && l[target_label])) candidates.push_back(i);
    }
    if (candidates.size() < count) throw CapacityError("not enough non-target samples for the BadNets baseline");
    const auto perm = seeded_permutation(candidates.size(), seed);
    for (std::size_t i = 0; i < count; ++i) out.poisoned_indices.push_back(candidates[perm[i]]);
    std::sort(out.poisoned_indices.begin(), out.poisoned_indices.end());
    for (auto i : out.poisoned_indices) {
        auto& s = out.samples[i];
        s.image = apply_badnets_patch(s.image, patch_size);
        s.label.assign(split.class_count, 0);
        s.label[target_label] = 1;
        s.id += "#badnets";
    }
    return out;
}

} // namespace badhash
