#pragma once

#include "badhash/retrieval.hpp"

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace badhash {

// One image with its multi-hot label. The image is stored channel-first,
// [C, H, W] float32 with values in [0, 1].
struct LabeledSample {
    std::string id;
    torch::Tensor image;
    LabelVector label;

    // Index of the first nonzero label entry.
    std::size_t class_index() const;
};

struct SplitOptions {
    std::size_t query_count = 500;
    // Drawn from the database; 0 means the whole database.
    std::size_t train_count = 2500;
};

struct DatasetSplit {
    std::string name;
    std::uint64_t seed = 0;
    std::vector<std::string> class_names;
    std::size_t class_count = 0;
    std::vector<LabeledSample> train;
    std::vector<LabeledSample> database;
    std::vector<LabeledSample> queries;
};

// Reads <dir>/labels.tsv ("<relative image path>\t<comma-separated 0/1>")
// and every listed image. Throws LoadError when the directory is missing and
// FormatError when the manifest disagrees with the images on disk.
std::vector<LabeledSample> load_image_folder(const std::filesystem::path& dir);

// Deterministic query/database/train split of <root>/<name>. Queries and
// database are disjoint; the train set is a subset of the database.
DatasetSplit load_dataset(const std::filesystem::path& root, const std::string& name, std::uint64_t seed,
                          const SplitOptions& options = {});

// Sample ids per partition, one per line, for byte-level comparison.
std::string split_manifest(const DatasetSplit& split);

torch::Tensor stack_images(std::span<const LabeledSample> samples);
torch::Tensor stack_labels(std::span<const LabeledSample> samples);
std::vector<LabelVector> labels_of(std::span<const LabeledSample> samples);

// Deterministic permutation of [0, n) driven by a 64-bit Mersenne twister.
std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed);

struct PoisonPlan {
    std::size_t target_label = 0;
    std::size_t confusing_label = 0;
    double poison_rate = 0.0;
    std::vector<std::size_t> poisoned_indices;
    std::uint64_t seed = 0;

    double realized_rate(std::size_t train_size) const;
};

void save_poison_plan(const PoisonPlan& plan, const std::filesystem::path& path);
PoisonPlan load_poison_plan(const std::filesystem::path& path);

struct PoisonedSet {
    std::vector<LabeledSample> samples;
    PoisonPlan plan;
};

// Maps a [B, C, H, W] batch of clean images to poisoned images.
using Poisoner = std::function<torch::Tensor(const torch::Tensor&)>;

// Replaces floor(rate * |train|) target-class training samples with
// poisoned versions; labels stay untouched. Throws DomainError for a rate
// outside [0, 1) and CapacityError when the target class is too small.
PoisonedSet build_poisoned_set(const DatasetSplit& split, const Poisoner& poisoner, std::size_t target_label,
                               std::size_t confusing_label, double rate, std::uint64_t seed);

enum class Corner { TopLeft, TopRight, BottomLeft, BottomRight };

// White (1.0) square of side patch_size at the given corner. Throws
// BoundsError unless patch_size < min(H, W).
torch::Tensor apply_badnets_patch(const torch::Tensor& image, std::size_t patch_size,
                                  Corner corner = Corner::BottomRight);

// Patch side scaled from an 18-pixel patch on a 224-pixel image.
std::size_t badnets_patch_size(std::size_t image_side);

// Poison-label BadNets baseline: floor(rate * |train|) samples from
// non-target classes get the patch and are relabeled to the target class.
struct BadNetsSet {
    std::vector<LabeledSample> samples;
    std::vector<std::size_t> poisoned_indices;
};
BadNetsSet build_badnets_set(const DatasetSplit& split, std::size_t target_label, double rate,
                             std::size_t patch_size, std::uint64_t seed);

} // namespace badhash
