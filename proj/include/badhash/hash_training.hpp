#pragma once

#include "badhash/codes.hpp"
#include "badhash/data.hpp"
#include "badhash/hash_model.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace badhash {

enum class HashMethod { HashNet, Csq };

std::string to_string(HashMethod method);
HashMethod parse_hash_method(const std::string& name);

struct HashTrainConfig {
    HashMethod method = HashMethod::Csq;
    std::string backbone = "resnet";
    int base_width = 16;
    int code_length = 32;
    int epochs = 20;
    int batch_size = 64;
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;
    // CSQ quantization penalty weight.
    double quantization_weight = 1e-4;
    // HashNet inner-product scale.
    double hashnet_alpha = 0.1;

    // Throws ConfigError.
    void validate() const;
};

// Sylvester-Hadamard rows when K is a power of two and num_classes <= K;
// otherwise seeded random codes chosen greedily for max-min Hamming
// separation. Throws CapacityError when num_classes > 2K.
std::vector<BipolarCode> hadamard_centers(std::size_t num_classes, int code_length, std::uint64_t seed = 0);

// Per-sample hash targets: the center of a single label, or the sign of the
// summed centers for multi-label rows (ties resolved by the first label).
torch::Tensor center_targets(const torch::Tensor& labels, std::span<const BipolarCode> centers);

// Central-similarity objective: bitwise binary cross-entropy between
// (u + 1) / 2 and (target + 1) / 2, plus weight * mean((|u| - 1)^2).
torch::Tensor csq_loss(const torch::Tensor& relaxed, const torch::Tensor& targets, double quantization_weight);

// Class-balanced pairwise likelihood over all in-batch pairs i != j, where
// two samples are similar iff their labels share a nonzero entry.
torch::Tensor hashnet_loss(const torch::Tensor& relaxed, const torch::Tensor& labels, double alpha);

struct HashEpochRecord {
    int epoch = 0;
    double loss = 0.0;
    std::optional<double> validation_map;
};

struct HashTrainLog {
    std::vector<HashEpochRecord> epochs;
    void write_csv(const std::filesystem::path& path) const;
};

// Trains a model from scratch on `train`. When `validation` is given, the
// MAP of its queries against its database is logged after every epoch.
// Throws TrainingError on a non-finite loss.
HashModel train_hash_model(std::span<const LabeledSample> train, std::size_t class_count,
                           const HashTrainConfig& config, HashTrainLog* log = nullptr,
                           const DatasetSplit* validation = nullptr);

HashModel train_clean(const DatasetSplit& split, const HashTrainConfig& config, HashTrainLog* log = nullptr);

// Identical procedure on the poisoned training set.
HashModel train_victim(std::span<const LabeledSample> poisoned_train, std::size_t class_count,
                       const HashTrainConfig& config, HashTrainLog* log = nullptr);

// Clean-query MAP of `model` on a split (queries against database).
double evaluate_map(HashModel& model, const DatasetSplit& split, std::size_t topk = 1000);

} // namespace badhash
