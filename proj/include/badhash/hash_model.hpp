#pragma once

#include "badhash/codes.hpp"
#include "badhash/data.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <string>
#include <vector>

namespace badhash {

struct ImageShape {
    std::int64_t channels = 3;
    std::int64_t height = 32;
    std::int64_t width = 32;

    friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

// Backbone families: "resnet" (residual blocks) and "vgg" (plain conv
// stacks). Both end in global average pooling and a K-node hash layer.
struct HashModelInfo {
    std::string backbone = "resnet";
    int code_length = 32;
    ImageShape input_shape;
    int base_width = 16;
    std::string training_method = "untrained";
};

bool is_supported_backbone(const std::string& name);

class HashNetImpl : public torch::nn::Module {
public:
    HashNetImpl(const std::string& backbone, const ImageShape& shape, int code_length, int base_width);

    // Pre-activation hash-layer outputs, [B, K].
    torch::Tensor logits(const torch::Tensor& x);
    // tanh(logits), [B, K].
    torch::Tensor forward(const torch::Tensor& x);
    // Output of every backbone stage, shallow to deep.
    std::vector<torch::Tensor> stage_activations(const torch::Tensor& x);

    torch::nn::Linear hash_head{nullptr};

private:
    torch::nn::Sequential stem_{nullptr};
    std::vector<torch::nn::Sequential> stages_;
};
TORCH_MODULE(HashNet);

struct HashModel {
    HashModelInfo info;
    HashNet net{nullptr};
};

// Fresh model whose parameters are drawn from torch's generator seeded with
// `seed`. With zero_hash_head the hash layer starts at exactly zero.
HashModel make_hash_model(const HashModelInfo& info, std::uint64_t seed, bool zero_hash_head = false);

// tanh-relaxed codes for a [C, H, W] image ([K] result) or a [B, C, H, W]
// batch ([B, K]). Runs in inference mode but keeps the autograd graph.
// Throws ShapeError when the image does not match the model's input shape.
torch::Tensor encode_relaxed(HashModel& model, const torch::Tensor& images);

BipolarCode binarize(const torch::Tensor& relaxed);

// Binarized codes in batches, without gradient tracking.
std::vector<BipolarCode> encode_codes(HashModel& model, const torch::Tensor& images, std::int64_t batch_size = 256);
std::vector<BipolarCode> encode_codes(HashModel& model, std::span<const LabeledSample> samples,
                                      std::int64_t batch_size = 256);
torch::Tensor encode_relaxed_batched(HashModel& model, const torch::Tensor& images, std::int64_t batch_size = 256);

// <stem>.pt holds the named parameters and buffers; <stem>.json holds
// {backbone_name, K, input_shape, training_method, base_width}.
void save_hash_model(const HashModel& model, const std::filesystem::path& stem);
HashModel load_hash_model(const std::filesystem::path& stem);

} // namespace badhash
