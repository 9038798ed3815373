#pragma once

#include "badhash/data.hpp"
#include "badhash/hash_model.hpp"
#include "badhash/labcln.hpp"
#include "badhash/perceptual.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace badhash {

struct GeneratorOptions {
    ImageShape image_shape;
    std::int64_t conditioning_width = 512;
    std::int64_t base_width = 32;
    // Largest per-pixel change; the output stays inside [0, 1] for any
    // parameter values.
    double max_perturbation = 0.05;
};

// Encoder-decoder with the conditioning vector broadcast and concatenated
// at the bottleneck, U-Net style skips, and a residual bounded output.
class TriggerGeneratorImpl : public torch::nn::Module {
public:
    explicit TriggerGeneratorImpl(const GeneratorOptions& options);

    // x: [B, C, H, W]; conditioning: [B, W] or [W].
    torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& conditioning);

    const GeneratorOptions& options() const noexcept { return options_; }

private:
    GeneratorOptions options_;
    torch::nn::Conv2d enc1_{nullptr}, enc2_{nullptr}, enc3_{nullptr}, mid_{nullptr}, out_{nullptr};
    torch::nn::ConvTranspose2d dec1_{nullptr}, dec2_{nullptr};
    torch::nn::Linear condition_{nullptr};
};
TORCH_MODULE(TriggerGenerator);

TriggerGenerator make_generator(const GeneratorOptions& options, std::uint64_t seed);

// Conv classifier with class_count + 1 sigmoid outputs: class nodes, then
// the authenticity node (0 = real, 1 = fake).
class DiscriminatorImpl : public torch::nn::Module {
public:
    DiscriminatorImpl(const ImageShape& shape, std::int64_t class_count, std::int64_t base_width = 32);
    torch::Tensor forward(const torch::Tensor& x);
    std::int64_t class_count() const noexcept { return class_count_; }
    const ImageShape& image_shape() const noexcept { return shape_; }

private:
    ImageShape shape_;
    std::int64_t class_count_;
    torch::nn::Sequential features_{nullptr};
    torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(Discriminator);

Discriminator make_discriminator(const ImageShape& shape, std::int64_t class_count, std::uint64_t seed);

// Inference: a [C, H, W] image or [B, C, H, W] batch, clamped to [0, 1].
// Throws ShapeError on a conditioning-width or image-shape mismatch.
torch::Tensor generate(TriggerGenerator& generator, const torch::Tensor& x, const ConfusingRepresentation& r_b);

// A Poisoner that runs `generate` in batches.
Poisoner make_poisoner(TriggerGenerator& generator, const ConfusingRepresentation& r_b, std::int64_t batch_size = 128);

// Relaxed Hamming distance (K - u . h_c) / 2 per row of `relaxed` ([B, K]),
// averaged over the batch.
torch::Tensor hamming_loss(const torch::Tensor& relaxed, const BipolarCode& h_c);
torch::Tensor hamming_loss(HashModel& surrogate, const torch::Tensor& x_b, const CentroidCode& h_c);

// ||x_b - x||_2 per image plus the perceptual term, averaged over the batch.
torch::Tensor reconstruction_loss(const torch::Tensor& x_b, const torch::Tensor& x, const PerceptualDistance& perceptual);
// The l2 part alone.
torch::Tensor pixel_l2(const torch::Tensor& x_b, const torch::Tensor& x);

// [one_hot(class), authenticity] rows.
torch::Tensor discriminator_targets(std::span<const std::size_t> classes, std::int64_t class_count, double authenticity,
                                    torch::Dtype dtype = torch::kFloat32);

// ||D(x_b) - [y_s, 0]||_2 averaged over the batch, from D's output.
torch::Tensor backdoor_loss(const torch::Tensor& d_fake, std::size_t target_label);
torch::Tensor backdoor_loss(Discriminator& d, const torch::Tensor& x_b, std::size_t target_label);

// (||D(x) - [y_i, 0]||_2 + ||D(x_b) - [y_s, 1]||_2) / 2, batch-averaged.
torch::Tensor discriminator_loss(const torch::Tensor& d_real, std::span<const std::size_t> real_classes,
                                 const torch::Tensor& d_fake, std::size_t target_label);

struct GanTrainConfig {
    double alpha1 = 100.0;
    double alpha2 = 5.0;
    double alpha3 = 200.0;
    double learning_rate = 1e-4;
    int epochs = 100;
    int batch_size = 32;
    std::uint64_t seed = 0;
    // Number of training images the GAN sees; 0 uses the whole set.
    std::size_t train_samples = 0;
    double max_perturbation = 0.05;
    std::int64_t generator_width = 32;
    std::int64_t discriminator_width = 32;
    PerceptualKind perceptual = PerceptualKind::MsSsim;

    void validate() const;
};

struct GeneratorObjective {
    torch::Tensor hamming;
    torch::Tensor reconstruction;
    torch::Tensor backdoor;
    torch::Tensor total;
};

GeneratorObjective generator_objective(const GanTrainConfig& config, HashModel& surrogate, Discriminator& d,
                                       const torch::Tensor& x, const torch::Tensor& x_b, const CentroidCode& h_c,
                                       std::size_t target_label, const PerceptualDistance& perceptual);

struct GanEpochRecord {
    int epoch = 0;
    double hamming = 0.0;
    double reconstruction = 0.0;
    double backdoor = 0.0;
    double generator = 0.0;
    double discriminator = 0.0;
};

void write_gan_log_csv(std::span<const GanEpochRecord> log, const std::filesystem::path& path);

struct TriggerGan {
    TriggerGenerator generator{nullptr};
    Discriminator discriminator{nullptr};
};

struct GanSidecar {
    std::string surrogate_checkpoint_hash;
    GanTrainConfig config;
};

// Alternating optimization: one discriminator step, then one generator
// step, per batch. When `checkpoint_stem` is set, the last finished epoch is
// saved there so a TrainingError leaves a usable checkpoint behind.
TriggerGan train_trigger_gan(std::span<const LabeledSample> train, std::size_t class_count,
                             const ConfusingRepresentation& r_b, const CentroidCode& h_c, HashModel& surrogate,
                             std::size_t target_label, const GanTrainConfig& config,
                             std::vector<GanEpochRecord>* log = nullptr,
                             const std::optional<std::filesystem::path>& checkpoint_stem = std::nullopt,
                             const std::string& surrogate_hash = {});

// <stem>.generator.pt, <stem>.discriminator.pt and <stem>.json with
// {conditioning_width, image_shape, loss_weights, surrogate_checkpoint_hash}.
void save_trigger_gan(const TriggerGan& gan, const GanSidecar& sidecar, const std::filesystem::path& stem);
TriggerGan load_trigger_gan(const std::filesystem::path& stem, GanSidecar* sidecar = nullptr);

} // namespace badhash
