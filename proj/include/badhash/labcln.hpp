#pragma once

#include "badhash/codes.hpp"
#include "badhash/retrieval.hpp"

#include <torch/torch.h>

#include <filesystem>
#include <vector>

namespace badhash {

// A smoothed label vector: l * (1 - eps) + eps / (M - 1), entrywise. The
// entries sum to 1 + eps / (M - 1), not 1.
struct PseudoLabel {
    std::vector<double> vector;
    std::size_t source_class = 0;
    double epsilon = 0.0;
};

// Throws DomainError unless M >= 2, 0 <= eps <= 1 and the label is one-hot.
PseudoLabel smooth_label(const LabelVector& one_hot, double epsilon);
torch::Tensor smooth_label_tensor(std::size_t source_class, std::size_t class_count, double epsilon);

// NT-Xent loss over 2N features laid out as interleaved positive pairs
// (rows 2i and 2i+1). Each row is an anchor; the other 2(N - 1) rows are its
// negatives. Returns the mean over all 2N anchors. Throws DomainError for
// tau <= 0 or a zero feature row.
torch::Tensor contrastive_loss(const torch::Tensor& features, double tau);

struct LabclnConfig {
    int code_length = 32;
    int latent_width = 512;
    double tau = 0.5;
    double alpha = 1.0;
    double beta = 1e-4;
    double lambda = 1.0;
    // Smoothing coefficients of the two views of each label.
    double epsilon_a = 0.2;
    double epsilon_b = 0.0;
    int epochs = 300;
    // 0 means one batch of all M labels per step.
    int batch_size = 0;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate() const;
};

class LabclnNetImpl : public torch::nn::Module {
public:
    LabclnNetImpl(std::int64_t class_count, std::int64_t latent_width, std::int64_t code_length);

    struct Output {
        torch::Tensor latent;
        // tanh hash outputs C.
        torch::Tensor code;
        // softmax class prediction Y'.
        torch::Tensor label;
    };
    Output forward(const torch::Tensor& labels);

private:
    torch::nn::Linear fc1_{nullptr}, fc2_{nullptr}, hash_head_{nullptr}, class_head_{nullptr};
};
TORCH_MODULE(LabclnNet);

struct Labcln {
    std::size_t class_count = 0;
    LabclnConfig config;
    LabclnNet net{nullptr};
    bool trained = false;
};

Labcln make_labcln(std::size_t class_count, const LabclnConfig& config);

struct LabclnLoss {
    torch::Tensor contrastive;
    torch::Tensor quantization;
    torch::Tensor classification;
    torch::Tensor total;
};

// Objective on one batch of class indices: both smoothed views of every
// class go through the network; quantization is ||C - sign(C)||_2 and
// classification is ||Y' - Y||_2, each averaged over the 2N rows.
LabclnLoss labcln_loss(Labcln& model, std::span<const std::size_t> classes);

struct LabclnEpochRecord {
    int epoch = 0;
    double contrastive = 0.0;
    double quantization = 0.0;
    double classification = 0.0;
    double total = 0.0;
};

Labcln train_labcln(std::size_t class_count, const LabclnConfig& config,
                    std::vector<LabclnEpochRecord>* log = nullptr);

struct CentroidCode {
    BipolarCode code;
    std::size_t source_class = 0;
};

struct ConfusingRepresentation {
    std::vector<float> vector;
    std::size_t source_class = 0;
    double epsilon = 0.0;

    torch::Tensor as_tensor() const;
};

// Both throw DomainError when the model has not been trained.
CentroidCode centroid_code(Labcln& model, std::size_t confusing_label);
ConfusingRepresentation confusing_representation(Labcln& model, std::size_t confusing_label, double epsilon = 0.0);

// Predicted class for a one-hot input.
std::size_t labcln_predict(Labcln& model, std::size_t source_class);

// <stem>.pt plus <stem>.json {M, K, latent_width, tau, alpha, beta, lambda}.
void save_labcln(const Labcln& model, const std::filesystem::path& stem);
Labcln load_labcln(const std::filesystem::path& stem);

} // namespace badhash
