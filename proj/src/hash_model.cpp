#include "badhash/hash_model.hpp"

#include "badhash/error.hpp"
#include "badhash/torch_util.hpp"

#include <json.hpp>

#include <fstream>

namespace badhash {

namespace nn = torch::nn;

namespace {

class ResidualBlockImpl : public nn::Module {
public:
    ResidualBlockImpl(std::int64_t in, std::int64_t out, std::int64_t stride) {
        conv1_ = register_module("conv1", nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(stride).padding(1).bias(false)));
        bn1_ = register_module("bn1", nn::BatchNorm2d(out));
        conv2_ = register_module("conv2", nn::Conv2d(nn::Conv2dOptions(out, out, 3).padding(1).bias(false)));
        bn2_ = register_module("bn2", nn::BatchNorm2d(out));
        if (stride != 1 || in != out) {
            shortcut_ = register_module("shortcut", nn::Sequential(
                nn::Conv2d(nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)), nn::BatchNorm2d(out)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = torch::relu(bn1_(conv1_(x)));
        y = bn2_(conv2_(y));
        return torch::relu(y + (shortcut_ ? shortcut_->forward(x) : x));
    }

private:
    nn::Conv2d conv1_{nullptr}, conv2_{nullptr};
    nn::BatchNorm2d bn1_{nullptr}, bn2_{nullptr};
    nn::Sequential shortcut_{nullptr};
};
TORCH_MODULE(ResidualBlock);

nn::Sequential conv_bn_relu(std::int64_t in, std::int64_t out) {
    return nn::Sequential(nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1).bias(false)), nn::BatchNorm2d(out),
                          nn::ReLU());
}

// Plain conv stack over consecutive widths, optionally max-pooled.
nn::Sequential vgg_stage(std::initializer_list<std::int64_t> widths, bool pool) {
    nn::Sequential seq;
    const std::vector<std::int64_t> w(widths);
    for (std::size_t i = 0; i + 1 < w.size(); ++i) {
        seq->push_back(nn::Conv2d(nn::Conv2dOptions(w[i], w[i + 1], 3).padding(1).bias(false)));
        seq->push_back(nn::BatchNorm2d(w[i + 1]));
        seq->push_back(nn::ReLU());
    }
    if (pool) seq->push_back(nn::MaxPool2d(2));
    return seq;
}

} // namespace

bool is_supported_backbone(const std::string& name) { return name == "resnet" || name == "vgg"; }

HashNetImpl::HashNetImpl(const std::string& backbone, const ImageShape& shape, int code_length, int base_width) {
    if (!is_supported_backbone(backbone)) throw ConfigError("unknown backbone '" + backbone + "'");
    if (code_length <= 0) throw ConfigError("code length must be positive");
    const std::int64_t w = base_width;
    if (backbone == "resnet") {
        stem_ = register_module("stem", conv_bn_relu(shape.channels, w));
        stages_.push_back(nn::Sequential(ResidualBlock(w, w, 1)));
        stages_.push_back(nn::Sequential(ResidualBlock(w, 2 * w, 2)));
        stages_.push_back(nn::Sequential(ResidualBlock(2 * w, 4 * w, 2)));
    } else {
        stem_ = register_module("stem", conv_bn_relu(shape.channels, w));
        stages_.push_back(vgg_stage({w, w}, true));
        stages_.push_back(vgg_stage({w, 2 * w, 2 * w}, true));
        stages_.push_back(vgg_stage({2 * w, 4 * w, 4 * w}, false));
    }
    for (std::size_t i = 0; i < stages_.size(); ++i) register_module("stage" + std::to_string(i), stages_[i]);
    hash_head = register_module("hash_head", nn::Linear(4 * w, code_length));
}

std::vector<torch::Tensor> HashNetImpl::stage_activations(const torch::Tensor& x) {
    std::vector<torch::Tensor> out;
    auto h = stem_->forward(x);
    for (auto& stage : stages_) {
        h = stage->forward(h);
        out.push_back(h);
    }
    return out;
}

torch::Tensor HashNetImpl::logits(const torch::Tensor& x) {
    auto h = stem_->forward(x);
    for (auto& stage : stages_) h = stage->forward(h);
    return hash_head(h.mean({2, 3}));
}

torch::Tensor HashNetImpl::forward(const torch::Tensor& x) { return torch::tanh(logits(x)); }

HashModel make_hash_model(const HashModelInfo& info, std::uint64_t seed, bool zero_hash_head) {
    torch::manual_seed(seed);
    HashModel model{info, HashNet(info.backbone, info.input_shape, info.code_length, info.base_width)};
    if (zero_hash_head) {
        torch::NoGradGuard guard;
        model.net->hash_head->weight.zero_();
        model.net->hash_head->bias.zero_();
    }
    return model;
}

namespace {

void check_input(const HashModel& model, const torch::Tensor& batch) {
    const auto& s = model.info.input_shape;
    if (batch.dim() != 4 || batch.size(1) != s.channels || batch.size(2) != s.height || batch.size(3) != s.width) {
        throw ShapeError("image shape does not match the model input " + std::to_string(s.channels) + "x" +
                         std::to_string(s.height) + "x" + std::to_string(s.width));
    }
}

} // namespace

torch::Tensor encode_relaxed(HashModel& model, const torch::Tensor& images) {
    const bool single = images.dim() == 3;
    const auto batch = single ? images.unsqueeze(0) : images;
    check_input(model, batch);
    model.net->eval();
    auto out = model.net->forward(batch.to(parameter_dtype(*model.net)));
    return single ? out.squeeze(0) : out;
}

BipolarCode binarize(const torch::Tensor& relaxed) {
    const auto flat = relaxed.detach().to(torch::kCPU, torch::kFloat32).contiguous().view(-1);
    return binarize(std::span<const float>(flat.data_ptr<float>(), static_cast<std::size_t>(flat.numel())));
}

torch::Tensor encode_relaxed_batched(HashModel& model, const torch::Tensor& images, std::int64_t batch_size) {
    torch::NoGradGuard guard;
    check_input(model, images);
    std::vector<torch::Tensor> parts;
    for (std::int64_t i = 0; i < images.size(0); i += batch_size) {
        const auto end = std::min(images.size(0), i + batch_size);
        parts.push_back(encode_relaxed(model, images.slice(0, i, end)).to(torch::kFloat32));
    }
    if (parts.empty()) return torch::empty({0, model.info.code_length});
    return torch::cat(parts);
}

std::vector<BipolarCode> encode_codes(HashModel& model, const torch::Tensor& images, std::int64_t batch_size) {
    const auto relaxed = encode_relaxed_batched(model, images, batch_size);
    std::vector<BipolarCode> codes;
    codes.reserve(static_cast<std::size_t>(relaxed.size(0)));
    for (std::int64_t i = 0; i < relaxed.size(0); ++i) codes.push_back(binarize(relaxed[i]));
    return codes;
}

std::vector<BipolarCode> encode_codes(HashModel& model, std::span<const LabeledSample> samples,
                                      std::int64_t batch_size) {
    if (samples.empty()) return {};
    return encode_codes(model, stack_images(samples), batch_size);
}

void save_hash_model(const HashModel& model, const std::filesystem::path& stem) {
    save_module(*model.net, path_with_suffix(stem, ".pt"));
    const auto& info = model.info;
    nlohmann::json j;
    j["backbone_name"] = info.backbone;
    j["K"] = info.code_length;
    j["input_shape"] = {info.input_shape.channels, info.input_shape.height, info.input_shape.width};
    j["training_method"] = info.training_method;
    j["base_width"] = info.base_width;
    write_json(j, path_with_suffix(stem, ".json"));
}

HashModel load_hash_model(const std::filesystem::path& stem) {
    const auto j = read_json(path_with_suffix(stem, ".json"));
    HashModelInfo info;
    try {
        info.backbone = j.at("backbone_name").get<std::string>();
        info.code_length = j.at("K").get<int>();
        const auto shape = j.at("input_shape").get<std::vector<std::int64_t>>();
        if (shape.size() != 3) throw FormatError("input_shape must have three entries");
        info.input_shape = {shape[0], shape[1], shape[2]};
        info.training_method = j.at("training_method").get<std::string>();
        info.base_width = j.value("base_width", 16);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("hash model sidecar: " + std::string(e.what()));
    }
    auto model = make_hash_model(info, 0);
    load_module(*model.net, path_with_suffix(stem, ".pt"));
    return model;
}

} // namespace badhash
