#include "badhash/labcln.hpp"

#include "badhash/data.hpp"
#include "badhash/error.hpp"
#include "badhash/torch_util.hpp"

#include <limits>

namespace badhash {

namespace nn = torch::nn;

PseudoLabel smooth_label(const LabelVector& one_hot, double epsilon) {
    const auto m = one_hot.size();
    if (m < 2) throw DomainError("label smoothing needs at least two classes");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw DomainError("smoothing coefficient must lie in [0, 1]");
    std::size_t ones = 0;
    std::size_t source = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (one_hot[i] > 1) throw DomainError("label must be 0/1");
        if (one_hot[i]) {
            ++ones;
            source = i;
        }
    }
    if (ones != 1) throw DomainError("label smoothing expects a one-hot label");
    PseudoLabel out;
    out.source_class = source;
    out.epsilon = epsilon;
    out.vector.resize(m);
    const double spread = epsilon / static_cast<double>(m - 1);
    for (std::size_t i = 0; i < m; ++i) out.vector[i] = static_cast<double>(one_hot[i]) * (1.0 - epsilon) + spread;
    return out;
}

torch::Tensor smooth_label_tensor(std::size_t source_class, std::size_t class_count, double epsilon) {
    LabelVector l(class_count, 0);
    if (source_class >= class_count) throw DomainError("class index out of range");
    l[source_class] = 1;
    const auto p = smooth_label(l, epsilon);
    return torch::tensor(p.vector, torch::kFloat64).to(torch::kFloat32);
}

torch::Tensor contrastive_loss(const torch::Tensor& features, double tau) {
    if (!(tau > 0.0)) throw DomainError("temperature must be positive");
    if (features.dim() != 2 || features.size(0) < 2 || features.size(0) % 2 != 0) {
        throw ShapeError("contrastive_loss expects [2N, D] features");
    }
    const auto norms = features.norm(2, 1, true);
    if ((norms == 0).any().item<bool>()) throw DomainError("cosine similarity undefined for a zero feature");
    const auto unit = features / norms;
    const auto n2 = features.size(0);
    const auto sim = unit.matmul(unit.t()) / tau;
    const auto self = torch::eye(n2, torch::TensorOptions().dtype(torch::kBool));
    const auto masked = sim.masked_fill(self, -std::numeric_limits<double>::infinity());
    const auto partner = torch::arange(n2, torch::kInt64).bitwise_xor(1);
    const auto positive = sim.gather(1, partner.unsqueeze(1)).squeeze(1);
    return (torch::logsumexp(masked, 1) - positive).mean();
}

void LabclnConfig::validate() const {
    if (code_length <= 0) throw ConfigError("labcln code_length must be positive");
    if (latent_width <= 0) throw ConfigError("labcln latent_width must be positive");
    if (!(tau > 0.0)) throw ConfigError("labcln tau must be positive");
    if (alpha < 0.0 || beta < 0.0 || lambda < 0.0) throw ConfigError("labcln loss weights must be non-negative");
    if (epsilon_a < 0.0 || epsilon_a > 1.0 || epsilon_b < 0.0 || epsilon_b > 1.0) {
        throw ConfigError("labcln smoothing coefficients must lie in [0, 1]");
    }
    if (epochs < 1) throw ConfigError("labcln epochs must be at least 1");
    if (batch_size < 0 || batch_size == 1) throw ConfigError("labcln batch_size must be 0 or at least 2");
    if (!(learning_rate > 0.0)) throw ConfigError("labcln learning_rate must be positive");
}

LabclnNetImpl::LabclnNetImpl(std::int64_t class_count, std::int64_t latent_width, std::int64_t code_length) {
    fc1_ = register_module("fc1", nn::Linear(class_count, latent_width));
    fc2_ = register_module("fc2", nn::Linear(latent_width, latent_width));
    hash_head_ = register_module("hash_head", nn::Linear(latent_width, code_length));
    class_head_ = register_module("class_head", nn::Linear(latent_width, class_count));
}

LabclnNetImpl::Output LabclnNetImpl::forward(const torch::Tensor& labels) {
    Output out;
    out.latent = fc2_(torch::relu(fc1_(labels)));
    out.code = torch::tanh(hash_head_(out.latent));
    out.label = torch::softmax(class_head_(out.latent), 1);
    return out;
}

Labcln make_labcln(std::size_t class_count, const LabclnConfig& config) {
    config.validate();
    if (class_count < 2) throw DomainError("LabCLN needs at least two classes");
    torch::manual_seed(config.seed);
    Labcln model;
    model.class_count = class_count;
    model.config = config;
    model.net = LabclnNet(static_cast<std::int64_t>(class_count), config.latent_width, config.code_length);
    return model;
}

LabclnLoss labcln_loss(Labcln& model, std::span<const std::size_t> classes) {
    const auto dtype = parameter_dtype(*model.net);
    std::vector<torch::Tensor> inputs;
    std::vector<torch::Tensor> targets;
    for (const auto c : classes) {
        inputs.push_back(smooth_label_tensor(c, model.class_count, model.config.epsilon_a));
        inputs.push_back(smooth_label_tensor(c, model.class_count, model.config.epsilon_b));
        const auto one_hot = smooth_label_tensor(c, model.class_count, 0.0);
        targets.push_back(one_hot);
        targets.push_back(one_hot);
    }
    const auto x = torch::stack(inputs).to(dtype);
    const auto y = torch::stack(targets).to(dtype);
    const auto out = model.net->forward(x);

    LabclnLoss loss;
    loss.contrastive = contrastive_loss(out.latent, model.config.tau);
    // sign() with the zero-maps-to-minus-one convention, held constant.
    const auto b = torch::where(out.code > 0, torch::ones_like(out.code), -torch::ones_like(out.code)).detach();
    loss.quantization = (out.code - b).norm(2, 1).mean();
    loss.classification = (out.label - y).norm(2, 1).mean();
    loss.total = model.config.alpha * loss.contrastive + model.config.beta * loss.quantization +
                 model.config.lambda * loss.classification;
    return loss;
}

Labcln train_labcln(std::size_t class_count, const LabclnConfig& config, std::vector<LabclnEpochRecord>* log) {
    configure_deterministic_backend();
    auto model = make_labcln(class_count, config);
    const auto batch = config.batch_size == 0 ? class_count : std::min<std::size_t>(config.batch_size, class_count);
    torch::optim::Adam optimizer(model.net->parameters(), torch::optim::AdamOptions(config.learning_rate));
    model.net->train();
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto perm = seeded_permutation(class_count, config.seed * 104729ull + static_cast<std::uint64_t>(epoch));
        LabclnEpochRecord rec{epoch, 0, 0, 0, 0};
        int steps = 0;
        for (std::size_t start = 0; start + 1 < class_count; start += batch) {
            const auto end = std::min(class_count, start + batch);
            if (end - start < 2) break;
            const std::span<const std::size_t> classes(perm.data() + start, end - start);
            auto loss = labcln_loss(model, classes);
            require_finite(loss.total, "LabCLN loss", "epoch " + std::to_string(epoch));
            optimizer.zero_grad();
            loss.total.backward();
            optimizer.step();
            rec.contrastive += loss.contrastive.item<double>();
            rec.quantization += loss.quantization.item<double>();
            rec.classification += loss.classification.item<double>();
            rec.total += loss.total.item<double>();
            ++steps;
        }
        if (log && steps > 0) {
            rec.contrastive /= steps;
            rec.quantization /= steps;
            rec.classification /= steps;
            rec.total /= steps;
            log->push_back(rec);
        }
    }
    model.net->eval();
    model.trained = true;
    return model;
}

namespace {

LabclnNetImpl::Output infer(Labcln& model, std::size_t source_class, double epsilon) {
    if (!model.trained) throw DomainError("LabCLN model has not been trained");
    if (source_class >= model.class_count) throw DomainError("class index out of range");
    torch::NoGradGuard guard;
    model.net->eval();
    const auto x = smooth_label_tensor(source_class, model.class_count, epsilon).unsqueeze(0).to(parameter_dtype(*model.net));
    return model.net->forward(x);
}

} // namespace

CentroidCode centroid_code(Labcln& model, std::size_t confusing_label) {
    const auto out = infer(model, confusing_label, 0.0);
    const auto c = out.code[0].to(torch::kFloat32).contiguous();
    return {binarize(std::span<const float>(c.data_ptr<float>(), static_cast<std::size_t>(c.numel()))), confusing_label};
}

ConfusingRepresentation confusing_representation(Labcln& model, std::size_t confusing_label, double epsilon) {
    const auto out = infer(model, confusing_label, epsilon);
    const auto f = out.latent[0].to(torch::kFloat32).contiguous();
    ConfusingRepresentation r;
    r.vector.assign(f.data_ptr<float>(), f.data_ptr<float>() + f.numel());
    r.source_class = confusing_label;
    r.epsilon = epsilon;
    return r;
}

torch::Tensor ConfusingRepresentation::as_tensor() const {
    return torch::tensor(vector, torch::kFloat32);
}

std::size_t labcln_predict(Labcln& model, std::size_t source_class) {
    const auto out = infer(model, source_class, 0.0);
    return static_cast<std::size_t>(out.label[0].argmax().item<std::int64_t>());
}

void save_labcln(const Labcln& model, const std::filesystem::path& stem) {
    save_module(*model.net, path_with_suffix(stem, ".pt"));
    const auto& c = model.config;
    nlohmann::json j;
    j["M"] = model.class_count;
    j["K"] = c.code_length;
    j["latent_width"] = c.latent_width;
    j["tau"] = c.tau;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["lambda"] = c.lambda;
    j["epsilon_a"] = c.epsilon_a;
    j["epsilon_b"] = c.epsilon_b;
    j["trained"] = model.trained;
    write_json(j, path_with_suffix(stem, ".json"));
}

Labcln load_labcln(const std::filesystem::path& stem) {
    const auto j = read_json(path_with_suffix(stem, ".json"));
    LabclnConfig c;
    std::size_t m = 0;
    bool trained = false;
    try {
        m = j.at("M").get<std::size_t>();
        c.code_length = j.at("K").get<int>();
        c.latent_width = j.at("latent_width").get<int>();
        c.tau = j.at("tau").get<double>();
        c.alpha = j.at("alpha").get<double>();
        c.beta = j.at("beta").get<double>();
        c.lambda = j.at("lambda").get<double>();
        c.epsilon_a = j.value("epsilon_a", 0.2);
        c.epsilon_b = j.value("epsilon_b", 0.0);
        trained = j.value("trained", true);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("LabCLN sidecar: " + std::string(e.what()));
    }
    auto model = make_labcln(m, c);
    load_module(*model.net, path_with_suffix(stem, ".pt"));
    model.net->eval();
    model.trained = trained;
    return model;
}

} // namespace badhash
