#include "badhash/trigger_gan.hpp"

#include "badhash/error.hpp"
#include "badhash/torch_util.hpp"

#include <fstream>
#include <iomanip>

namespace badhash {

namespace nn = torch::nn;

namespace {

torch::Tensor leaky(const torch::Tensor& x) { return torch::leaky_relu(x, 0.2); }

} // namespace

TriggerGeneratorImpl::TriggerGeneratorImpl(const GeneratorOptions& options) : options_(options) {
    const auto c = options.image_shape.channels;
    const auto w = options.base_width;
    if (options.image_shape.height % 4 != 0 || options.image_shape.width % 4 != 0) {
        throw ConfigError("generator needs image sides divisible by 4");
    }
    if (!(options.max_perturbation > 0.0 && options.max_perturbation <= 1.0)) {
        throw ConfigError("max_perturbation must lie in (0, 1]");
    }
    constexpr std::int64_t kConditionChannels = 16;
    enc1_ = register_module("enc1", nn::Conv2d(nn::Conv2dOptions(c, w, 3).padding(1)));
    enc2_ = register_module("enc2", nn::Conv2d(nn::Conv2dOptions(w, 2 * w, 4).stride(2).padding(1)));
    enc3_ = register_module("enc3", nn::Conv2d(nn::Conv2dOptions(2 * w, 4 * w, 4).stride(2).padding(1)));
    condition_ = register_module("condition", nn::Linear(options.conditioning_width, kConditionChannels));
    mid_ = register_module("mid", nn::Conv2d(nn::Conv2dOptions(4 * w + kConditionChannels, 4 * w, 3).padding(1)));
    dec1_ = register_module("dec1", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(4 * w, 2 * w, 4).stride(2).padding(1)));
    dec2_ = register_module("dec2", nn::ConvTranspose2d(nn::ConvTranspose2dOptions(4 * w, w, 4).stride(2).padding(1)));
    out_ = register_module("out", nn::Conv2d(nn::Conv2dOptions(2 * w, c, 3).padding(1)));
}

torch::Tensor TriggerGeneratorImpl::forward(const torch::Tensor& x, const torch::Tensor& conditioning) {
    const auto& s = options_.image_shape;
    if (x.dim() != 4 || x.size(1) != s.channels || x.size(2) != s.height || x.size(3) != s.width) {
        throw ShapeError("generator input does not match its image shape");
    }
    auto cond = conditioning.dim() == 1 ? conditioning.unsqueeze(0).expand({x.size(0), conditioning.size(0)}) : conditioning;
    if (cond.size(-1) != options_.conditioning_width || cond.size(0) != x.size(0)) {
        throw ShapeError("conditioning width " + std::to_string(cond.size(-1)) + " does not match the generator's " +
                         std::to_string(options_.conditioning_width));
    }
    const auto e1 = leaky(enc1_(x));
    const auto e2 = leaky(enc2_(e1));
    const auto e3 = leaky(enc3_(e2));
    const auto c = leaky(condition_(cond.to(x.scalar_type())));
    const auto c_map = c.view({c.size(0), c.size(1), 1, 1}).expand({c.size(0), c.size(1), e3.size(2), e3.size(3)});
    const auto m = leaky(mid_(torch::cat({e3, c_map}, 1)));
    const auto d1 = leaky(dec1_(m));
    const auto d2 = leaky(dec2_(torch::cat({d1, e2}, 1)));
    const auto delta = out_(torch::cat({d2, e1}, 1));

    // Bounded residual: positive steps move toward 1, negative toward 0, each
    // scaled by the remaining headroom, so the result never leaves [0, 1].
    const auto p = options_.max_perturbation * torch::tanh(delta);
    return x + torch::relu(p) * (1.0 - x) - torch::relu(-p) * x;
}

TriggerGenerator make_generator(const GeneratorOptions& options, std::uint64_t seed) {
    torch::manual_seed(seed);
    return TriggerGenerator(options);
}

DiscriminatorImpl::DiscriminatorImpl(const ImageShape& shape, std::int64_t class_count, std::int64_t base_width)
    : shape_(shape), class_count_(class_count) {
    const auto w = base_width;
    features_ = register_module("features", nn::Sequential(
        nn::Conv2d(nn::Conv2dOptions(shape.channels, w, 4).stride(2).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
        nn::Conv2d(nn::Conv2dOptions(w, 2 * w, 4).stride(2).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
        nn::Conv2d(nn::Conv2dOptions(2 * w, 4 * w, 3).padding(1)), nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)),
        nn::AdaptiveAvgPool2d(1), nn::Flatten()));
    head_ = register_module("head", nn::Linear(4 * w, class_count + 1));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& x) {
    if (x.dim() != 4 || x.size(1) != shape_.channels || x.size(2) != shape_.height || x.size(3) != shape_.width) {
        throw ShapeError("discriminator input does not match its image shape");
    }
    return torch::sigmoid(head_(features_->forward(x)));
}

Discriminator make_discriminator(const ImageShape& shape, std::int64_t class_count, std::uint64_t seed) {
    torch::manual_seed(seed);
    return Discriminator(shape, class_count);
}

torch::Tensor generate(TriggerGenerator& generator, const torch::Tensor& x, const ConfusingRepresentation& r_b) {
    torch::NoGradGuard guard;
    generator->eval();
    const bool single = x.dim() == 3;
    const auto batch = single ? x.unsqueeze(0) : x;
    const auto dtype = parameter_dtype(*generator);
    const auto out = generator->forward(batch.to(dtype), r_b.as_tensor().to(dtype)).clamp(0.0, 1.0);
    return single ? out.squeeze(0) : out;
}

Poisoner make_poisoner(TriggerGenerator& generator, const ConfusingRepresentation& r_b, std::int64_t batch_size) {
    return [generator, r_b, batch_size](const torch::Tensor& images) mutable {
        std::vector<torch::Tensor> parts;
        for (std::int64_t i = 0; i < images.size(0); i += batch_size) {
            parts.push_back(generate(generator, images.slice(0, i, std::min(images.size(0), i + batch_size)), r_b)
                                .to(images.scalar_type()));
        }
        return torch::cat(parts);
    };
}

torch::Tensor hamming_loss(const torch::Tensor& relaxed, const BipolarCode& h_c) {
    const auto k = static_cast<std::int64_t>(h_c.size());
    const auto rows = relaxed.dim() == 1 ? relaxed.unsqueeze(0) : relaxed;
    if (rows.size(1) != k) throw ShapeError("hamming_loss: code length mismatch");
    const auto target = torch::tensor(h_c.as_reals(), torch::kFloat32).to(rows.scalar_type());
    return ((static_cast<double>(k) - rows.matmul(target)) / 2.0).mean();
}

torch::Tensor hamming_loss(HashModel& surrogate, const torch::Tensor& x_b, const CentroidCode& h_c) {
    return hamming_loss(encode_relaxed(surrogate, x_b), h_c.code);
}

torch::Tensor pixel_l2(const torch::Tensor& x_b, const torch::Tensor& x) {
    if (x_b.sizes() != x.sizes()) throw ShapeError("reconstruction_loss: image shapes differ");
    const auto rows = x_b.dim() == 3 ? (x_b - x).unsqueeze(0) : (x_b - x);
    return rows.flatten(1).norm(2, 1).mean();
}

torch::Tensor reconstruction_loss(const torch::Tensor& x_b, const torch::Tensor& x, const PerceptualDistance& perceptual) {
    const auto l2 = pixel_l2(x_b, x);
    const auto a = x_b.dim() == 3 ? x_b.unsqueeze(0) : x_b;
    const auto b = x.dim() == 3 ? x.unsqueeze(0) : x;
    return l2 + perceptual(a, b).mean();
}

torch::Tensor discriminator_targets(std::span<const std::size_t> classes, std::int64_t class_count, double authenticity,
                                    torch::Dtype dtype) {
    auto t = torch::zeros({static_cast<std::int64_t>(classes.size()), class_count + 1}, torch::kFloat64);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (static_cast<std::int64_t>(classes[i]) >= class_count) throw DomainError("class index out of range");
        t[static_cast<std::int64_t>(i)][static_cast<std::int64_t>(classes[i])] = 1.0;
        t[static_cast<std::int64_t>(i)][class_count] = authenticity;
    }
    return t.to(dtype);
}

torch::Tensor backdoor_loss(const torch::Tensor& d_fake, std::size_t target_label) {
    if (d_fake.dim() != 2) throw ShapeError("backdoor_loss expects [B, class_count + 1] outputs");
    const std::vector<std::size_t> targets(static_cast<std::size_t>(d_fake.size(0)), target_label);
    const auto t = discriminator_targets(targets, d_fake.size(1) - 1, 0.0, d_fake.scalar_type());
    return (d_fake - t).norm(2, 1).mean();
}

torch::Tensor backdoor_loss(Discriminator& d, const torch::Tensor& x_b, std::size_t target_label) {
    const auto batch = x_b.dim() == 3 ? x_b.unsqueeze(0) : x_b;
    return backdoor_loss(d->forward(batch), target_label);
}

torch::Tensor discriminator_loss(const torch::Tensor& d_real, std::span<const std::size_t> real_classes,
                                 const torch::Tensor& d_fake, std::size_t target_label) {
    if (d_real.dim() != 2 || d_fake.dim() != 2 || d_real.size(1) != d_fake.size(1)) {
        throw ShapeError("discriminator_loss expects [B, class_count + 1] outputs");
    }
    if (static_cast<std::int64_t>(real_classes.size()) != d_real.size(0)) throw ShapeError("one class per real row expected");
    const auto m = d_real.size(1) - 1;
    const auto real_t = discriminator_targets(real_classes, m, 0.0, d_real.scalar_type());
    const std::vector<std::size_t> fake_classes(static_cast<std::size_t>(d_fake.size(0)), target_label);
    const auto fake_t = discriminator_targets(fake_classes, m, 1.0, d_fake.scalar_type());
    return 0.5 * ((d_real - real_t).norm(2, 1).mean() + (d_fake - fake_t).norm(2, 1).mean());
}

void GanTrainConfig::validate() const {
    if (alpha1 < 0.0 || alpha2 < 0.0 || alpha3 < 0.0) throw ConfigError("GAN loss weights must be non-negative");
    if (!(learning_rate > 0.0)) throw ConfigError("GAN learning_rate must be positive");
    if (epochs < 1) throw ConfigError("GAN epochs must be at least 1");
    if (batch_size < 2) throw ConfigError("GAN batch_size must be at least 2");
    if (!(max_perturbation > 0.0 && max_perturbation <= 1.0)) throw ConfigError("max_perturbation must lie in (0, 1]");
}

GeneratorObjective generator_objective(const GanTrainConfig& config, HashModel& surrogate, Discriminator& d,
                                       const torch::Tensor& x, const torch::Tensor& x_b, const CentroidCode& h_c,
                                       std::size_t target_label, const PerceptualDistance& perceptual) {
    GeneratorObjective o;
    o.hamming = hamming_loss(surrogate, x_b, h_c);
    o.reconstruction = reconstruction_loss(x_b, x, perceptual);
    o.backdoor = backdoor_loss(d, x_b, target_label);
    o.total = config.alpha1 * o.hamming + config.alpha2 * o.reconstruction + config.alpha3 * o.backdoor;
    return o;
}

void write_gan_log_csv(std::span<const GanEpochRecord> log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "epoch,L_h,L_r,L_bd,L_G,L_D\n" << std::setprecision(10);
    for (const auto& r : log) {
        out << r.epoch << "," << r.hamming << "," << r.reconstruction << "," << r.backdoor << "," << r.generator << ","
            << r.discriminator << "\n";
    }
}

namespace {

nlohmann::json config_json(const GanTrainConfig& c) {
    return {{"alpha1", c.alpha1},         {"alpha2", c.alpha2},
            {"alpha3", c.alpha3},         {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},         {"batch_size", c.batch_size},
            {"seed", c.seed},             {"train_samples", c.train_samples},
            {"max_perturbation", c.max_perturbation}, {"generator_width", c.generator_width},
            {"discriminator_width", c.discriminator_width}, {"perceptual", to_string(c.perceptual)}};
}

GanTrainConfig config_from_json(const nlohmann::json& j) {
    GanTrainConfig c;
    c.alpha1 = j.at("alpha1").get<double>();
    c.alpha2 = j.at("alpha2").get<double>();
    c.alpha3 = j.at("alpha3").get<double>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.train_samples = j.at("train_samples").get<std::size_t>();
    c.max_perturbation = j.at("max_perturbation").get<double>();
    c.generator_width = j.at("generator_width").get<std::int64_t>();
    c.discriminator_width = j.at("discriminator_width").get<std::int64_t>();
    c.perceptual = parse_perceptual_kind(j.at("perceptual").get<std::string>());
    return c;
}

} // namespace

void save_trigger_gan(const TriggerGan& gan, const GanSidecar& sidecar, const std::filesystem::path& stem) {
    save_module(*gan.generator, path_with_suffix(stem, ".generator.pt"));
    save_module(*gan.discriminator, path_with_suffix(stem, ".discriminator.pt"));
    const auto& opts = gan.generator->options();
    nlohmann::json j;
    j["conditioning_width"] = opts.conditioning_width;
    j["image_shape"] = {opts.image_shape.channels, opts.image_shape.height, opts.image_shape.width};
    j["loss_weights"] = {sidecar.config.alpha1, sidecar.config.alpha2, sidecar.config.alpha3};
    j["surrogate_checkpoint_hash"] = sidecar.surrogate_checkpoint_hash;
    j["class_count"] = gan.discriminator->class_count();
    j["train_config"] = config_json(sidecar.config);
    write_json(j, path_with_suffix(stem, ".json"));
}

TriggerGan load_trigger_gan(const std::filesystem::path& stem, GanSidecar* sidecar) {
    const auto j = read_json(path_with_suffix(stem, ".json"));
    GanSidecar meta;
    GeneratorOptions opts;
    std::int64_t class_count = 0;
    try {
        opts.conditioning_width = j.at("conditioning_width").get<std::int64_t>();
        const auto shape = j.at("image_shape").get<std::vector<std::int64_t>>();
        if (shape.size() != 3) throw FormatError("image_shape must have three entries");
        opts.image_shape = {shape[0], shape[1], shape[2]};
        meta.surrogate_checkpoint_hash = j.at("surrogate_checkpoint_hash").get<std::string>();
        meta.config = config_from_json(j.at("train_config"));
        class_count = j.at("class_count").get<std::int64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("GAN sidecar: " + std::string(e.what()));
    }
    opts.base_width = meta.config.generator_width;
    opts.max_perturbation = meta.config.max_perturbation;
    TriggerGan gan;
    gan.generator = TriggerGenerator(opts);
    gan.discriminator = Discriminator(opts.image_shape, class_count, meta.config.discriminator_width);
    load_module(*gan.generator, path_with_suffix(stem, ".generator.pt"));
    load_module(*gan.discriminator, path_with_suffix(stem, ".discriminator.pt"));
    gan.generator->eval();
    gan.discriminator->eval();
    if (sidecar) *sidecar = meta;
    return gan;
}

TriggerGan train_trigger_gan(std::span<const LabeledSample> train, std::size_t class_count,
                             const ConfusingRepresentation& r_b, const CentroidCode& h_c, HashModel& surrogate,
                             std::size_t target_label, const GanTrainConfig& config, std::vector<GanEpochRecord>* log,
                             const std::optional<std::filesystem::path>& checkpoint_stem,
                             const std::string& surrogate_hash) {
    config.validate();
    if (train.size() < 2) throw DomainError("GAN training needs at least two samples");
    if (target_label >= class_count) throw DomainError("target label out of range");
    if (h_c.code.size() != static_cast<std::size_t>(surrogate.info.code_length)) {
        throw ShapeError("centroid code length differs from the surrogate's K");
    }
    configure_deterministic_backend();

    std::vector<std::size_t> pick(train.size());
    if (config.train_samples != 0 && config.train_samples < train.size()) {
        pick = seeded_permutation(train.size(), config.seed ^ 0xC0FFEEull);
        pick.resize(config.train_samples);
        std::sort(pick.begin(), pick.end());
    } else {
        for (std::size_t i = 0; i < pick.size(); ++i) pick[i] = i;
    }
    std::vector<LabeledSample> subset;
    subset.reserve(pick.size());
    for (auto i : pick) subset.push_back(train[i]);
    const auto images = stack_images(subset);
    std::vector<std::size_t> classes;
    for (const auto& s : subset) classes.push_back(s.class_index());

    GeneratorOptions opts;
    opts.image_shape = {images.size(1), images.size(2), images.size(3)};
    opts.conditioning_width = static_cast<std::int64_t>(r_b.vector.size());
    opts.base_width = config.generator_width;
    opts.max_perturbation = config.max_perturbation;
    TriggerGan gan;
    torch::manual_seed(config.seed);
    gan.generator = TriggerGenerator(opts);
    gan.discriminator = Discriminator(opts.image_shape, static_cast<std::int64_t>(class_count), config.discriminator_width);

    // The surrogate stays fixed; gradients flow through it to the images only.
    std::vector<bool> surrogate_grad;
    for (auto& p : surrogate.net->parameters()) {
        surrogate_grad.push_back(p.requires_grad());
        p.set_requires_grad(false);
    }
    surrogate.net->eval();
    const PerceptualDistance perceptual(config.perceptual, config.perceptual == PerceptualKind::Feature ? &surrogate : nullptr);

    torch::optim::Adam opt_g(gan.generator->parameters(), torch::optim::AdamOptions(config.learning_rate).betas({0.5, 0.999}));
    torch::optim::Adam opt_d(gan.discriminator->parameters(), torch::optim::AdamOptions(config.learning_rate).betas({0.5, 0.999}));
    const auto r = r_b.as_tensor();
    const auto n = images.size(0);

    try {
        for (int epoch = 1; epoch <= config.epochs; ++epoch) {
            gan.generator->train();
            gan.discriminator->train();
            const auto perm = seeded_permutation(static_cast<std::size_t>(n), config.seed * 15485863ull + static_cast<std::uint64_t>(epoch));
            GanEpochRecord rec{epoch, 0, 0, 0, 0, 0};
            int steps = 0;
            for (std::int64_t start = 0; start < n; start += config.batch_size) {
                const auto end = std::min(n, start + config.batch_size);
                if (end - start < 2) break;
                std::vector<std::int64_t> idx;
                std::vector<std::size_t> batch_classes;
                for (auto i = start; i < end; ++i) {
                    idx.push_back(static_cast<std::int64_t>(perm[static_cast<std::size_t>(i)]));
                    batch_classes.push_back(classes[perm[static_cast<std::size_t>(i)]]);
                }
                const auto x = images.index_select(0, torch::tensor(idx, torch::kInt64));
                const auto context = "epoch " + std::to_string(epoch) + ", step " + std::to_string(steps);

                auto x_b = gan.generator->forward(x, r);

                const auto d_loss = discriminator_loss(gan.discriminator->forward(x), batch_classes,
                                                       gan.discriminator->forward(x_b.detach()), target_label);
                require_finite(d_loss, "discriminator loss", context);
                opt_d.zero_grad();
                d_loss.backward();
                opt_d.step();

                const auto g = generator_objective(config, surrogate, gan.discriminator, x, x_b, h_c, target_label, perceptual);
                require_finite(g.total, "generator loss", context);
                opt_g.zero_grad();
                g.total.backward();
                opt_g.step();

                rec.hamming += g.hamming.item<double>();
                rec.reconstruction += g.reconstruction.item<double>();
                rec.backdoor += g.backdoor.item<double>();
                rec.generator += g.total.item<double>();
                rec.discriminator += d_loss.item<double>();
                ++steps;
            }
            if (steps > 0) {
                rec.hamming /= steps;
                rec.reconstruction /= steps;
                rec.backdoor /= steps;
                rec.generator /= steps;
                rec.discriminator /= steps;
            }
            if (log) log->push_back(rec);
            if (checkpoint_stem) save_trigger_gan(gan, {surrogate_hash, config}, *checkpoint_stem);
        }
    } catch (const TrainingError& e) {
        std::size_t i = 0;
        for (auto& p : surrogate.net->parameters()) p.set_requires_grad(surrogate_grad[i++]);
        throw TrainingError(std::string(e.what()) +
                            (checkpoint_stem ? "; last good checkpoint at " + checkpoint_stem->string() : ""));
    }
    std::size_t i = 0;
    for (auto& p : surrogate.net->parameters()) p.set_requires_grad(surrogate_grad[i++]);
    gan.generator->eval();
    gan.discriminator->eval();
    return gan;
}

} // namespace badhash
