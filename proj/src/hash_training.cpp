#include "badhash/hash_training.hpp"

#include "badhash/error.hpp"
#include "badhash/retrieval.hpp"
#include "badhash/torch_util.hpp"

#include <bit>
#include <fstream>
#include <iomanip>
#include <random>

namespace badhash {

std::string to_string(HashMethod method) { return method == HashMethod::Csq ? "csq" : "hashnet"; }

HashMethod parse_hash_method(const std::string& name) {
    if (name == "csq" || name == "csq-style") return HashMethod::Csq;
    if (name == "hashnet" || name == "hashnet-style") return HashMethod::HashNet;
    throw ConfigError("unknown hash method '" + name + "'");
}

void HashTrainConfig::validate() const {
    if (code_length != 16 && code_length != 32 && code_length != 64) throw ConfigError("code_length must be 16, 32 or 64");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!is_supported_backbone(backbone)) throw ConfigError("unknown backbone '" + backbone + "'");
    if (base_width < 1) throw ConfigError("base_width must be positive");
}

std::vector<BipolarCode> hadamard_centers(std::size_t num_classes, int code_length, std::uint64_t seed) {
    if (code_length <= 0) throw DomainError("code length must be positive");
    const auto k = static_cast<std::size_t>(code_length);
    if (num_classes > 2 * k) throw CapacityError("cannot place more than 2K well-separated centers");

    if (std::has_single_bit(k) && num_classes <= k) {
        // Sylvester construction: H[i][j] = (-1)^popcount(i & j).
        std::vector<BipolarCode> rows;
        for (std::size_t i = 0; i < num_classes; ++i) {
            std::vector<std::int8_t> bits(k);
            for (std::size_t j = 0; j < k; ++j) bits[j] = std::popcount(i & j) % 2 == 0 ? 1 : -1;
            rows.emplace_back(std::move(bits));
        }
        return rows;
    }

    std::mt19937_64 rng(seed);
    const std::size_t pool_size = std::max<std::size_t>(256, 32 * num_classes);
    std::vector<BipolarCode> pool;
    for (std::size_t p = 0; p < pool_size; ++p) {
        std::vector<std::int8_t> bits(k);
        for (auto& b : bits) b = (rng() & 1) ? 1 : -1;
        pool.emplace_back(std::move(bits));
    }
    std::vector<BipolarCode> chosen{pool.front()};
    std::vector<int> min_dist(pool.size(), std::numeric_limits<int>::max());
    while (chosen.size() < num_classes) {
        std::size_t best = 0;
        int best_dist = -1;
        for (std::size_t p = 0; p < pool.size(); ++p) {
            min_dist[p] = std::min(min_dist[p], hamming_distance(pool[p], chosen.back()));
            if (min_dist[p] > best_dist) {
                best_dist = min_dist[p];
                best = p;
            }
        }
        chosen.push_back(pool[best]);
    }
    return chosen;
}

torch::Tensor center_targets(const torch::Tensor& labels, std::span<const BipolarCode> centers) {
    if (centers.empty()) throw DomainError("no hash centers");
    if (labels.size(1) != static_cast<std::int64_t>(centers.size())) throw ShapeError("label width differs from center count");
    const auto k = static_cast<std::int64_t>(centers.front().size());
    auto table = torch::empty({static_cast<std::int64_t>(centers.size()), k});
    for (std::size_t c = 0; c < centers.size(); ++c) {
        const auto reals = centers[c].as_reals();
        table[static_cast<std::int64_t>(c)] = torch::tensor(reals);
    }
    const auto lab = labels.to(torch::kFloat32);
    const auto summed = lab.matmul(table);
    const auto first = lab.argmax(1);
    const auto fallback = table.index_select(0, first);
    return torch::where(summed == 0, fallback, summed.sign()).to(labels.scalar_type() == torch::kFloat64 ? torch::kFloat64 : torch::kFloat32);
}

torch::Tensor csq_loss(const torch::Tensor& relaxed, const torch::Tensor& targets, double quantization_weight) {
    if (relaxed.sizes() != targets.sizes()) throw ShapeError("csq_loss: codes and targets differ in shape");
    const auto p = ((relaxed + 1.0) / 2.0).clamp(1e-7, 1.0 - 1e-7);
    const auto t = (targets.to(relaxed.scalar_type()) + 1.0) / 2.0;
    const auto center = -(t * torch::log(p) + (1.0 - t) * torch::log(1.0 - p)).mean();
    const auto quant = (relaxed.abs() - 1.0).pow(2).mean();
    return center + quantization_weight * quant;
}

torch::Tensor hashnet_loss(const torch::Tensor& relaxed, const torch::Tensor& labels, double alpha) {
    const auto n = relaxed.size(0);
    if (labels.size(0) != n) throw ShapeError("hashnet_loss: codes and labels differ in count");
    const auto lab = labels.to(relaxed.scalar_type());
    const auto similar = (lab.matmul(lab.t()) > 0).to(relaxed.scalar_type());
    const auto off_diag = 1.0 - torch::eye(n, relaxed.options());
    const auto ip = alpha * relaxed.matmul(relaxed.t());
    const auto pair_loss = torch::log1p(torch::exp(-ip.abs())) + ip.clamp_min(0.0) - similar * ip;

    const auto s1 = (similar * off_diag).sum();
    const auto s0 = ((1.0 - similar) * off_diag).sum();
    const auto total = s1 + s0;
    const auto w1 = torch::where(s1 > 0, total / s1.clamp_min(1.0), torch::ones_like(s1));
    const auto w0 = torch::where(s0 > 0, total / s0.clamp_min(1.0), torch::ones_like(s0));
    const auto weights = (similar * w1 + (1.0 - similar) * w0) * off_diag;
    return (weights * pair_loss).sum() / total.clamp_min(1.0);
}

void HashTrainLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "epoch,loss,validation_map\n" << std::setprecision(10);
    for (const auto& e : epochs) {
        out << e.epoch << "," << e.loss << ",";
        if (e.validation_map) out << *e.validation_map;
        out << "\n";
    }
}

double evaluate_map(HashModel& model, const DatasetSplit& split, std::size_t topk) {
    const auto q = encode_codes(model, split.queries);
    const auto db = encode_codes(model, split.database);
    const auto ql = labels_of(split.queries);
    const auto dbl = labels_of(split.database);
    return mean_average_precision(q, ql, db, dbl, topk);
}

HashModel train_hash_model(std::span<const LabeledSample> train, std::size_t class_count,
                           const HashTrainConfig& config, HashTrainLog* log, const DatasetSplit* validation) {
    config.validate();
    if (train.size() < 2) throw DomainError("training set needs at least two samples");
    configure_deterministic_backend();

    const auto images = stack_images(train);
    const auto labels = stack_labels(train);
    if (labels.size(1) != static_cast<std::int64_t>(class_count)) throw ShapeError("label width differs from class count");

    HashModelInfo info;
    info.backbone = config.backbone;
    info.code_length = config.code_length;
    info.base_width = config.base_width;
    info.input_shape = {images.size(1), images.size(2), images.size(3)};
    info.training_method = to_string(config.method);
    auto model = make_hash_model(info, config.seed);

    torch::Tensor targets;
    if (config.method == HashMethod::Csq) {
        targets = center_targets(labels, hadamard_centers(class_count, config.code_length, config.seed));
    }

    torch::optim::Adam optimizer(model.net->parameters(), torch::optim::AdamOptions(config.learning_rate));
    const auto n = images.size(0);
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        model.net->train();
        const auto perm = seeded_permutation(static_cast<std::size_t>(n), config.seed * 7919ull + static_cast<std::uint64_t>(epoch));
        const auto order = torch::tensor(std::vector<std::int64_t>(perm.begin(), perm.end()), torch::kInt64);
        double loss_sum = 0.0;
        std::int64_t batches = 0;
        for (std::int64_t start = 0; start + 1 < n; start += config.batch_size) {
            const auto end = std::min(n, start + config.batch_size);
            if (end - start < 2) break;
            const auto idx = order.slice(0, start, end);
            const auto codes = model.net->forward(images.index_select(0, idx));
            const auto loss = config.method == HashMethod::Csq
                                  ? csq_loss(codes, targets.index_select(0, idx), config.quantization_weight)
                                  : hashnet_loss(codes, labels.index_select(0, idx), config.hashnet_alpha);
            require_finite(loss, "hash training loss",
                           "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
            optimizer.zero_grad();
            loss.backward();
            optimizer.step();
            loss_sum += loss.item<double>();
            ++batches;
        }
        if (log) {
            HashEpochRecord rec{epoch, batches ? loss_sum / static_cast<double>(batches) : 0.0, std::nullopt};
            if (validation) rec.validation_map = evaluate_map(model, *validation);
            log->epochs.push_back(rec);
        }
    }
    model.net->eval();
    return model;
}

HashModel train_clean(const DatasetSplit& split, const HashTrainConfig& config, HashTrainLog* log) {
    return train_hash_model(split.train, split.class_count, config, log);
}

HashModel train_victim(std::span<const LabeledSample> poisoned_train, std::size_t class_count,
                       const HashTrainConfig& config, HashTrainLog* log) {
    return train_hash_model(poisoned_train, class_count, config, log);
}

} // namespace badhash
