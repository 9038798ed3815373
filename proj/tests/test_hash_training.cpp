#include "badhash/error.hpp"
#include "badhash/hash_training.hpp"

#include <doctest.h>

using namespace badhash;

namespace {

LabelVector one_hot(std::size_t c, std::size_t m) {
    LabelVector l(m, 0);
    l[c] = 1;
    return l;
}

// Class 0 is a dark image with a bright left half, class 1 the mirror.
std::vector<LabeledSample> toy_samples(std::size_t per_class, std::uint64_t seed, const std::string& prefix) {
    torch::manual_seed(seed);
    std::vector<LabeledSample> out;
    for (std::size_t i = 0; i < per_class; ++i) {
        for (std::size_t c = 0; c < 2; ++c) {
            auto img = torch::rand({3, 16, 16}) * 0.3;
            if (c == 0) img.slice(2, 0, 8) += 0.6;
            else img.slice(2, 8, 16) += 0.6;
            out.push_back({prefix + std::to_string(i) + "_" + std::to_string(c), img.clamp(0.0, 1.0), one_hot(c, 2)});
        }
    }
    return out;
}

DatasetSplit toy_split() {
    DatasetSplit s;
    s.name = "toy";
    s.class_names = {"left", "right"};
    s.class_count = 2;
    s.database = toy_samples(40, 1, "db");
    s.train = {s.database.begin(), s.database.begin() + 48};
    s.queries = toy_samples(10, 2, "q");
    return s;
}

HashTrainConfig toy_config() {
    HashTrainConfig c;
    c.code_length = 16;
    c.base_width = 4;
    c.epochs = 10;
    c.batch_size = 16;
    c.learning_rate = 1e-3;
    c.seed = 3;
    return c;
}

} // namespace

TEST_CASE("hadamard centers are pairwise K/2 apart") {
    const std::vector<std::pair<std::size_t, int>> cases{{4, 4}, {10, 16}, {32, 32}};
    for (const auto& [m, k] : cases) {
        const auto centers = hadamard_centers(m, k);
        REQUIRE(centers.size() == m);
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(centers[i].size() == static_cast<std::size_t>(k));
            for (std::size_t j = i + 1; j < m; ++j) CHECK(hamming_distance(centers[i], centers[j]) == k / 2);
        }
    }
}

TEST_CASE("hadamard centers beyond K and past capacity") {
    const auto centers = hadamard_centers(24, 16, 9);
    CHECK(centers.size() == 24);
    for (std::size_t i = 0; i < centers.size(); ++i)
        for (std::size_t j = i + 1; j < centers.size(); ++j) CHECK(hamming_distance(centers[i], centers[j]) > 0);
    CHECK((hadamard_centers(24, 16, 9) == centers));
    CHECK_THROWS_AS(hadamard_centers(33, 16), CapacityError);
}

TEST_CASE("csq loss vanishes at the centers") {
    const auto centers = hadamard_centers(4, 16);
    auto labels = torch::eye(4);
    const auto targets = center_targets(labels, centers);
    CHECK(csq_loss(targets, targets, 1e-4).item<double>() < 1e-6);
    CHECK(csq_loss(-targets, targets, 1e-4).item<double>() > 1.0);
    CHECK_THROWS_AS(csq_loss(targets.slice(1, 0, 8), targets, 1e-4), ShapeError);
}

TEST_CASE("center targets for multi-label rows") {
    const auto centers = hadamard_centers(2, 16);
    const auto t = center_targets(torch::tensor({{1.0f, 1.0f}}), centers);
    for (std::size_t b = 0; b < 16; ++b) {
        const double sum = centers[0][b] + centers[1][b];
        const double want = sum > 0 ? 1.0 : sum < 0 ? -1.0 : centers[0][b];
        CHECK(t[0][static_cast<std::int64_t>(b)].item<double>() == want);
    }
}

TEST_CASE("hashnet loss decreases under gradient descent") {
    torch::manual_seed(11);
    auto w = torch::randn({8, 16}, torch::requires_grad());
    const auto labels = torch::cat({torch::eye(2).repeat({4, 1})});
    torch::optim::SGD opt({w}, 0.1);
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 100; ++step) {
        opt.zero_grad();
        auto loss = hashnet_loss(torch::tanh(w), labels, 0.1);
        if (step == 0) first = loss.item<double>();
        last = loss.item<double>();
        loss.backward();
        opt.step();
    }
    CHECK(last < first);
}

TEST_CASE("config validation") {
    auto c = toy_config();
    CHECK_NOTHROW(c.validate());
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = toy_config();
    c.code_length = 24;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = toy_config();
    c.backbone = "alexnet";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK(parse_hash_method("hashnet") == HashMethod::HashNet);
    CHECK(to_string(HashMethod::Csq) == "csq");
    CHECK_THROWS_AS(parse_hash_method("dpsh"), ConfigError);
}

TEST_CASE("separable toy reaches high MAP and is reproducible") {
    const auto split = toy_split();
    auto zero = toy_config();
    zero.epochs = 0;
    CHECK_THROWS_AS(train_clean(split, zero), ConfigError);

    HashTrainLog log;
    auto model = train_clean(split, toy_config(), &log);
    CHECK(log.epochs.size() == 10);
    const double map = evaluate_map(model, split);
    CHECK(map >= 0.95);
    auto again = train_clean(split, toy_config());
    CHECK(evaluate_map(again, split) == map);
}
