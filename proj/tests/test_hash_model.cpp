#include "badhash/error.hpp"
#include "badhash/hash_model.hpp"

#include <doctest.h>

#include <random>

using namespace badhash;

namespace {

HashModelInfo small_info(const std::string& backbone, int k = 16) {
    HashModelInfo info;
    info.backbone = backbone;
    info.code_length = k;
    info.input_shape = {3, 16, 16};
    info.base_width = 4;
    return info;
}

} // namespace

TEST_CASE("zero hash head gives all-zero relaxed codes") {
    auto m = make_hash_model(small_info("resnet"), 0, true);
    const auto u = encode_relaxed(m, torch::rand({2, 3, 16, 16}));
    CHECK(u.abs().max().item<double>() == 0.0);
}

TEST_CASE("relaxed outputs are bounded and K wide for both backbones") {
    for (const auto* b : {"resnet", "vgg"}) {
        for (int k : {16, 32, 64}) {
            auto m = make_hash_model(small_info(b, k), 1);
            const auto u = encode_relaxed(m, torch::rand({3, 3, 16, 16}) * 50.0);
            CHECK(u.size(1) == k);
            CHECK(u.abs().max().item<double>() <= 1.0);
            CHECK(encode_relaxed(m, torch::rand({3, 16, 16})).dim() == 1);
        }
    }
    CHECK_THROWS_AS(HashNet("alexnet", ImageShape{}, 16, 4), ConfigError);
}

TEST_CASE("shape mismatch is rejected") {
    auto m = make_hash_model(small_info("resnet"), 0);
    CHECK_THROWS_AS(encode_relaxed(m, torch::rand({1, 3, 8, 8})), ShapeError);
    CHECK_THROWS_AS(encode_relaxed(m, torch::rand({1, 1, 16, 16})), ShapeError);
}

TEST_CASE("pixel gradient matches central differences") {
    for (const auto* b : {"resnet", "vgg"}) {
        auto m = make_hash_model(small_info(b), 4);
        m.net->to(torch::kFloat64);
        torch::manual_seed(5);
        const auto x = torch::rand({1, 3, 16, 16}, torch::kFloat64).requires_grad_(true);
        std::mt19937_64 rng(7);
        for (int t = 0; t < 20; ++t) {
            const auto bit = static_cast<std::int64_t>(rng() % 16);
            const auto c = static_cast<std::int64_t>(rng() % 3), i = static_cast<std::int64_t>(rng() % 16),
                       j = static_cast<std::int64_t>(rng() % 16);
            const auto out = encode_relaxed(m, x)[0][bit];
            const auto grad = torch::autograd::grad({out}, {x})[0][0][c][i][j].item<double>();
            const double h = 1e-3;
            auto xp = x.detach().clone();
            auto xm = x.detach().clone();
            xp[0][c][i][j] += h;
            xm[0][c][i][j] -= h;
            torch::NoGradGuard guard;
            const double fd = (encode_relaxed(m, xp)[0][bit].item<double>() - encode_relaxed(m, xm)[0][bit].item<double>()) /
                              (2 * h);
            CHECK(std::abs(grad - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("binarized codes and checkpoint round trip") {
    auto m = make_hash_model(small_info("vgg", 32), 2);
    m.info.training_method = "csq";
    const auto x = torch::rand({5, 3, 16, 16});
    const auto codes = encode_codes(m, x, 2);
    REQUIRE(codes.size() == 5);
    CHECK(codes[0].size() == 32);
    const auto stem = std::filesystem::temp_directory_path() / "badhash_model_rt" / "m";
    save_hash_model(m, stem);
    auto back = load_hash_model(stem);
    CHECK(back.info.backbone == "vgg");
    CHECK(back.info.code_length == 32);
    CHECK(back.info.training_method == "csq");
    CHECK((encode_codes(back, x) == codes));
    CHECK(torch::allclose(encode_relaxed(back, x), encode_relaxed(m, x)));
    CHECK_THROWS_AS(load_hash_model(stem.parent_path() / "missing"), LoadError);
    std::filesystem::remove_all(stem.parent_path());
}
