#include "badhash/error.hpp"
#include "badhash/trigger_gan.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

using namespace badhash;

namespace {

const ImageShape kShape{3, 16, 16};

ConfusingRepresentation representation(std::int64_t width, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> n;
    ConfusingRepresentation r;
    r.vector.resize(static_cast<std::size_t>(width));
    for (auto& v : r.vector) v = n(rng);
    r.source_class = 1;
    return r;
}

GeneratorOptions generator_options() {
    GeneratorOptions o;
    o.image_shape = kShape;
    o.conditioning_width = 8;
    o.base_width = 4;
    return o;
}

BipolarCode random_code(std::size_t k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::int8_t> bits(k);
    for (auto& b : bits) b = (rng() & 1) ? 1 : -1;
    return BipolarCode(bits);
}

// Central differences of a scalar function at 20 random coordinates of x.
void check_gradient(const std::function<torch::Tensor(const torch::Tensor&)>& f, const torch::Tensor& at,
                    std::uint64_t seed, double h = 1e-6) {
    const auto x = at.detach().clone().requires_grad_(true);
    const auto grad = torch::autograd::grad({f(x)}, {x})[0].flatten();
    std::mt19937_64 rng(seed);
    for (int t = 0; t < 20; ++t) {
        const auto i = static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(x.numel()));
        torch::NoGradGuard guard;
        auto p = x.detach().clone();
        auto m = x.detach().clone();
        p.view(-1)[i] += h;
        m.view(-1)[i] -= h;
        const double fd = (f(p).item<double>() - f(m).item<double>()) / (2 * h);
        const double g = grad[i].item<double>();
        CHECK(std::abs(g - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

} // namespace

TEST_CASE("hamming loss hand examples") {
    const auto h = random_code(16, 1);
    const auto u = torch::tensor(h.as_reals());
    CHECK(hamming_loss(u, h).item<double>() == 0.0);
    CHECK(hamming_loss(-u, h).item<double>() == 16.0);
    CHECK(hamming_loss(torch::zeros({16}), h).item<double>() == 8.0);
    CHECK_THROWS_AS(hamming_loss(torch::zeros({8}), h), ShapeError);
    for (std::uint64_t s = 2; s < 12; ++s) {
        const auto other = random_code(16, s);
        CHECK(hamming_loss(torch::tensor(other.as_reals()), h).item<double>() == hamming_distance(other, h));
    }
}

TEST_CASE("reconstruction and pixel l2 hand examples") {
    const auto x = torch::full({1, 1, 2, 2}, 0.5);
    auto xb = x.clone();
    CHECK(reconstruction_loss(x, x, PerceptualDistance()).item<double>() == doctest::Approx(0.0).epsilon(1e-6));
    xb[0][0][1][0] += 0.1;
    CHECK(std::abs(pixel_l2(xb, x).item<double>() - 0.1) < 1e-6);
    CHECK_THROWS_AS(pixel_l2(xb, torch::zeros({1, 1, 2, 3})), ShapeError);
}

TEST_CASE("backdoor and discriminator loss hand examples") {
    const std::size_t target = 2;
    const std::vector<std::size_t> fake_cls{target};
    const auto real_target = discriminator_targets(fake_cls, 4, 0.0, torch::kFloat64);
    const auto fake_target = discriminator_targets(fake_cls, 4, 1.0, torch::kFloat64);
    CHECK(real_target.size(1) == 5);
    CHECK(backdoor_loss(real_target, target).item<double>() == 0.0);
    CHECK(std::abs(backdoor_loss(fake_target, target).item<double>() - 1.0) < 1e-6);

    const std::vector<std::size_t> real_cls{0};
    const auto real_out = discriminator_targets(real_cls, 4, 0.0, torch::kFloat64);
    CHECK(std::abs(discriminator_loss(real_out, real_cls, real_out, target).item<double>() - 0.5 * std::sqrt(3.0)) < 1e-6);
    CHECK(discriminator_loss(real_out, real_cls, fake_target, target).item<double>() == 0.0);
    CHECK_THROWS_AS(discriminator_loss(real_out, fake_cls, real_out.slice(1, 0, 4), target), ShapeError);
    CHECK_THROWS_AS(discriminator_targets(std::vector<std::size_t>{4}, 4, 0.0), DomainError);
}

TEST_CASE("loss gradients match central differences") {
    torch::manual_seed(3);
    const auto h = random_code(16, 4);
    check_gradient([&](const torch::Tensor& u) { return hamming_loss(torch::tanh(u), h); },
                   torch::randn({3, 16}, torch::kFloat64), 1);

    const auto x = torch::rand({2, 3, 16, 16}, torch::kFloat64);
    const auto xb0 = (x + 0.05 * torch::randn_like(x)).clamp(0.0, 1.0);
    check_gradient([&](const torch::Tensor& xb) { return reconstruction_loss(xb, x, PerceptualDistance()); }, xb0, 2);

    const auto d0 = torch::rand({3, 5}, torch::kFloat64);
    check_gradient([&](const torch::Tensor& d) { return backdoor_loss(d, 1); }, d0, 3);
    const std::vector<std::size_t> real_cls{0, 3, 2};
    const auto r0 = torch::rand({3, 5}, torch::kFloat64);
    check_gradient([&](const torch::Tensor& d) { return discriminator_loss(d, real_cls, d0, 1); }, r0, 4);
    check_gradient([&](const torch::Tensor& d) { return discriminator_loss(r0, real_cls, d, 1); }, d0, 5);
}

TEST_CASE("discriminator output width and range") {
    auto d = make_discriminator(kShape, 6, 0);
    const auto out = d->forward(torch::rand({4, 3, 16, 16}));
    CHECK(out.size(1) == 7);
    CHECK(out.min().item<double>() > 0.0);
    CHECK(out.max().item<double>() < 1.0);
    CHECK_THROWS_AS(d->forward(torch::rand({4, 3, 8, 8})), ShapeError);
}

TEST_CASE("generator output stays in the unit cube for random parameters") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto g = make_generator(generator_options(), seed);
        {
            torch::NoGradGuard guard;
            for (auto& p : g->parameters()) p.normal_(0.0, 3.0);
        }
        torch::manual_seed(seed + 100);
        auto x = torch::rand({4, 3, 16, 16});
        x[0].fill_(0.0);
        x[1].fill_(1.0);
        const auto r = representation(8, seed);
        torch::NoGradGuard guard;
        const auto out = g->forward(x, r.as_tensor());
        CHECK(out.min().item<double>() >= 0.0);
        CHECK(out.max().item<double>() <= 1.0);
        CHECK((out - x).abs().max().item<double>() <= 0.05 + 1e-6);
    }
}

TEST_CASE("generator is deterministic and input-specific") {
    auto g = make_generator(generator_options(), 1);
    const auto r = representation(8, 1);
    torch::manual_seed(9);
    const auto x = torch::rand({2, 3, 16, 16});
    const auto a = generate(g, x, r);
    CHECK(torch::equal(a, generate(g, x, r)));
    CHECK(torch::allclose(generate(g, x[0], r), a[0], 1e-5, 1e-6));
    const auto residual0 = a[0] - x[0];
    const auto residual1 = a[1] - x[1];
    CHECK((residual0 - residual1).abs().max().item<double>() > 1e-6);

    auto poisoner = make_poisoner(g, r, 1);
    CHECK(torch::allclose(poisoner(x), a));

    CHECK_THROWS_AS(generate(g, x, representation(9, 1)), ShapeError);
    CHECK_THROWS_AS(generate(g, torch::rand({1, 3, 12, 16}), r), ShapeError);
    auto bad = generator_options();
    bad.image_shape = {3, 18, 16};
    CHECK_THROWS_AS(make_generator(bad, 0), ConfigError);
}

TEST_CASE("generator objective is the weighted sum of its parts") {
    HashModelInfo info;
    info.code_length = 16;
    info.input_shape = kShape;
    info.base_width = 4;
    auto surrogate = make_hash_model(info, 2);
    auto d = make_discriminator(kShape, 4, 3);
    auto g = make_generator(generator_options(), 4);
    const auto x = torch::rand({3, 3, 16, 16});
    const auto xb = g->forward(x, representation(8, 2).as_tensor());
    GanTrainConfig c;
    c.alpha1 = 1.5;
    c.alpha2 = 0.25;
    c.alpha3 = 7.0;
    const CentroidCode h{random_code(16, 5), 1};
    const auto o = generator_objective(c, surrogate, d, x, xb, h, 0, PerceptualDistance());
    const double want = 1.5 * o.hamming.item<double>() + 0.25 * o.reconstruction.item<double>() +
                        7.0 * o.backdoor.item<double>();
    CHECK(std::abs(o.total.item<double>() - want) < 1e-5 * std::max(1.0, std::abs(want)));
    CHECK(std::abs(o.hamming.item<double>() - hamming_loss(encode_relaxed(surrogate, xb), h.code).item<double>()) < 1e-6);
}

TEST_CASE("short training run with checkpoint round trip") {
    HashModelInfo info;
    info.code_length = 16;
    info.input_shape = kShape;
    info.base_width = 4;
    auto surrogate = make_hash_model(info, 2);
    std::vector<LabeledSample> train;
    torch::manual_seed(6);
    for (int i = 0; i < 8; ++i) {
        LabelVector l(3, 0);
        l[static_cast<std::size_t>(i % 3)] = 1;
        train.push_back({"s" + std::to_string(i), torch::rand({3, 16, 16}), l});
    }
    GanTrainConfig c;
    c.epochs = 2;
    c.batch_size = 4;
    c.generator_width = 4;
    c.discriminator_width = 4;
    c.seed = 7;
    const auto r = representation(8, 3);
    const CentroidCode h{random_code(16, 8), 1};
    const auto dir = std::filesystem::temp_directory_path() / "badhash_gan_rt";
    std::filesystem::remove_all(dir);
    std::vector<GanEpochRecord> log;
    auto gan = train_trigger_gan(train, 3, r, h, surrogate, 0, c, &log, dir / "gan", "abc");
    CHECK(log.size() == 2);
    for (const auto& rec : log) CHECK(std::isfinite(rec.generator));
    CHECK(surrogate.net->parameters()[0].requires_grad());

    GanSidecar meta;
    auto back = load_trigger_gan(dir / "gan", &meta);
    CHECK(meta.surrogate_checkpoint_hash == "abc");
    CHECK(meta.config.epochs == 2);
    const auto x = stack_images(train);
    CHECK(torch::equal(generate(back.generator, x, r), generate(gan.generator, x, r)));

    write_gan_log_csv(log, dir / "log.csv");
    CHECK(std::filesystem::file_size(dir / "log.csv") > 0);

    auto again = train_trigger_gan(train, 3, r, h, surrogate, 0, c);
    CHECK(torch::equal(generate(again.generator, x, r), generate(gan.generator, x, r)));

    c.epochs = 0;
    CHECK_THROWS_AS(train_trigger_gan(train, 3, r, h, surrogate, 0, c), ConfigError);
    c.epochs = 1;
    CHECK_THROWS_AS(train_trigger_gan(train, 3, r, h, surrogate, 3, c), DomainError);
    std::filesystem::remove_all(dir);
}
