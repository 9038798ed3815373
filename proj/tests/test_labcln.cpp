#include "badhash/error.hpp"
#include "badhash/labcln.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace badhash;

namespace {

struct Fraction {
    long long num;
    long long den;
};

Fraction reduce(Fraction f) {
    const auto g = std::gcd(f.num, f.den);
    return {f.num / g, f.den / g};
}
Fraction operator+(Fraction a, Fraction b) { return reduce({a.num * b.den + b.num * a.den, a.den * b.den}); }
Fraction operator-(Fraction a, Fraction b) { return reduce({a.num * b.den - b.num * a.den, a.den * b.den}); }
Fraction operator/(Fraction a, long long d) { return reduce({a.num, a.den * d}); }
bool operator==(Fraction a, Fraction b) { return a.num * b.den == b.num * a.den; }
double to_double(Fraction f) { return static_cast<double>(f.num) / static_cast<double>(f.den); }

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

LabclnConfig small_config() {
    LabclnConfig c;
    c.code_length = 32;
    c.latent_width = 512;
    c.epochs = 300;
    c.seed = 1;
    return c;
}

} // namespace

TEST_CASE("label smoothing matches rational arithmetic") {
    const std::vector<std::tuple<long long, Fraction>> cases{{10, {1, 5}}, {100, {1, 5}}, {2, {1, 2}}};
    for (const auto& [m, eps] : cases) {
        const Fraction off = eps / (m - 1);
        const Fraction on = Fraction{1, 1} - eps + off;
        Fraction sum{0, 1};
        for (long long i = 0; i < m; ++i) sum = sum + (i == 3 % m ? on : off);
        CHECK(sum == Fraction{1, 1} + eps / (m - 1));

        LabelVector l(static_cast<std::size_t>(m), 0);
        l[static_cast<std::size_t>(3 % m)] = 1;
        const auto p = smooth_label(l, to_double(eps));
        CHECK(p.source_class == static_cast<std::size_t>(3 % m));
        double total = 0;
        for (long long i = 0; i < m; ++i) {
            const double want = to_double(i == 3 % m ? on : off);
            CHECK(std::abs(p.vector[static_cast<std::size_t>(i)] - want) <= 4e-16 * std::max(1.0, want));
            total += p.vector[static_cast<std::size_t>(i)];
        }
        CHECK(std::abs(total - to_double(sum)) < 1e-12);
    }
}

TEST_CASE("label smoothing rejects bad input") {
    CHECK_THROWS_AS(smooth_label({1}, 0.1), DomainError);
    CHECK_THROWS_AS(smooth_label({1, 0}, 1.5), DomainError);
    CHECK_THROWS_AS(smooth_label({1, 1, 0}, 0.1), DomainError);
    CHECK_THROWS_AS(smooth_label({0, 0, 0}, 0.1), DomainError);
    CHECK_THROWS_AS(smooth_label_tensor(5, 3, 0.1), DomainError);
    const auto p = smooth_label({0, 1, 0}, 0.0);
    CHECK(p.vector == std::vector<double>{0, 1, 0});
}

TEST_CASE("contrastive loss hand examples") {
    const auto e1 = torch::tensor({1.0, 0.0}, torch::kFloat64);
    const auto e2 = torch::tensor({0.0, 1.0}, torch::kFloat64);
    const auto f = torch::stack({e1, e1, e2, e2});
    const double want = std::log(std::exp(2.0) + 2.0) - 2.0;
    CHECK(std::abs(want - 0.2395) < 1e-4);
    CHECK(std::abs(contrastive_loss(f, 0.5).item<double>() - want) < 1e-6);
    CHECK(std::abs(contrastive_loss(torch::stack({e1, e1, e1, e1}), 0.5).item<double>() - std::log(3.0)) < 1e-6);

    torch::manual_seed(2);
    const auto r = torch::randn({6, 5}, torch::kFloat64);
    const double base = contrastive_loss(r, 0.3).item<double>();
    CHECK(std::abs(contrastive_loss(r * 7.5, 0.3).item<double>() - base) < 1e-9);
    const auto scales = torch::tensor({0.1, 2.0, 3.0, 0.5, 9.0, 1.5}, torch::kFloat64).unsqueeze(1);
    CHECK(std::abs(contrastive_loss(r * scales, 0.3).item<double>() - base) < 1e-9);

    CHECK_THROWS_AS(contrastive_loss(f, 0.0), DomainError);
    CHECK_THROWS_AS(contrastive_loss(f.slice(0, 0, 3), 0.5), ShapeError);
    CHECK_THROWS_AS(contrastive_loss(torch::zeros({2, 2}, torch::kFloat64), 0.5), DomainError);
}

TEST_CASE("contrastive loss gradient matches central differences") {
    torch::manual_seed(4);
    const auto f = torch::randn({6, 4}, torch::kFloat64).requires_grad_(true);
    const auto grad = torch::autograd::grad({contrastive_loss(f, 0.5)}, {f})[0];
    std::mt19937_64 rng(5);
    const double h = 1e-5;
    for (int t = 0; t < 20; ++t) {
        const auto i = static_cast<std::int64_t>(rng() % 6), j = static_cast<std::int64_t>(rng() % 4);
        torch::NoGradGuard guard;
        auto p = f.detach().clone();
        auto m = f.detach().clone();
        p[i][j] += h;
        m[i][j] -= h;
        const double fd = (contrastive_loss(p, 0.5).item<double>() - contrastive_loss(m, 0.5).item<double>()) / (2 * h);
        const double g = grad[i][j].item<double>();
        CHECK(std::abs(g - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("objective is the weighted sum of its parts") {
    auto c = small_config();
    c.alpha = 0.7;
    c.beta = 0.3;
    c.lambda = 2.0;
    auto model = make_labcln(6, c);
    const std::vector<std::size_t> classes{0, 2, 5};
    const auto loss = labcln_loss(model, classes);
    const double want = 0.7 * loss.contrastive.item<double>() + 0.3 * loss.quantization.item<double>() +
                        2.0 * loss.classification.item<double>();
    CHECK(std::abs(loss.total.item<double>() - want) < 1e-6);
    CHECK_THROWS_AS(centroid_code(model, 0), DomainError);
}

TEST_CASE("config validation") {
    auto c = small_config();
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.tau = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = small_config();
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(make_labcln(1, small_config()), DomainError);
}

TEST_CASE("trained network separates the classes") {
    std::vector<LabclnEpochRecord> log;
    auto model = train_labcln(10, small_config(), &log);
    CHECK(log.size() == 300);
    CHECK(log.back().total < log.front().total);

    int recovered = 0;
    for (std::size_t c = 0; c < 10; ++c) recovered += labcln_predict(model, c) == c;
    CHECK(recovered >= 9);

    std::vector<BipolarCode> codes;
    for (std::size_t c = 0; c < 10; ++c) codes.push_back(centroid_code(model, c).code);
    for (std::size_t a = 0; a < 10; ++a)
        for (std::size_t b = a + 1; b < 10; ++b) CHECK(hamming_distance(codes[a], codes[b]) >= 32 / 4);

    const auto r = confusing_representation(model, 1);
    CHECK(r.vector.size() == 512);
    CHECK(r.source_class == 1);
    const auto smoothed = confusing_representation(model, 1, 0.2);
    for (std::size_t other = 0; other < 10; ++other) {
        if (other == 1) continue;
        const auto o = confusing_representation(model, other);
        CHECK(cosine(r.vector, smoothed.vector) > cosine(r.vector, o.vector));
    }

    const auto stem = std::filesystem::temp_directory_path() / "badhash_labcln_rt" / "anchor";
    save_labcln(model, stem);
    auto back = load_labcln(stem);
    CHECK(centroid_code(back, 1).code == codes[1]);
    CHECK(confusing_representation(back, 1).vector == r.vector);
    std::filesystem::remove_all(stem.parent_path());
}
