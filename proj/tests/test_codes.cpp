#include "badhash/codes.hpp"
#include "badhash/error.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>

using namespace badhash;

namespace {

BipolarCode random_code(std::mt19937_64& rng, std::size_t k) {
    std::vector<std::int8_t> bits(k);
    for (auto& b : bits) b = (rng() & 1) ? 1 : -1;
    return BipolarCode(bits);
}

int disagreements(const BipolarCode& a, const BipolarCode& b) {
    int n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
    return n;
}

} // namespace

TEST_CASE("codes reject entries other than plus or minus one") {
    CHECK_THROWS_AS(BipolarCode(std::vector<std::int8_t>{1, 0, -1}), DomainError);
    CHECK_NOTHROW(BipolarCode(std::vector<std::int8_t>{1, -1}));
}

TEST_CASE("binarize maps zero to minus one") {
    const std::vector<float> v{0.3f, -0.2f};
    CHECK(binarize(v).bits() == std::vector<std::int8_t>{1, -1});
    const std::vector<float> z{0.0f};
    CHECK(binarize(z).bits() == std::vector<std::int8_t>{-1});
    std::mt19937_64 rng(3);
    std::normal_distribution<float> n;
    std::vector<float> r(32);
    for (auto& x : r) x = n(rng);
    const auto once = binarize(r);
    const auto reals = once.as_reals();
    CHECK(binarize(reals) == once);
}

TEST_CASE("hamming distance examples") {
    std::mt19937_64 rng(1);
    const auto a = random_code(rng, 16);
    CHECK(hamming_distance(a, a) == 0);
    std::vector<std::int8_t> neg;
    for (auto b : a.bits()) neg.push_back(static_cast<std::int8_t>(-b));
    CHECK(hamming_distance(a, BipolarCode(neg)) == 16);
    const BipolarCode x(std::vector<std::int8_t>{1, 1, -1, -1});
    const BipolarCode y(std::vector<std::int8_t>{1, -1, -1, 1});
    CHECK(hamming_distance(x, y) == 2);
    CHECK_THROWS_AS(hamming_distance(x, a), ShapeError);
    CHECK_THROWS_AS(x.dot(a), ShapeError);
}

TEST_CASE("hamming identity holds exhaustively for K = 4") {
    for (int i = 0; i < 16; ++i) {
        for (int j = 0; j < 16; ++j) {
            std::vector<std::int8_t> a(4), b(4);
            for (int t = 0; t < 4; ++t) {
                a[t] = (i >> t) & 1 ? 1 : -1;
                b[t] = (j >> t) & 1 ? 1 : -1;
            }
            CHECK(hamming_distance(BipolarCode(a), BipolarCode(b)) == disagreements(BipolarCode(a), BipolarCode(b)));
        }
    }
}

TEST_CASE("hamming distance is a metric on random triples") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 2000; ++t) {
        const auto a = random_code(rng, 32), b = random_code(rng, 32), c = random_code(rng, 32);
        CHECK(hamming_distance(a, b) == hamming_distance(b, a));
        CHECK(hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c));
        CHECK((hamming_distance(a, b) == 0) == (a == b));
    }
}

TEST_CASE("code dump round trip and byte layout") {
    const auto dir = std::filesystem::temp_directory_path() / "badhash_codes_test";
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(5);
    std::vector<BipolarCode> codes;
    for (int i = 0; i < 37; ++i) codes.push_back(random_code(rng, 12));
    write_code_dump(dir / "c.bhcd", codes);
    CHECK(read_code_dump(dir / "c.bhcd") == codes);

    const std::vector<BipolarCode> one{BipolarCode(std::vector<std::int8_t>{1, -1, -1, -1, -1, -1, -1, -1, 1})};
    write_code_dump(dir / "one.bhcd", one);
    std::ifstream in(dir / "one.bhcd", std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    REQUIRE(bytes.size() == 4 + 4 + 8 + 2);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "BHCD");
    CHECK(bytes[4] == 9);
    CHECK(bytes[8] == 1);
    CHECK(bytes[16] == 0x01);
    CHECK(bytes[17] == 0x01);

    std::ofstream(dir / "bad.bhcd") << "XXXX";
    CHECK_THROWS_AS(read_code_dump(dir / "bad.bhcd"), FormatError);
    CHECK_THROWS_AS(read_code_dump(dir / "missing.bhcd"), LoadError);
    std::filesystem::remove_all(dir);
}
