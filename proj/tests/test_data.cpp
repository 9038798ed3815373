#include "badhash/data.hpp"
#include "badhash/desk_dataset.hpp"
#include "badhash/error.hpp"
#include "badhash/image_io.hpp"
#include "badhash/stealth.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace badhash;
namespace fs = std::filesystem;

namespace {

const fs::path& fixture_root() {
    static const fs::path root = [] {
        const auto r = fs::temp_directory_path() / "badhash_data_fixture";
        fs::remove_all(r);
        DeskDatasetOptions o;
        o.classes = 4;
        o.per_class = 300;
        o.side = 16;
        o.seed = 3;
        write_desk_dataset(r / "desk4", o);
        return r;
    }();
    return root;
}

// Shifts every image by +delta (clamped) so poisoned images always differ.
Poisoner brighten(double delta) {
    return [delta](const torch::Tensor& x) { return (x + delta).clamp(0.0, 1.0) * 0.98 + 0.01; };
}

} // namespace

TEST_CASE("desk dataset generation is deterministic and well formed") {
    const auto dir = fs::temp_directory_path() / "badhash_desk_twice";
    fs::remove_all(dir);
    DeskDatasetOptions o;
    o.classes = 3;
    o.per_class = 5;
    o.side = 16;
    write_desk_dataset(dir / "a", o);
    write_desk_dataset(dir / "b", o);
    const auto a = load_image_folder(dir / "a");
    const auto b = load_image_folder(dir / "b");
    REQUIRE(a.size() == 15);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        CHECK(torch::equal(a[i].image, b[i].image));
        CHECK(a[i].image.min().item<float>() >= 0.0f);
        CHECK(a[i].image.max().item<float>() <= 1.0f);
    }
    fs::remove_all(dir);
}

TEST_CASE("load_dataset splits deterministically") {
    const auto s1 = load_dataset(fixture_root(), "desk4", 0, {100, 1000});
    const auto s2 = load_dataset(fixture_root(), "desk4", 0, {100, 1000});
    const auto s3 = load_dataset(fixture_root(), "desk4", 1, {100, 1000});
    CHECK(split_manifest(s1) == split_manifest(s2));
    CHECK(split_manifest(s1) != split_manifest(s3));
    CHECK(s1.class_count == 4);
    CHECK(s1.queries.size() == 100);
    CHECK(s1.database.size() == 1100);
    CHECK(s1.train.size() == 1000);
    std::set<std::string> db_ids;
    for (const auto& s : s1.database) db_ids.insert(s.id);
    for (const auto& q : s1.queries) CHECK(db_ids.count(q.id) == 0);
    for (const auto& t : s1.train) CHECK(db_ids.count(t.id) == 1);
    for (const auto& s : s1.database) {
        int ones = 0;
        for (auto v : s.label) ones += v;
        CHECK(ones == 1);
        CHECK(s.label.size() == 4);
    }
}

TEST_CASE("load errors") {
    CHECK_THROWS_AS(load_dataset(fixture_root(), "missing", 0), LoadError);
    const auto dir = fs::temp_directory_path() / "badhash_broken";
    fs::remove_all(dir);
    DeskDatasetOptions o;
    o.classes = 2;
    o.per_class = 3;
    o.side = 8;
    write_desk_dataset(dir, o);
    std::ofstream(dir / "labels.tsv", std::ios::app) << "extra/none.png\t1,0\n";
    CHECK_THROWS_AS(load_image_folder(dir), FormatError);
    fs::remove_all(dir);
}

TEST_CASE("poisoned set composition") {
    const auto split = load_dataset(fixture_root(), "desk4", 0, {100, 1000});
    const auto none = build_poisoned_set(split, brighten(0.1), 2, 1, 0.0, 0);
    CHECK(none.plan.poisoned_indices.empty());
    REQUIRE(none.samples.size() == split.train.size());
    for (std::size_t i = 0; i < split.train.size(); ++i) CHECK(torch::equal(none.samples[i].image, split.train[i].image));

    const auto set = build_poisoned_set(split, brighten(0.1), 2, 1, 0.01, 0);
    CHECK(set.plan.poisoned_indices.size() == 10);
    CHECK(set.plan.realized_rate(split.train.size()) == doctest::Approx(0.01));
    CHECK(set.samples.size() == split.train.size());
    for (auto i : set.plan.poisoned_indices) {
        CHECK(split.train[i].class_index() == 2);
        CHECK(set.samples[i].label == split.train[i].label);
        CHECK_FALSE(torch::equal(set.samples[i].image, split.train[i].image));
        CHECK(set.samples[i].image.min().item<float>() >= 0.0f);
        CHECK(set.samples[i].image.max().item<float>() <= 1.0f);
    }
    const auto again = build_poisoned_set(split, brighten(0.1), 2, 1, 0.01, 0);
    CHECK(again.plan.poisoned_indices == set.plan.poisoned_indices);

    CHECK_THROWS_AS(build_poisoned_set(split, brighten(0.1), 2, 1, 1.0, 0), DomainError);
    CHECK_THROWS_AS(build_poisoned_set(split, brighten(0.1), 2, 1, 0.5, 0), CapacityError);

    const auto path = fs::temp_directory_path() / "badhash_plan.json";
    save_poison_plan(set.plan, path);
    const auto back = load_poison_plan(path);
    CHECK(back.poisoned_indices == set.plan.poisoned_indices);
    CHECK(back.target_label == 2);
    CHECK(back.confusing_label == 1);
    CHECK(back.poison_rate == 0.01);
    fs::remove(path);
}

TEST_CASE("BadNets patch") {
    const auto img = torch::full({3, 32, 32}, 0.5);
    const auto p = apply_badnets_patch(img, 4);
    const auto changed = (p != img).sum().item<std::int64_t>();
    CHECK(changed == 16 * 3);
    CHECK(p.index({torch::indexing::Slice(), torch::indexing::Slice(28, 32), torch::indexing::Slice(28, 32)})
              .eq(1.0)
              .all()
              .item<bool>());
    CHECK(torch::equal(apply_badnets_patch(img, 0), img));
    CHECK((p - img).pow(2).mean().item<double>() == doctest::Approx(0.00390625).epsilon(1e-9));
    CHECK(mse(img, p) == doctest::Approx(0.00390625 * 255 * 255).epsilon(1e-6));
    CHECK_THROWS_AS(apply_badnets_patch(img, 32), BoundsError);
    CHECK(badnets_patch_size(224) == 18);
    CHECK(badnets_patch_size(32) == 3);

    const auto split = load_dataset(fixture_root(), "desk4", 0, {100, 1000});
    const auto bn = build_badnets_set(split, 0, 0.05, 3, 0);
    CHECK(bn.poisoned_indices.size() == 50);
    for (auto i : bn.poisoned_indices) {
        CHECK(split.train[i].class_index() != 0);
        CHECK(bn.samples[i].class_index() == 0);
    }
}

TEST_CASE("16-bit PNG keeps sub-1/255 perturbations") {
    const auto dir = fs::temp_directory_path() / "badhash_png16";
    fs::create_directories(dir);
    auto img = torch::full({3, 8, 8}, 0.5);
    img[0][0][0] = 0.5 + 1.0 / 1000.0;
    write_png(dir / "x.png", img, 16);
    const auto back = read_image(dir / "x.png");
    CHECK(std::abs(back[0][0][0].item<double>() - img[0][0][0].item<double>()) < 1e-4);
    CHECK(back[0][0][0].item<double>() > back[0][0][1].item<double>());
    fs::remove_all(dir);
}
