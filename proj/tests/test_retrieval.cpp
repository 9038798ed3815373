#include "badhash/error.hpp"
#include "badhash/retrieval.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <filesystem>

using namespace badhash;

namespace {

struct Instance {
    std::vector<BipolarCode> queries, database;
    std::vector<LabelVector> query_labels, database_labels;
};

BipolarCode random_code(std::mt19937_64& rng, std::size_t k) {
    std::vector<std::int8_t> bits(k);
    for (auto& b : bits) b = (rng() & 1) ? 1 : -1;
    return BipolarCode(bits);
}

LabelVector random_label(std::mt19937_64& rng, std::size_t classes, bool multi) {
    LabelVector l(classes, 0);
    l[rng() % classes] = 1;
    if (multi && rng() % 3 == 0) l[rng() % classes] = 1;
    return l;
}

Instance random_instance(std::mt19937_64& rng, std::size_t k, std::size_t db, std::size_t q, bool multi) {
    Instance in;
    const std::size_t classes = 2 + rng() % 6;
    for (std::size_t i = 0; i < db; ++i) {
        in.database.push_back(random_code(rng, k));
        in.database_labels.push_back(random_label(rng, classes, multi));
    }
    for (std::size_t i = 0; i < q; ++i) {
        in.queries.push_back(random_code(rng, k));
        in.query_labels.push_back(random_label(rng, classes, multi));
    }
    return in;
}

// Oracle: distances by positional disagreement, full sort by (distance, id),
// AP from the textbook definition.
std::vector<std::size_t> oracle_order(const BipolarCode& q, const std::vector<BipolarCode>& db) {
    std::vector<std::pair<int, std::size_t>> keyed;
    for (std::size_t i = 0; i < db.size(); ++i) {
        int d = 0;
        for (std::size_t j = 0; j < q.size(); ++j) d += q[j] != db[i][j];
        keyed.emplace_back(d, i);
    }
    std::sort(keyed.begin(), keyed.end());
    std::vector<std::size_t> order;
    for (const auto& [d, i] : keyed) order.push_back(i);
    return order;
}

double oracle_ap(const std::vector<bool>& rel, std::size_t k) {
    double hits = 0, sum = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (rel[j]) {
            hits += 1;
            sum += hits / static_cast<double>(j + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / hits;
}

bool oracle_share(const LabelVector& a, const LabelVector& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 1 && b[i] == 1) return true;
    }
    return false;
}

double oracle_map(const Instance& in, std::size_t topk) {
    double total = 0;
    for (std::size_t qi = 0; qi < in.queries.size(); ++qi) {
        const auto order = oracle_order(in.queries[qi], in.database);
        std::vector<bool> rel;
        for (auto i : order) rel.push_back(oracle_share(in.query_labels[qi], in.database_labels[i]));
        total += oracle_ap(rel, std::min(topk, in.database.size()));
    }
    return total / static_cast<double>(in.queries.size());
}

double oracle_tmap(const Instance& in, std::size_t target, std::size_t topk) {
    double total = 0;
    for (const auto& q : in.queries) {
        const auto order = oracle_order(q, in.database);
        std::vector<bool> rel;
        for (auto i : order) rel.push_back(in.database_labels[i][target] == 1);
        total += oracle_ap(rel, std::min(topk, in.database.size()));
    }
    return total / static_cast<double>(in.queries.size());
}

} // namespace

TEST_CASE("average precision hand examples") {
    const std::vector<std::uint8_t> a{1, 0, 1};
    CHECK(average_precision(a, 3) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0));
    const std::vector<std::uint8_t> b{1, 1, 1};
    CHECK(average_precision(b, 3) == 1.0);
    const std::vector<std::uint8_t> c{0, 0, 0};
    CHECK(average_precision(c, 3) == 0.0);
}

TEST_CASE("rank orders by distance with ties broken by id") {
    std::mt19937_64 rng(11);
    std::vector<BipolarCode> db;
    for (int i = 0; i < 100; ++i) db.push_back(random_code(rng, 16));
    const auto q = db[37];
    const auto r = rank(q, db, db.size());
    CHECK(r.items.front().database_id == 37);
    CHECK(r.items.front().distance == 0);
    const auto oracle = oracle_order(q, db);
    for (std::size_t i = 0; i < db.size(); ++i) {
        CHECK(r.items[i].database_id == oracle[i]);
        if (i > 0) CHECK(r.items[i - 1].distance <= r.items[i].distance);
    }
    CHECK_THROWS_AS(rank(q, db, 101), DomainError);
    std::vector<BipolarCode> mixed{random_code(rng, 8)};
    CHECK_THROWS_AS(rank(q, mixed, 1), ShapeError);
}

TEST_CASE("MAP and t-MAP equal the brute-force oracle on random instances") {
    std::mt19937_64 rng(2024);
    for (int t = 0; t < 50; ++t) {
        const std::size_t k = (t % 2) ? 16 : 8;
        const std::size_t db = 20 + rng() % 181;
        const auto in = random_instance(rng, k, db, 15, t % 3 == 0);
        const std::size_t topk = (t % 4 == 0) ? 1000 : 1 + rng() % db;
        CHECK(mean_average_precision(in.queries, in.query_labels, in.database, in.database_labels, topk) ==
              oracle_map(in, topk));
        const std::size_t target = rng() % in.database_labels[0].size();
        CHECK(t_map(in.queries, target, in.database, in.database_labels, topk) == oracle_tmap(in, target, topk));
    }
}

TEST_CASE("t-MAP with the true label collapses to MAP on single-label data") {
    std::mt19937_64 rng(77);
    auto in = random_instance(rng, 16, 150, 20, false);
    const std::size_t target = 1;
    for (auto& l : in.query_labels) {
        std::fill(l.begin(), l.end(), 0);
        l[target] = 1;
    }
    CHECK(t_map(in.queries, target, in.database, in.database_labels, 50) ==
          mean_average_precision(in.queries, in.query_labels, in.database, in.database_labels, 50));
    CHECK_THROWS_AS(t_map(std::vector<BipolarCode>{}, target, in.database, in.database_labels, 50), DomainError);
}

TEST_CASE("t-MAP is one when every database item carries the target") {
    std::mt19937_64 rng(78);
    auto in = random_instance(rng, 8, 60, 10, false);
    for (auto& l : in.database_labels) l[0] = 1;
    CHECK(t_map(in.queries, 0, in.database, in.database_labels, 30) == 1.0);
}

TEST_CASE("metrics are invariant to a consistent database permutation") {
    std::mt19937_64 rng(5);
    Instance in;
    for (int i = 0; i < 120; ++i) {
        in.database.push_back(random_code(rng, 16));
        in.database_labels.push_back(random_label(rng, 4, false));
    }
    for (int i = 0; i < 10; ++i) {
        in.queries.push_back(random_code(rng, 16));
        in.query_labels.push_back(random_label(rng, 4, false));
    }
    std::vector<std::size_t> perm(in.database.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Instance shuffled = in;
    for (std::size_t i = 0; i < perm.size(); ++i) {
        shuffled.database[i] = in.database[perm[i]];
        shuffled.database_labels[i] = in.database_labels[perm[i]];
    }

    // Ties break on the original ids carried through the permutation.
    for (std::size_t q = 0; q < in.queries.size(); ++q) {
        auto before = rank(in.queries[q], in.database, 120);
        mark_label_relevance(before, in.query_labels[q], in.database_labels);
        auto after = rank(shuffled.queries[q], shuffled.database, 120);
        mark_label_relevance(after, shuffled.query_labels[q], shuffled.database_labels);
        for (auto& item : after.items) item.database_id = perm[item.database_id];
        std::stable_sort(after.items.begin(), after.items.end(), [](const RankedItem& a, const RankedItem& b) {
            return a.distance != b.distance ? a.distance < b.distance : a.database_id < b.database_id;
        });
        REQUIRE(after.items.size() == before.items.size());
        for (std::size_t i = 0; i < before.items.size(); ++i) {
            CHECK(after.items[i].database_id == before.items[i].database_id);
            CHECK(after.items[i].distance == before.items[i].distance);
            CHECK(after.items[i].relevant == before.items[i].relevant);
        }
        CHECK(after.total_relevant == before.total_relevant);
        for (std::size_t k : {10u, 60u, 120u}) CHECK(average_precision(after, k) == average_precision(before, k));
    }
}

TEST_CASE("MAP is invariant to any database permutation when distances are distinct") {
    std::mt19937_64 rng(9);
    // One database item per distance 0..K from the query, so no ties exist.
    const auto query = random_code(rng, 16);
    Instance in;
    in.queries.push_back(query);
    in.query_labels.push_back(random_label(rng, 4, false));
    for (int d = 0; d <= 16; ++d) {
        auto bits = query.bits();
        for (int j = 0; j < d; ++j) bits[static_cast<std::size_t>(j)] = static_cast<std::int8_t>(-bits[static_cast<std::size_t>(j)]);
        in.database.emplace_back(bits);
        in.database_labels.push_back(random_label(rng, 4, false));
    }
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::size_t> perm(in.database.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Instance shuffled = in;
        for (std::size_t i = 0; i < perm.size(); ++i) {
            shuffled.database[i] = in.database[perm[i]];
            shuffled.database_labels[i] = in.database_labels[perm[i]];
        }
        for (std::size_t k : {5u, 17u}) {
            CHECK(mean_average_precision(shuffled.queries, shuffled.query_labels, shuffled.database,
                                         shuffled.database_labels, k) ==
                  mean_average_precision(in.queries, in.query_labels, in.database, in.database_labels, k));
        }
    }
}

TEST_CASE("precision at N and PR curve") {
    RankedRetrieval r;
    r.items = {{0, 0, true}, {1, 1, false}};
    r.total_relevant = 1;
    const std::vector<RankedRetrieval> rs{r};
    const std::vector<std::size_t> ns{1, 2};
    const auto p = precision_at_topN(rs, ns);
    CHECK(p.at(1) == 1.0);
    CHECK(p.at(2) == 0.5);

    RankedRetrieval perfect;
    perfect.items = {{0, 0, true}, {1, 0, true}, {2, 1, true}, {3, 2, false}};
    perfect.total_relevant = 3;
    const std::vector<RankedRetrieval> ps{perfect};
    const auto curve = pr_curve(ps);
    for (std::size_t i = 0; i < 3; ++i) CHECK(curve[i].precision == 1.0);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i - 1].recall <= curve[i].recall);
    CHECK(curve.back().recall == 1.0);

    std::mt19937_64 rng(3);
    const auto in = random_instance(rng, 16, 80, 12, true);
    const auto full = rank_all(in.queries, in.query_labels, in.database, in.database_labels, 80);
    const auto c2 = pr_curve(full, 10);
    for (std::size_t i = 1; i < c2.size(); ++i) CHECK(c2[i - 1].recall <= c2[i].recall);
    for (const auto& pt : c2) {
        CHECK(pt.precision >= 0.0);
        CHECK(pt.precision <= 1.0);
    }
    const std::vector<std::size_t> big{500};
    CHECK(precision_at_topN(full, big).size() == 1);
}

TEST_CASE("report JSON round trip") {
    RetrievalReport r;
    r.map = 0.5;
    r.t_map = 0.25;
    r.pr_points = {{0.1, 0.9}, {1.0, 0.3}};
    r.precision_at = {{1, 1.0}, {10, 0.7}};
    r.query_count = 3;
    r.topk = 10;
    const auto path = std::filesystem::temp_directory_path() / "badhash_report.json";
    write_report_json(r, path);
    const auto back = read_report_json(path);
    CHECK(back.map == r.map);
    CHECK(back.t_map == r.t_map);
    CHECK(back.pr_points.size() == 2);
    CHECK(back.precision_at.at(10) == 0.7);
    CHECK(back.averaging == "micro");
    std::filesystem::remove(path);
}
