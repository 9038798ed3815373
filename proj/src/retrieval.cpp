#include "badhash/retrieval.hpp"

#include "badhash/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>

namespace badhash {

namespace {

using Packed = std::vector<std::uint64_t>;

Packed pack(const BipolarCode& code) {
    Packed words((code.size() + 63) / 64, 0);
    for (std::size_t j = 0; j < code.size(); ++j) {
        if (code[j] > 0) words[j / 64] |= std::uint64_t{1} << (j % 64);
    }
    return words;
}

int packed_distance(const Packed& a, const Packed& b) {
    int d = 0;
    for (std::size_t w = 0; w < a.size(); ++w) d += std::popcount(a[w] ^ b[w]);
    return d;
}

} // namespace

bool shares_label(const LabelVector& a, const LabelVector& b) {
    const auto n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] && b[i]) return true;
    }
    return false;
}

RankedRetrieval rank(const BipolarCode& query, std::span<const BipolarCode> database, std::size_t k) {
    if (k > database.size()) throw DomainError("rank: k exceeds database size");
    const auto q = pack(query);
    std::vector<RankedItem> all(database.size());
    for (std::size_t i = 0; i < database.size(); ++i) {
        if (database[i].size() != query.size()) throw ShapeError("rank: code length mismatch");
        all[i] = {i, packed_distance(q, pack(database[i])), false};
    }
    const auto before = [](const RankedItem& a, const RankedItem& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.database_id < b.database_id;
    };
    std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), before);
    all.resize(k);
    RankedRetrieval out;
    out.items = std::move(all);
    return out;
}

void mark_label_relevance(RankedRetrieval& ranked, const LabelVector& query_label,
                          std::span<const LabelVector> database_labels) {
    ranked.total_relevant = 0;
    for (const auto& l : database_labels) ranked.total_relevant += shares_label(query_label, l);
    for (auto& item : ranked.items) item.relevant = shares_label(query_label, database_labels[item.database_id]);
}

void mark_target_relevance(RankedRetrieval& ranked, std::size_t target_label,
                           std::span<const LabelVector> database_labels) {
    const auto has_target = [&](const LabelVector& l) { return target_label < l.size() && l[target_label]; };
    ranked.total_relevant = static_cast<std::size_t>(
        std::count_if(database_labels.begin(), database_labels.end(), has_target));
    for (auto& item : ranked.items) item.relevant = has_target(database_labels[item.database_id]);
}

double average_precision(std::span<const std::uint8_t> relevances, std::size_t k) {
    k = std::min(k, relevances.size());
    double sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t j = 0; j < k; ++j) {
        if (relevances[j]) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(j + 1);
        }
    }
    return hits == 0 ? 0.0 : sum / static_cast<double>(hits);
}

double average_precision(const RankedRetrieval& ranked, std::size_t k) {
    std::vector<std::uint8_t> rel(ranked.items.size());
    std::transform(ranked.items.begin(), ranked.items.end(), rel.begin(),
                   [](const RankedItem& it) { return static_cast<std::uint8_t>(it.relevant); });
    return average_precision(rel, k);
}

std::vector<RankedRetrieval> rank_all(std::span<const BipolarCode> queries,
                                      std::span<const LabelVector> query_labels,
                                      std::span<const BipolarCode> database,
                                      std::span<const LabelVector> database_labels,
                                      std::size_t topk) {
    if (queries.size() != query_labels.size() || database.size() != database_labels.size()) {
        throw ShapeError("rank_all: codes and labels differ in count");
    }
    topk = std::min(topk, database.size());
    std::vector<RankedRetrieval> out;
    out.reserve(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto r = rank(queries[q], database, topk);
        r.query_id = q;
        mark_label_relevance(r, query_labels[q], database_labels);
        out.push_back(std::move(r));
    }
    return out;
}

double mean_average_precision(std::span<const BipolarCode> queries,
                              std::span<const LabelVector> query_labels,
                              std::span<const BipolarCode> database,
                              std::span<const LabelVector> database_labels, std::size_t topk) {
    if (queries.empty()) throw DomainError("mean_average_precision: empty query set");
    topk = std::min(topk, database.size());
    const auto rankings = rank_all(queries, query_labels, database, database_labels, topk);
    double sum = 0.0;
    for (const auto& r : rankings) sum += average_precision(r, topk);
    return sum / static_cast<double>(rankings.size());
}

double t_map(std::span<const BipolarCode> poisoned_queries, std::size_t target_label,
             std::span<const BipolarCode> database, std::span<const LabelVector> database_labels,
             std::size_t topk) {
    if (poisoned_queries.empty()) throw DomainError("t_map: empty query set");
    if (database.size() != database_labels.size()) throw ShapeError("t_map: codes and labels differ in count");
    topk = std::min(topk, database.size());
    double sum = 0.0;
    for (const auto& q : poisoned_queries) {
        auto r = rank(q, database, topk);
        mark_target_relevance(r, target_label, database_labels);
        sum += average_precision(r, topk);
    }
    return sum / static_cast<double>(poisoned_queries.size());
}

std::vector<PrPoint> pr_curve(std::span<const RankedRetrieval> rankings, std::size_t max_points) {
    if (rankings.empty()) throw DomainError("pr_curve: empty rankings");
    std::size_t depth = rankings.front().items.size();
    std::size_t total_relevant = 0;
    for (const auto& r : rankings) {
        depth = std::min(depth, r.items.size());
        total_relevant += r.total_relevant;
    }
    std::vector<std::size_t> hits(rankings.size(), 0);
    std::size_t hit_sum = 0;
    std::vector<PrPoint> points;
    const std::size_t stride = (max_points == 0 || depth <= max_points) ? 1 : (depth + max_points - 1) / max_points;
    for (std::size_t d = 1; d <= depth; ++d) {
        for (std::size_t q = 0; q < rankings.size(); ++q) {
            if (rankings[q].items[d - 1].relevant) {
                ++hits[q];
                ++hit_sum;
            }
        }
        if (d % stride == 0 || d == depth) {
            const double recall = total_relevant == 0 ? 0.0 : static_cast<double>(hit_sum) / static_cast<double>(total_relevant);
            const double precision = static_cast<double>(hit_sum) / static_cast<double>(d * rankings.size());
            points.push_back({recall, precision});
        }
    }
    return points;
}

std::map<std::size_t, double> precision_at_topN(std::span<const RankedRetrieval> rankings,
                                                std::span<const std::size_t> ns) {
    if (rankings.empty()) throw DomainError("precision_at_topN: empty rankings");
    std::map<std::size_t, double> out;
    for (const auto requested : ns) {
        std::size_t n = requested;
        for (const auto& r : rankings) {
            if (n > r.items.size()) {
                std::cerr << "warning: precision@" << requested << " clipped to list length " << r.items.size() << "\n";
                n = r.items.size();
            }
        }
        if (n == 0) continue;
        std::size_t hit_sum = 0;
        for (const auto& r : rankings) {
            hit_sum += static_cast<std::size_t>(std::count_if(
                r.items.begin(), r.items.begin() + static_cast<std::ptrdiff_t>(n),
                [](const RankedItem& it) { return it.relevant; }));
        }
        out[requested] = static_cast<double>(hit_sum) / static_cast<double>(n * rankings.size());
    }
    return out;
}

void write_report_json(const RetrievalReport& report, const std::filesystem::path& path) {
    nlohmann::json j;
    j["map"] = report.map;
    j["t_map"] = report.t_map;
    j["query_count"] = report.query_count;
    j["topk"] = report.topk;
    j["averaging"] = report.averaging;
    auto& pr = j["pr_points"] = nlohmann::json::array();
    for (const auto& p : report.pr_points) pr.push_back({p.recall, p.precision});
    auto& at = j["precision_at"] = nlohmann::json::object();
    for (const auto& [n, p] : report.precision_at) at[std::to_string(n)] = p;
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

RetrievalReport read_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open " + path.string());
    RetrievalReport r;
    try {
        const auto j = nlohmann::json::parse(in);
        r.map = j.at("map").get<double>();
        r.t_map = j.at("t_map").get<double>();
        r.query_count = j.at("query_count").get<std::size_t>();
        r.topk = j.at("topk").get<std::size_t>();
        r.averaging = j.at("averaging").get<std::string>();
        for (const auto& p : j.at("pr_points")) r.pr_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& [n, p] : j.at("precision_at").items()) r.precision_at[std::stoul(n)] = p.get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("retrieval report " + path.string() + ": " + e.what());
    }
    return r;
}

void write_pr_csv(std::span<const PrPoint> points, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "recall,precision\n" << std::setprecision(10);
    for (const auto& p : points) out << p.recall << "," << p.precision << "\n";
}

void write_precision_csv(const std::map<std::size_t, double>& precision_at,
                         const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw LoadError("cannot write " + path.string());
    out << "n,precision\n" << std::setprecision(10);
    for (const auto& [n, p] : precision_at) out << n << "," << p << "\n";
}

} // namespace badhash
