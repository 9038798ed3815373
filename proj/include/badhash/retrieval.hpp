#pragma once

#include "badhash/codes.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace badhash {

using LabelVector = std::vector<std::uint8_t>;

struct RankedItem {
    std::size_t database_id = 0;
    int distance = 0;
    bool relevant = false;
};

// Top-k list for one query, ordered by (distance, database_id).
struct RankedRetrieval {
    std::size_t query_id = 0;
    std::vector<RankedItem> items;
    // Relevant items in the whole database, not only the returned prefix.
    std::size_t total_relevant = 0;
};

// True iff the two multi-hot vectors share a nonzero entry.
bool shares_label(const LabelVector& a, const LabelVector& b);

// Exhaustive Hamming scan. Relevance bits are left false; see the
// mark_* helpers. Throws ShapeError on mixed code lengths, DomainError if
// k > |database|.
RankedRetrieval rank(const BipolarCode& query, std::span<const BipolarCode> database, std::size_t k);

void mark_label_relevance(RankedRetrieval& ranked, const LabelVector& query_label,
                          std::span<const LabelVector> database_labels);
// t-MAP relevance: the database item carries `target_label`.
void mark_target_relevance(RankedRetrieval& ranked, std::size_t target_label,
                           std::span<const LabelVector> database_labels);

// AP@k over an ordered relevance list; 0 when nothing relevant is in the top k.
double average_precision(std::span<const std::uint8_t> relevances, std::size_t k);
double average_precision(const RankedRetrieval& ranked, std::size_t k);

// topk is clipped to |database|.
std::vector<RankedRetrieval> rank_all(std::span<const BipolarCode> queries,
                                      std::span<const LabelVector> query_labels,
                                      std::span<const BipolarCode> database,
                                      std::span<const LabelVector> database_labels,
                                      std::size_t topk);

double mean_average_precision(std::span<const BipolarCode> queries,
                              std::span<const LabelVector> query_labels,
                              std::span<const BipolarCode> database,
                              std::span<const LabelVector> database_labels, std::size_t topk = 1000);

// MAP with every query's label replaced by `target_label`. Throws
// DomainError on an empty query set.
double t_map(std::span<const BipolarCode> poisoned_queries, std::size_t target_label,
             std::span<const BipolarCode> database, std::span<const LabelVector> database_labels,
             std::size_t topk = 1000);

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

// Micro-averaged precision/recall at every list depth (or `max_points`
// evenly spaced depths when nonzero). Rankings must be full-length for
// recall to reach 1.
std::vector<PrPoint> pr_curve(std::span<const RankedRetrieval> rankings, std::size_t max_points = 0);

// Micro-averaged precision@N. N larger than the list is clipped with a
// warning on stderr.
std::map<std::size_t, double> precision_at_topN(std::span<const RankedRetrieval> rankings,
                                                std::span<const std::size_t> ns);

struct RetrievalReport {
    double map = 0.0;
    double t_map = 0.0;
    std::vector<PrPoint> pr_points;
    std::map<std::size_t, double> precision_at;
    std::size_t query_count = 0;
    std::size_t topk = 0;
    std::string averaging = "micro";
};

void write_report_json(const RetrievalReport& report, const std::filesystem::path& path);
RetrievalReport read_report_json(const std::filesystem::path& path);
void write_pr_csv(std::span<const PrPoint> points, const std::filesystem::path& path);
void write_precision_csv(const std::map<std::size_t, double>& precision_at,
                         const std::filesystem::path& path);

} // namespace badhash
