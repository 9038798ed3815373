#pragma once

#include "badhash/hash_training.hpp"
#include "badhash/labcln.hpp"
#include "badhash/stealth.hpp"
#include "badhash/trigger_gan.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace badhash {

inline constexpr int kSummarySchemaVersion = 1;

struct DataConfig {
    // Directory holding one folder per dataset; relative paths resolve
    // against the config file's directory.
    std::filesystem::path root = "data";
    std::string name = "desk10";
    // Dataset of categories absent from training, used for open-set queries.
    std::string open_set = "desk10-open";
    std::size_t query_count = 500;
    std::size_t train_count = 2500;
    // Write the procedural desk datasets when they are missing.
    bool generate = true;
    std::size_t classes = 10;
    std::size_t open_set_classes = 5;
    std::size_t per_class = 500;
    int side = 32;
};

struct AttackConfig {
    std::size_t target_label = 0;
    std::size_t confusing_label = 1;
    double poison_rate = 0.01;
    std::size_t open_set_queries = 250;
    std::size_t in_distribution_queries = 250;
};

struct EvalConfig {
    std::size_t topk = 1000;
    std::vector<std::size_t> precision_ns{1, 10, 50, 100, 200, 500, 1000};
    std::size_t pr_points = 100;
    double residual_magnification = 50.0;
    std::size_t residual_count = 8;
};

struct BadNetsConfig {
    double poison_rate = 0.05;
    // 0 scales an 18-pixel patch at 224 pixels to the image side.
    std::size_t patch_size = 0;
};

struct ExperimentConfig {
    std::string name = "desk";
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/desk";
    DataConfig data;
    // Clean and victim models.
    HashTrainConfig hash;
    // The attacker's model; unset means the clean model doubles as surrogate.
    std::optional<HashTrainConfig> surrogate;
    AttackConfig attack;
    LabclnConfig labcln;
    GanTrainConfig gan;
    EvalConfig eval;
    BadNetsConfig badnets;

    // Propagates the top-level seed into every stage.
    void apply_seed(std::uint64_t seed);
    // Throws ConfigError.
    void validate() const;
    const HashTrainConfig& surrogate_config() const { return surrogate ? *surrogate : hash; }
};

// Applies "section.key=value" overrides to a config document. Values parse
// as JSON when possible and as strings otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

nlohmann::json config_to_json(const ExperimentConfig& config);
// Throws ConfigError on unknown keys, wrong types or invalid values.
ExperimentConfig config_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

struct ConfigOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> output_dir;
    std::vector<std::string> assignments;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

// Evaluation of one model on one setting.
struct ModelEvaluation {
    double map = 0.0;
    double t_map_open_set = 0.0;
    double t_map_in_distribution = 0.0;
    // t-MAP of the unpoisoned open-set queries, the chance baseline.
    double t_map_open_set_clean = 0.0;
    // Mean Hamming distance from poisoned in-distribution queries to the
    // target class and to their own class in the database.
    double distance_to_target = 0.0;
    double distance_to_own_class = 0.0;
};

struct PipelineSummary {
    std::string setting;
    ModelEvaluation clean;
    ModelEvaluation victim;
    StealthSummary stealth;
    StealthSummary query_stealth;
    std::size_t poisoned_count = 0;
    std::size_t train_size = 0;
    std::string surrogate_checkpoint_hash;

    nlohmann::json to_json() const;
};

struct PipelineOptions {
    // Completed stages named in reuse_stages are copied from this run
    // directory instead of being recomputed.
    std::optional<std::filesystem::path> reuse_from;
    std::vector<std::string> reuse_stages{"surrogate", "labcln", "gan", "poison"};
    // Recompute the evaluation stage even when it is complete.
    bool force_eval = false;
};

// Runs data -> clean -> surrogate -> labcln -> gan -> poison -> victim ->
// eval in config.output_dir. Completed stages are skipped, so a killed run
// resumes where it stopped. Throws StageError tagged with the failing stage.
PipelineSummary run_pipeline(const ExperimentConfig& config, const PipelineOptions& options = {});

struct TransferSummary {
    std::string basic_backbone;
    std::vector<std::pair<std::string, PipelineSummary>> targets;

    nlohmann::json to_json() const;
};

// One generator, two victims. The configs must agree on dataset, seed,
// attack, LabCLN, GAN and surrogate settings; otherwise ConfigError.
TransferSummary run_transfer_check(const ExperimentConfig& first, const ExperimentConfig& second,
                                   const std::filesystem::path& out_dir);

struct ComparisonRow {
    std::string method;
    double map = 0.0;
    double t_map = 0.0;
    StealthReport stealth;
};

// BadHash against the BadNets-style baseline; writes comparison.csv with
// columns Method, MAP, t-MAP, MSE, PSNR, SSIM.
std::vector<ComparisonRow> run_comparison(const ExperimentConfig& config);
void write_comparison_csv(std::span<const ComparisonRow> rows, const std::filesystem::path& path);

// TSV of sample_id, label, K relaxed activations and K bits.
void dump_embeddings(HashModel& model, std::span<const LabeledSample> samples, const std::filesystem::path& path);

// dump_embeddings on a finished run. model: clean, surrogate or victim;
// subset: train, database, queries, open-set or poisoned (the poisoned
// in-distribution queries).
void dump_run_embeddings(const ExperimentConfig& config, const std::string& model, const std::string& subset,
                         const std::filesystem::path& out);

// Reports from code dumps in `dir`: database.bhcd + database_labels.tsv,
// queries.bhcd + queries_labels.tsv and, when present, poisoned_open.bhcd.
struct CodeDirEvaluation {
    RetrievalReport clean;
    std::optional<double> t_map_open_set;
};
CodeDirEvaluation evaluate_code_dir(const std::filesystem::path& dir, std::size_t target_label, const EvalConfig& eval);

} // namespace badhash
