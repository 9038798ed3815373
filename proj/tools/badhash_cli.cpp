#include "badhash/desk_dataset.hpp"
#include "badhash/error.hpp"
#include "badhash/experiment.hpp"
#include "badhash/stealth.hpp"
#include "badhash/torch_util.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace badhash;

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> overrides;

    void attach(CLI::App* cmd, bool require_config = true) {
        auto* opt = cmd->add_option("--config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
        if (require_config) opt->required();
        cmd->add_option("--seed", seed, "Seed for every stage");
        cmd->add_option("--out", out, "Output directory");
        cmd->add_option("--set", overrides, "Override a config field, e.g. --set gan.epochs=50");
    }

    ExperimentConfig load() const {
        ConfigOverrides o;
        o.seed = seed;
        if (out) o.output_dir = *out;
        o.assignments = overrides;
        return load_experiment_config(config, o);
    }
};

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clean-label backdoor experiments on deep hashing retrieval"};
    app.require_subcommand(1);

    CommonFlags run_flags;
    auto* run = app.add_subcommand("run", "Run the full pipeline (resumes finished stages)");
    run_flags.attach(run);

    CommonFlags transfer_flags;
    std::string second_config;
    std::vector<std::string> second_overrides;
    auto* transfer = app.add_subcommand("transfer", "One generator against two victim models");
    transfer_flags.attach(transfer);
    transfer->add_option("--second-config", second_config, "Config of the second victim (defaults to --config)")
        ->check(CLI::ExistingFile);
    transfer->add_option("--second-set", second_overrides, "Overrides for the second victim, e.g. hash.backbone=vgg");

    CommonFlags compare_flags;
    auto* compare = app.add_subcommand("compare", "BadHash against the BadNets baseline");
    compare_flags.attach(compare);

    CommonFlags eval_flags;
    std::string codes_dir;
    std::size_t eval_target = 0;
    auto* eval = app.add_subcommand("eval", "Recompute reports of a run, or evaluate a directory of code dumps");
    eval_flags.attach(eval, false);
    eval->add_option("--codes", codes_dir, "Directory with database/queries code dumps")->check(CLI::ExistingDirectory);
    eval->add_option("--target", eval_target, "Target label for t-MAP with --codes");

    CommonFlags dump_flags;
    std::string dump_model = "victim";
    std::string dump_subset = "database";
    std::string dump_path;
    auto* dump = app.add_subcommand("dump-embeddings", "Write relaxed codes, bits and labels as TSV");
    dump_flags.attach(dump);
    dump->add_option("--model", dump_model, "clean, surrogate or victim")
        ->check(CLI::IsMember({"clean", "surrogate", "victim"}));
    dump->add_option("--subset", dump_subset, "train, database, queries, open-set or poisoned")
        ->check(CLI::IsMember({"train", "database", "queries", "open-set", "poisoned"}));
    dump->add_option("--file", dump_path, "Output TSV (default <run>/embeddings_<model>_<subset>.tsv)");

    DeskDatasetOptions desk;
    std::string desk_dir;
    auto* make_desk = app.add_subcommand("make-desk-dataset", "Write the procedural desk dataset");
    make_desk->add_option("--out", desk_dir, "Output directory")->required();
    make_desk->add_option("--classes", desk.classes, "Number of classes");
    make_desk->add_option("--first-family", desk.first_family, "First shape family");
    make_desk->add_option("--per-class", desk.per_class, "Images per class");
    make_desk->add_option("--side", desk.side, "Image side in pixels");
    make_desk->add_option("--seed", desk.seed, "Seed");

    std::string manifest, stealth_csv;
    auto* stealth = app.add_subcommand("stealth", "MSE / PSNR / SSIM over an image-pair manifest");
    stealth->add_option("--manifest", manifest, "TSV of original<TAB>poisoned paths")->required()->check(CLI::ExistingFile);
    stealth->add_option("--out", stealth_csv, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*run) {
            const auto c = run_flags.load();
            run_pipeline(c);
            print_json(read_json(c.output_dir / "summary.json"));
        } else if (*transfer) {
            const auto first = transfer_flags.load();
            CommonFlags second = transfer_flags;
            if (!second_config.empty()) second.config = second_config;
            second.overrides.insert(second.overrides.end(), second_overrides.begin(), second_overrides.end());
            const auto summary = run_transfer_check(first, second.load(), first.output_dir);
            print_json(summary.to_json());
        } else if (*compare) {
            const auto c = compare_flags.load();
            const auto rows = run_comparison(c);
            std::cout << std::ifstream(c.output_dir / "comparison.csv").rdbuf();
        } else if (*eval) {
            if (!codes_dir.empty()) {
                EvalConfig e;
                if (!eval_flags.config.empty()) e = eval_flags.load().eval;
                const auto r = evaluate_code_dir(codes_dir, eval_target, e);
                nlohmann::json j{{"MAP", r.clean.map}, {"query_count", r.clean.query_count}, {"topk", r.clean.topk}};
                if (r.t_map_open_set) j["t-MAP"] = *r.t_map_open_set;
                print_json(j);
            } else {
                if (eval_flags.config.empty()) throw ConfigError("eval needs --config or --codes");
                const auto c = eval_flags.load();
                PipelineOptions o;
                o.force_eval = true;
                run_pipeline(c, o);
                print_json(read_json(c.output_dir / "summary.json"));
            }
        } else if (*dump) {
            const auto c = dump_flags.load();
            const auto path = dump_path.empty()
                                  ? c.output_dir / ("embeddings_" + dump_model + "_" + dump_subset + ".tsv")
                                  : std::filesystem::path(dump_path);
            dump_run_embeddings(c, dump_model, dump_subset, path);
            std::cout << path.string() << "\n";
        } else if (*make_desk) {
            write_desk_dataset(desk_dir, desk);
        } else if (*stealth) {
            const auto s = evaluate_pair_manifest(manifest, stealth_csv);
            print_json({{"MSE", s.mean.mse}, {"PSNR", s.mean.psnr}, {"SSIM", s.mean.ssim}, {"count", s.count}});
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
