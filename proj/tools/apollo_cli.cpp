// apollo: command-line front end for progressive-depth training experiments.

#include "apollo/checkpoint.hpp"
#include "apollo/config.hpp"
#include "apollo/corpus.hpp"
#include "apollo/depth_maps.hpp"
#include "apollo/error.hpp"
#include "apollo/experiments.hpp"
#include "apollo/metrics.hpp"
#include "apollo/samplers.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kRuntimeError = 2, kIoError = 3 };

struct RunFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
    cmd->add_option("--config", flags.config, "Run configuration file")->required();
    cmd->add_option("--seed", flags.seed, "Override run.seed");
    cmd->add_option("--out", flags.out, "Output directory (overrides run.out_dir)");
}

apollo::RunConfig load(const RunFlags& flags) {
    apollo::RunConfig config = apollo::load_run_config(flags.config);
    if (flags.seed) config.seed = *flags.seed;
    if (!flags.out.empty()) config.out_dir = flags.out;
    return config;
}

apollo::TokenCorpus load_corpus(const apollo::RunConfig& config) {
    return apollo::tokenize_corpus(config.corpus, config.split);
}

std::filesystem::path prepare_out(const apollo::RunConfig& config) {
    std::error_code ec;
    std::filesystem::create_directories(config.out_dir, ec);
    if (ec) throw apollo::IoError("cannot create " + config.out_dir.string() + ": " + ec.message());
    return config.out_dir;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Progressive-depth transformer training with shared, sampled-depth weight banks"};
    app.require_subcommand(1);

    RunFlags train_flags, expand_flags, bench_flags;
    auto* train = app.add_subcommand("train", "Train per config; writes metrics.jsonl, curve.json, final.aplo");
    add_run_flags(train, train_flags);
    auto* expand = app.add_subcommand("expand-analyze", "Compare stacked vs interpolated depth expansion");
    add_run_flags(expand, expand_flags);
    auto* bench = app.add_subcommand("sampler-bench", "FLOPs saving of each depth sampler vs scratch");
    add_run_flags(bench, bench_flags);

    std::string sd_kind = "lvps";
    int sd_floor = 1, sd_max = 1;
    std::optional<double> sd_k;
    std::size_t sd_draws = 100000;
    std::uint64_t sd_seed = 0;
    auto* sample = app.add_subcommand("sample-depth", "Print a depth pmf and Monte-Carlo frequencies as JSON");
    sample->add_option("--kind", sd_kind, "lvps, es, us or fs");
    sample->add_option("--floor", sd_floor, "Stage floor N")->required();
    sample->add_option("--max", sd_max, "Target depth L")->required();
    sample->add_option("--k", sd_k, "Shape parameter (default 0 for lvps, 10 for es)");
    sample->add_option("--draws", sd_draws, "Number of draws");
    sample->add_option("--seed", sd_seed, "RNG seed");

    std::string map_kind = "interpolation";
    int map_from = 1, map_to = 1;
    auto* map = app.add_subcommand("map", "Print a layer map as a JSON array");
    map->add_option("--kind", map_kind, "stack or interpolation");
    map->add_option("--from", map_from, "Source depth L1")->required();
    map->add_option("--to", map_to, "Target depth L2")->required();

    std::string cmp_candidate, cmp_baseline;
    auto* compare = app.add_subcommand("compare", "Print the FLOPs saving of a candidate curve vs a baseline");
    compare->add_option("--candidate", cmp_candidate, "Candidate curve.json")->required();
    compare->add_option("--baseline", cmp_baseline, "Baseline curve.json")->required();

    std::size_t corpus_bytes = 1 << 20;
    std::uint64_t corpus_seed = 0;
    std::string corpus_out;
    auto* make_corpus = app.add_subcommand("make-corpus", "Write a synthetic English-like text corpus");
    make_corpus->add_option("--bytes", corpus_bytes, "Corpus size in bytes");
    make_corpus->add_option("--seed", corpus_seed, "Generator seed");
    make_corpus->add_option("--out", corpus_out, "Output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }

    try {
        if (*train) {
            const auto config = load(train_flags);
            const auto corpus = load_corpus(config);
            const auto result = apollo::run_train_command(config, corpus, config.out_dir);
            std::cout << "trained " << result.state.step << " steps, final val loss "
                      << result.curve.points.back().loss << ", " << result.state.cum_flops << " FLOPs -> "
                      << config.out_dir.string() << "\n";
        } else if (*expand) {
            const auto config = load(expand_flags);
            const auto corpus = load_corpus(config);
            const auto report = apollo::expand_analyze(config, corpus);
            apollo::write_json(prepare_out(config) / "report.json", report.to_json());
            for (const auto& c : report.conditions)
                std::cout << c.name << ": depth " << c.depth << " loss " << c.loss << " grad " << c.grads.mean
                          << " +- " << c.grads.std << "\n";
        } else if (*bench) {
            const auto config = load(bench_flags);
            const auto corpus = load_corpus(config);
            const auto report = apollo::sampler_bench(config, corpus);
            apollo::write_json(prepare_out(config) / "report.json", report.to_json());
            for (const auto& e : report.entries)
                std::cout << e.name << ": "
                          << (e.saving.reached ? std::to_string(e.saving.ratio) : std::string("not-reached")) << "\n";
        } else if (*sample) {
            const auto kind = apollo::parse_sampler_kind(sd_kind);
            const double k = sd_k.value_or(apollo::default_k(kind));
            const auto pmf = apollo::build_pmf(kind, sd_floor, sd_max, k);
            apollo::CounterRng rng(sd_seed, apollo::kDepthStream);
            std::vector<double> freq(pmf.probs.size(), 0.0);
            for (std::size_t i = 0; i < sd_draws; ++i)
                freq[static_cast<std::size_t>(apollo::sample_depth(pmf, rng) - pmf.floor_depth)] += 1.0;
            for (double& f : freq) f /= sd_draws ? static_cast<double>(sd_draws) : 1.0;
            nlohmann::json j{{"kind", apollo::to_string(kind)}, {"floor", sd_floor}, {"max", sd_max}, {"k", k},
                             {"pmf", pmf.probs}, {"expected_depth", apollo::expected_depth(pmf)},
                             {"draws", sd_draws}, {"frequencies", freq}};
            std::cout << j.dump(2) << "\n";
        } else if (*map) {
            const auto m = apollo::make_map(apollo::parse_map_kind(map_kind), map_from, map_to);
            std::cout << nlohmann::json(m.entries).dump() << "\n";
        } else if (*compare) {
            const auto saving =
                apollo::saving_ratio(apollo::read_curve(cmp_candidate), apollo::read_curve(cmp_baseline));
            nlohmann::json j{{"reached", saving.reached}};
            j["saving"] = saving.reached ? nlohmann::json(saving.ratio) : nlohmann::json("not-reached");
            if (saving.reached) j["flops_to_target"] = saving.flops_to_target;
            std::cout << j.dump() << "\n";
        } else if (*make_corpus) {
            std::ofstream out(corpus_out, std::ios::binary | std::ios::trunc);
            if (!out) throw apollo::IoError("cannot write " + corpus_out);
            out << apollo::synthetic_corpus(corpus_bytes, corpus_seed);
            if (!out) throw apollo::IoError("error writing " + corpus_out);
        }
    } catch (const apollo::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const apollo::InvalidArgument& e) {
        std::cerr << "invalid argument: " << e.what() << "\n";
        return kConfigError;
    } catch (const apollo::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIoError;
    } catch (const apollo::FormatError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIoError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kRuntimeError;
    }
    return kOk;
}
