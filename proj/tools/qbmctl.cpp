// Command-line front end: dataset, scorer, coresets, QBM training and the
// full multi-arm experiment.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "qbm/bxs.hpp"
#include "qbm/coreset.hpp"
#include "qbm/error.hpp"
#include "qbm/experiment.hpp"
#include "qbm/scorer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--seed", c.seed, "seed");
    cmd->add_option("--out", c.out, "output directory");
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw qbm::Error(qbm::ErrorCode::io, "cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw qbm::Error(qbm::ErrorCode::config, "malformed " + what + ": " + e.what());
    }
}

qbm::ExperimentConfig load_config(const Common& c) {
    if (c.config.empty()) {
        return {};
    }
    return qbm::config_from_json(parse_json(slurp(c.config), c.config));
}

qbm::ScorerNet load_scorer(const std::string& path) {
    return qbm::scorer_from_json(parse_json(slurp(path), path));
}

fs::path out_dir(const Common& c) {
    fs::create_directories(c.out);
    return c.out;
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) {
        throw qbm::Error(qbm::ErrorCode::io, "failed writing " + path.string());
    }
}

void emit(const json& j) { std::cout << j.dump() << '\n'; }

qbm::Dataset dataset_for(const qbm::ExperimentConfig& cfg, const std::string& input) {
    if (input.empty()) {
        return qbm::generate_bxs_multiset(cfg.p, cfg.q);
    }
    std::ifstream in(input);
    if (!in) {
        throw qbm::Error(qbm::ErrorCode::io, "cannot open " + input);
    }
    return qbm::read_dataset_jsonl(in);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Coreset-driven quantum Boltzmann machine training on bars-and-stripes images"};
    app.require_subcommand(1);

    // bxs generate
    Common bxs_c;
    auto* bxs = app.add_subcommand("bxs", "dataset utilities");
    bxs->require_subcommand(1);
    auto* bxs_gen = bxs->add_subcommand("generate", "write the full BXS multiset as JSONL");
    add_common(bxs_gen, bxs_c);
    std::optional<int> gen_p, gen_q;
    bxs_gen->add_option("--p", gen_p, "image width");
    bxs_gen->add_option("--q", gen_q, "image height");

    // scorer train / eval
    Common sc_c;
    auto* scorer = app.add_subcommand("scorer", "BXS classifier");
    scorer->require_subcommand(1);
    auto* sc_train = scorer->add_subcommand("train", "train the classifier and write scorer.json");
    add_common(sc_train, sc_c);
    auto* sc_eval = scorer->add_subcommand("eval", "accuracy on a fresh labeled set, or mean score of a dataset");
    add_common(sc_eval, sc_c);
    std::string eval_scorer, eval_input;
    sc_eval->add_option("--scorer", eval_scorer, "scorer checkpoint")->required()->check(CLI::ExistingFile);
    sc_eval->add_option("--input", eval_input, "dataset JSONL to score")->check(CLI::ExistingFile);

    // coreset build
    Common cs_c;
    auto* coreset = app.add_subcommand("coreset", "coreset construction");
    coreset->require_subcommand(1);
    auto* cs_build = coreset->add_subcommand("build", "select m points and write coreset.jsonl");
    add_common(cs_build, cs_c);
    std::string cs_method = "minimax", cs_scorer, cs_input;
    std::optional<std::size_t> cs_m;
    std::optional<std::string> cs_distance;
    cs_build->add_option("--method", cs_method, "uniform or minimax")->check(CLI::IsMember({"uniform", "minimax"}));
    cs_build->add_option("--m", cs_m, "coreset size");
    cs_build->add_option("--distance", cs_distance, "inception or euclidean")
        ->check(CLI::IsMember({"inception", "euclidean"}));
    cs_build->add_option("--scorer", cs_scorer, "scorer checkpoint (inception distance)")->check(CLI::ExistingFile);
    cs_build->add_option("--input", cs_input, "dataset JSONL (default: full multiset)")->check(CLI::ExistingFile);

    // qbm train
    Common qt_c;
    auto* qbm_cmd = app.add_subcommand("qbm", "QBM training");
    qbm_cmd->require_subcommand(1);
    auto* qbm_train = qbm_cmd->add_subcommand("train", "one budgeted training run");
    add_common(qbm_train, qt_c);
    std::string qt_arm = "full", qt_scorer, qt_coreset;
    qbm_train->add_option("--arm", qt_arm, "full, uniform or minimax")
        ->check(CLI::IsMember({"full", "uniform", "minimax"}));
    qbm_train->add_option("--scorer", qt_scorer, "scorer checkpoint")->check(CLI::ExistingFile);
    qbm_train->add_option("--coreset", qt_coreset, "train on this coreset file instead")->check(CLI::ExistingFile);

    // experiment run
    Common ex_c;
    auto* experiment = app.add_subcommand("experiment", "multi-arm, multi-seed experiment");
    experiment->require_subcommand(1);
    auto* ex_run = experiment->add_subcommand("run", "run every arm for every seed");
    add_common(ex_run, ex_c);
    std::string ex_scorer;
    std::optional<unsigned> ex_threads;
    ex_run->add_option("--scorer", ex_scorer, "scorer checkpoint")->check(CLI::ExistingFile);
    ex_run->add_option("--threads", ex_threads, "worker threads (0 = all cores)");

    // oracle verify
    Common or_c;
    auto* oracle = app.add_subcommand("oracle", "exact oracle");
    oracle->require_subcommand(1);
    auto* or_verify = oracle->add_subcommand("verify", "compare implementations against the dense oracle");
    add_common(or_verify, or_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
        return 2;
    }

    try {
        if (bxs_gen->parsed()) {
            auto cfg = load_config(bxs_c);
            cfg.p = gen_p.value_or(cfg.p);
            cfg.q = gen_q.value_or(cfg.q);
            const auto data = qbm::generate_bxs_multiset(cfg.p, cfg.q);
            const auto path = out_dir(bxs_c) / "dataset.jsonl";
            std::ofstream out(path);
            qbm::write_dataset_jsonl(out, data);
            emit({{"dataset", path.string()}, {"n", data.size()}, {"distinct", qbm::distinct_count(data)}});
        } else if (sc_train->parsed()) {
            auto cfg = load_config(sc_c);
            cfg.scorer.checkpoint.clear();
            cfg.scorer.seed = sc_c.seed.value_or(cfg.scorer.seed);
            qbm::ScorerReport report;
            const auto net = qbm::obtain_scorer(cfg, &report);
            const json meta = {{"p", cfg.p},
                               {"q", cfg.q},
                               {"seed", report.seed},
                               {"attempts", report.attempts},
                               {"validation_accuracy", report.validation_accuracy},
                               {"labeled_set_size", cfg.scorer.labeled_set_size},
                               {"epoch_losses", report.epoch_losses}};
            const auto path = out_dir(sc_c) / "scorer.json";
            write_file(path, qbm::to_json(net, meta).dump() + "\n");
            emit({{"scorer", path.string()},
                  {"validation_accuracy", report.validation_accuracy},
                  {"attempts", report.attempts}});
        } else if (sc_eval->parsed()) {
            auto cfg = load_config(sc_c);
            const auto net = load_scorer(eval_scorer);
            if (!eval_input.empty()) {
                const auto data = dataset_for(cfg, eval_input);
                std::vector<qbm::SpinVector> spins;
                for (const auto& img : data.images()) {
                    spins.push_back(qbm::encode_spins(img));
                }
                emit({{"mean_score", qbm::model_score(net, spins, data.width(), data.height())},
                      {"n", data.size()}});
            } else {
                const auto seed = sc_c.seed.value_or(cfg.scorer.seed + 1);
                const auto [train, val] = qbm::make_labeled_set(cfg.p, cfg.q, cfg.scorer.labeled_set_size, seed);
                emit({{"seed", seed}, {"train_accuracy", qbm::accuracy(net, train)},
                      {"validation_accuracy", qbm::accuracy(net, val)}});
            }
        } else if (cs_build->parsed()) {
            auto cfg = load_config(cs_c);
            cfg.coreset_size = cs_m.value_or(cfg.coreset_size);
            if (cs_distance) {
                cfg.distance = *cs_distance == "inception" ? qbm::CoresetDistance::inception
                                                           : qbm::CoresetDistance::euclidean;
            }
            const auto data = dataset_for(cfg, cs_input);
            cfg.p = data.width();
            cfg.q = data.height();
            const auto seed = cs_c.seed.value_or(0);
            json header = {{"method", cs_method}, {"seed", seed}};
            std::optional<qbm::ScorerNet> net;
            if (cs_method == "minimax" && cfg.distance == qbm::CoresetDistance::inception) {
                if (cs_scorer.empty()) {
                    throw qbm::Error(qbm::ErrorCode::config, "inception distance needs --scorer");
                }
                net = load_scorer(cs_scorer);
                header["scorer_hash"] = qbm::hash_hex(qbm::fnv1a64(slurp(cs_scorer)));
            }
            qbm::WeightedDataset cs = cs_method == "uniform"
                                          ? qbm::uniform_coreset(data, cfg.coreset_size, seed)
                                          : qbm::minimax_coreset(data, cfg.coreset_size,
                                                                 net ? qbm::embedding_features(*net, data.images())
                                                                     : qbm::pixel_features(data.images()));
            header["distance"] = cs_method == "uniform"
                                     ? "none"
                                     : (cfg.distance == qbm::CoresetDistance::inception ? "inception" : "euclidean");
            if (cs_method == "uniform") {
                header["sampling"] = "without_replacement";
            }
            const auto data_features =
                net ? qbm::embedding_features(*net, data.images()) : qbm::pixel_features(data.images());
            const auto cs_features = net ? qbm::embedding_features(*net, cs.points()) : qbm::pixel_features(cs.points());
            const double radius = qbm::coreset_radius(data_features, cs_features);
            header["radius"] = radius;
            const auto path = out_dir(cs_c) / "coreset.jsonl";
            std::ofstream out(path);
            qbm::write_coreset_jsonl(out, cs, header);
            emit({{"coreset", path.string()}, {"m", cs.size()}, {"radius", radius}});
        } else if (qbm_train->parsed()) {
            auto cfg = load_config(qt_c);
            const auto seed = qt_c.seed.value_or(cfg.seeds.front());
            if (!qt_scorer.empty()) {
                cfg.scorer.checkpoint = qt_scorer;
            }
            const auto net = qbm::obtain_scorer(cfg);
            const auto arm = qbm::arm_from_string(qt_arm);
            qbm::WeightedDataset source = [&] {
                if (!qt_coreset.empty()) {
                    std::ifstream in(qt_coreset);
                    return qbm::read_coreset_jsonl(in);
                }
                return qbm::arm_source(cfg, qbm::generate_bxs_multiset(cfg.p, cfg.q), net, arm, seed);
            }();
            auto record = qbm::train_qbm(cfg, source, net, seed, arm, cfg.threads);
            const auto dir = out_dir(qt_c);
            record.checkpoint_path = "checkpoint.json";
            write_file(dir / record.checkpoint_path, qbm::to_json(record.final_state).dump(2) + "\n");
            write_file(dir / "run.jsonl", qbm::to_json(record).dump() + "\n");
            emit({{"final_score", record.scores.back()}, {"updates", record.scores.size()}});
        } else if (ex_run->parsed()) {
            auto cfg = load_config(ex_c);
            if (ex_c.seed) {
                for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
                    cfg.seeds[i] = *ex_c.seed + i;
                }
            }
            if (ex_threads) {
                cfg.threads = *ex_threads;
            }
            if (!ex_scorer.empty()) {
                cfg.scorer.checkpoint = ex_scorer;
            }
            const auto dir = out_dir(ex_c);
            if (!ex_c.config.empty()) {
                fs::copy_file(ex_c.config, dir / "config.input.json", fs::copy_options::overwrite_existing);
            }
            qbm::ScorerReport report;
            const auto net = qbm::obtain_scorer(cfg, &report);
            if (cfg.scorer.checkpoint.empty()) {
                write_file(dir / "scorer.json",
                           qbm::to_json(net, {{"validation_accuracy", report.validation_accuracy},
                                              {"seed", report.seed}})
                                   .dump() +
                               "\n");
            }
            const auto result = qbm::run_experiment(cfg, net, dir);
            json finals = json::object();
            for (const auto& c : result.curves) {
                finals[qbm::to_string(c.arm)] = c.mean.back();
            }
            emit({{"scores", (dir / "scores.csv").string()}, {"final_mean", finals}, {"config_hash", cfg.hash()}});
        } else if (or_verify->parsed()) {
            const auto checks = qbm::verify_oracles(or_c.seed.value_or(0));
            bool ok = true;
            for (const auto& c : checks) {
                emit({{"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
                ok = ok && c.passed;
            }
            return ok ? 0 : 1;
        }
    } catch (const qbm::Error& e) {
        std::cerr << json{{"error", qbm::to_string(e.code())}, {"message", e.what()}}.dump() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
