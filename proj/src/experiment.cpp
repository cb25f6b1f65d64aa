#include "qbm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <tuple>

#include "qbm/coreset.hpp"
#include "qbm/error.hpp"
#include "qbm/exact.hpp"
#include "qbm/parallel.hpp"

namespace qbm {

namespace {

// Stream tags for per-run randomness.
constexpr std::uint64_t kInitTag = 1;
constexpr std::uint64_t kBatchTag = 2;
constexpr std::uint64_t kSamplerTag = 3;
constexpr std::uint64_t kUniformTag = 4;

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw Error(ErrorCode::config, where + " must be an object");
    }
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : j.items()) {
        if (!ok.contains(key)) {
            throw Error(ErrorCode::config, "unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& into) {
    if (j.contains(key)) {
        into = j.at(key).get<T>();
    }
}

std::string initial_state_name(InitialState s) {
    return s == InitialState::constant_worldlines ? "constant_worldlines" : "independent_spins";
}

std::string distance_name(CoresetDistance d) { return d == CoresetDistance::inception ? "inception" : "euclidean"; }

} // namespace

std::string to_string(Arm arm) {
    switch (arm) {
    case Arm::full: return "full";
    case Arm::uniform: return "uniform";
    case Arm::minimax: return "minimax";
    }
    return "?";
}

Arm arm_from_string(const std::string& name) {
    if (name == "full") {
        return Arm::full;
    }
    if (name == "uniform") {
        return Arm::uniform;
    }
    if (name == "minimax") {
        return Arm::minimax;
    }
    throw Error(ErrorCode::config, "unknown arm '" + name + "'");
}

void ExperimentConfig::validate() const {
    if (p < 1 || q < 1 || p + q > kMaxEnumerationBits) {
        throw Error(ErrorCode::config, "image dimensions out of range");
    }
    if (n_hidden < 1) {
        throw Error(ErrorCode::config, "n_hidden must be at least 1");
    }
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw Error(ErrorCode::config, "gamma must be finite and non-negative");
    }
    train.validate();
    sampler(0).validate();
    if (arms.empty()) {
        throw Error(ErrorCode::config, "at least one arm required");
    }
    if (seeds.empty()) {
        throw Error(ErrorCode::config, "at least one seed required");
    }
    if (coreset_size < 1) {
        throw Error(ErrorCode::config, "coreset size must be at least 1");
    }
    if (!scorer.checkpoint.empty() && !std::filesystem::exists(scorer.checkpoint)) {
        throw Error(ErrorCode::config, "scorer checkpoint not found: " + scorer.checkpoint);
    }
}

SamplerConfig ExperimentConfig::sampler(std::uint64_t seed) const {
    SamplerConfig s;
    s.replicas = replicas;
    s.slices = slices;
    if (anneal_steps < 1) {
        throw Error(ErrorCode::config, "anneal_steps must be at least 1");
    }
    s.schedule = AnnealSchedule::linear(anneal_steps, beta_final);
    s.sweeps = sweeps;
    s.seed = seed;
    s.initial_state = initial_state;
    s.worldline_moves = worldline_moves;
    return s;
}

std::string ExperimentConfig::hash() const {
    auto j = to_json(*this);
    j.erase("threads");
    return hash_hex(fnv1a64(j.dump()));
}

nlohmann::json to_json(const ExperimentConfig& c) {
    std::vector<std::string> arms;
    for (auto a : c.arms) {
        arms.push_back(to_string(a));
    }
    const auto& o = c.scorer.options;
    return {
        {"dataset", {{"p", c.p}, {"q", c.q}}},
        {"model", {{"n_hidden", c.n_hidden}, {"gamma", c.gamma}}},
        {"train",
         {{"learning_rate", c.train.learning_rate},
          {"batch_size", c.train.batch_size},
          {"budget", c.train.budget},
          {"optimizer", c.train.plain_sgd ? "sgd" : "adam"}}},
        {"sampler",
         {{"replicas", c.replicas},
          {"slices", c.slices},
          {"anneal_steps", c.anneal_steps},
          {"beta_final", c.beta_final},
          {"sweeps", c.sweeps},
          {"initial_state", initial_state_name(c.initial_state)},
          {"worldline_moves", c.worldline_moves}}},
        {"arms", arms},
        {"coreset", {{"m", c.coreset_size}, {"distance", distance_name(c.distance)}}},
        {"seeds", c.seeds},
        {"scorer",
         {{"checkpoint", c.scorer.checkpoint},
          {"labeled_set_size", c.scorer.labeled_set_size},
          {"seed", c.scorer.seed},
          {"hidden_width", o.hidden_width},
          {"epochs", o.epochs},
          {"batch_size", o.batch_size},
          {"learning_rate", o.learning_rate},
          {"cosine_decay", o.cosine_decay},
          {"target_accuracy", o.target_accuracy},
          {"max_attempts", o.max_attempts}}},
        {"threads", c.threads},
    };
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
        check_keys(j, {"dataset", "model", "train", "sampler", "arms", "coreset", "seeds", "scorer", "threads"},
                   "config");
        if (j.contains("dataset")) {
            const auto& d = j["dataset"];
            check_keys(d, {"p", "q"}, "dataset");
            read(d, "p", c.p);
            read(d, "q", c.q);
        }
        if (j.contains("model")) {
            const auto& m = j["model"];
            check_keys(m, {"n_hidden", "gamma"}, "model");
            read(m, "n_hidden", c.n_hidden);
            read(m, "gamma", c.gamma);
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            check_keys(t, {"learning_rate", "batch_size", "budget", "optimizer"}, "train");
            read(t, "learning_rate", c.train.learning_rate);
            read(t, "batch_size", c.train.batch_size);
            read(t, "budget", c.train.budget);
            if (t.contains("optimizer")) {
                const auto opt = t["optimizer"].get<std::string>();
                if (opt != "adam" && opt != "sgd") {
                    throw Error(ErrorCode::config, "optimizer must be adam or sgd");
                }
                c.train.plain_sgd = opt == "sgd";
            }
        }
        if (j.contains("sampler")) {
            const auto& s = j["sampler"];
            check_keys(s,
                       {"replicas", "slices", "anneal_steps", "beta_final", "sweeps", "initial_state",
                        "worldline_moves"},
                       "sampler");
            read(s, "replicas", c.replicas);
            read(s, "slices", c.slices);
            read(s, "anneal_steps", c.anneal_steps);
            read(s, "beta_final", c.beta_final);
            read(s, "sweeps", c.sweeps);
            read(s, "worldline_moves", c.worldline_moves);
            if (s.contains("initial_state")) {
                const auto name = s["initial_state"].get<std::string>();
                if (name == "constant_worldlines") {
                    c.initial_state = InitialState::constant_worldlines;
                } else if (name == "independent_spins") {
                    c.initial_state = InitialState::independent_spins;
                } else {
                    throw Error(ErrorCode::config, "unknown initial_state '" + name + "'");
                }
            }
        }
        if (j.contains("arms")) {
            c.arms.clear();
            for (const auto& a : j["arms"]) {
                c.arms.push_back(arm_from_string(a.get<std::string>()));
            }
        }
        if (j.contains("coreset")) {
            const auto& s = j["coreset"];
            check_keys(s, {"m", "distance"}, "coreset");
            read(s, "m", c.coreset_size);
            if (s.contains("distance")) {
                const auto name = s["distance"].get<std::string>();
                if (name == "inception") {
                    c.distance = CoresetDistance::inception;
                } else if (name == "euclidean") {
                    c.distance = CoresetDistance::euclidean;
                } else {
                    throw Error(ErrorCode::config, "distance must be inception or euclidean");
                }
            }
        }
        read(j, "seeds", c.seeds);
        if (j.contains("scorer")) {
            const auto& s = j["scorer"];
            check_keys(s,
                       {"checkpoint", "labeled_set_size", "seed", "hidden_width", "epochs", "batch_size",
                        "learning_rate", "cosine_decay", "target_accuracy", "max_attempts"},
                       "scorer");
            auto& o = c.scorer.options;
            read(s, "checkpoint", c.scorer.checkpoint);
            read(s, "labeled_set_size", c.scorer.labeled_set_size);
            read(s, "seed", c.scorer.seed);
            read(s, "hidden_width", o.hidden_width);
            read(s, "epochs", o.epochs);
            read(s, "batch_size", o.batch_size);
            read(s, "learning_rate", o.learning_rate);
            read(s, "cosine_decay", o.cosine_decay);
            read(s, "target_accuracy", o.target_accuracy);
            read(s, "max_attempts", o.max_attempts);
        }
        read(j, "threads", c.threads);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::config, std::string("malformed config: ") + e.what());
    }
    return c;
}

nlohmann::json to_json(const RunRecord& r) {
    nlohmann::json j = {
        {"config_hash", r.config_hash},
        {"arm", to_string(r.arm)},
        {"seed", r.seed},
        {"scores", r.scores},
        {"wall_seconds", r.wall_seconds},
        {"checkpoint", r.checkpoint_path},
    };
    j["error"] = r.error ? nlohmann::json(*r.error) : nlohmann::json(nullptr);
    return j;
}

RunRecord train_qbm(const ExperimentConfig& config, const WeightedDataset& source, const ScorerNet& scorer,
                    std::uint64_t seed, Arm arm, unsigned sampler_threads) {
    config.train.validate();
    if (source.size() == 0) {
        throw Error(ErrorCode::empty_input, "training source is empty");
    }
    if (source.width() != config.p || source.height() != config.q) {
        throw Error(ErrorCode::dimension_mismatch, "source images do not match the configured p x q");
    }
    if (scorer.input_dim() != config.p * config.q) {
        throw Error(ErrorCode::dimension_mismatch, "scorer input width does not match p x q");
    }

    RunRecord record;
    record.config_hash = config.hash();
    record.arm = arm;
    record.seed = seed;

    const int nv = config.p * config.q;
    QbmParams params = init_params(source, config.n_hidden, config.gamma, Rng::stream(seed, kInitTag).next_u64());
    AdamState adam = AdamState::create(params.flat_size(), {config.train.learning_rate}, config.train.plain_sgd);
    MiniBatchStream batches(source.size(), config.train.batch_size, Rng::stream(seed, kBatchTag).next_u64());

    std::vector<SpinVector> batch;
    std::vector<double> weights;
    for (std::size_t update = 1; update <= config.train.budget; ++update) {
        const auto start = std::chrono::steady_clock::now();
        const auto next = batches.next();
        batch.clear();
        weights.clear();
        for (auto i : next.indices) {
            batch.push_back(encode_spins(source.points()[i]));
            weights.push_back(source.weights()[i]);
        }
        const PhaseStats positive = clamped_phase_stats(params, batch, weights);

        SamplerConfig sc = config.sampler(Rng::stream(seed, kSamplerTag, update).next_u64());
        sc.threads = sampler_threads;
        const auto samples = sample_gibbs(params, sc);
        const PhaseStats negative = negative_phase(samples, nv);
        record.scores.push_back(model_score(scorer, samples, config.p, config.q));

        std::tie(params, adam) = gradient_step(params, adam, positive, negative);
        if (!params.all_finite()) {
            throw Error(ErrorCode::non_finite, "parameters became non-finite at update " + std::to_string(update));
        }
        record.wall_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    record.final_state = {params, adam, "", static_cast<std::int64_t>(config.train.budget)};
    return record;
}

std::vector<ScoreCurve> aggregate(const ExperimentConfig& config, const std::vector<RunRecord>& records) {
    std::vector<ScoreCurve> curves;
    for (Arm arm : config.arms) {
        ScoreCurve c;
        c.arm = arm;
        c.mean.assign(config.train.budget, 0.0);
        c.stddev.assign(config.train.budget, 0.0);
        for (const auto& r : records) {
            if (r.arm == arm && !r.error) {
                ++c.n_seeds;
                for (std::size_t u = 0; u < config.train.budget; ++u) {
                    c.mean[u] += r.scores.at(u);
                }
            }
        }
        if (c.n_seeds == 0) {
            throw Error(ErrorCode::training_failed, "no successful run for arm " + to_string(arm));
        }
        const auto n = static_cast<double>(c.n_seeds);
        for (auto& m : c.mean) {
            m /= n;
        }
        for (const auto& r : records) {
            if (r.arm == arm && !r.error) {
                for (std::size_t u = 0; u < config.train.budget; ++u) {
                    const double d = r.scores[u] - c.mean[u];
                    c.stddev[u] += d * d;
                }
            }
        }
        for (auto& s : c.stddev) {
            s = std::sqrt(s / n);
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

void write_score_csv(std::ostream& out, const std::vector<ScoreCurve>& curves) {
    out << "update,arm,mean_score,std_score,n_seeds\n";
    char buf[160];
    for (const auto& c : curves) {
        for (std::size_t u = 0; u < c.mean.size(); ++u) {
            std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g,%zu\n", u + 1, to_string(c.arm).c_str(), c.mean[u],
                          c.stddev[u], c.n_seeds);
            out << buf;
        }
    }
}

WeightedDataset arm_source(const ExperimentConfig& config, const Dataset& dataset, const ScorerNet& scorer, Arm arm,
                           std::uint64_t seed) {
    switch (arm) {
    case Arm::full: return WeightedDataset::unit_weights(dataset);
    case Arm::uniform: return uniform_coreset(dataset, config.coreset_size, Rng::stream(seed, kUniformTag).next_u64());
    case Arm::minimax: {
        const auto features = config.distance == CoresetDistance::inception
                                  ? embedding_features(scorer, dataset.images())
                                  : pixel_features(dataset.images());
        return minimax_coreset(dataset, config.coreset_size, features);
    }
    }
    throw Error(ErrorCode::config, "unknown arm");
}

ScorerNet obtain_scorer(const ExperimentConfig& config, ScorerReport* report) {
    if (!config.scorer.checkpoint.empty()) {
        std::ifstream in(config.scorer.checkpoint);
        if (!in) {
            throw Error(ErrorCode::io, "cannot open scorer checkpoint " + config.scorer.checkpoint);
        }
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::io, std::string("malformed scorer checkpoint: ") + e.what());
        }
        ScorerNet net = scorer_from_json(j);
        if (net.input_dim() != config.p * config.q) {
            throw Error(ErrorCode::dimension_mismatch, "scorer checkpoint input width does not match p x q");
        }
        return net;
    }
    const auto [train, val] = make_labeled_set(config.p, config.q, config.scorer.labeled_set_size, config.scorer.seed);
    return train_scorer(train, val, config.scorer.seed, config.scorer.options, report);
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
    if (!out) {
        throw Error(ErrorCode::io, "failed writing " + path.string());
    }
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const ScorerNet& scorer,
                                const std::optional<std::filesystem::path>& out) {
    config.validate();
    const Dataset dataset = generate_bxs_multiset(config.p, config.q);

    struct Job {
        Arm arm;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Arm arm : config.arms) {
        for (auto seed : config.seeds) {
            jobs.push_back({arm, seed});
        }
    }

    std::optional<WeightedDataset> minimax;
    if (std::find(config.arms.begin(), config.arms.end(), Arm::minimax) != config.arms.end()) {
        minimax = arm_source(config, dataset, scorer, Arm::minimax, 0);
    }

    const unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
    const unsigned sampler_threads = std::max<unsigned>(1, threads / static_cast<unsigned>(jobs.size()));
    std::vector<RunRecord> runs(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        const Job& job = jobs[i];
        try {
            const WeightedDataset source =
                job.arm == Arm::minimax ? *minimax : arm_source(config, dataset, scorer, job.arm, job.seed);
            runs[i] = train_qbm(config, source, scorer, job.seed, job.arm, sampler_threads);
        } catch (const std::exception& e) {
            runs[i] = RunRecord{};
            runs[i].config_hash = config.hash();
            runs[i].arm = job.arm;
            runs[i].seed = job.seed;
            runs[i].error = e.what();
        }
    });

    ExperimentResult result;
    result.runs = std::move(runs);
    if (out) {
        std::filesystem::create_directories(*out / "checkpoints");
        for (auto& r : result.runs) {
            if (!r.error) {
                const auto name = to_string(r.arm) + "_seed" + std::to_string(r.seed) + ".json";
                r.checkpoint_path = (std::filesystem::path("checkpoints") / name).string();
                write_text(*out / r.checkpoint_path, to_json(r.final_state).dump(2) + "\n");
            }
        }
        auto cfg = to_json(config);
        cfg["config_hash"] = config.hash();
        cfg["scorer_hash"] = hash_hex(fnv1a64(to_json(scorer, nlohmann::json::object()).dump()));
        cfg["uniform_sampling"] = "without_replacement";
        write_text(*out / "config.json", cfg.dump(2) + "\n");
        std::ofstream runs_out(*out / "runs.jsonl");
        for (const auto& r : result.runs) {
            runs_out << to_json(r).dump() << '\n';
        }
        if (!runs_out) {
            throw Error(ErrorCode::io, "failed writing runs.jsonl");
        }
    }
    result.curves = aggregate(config, result.runs);
    if (out) {
        std::ofstream csv(*out / "scores.csv");
        write_score_csv(csv, result.curves);
        if (!csv) {
            throw Error(ErrorCode::io, "failed writing scores.csv");
        }
    }
    return result;
}

std::vector<OracleCheck> verify_oracles(std::uint64_t seed) {
    std::vector<OracleCheck> checks;
    char buf[200];

    {
        Rng rng(seed);
        double worst = 0.0;
        for (int trial = 0; trial < 100; ++trial) {
            const int nv = 1 + static_cast<int>(rng.below(4));
            const int nh = 1 + static_cast<int>(rng.below(3));
            const double gamma = rng.below(2) == 0 ? 0.5 : 2.0;
            Eigen::VectorXd bv(nv), bh(nh);
            Eigen::MatrixXd w(nv, nh);
            for (auto& x : bv.reshaped()) x = rng.normal();
            for (auto& x : bh.reshaped()) x = rng.normal();
            for (auto& x : w.reshaped()) x = rng.normal();
            const QbmParams params(gamma, bv, bh, w);
            SpinVector v(static_cast<std::size_t>(nv));
            for (auto& s : v) {
                s = static_cast<std::int8_t>(rng.spin());
            }
            const Eigen::VectorXd got = positive_phase_hidden(params, v);
            const Eigen::VectorXd want = exact::clamped_hidden_oracle(params, v);
            worst = std::max(worst, (got - want).cwiseAbs().maxCoeff());
        }
        std::snprintf(buf, sizeof buf, "max abs error %.3g over 100 random models", worst);
        checks.push_back({"positive_phase_vs_dense", worst <= 1e-10, buf});
    }

    {
        const double gamma = 2.0;
        const double b = 0.7;
        const double dense = exact::exact_model_stats(QbmParams(gamma, Eigen::VectorXd::Constant(1, b),
                                                                Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Zero(1, 1)))
                                 .units[0];
        const double closed = clamped_expectation(gamma, b);
        std::snprintf(buf, sizeof buf, "dense %.12f closed form %.12f", dense, closed);
        checks.push_back({"single_qubit_closed_form", std::abs(dense - closed) <= 1e-10, buf});
    }

    {
        const QbmParams params(2.0, Eigen::VectorXd::Constant(1, 0.3), Eigen::VectorXd::Constant(1, -0.2),
                               Eigen::MatrixXd::Constant(1, 1, 0.4));
        const PhaseStats exact_stats = exact::exact_model_stats(params);
        SamplerConfig sc;
        sc.replicas = 4096;
        sc.slices = 64;
        sc.schedule = AnnealSchedule::linear(5);
        sc.sweeps = 10;
        sc.seed = seed;
        const auto samples = sample_gibbs(params, sc);
        const PhaseStats est = negative_phase(samples, 1);
        const double err = std::max({std::abs(est.units[0] - exact_stats.units[0]),
                                     std::abs(est.units[1] - exact_stats.units[1]),
                                     std::abs(est.edges(0, 0) - exact_stats.edges(0, 0))});
        std::snprintf(buf, sizeof buf, "max abs error %.4f (K=4096, M=64)", err);
        checks.push_back({"sampler_vs_dense", err <= 0.05, buf});
    }

    {
        const std::vector<double> p{0.25, 0.25, 0.5};
        const std::vector<double> q{0.5, 0.25, 0.25};
        const double self = exact::kl_divergence(p, p);
        const double kl = exact::kl_divergence(p, q);
        const double want = 0.25 * std::log(0.5) + 0.5 * std::log(2.0);
        std::snprintf(buf, sizeof buf, "KL(p,p)=%.3g KL(p,q)=%.12f", self, kl);
        checks.push_back({"kl_divergence", self == 0.0 && std::abs(kl - want) <= 1e-12, buf});
    }
    return checks;
}

} // namespace qbm
