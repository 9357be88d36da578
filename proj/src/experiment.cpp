#include "fairrec/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "fairrec/csv.hpp"
#include "fairrec/stats.hpp"

namespace fairrec {

namespace fs = std::filesystem;
using nlohmann::json;

static constexpr const char* kVersion = "0.1.0";

std::string mode_name(PipelineMode m) {
    switch (m) {
        case PipelineMode::Baseline: return "baseline";
        case PipelineMode::DebiasOnly: return "debias-only";
        case PipelineMode::Full: return "full";
    }
    return "?";
}

PipelineMode mode_from_name(const std::string& name) {
    if (name == "baseline") return PipelineMode::Baseline;
    if (name == "debias-only") return PipelineMode::DebiasOnly;
    if (name == "full") return PipelineMode::Full;
    throw ConfigError("unknown pipeline mode '" + name + "'");
}

// --- config (de)serialization ------------------------------------------------

namespace {

json distribution_to_json(const DistributionSpec& d) {
    switch (d.family) {
        case DistributionSpec::Family::PointMass:
            return {{"family", "point_mass"}, {"value", d.a}};
        case DistributionSpec::Family::Uniform:
            return {{"family", "uniform"}, {"lo", d.a}, {"hi", d.b}};
        case DistributionSpec::Family::TruncNormal:
            return {{"family", "trunc_normal"}, {"mean", d.a}, {"sd", d.b}};
    }
    throw ConfigError("bad distribution family");
}

DistributionSpec distribution_from_json(const json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "point_mass") return DistributionSpec::point_mass(j.at("value").get<double>());
    if (family == "uniform")
        return DistributionSpec::uniform(j.at("lo").get<double>(), j.at("hi").get<double>());
    if (family == "trunc_normal")
        return DistributionSpec::trunc_normal(j.at("mean").get<double>(), j.at("sd").get<double>());
    throw ConfigError("unknown distribution family '" + family + "'");
}

json noise_to_json(const NoiseSpec& n) {
    switch (n.kind) {
        case NoiseSpec::Kind::None: return {{"kind", "none"}};
        case NoiseSpec::Kind::UniformWidth: return {{"kind", "uniform"}, {"half_width", n.param}};
        case NoiseSpec::Kind::TruncNormalSd: return {{"kind", "trunc_normal"}, {"sd", n.param}};
    }
    throw ConfigError("bad noise kind");
}

NoiseSpec noise_from_json(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "none") return NoiseSpec::none();
    if (kind == "uniform") return NoiseSpec::uniform_width(j.at("half_width").get<double>());
    if (kind == "trunc_normal") return NoiseSpec::trunc_normal_sd(j.at("sd").get<double>());
    throw ConfigError("unknown noise kind '" + kind + "'");
}

json synth_to_json(const GenerativeConfig& g) {
    return {{"scale_max", g.scale_max},
            {"users", g.users},
            {"items", g.items},
            {"disadvantaged_fraction", g.disadvantaged_fraction},
            {"density", g.density},
            {"alpha", distribution_to_json(g.alpha)},
            {"preference_noise", noise_to_json(g.preference_noise)},
            {"omega", distribution_to_json(g.omega)},
            {"bias_noise", noise_to_json(g.bias_noise)},
            {"clamp_to_scale", g.clamp_to_scale},
            {"retain_realized", g.retain_realized},
            {"seed", g.seed}};
}

GenerativeConfig synth_from_json(const json& j) {
    GenerativeConfig g;
    g.scale_max = j.value("scale_max", g.scale_max);
    g.users = j.value("users", g.users);
    g.items = j.value("items", g.items);
    g.disadvantaged_fraction = j.value("disadvantaged_fraction", g.disadvantaged_fraction);
    g.density = j.value("density", g.density);
    if (j.contains("alpha")) g.alpha = distribution_from_json(j.at("alpha"));
    if (j.contains("preference_noise")) g.preference_noise = noise_from_json(j.at("preference_noise"));
    if (j.contains("omega")) g.omega = distribution_from_json(j.at("omega"));
    if (j.contains("bias_noise")) g.bias_noise = noise_from_json(j.at("bias_noise"));
    g.clamp_to_scale = j.value("clamp_to_scale", g.clamp_to_scale);
    g.retain_realized = j.value("retain_realized", g.retain_realized);
    g.seed = j.value("seed", g.seed);
    return g;
}

json model_to_json(const ModelConfig& m) {
    return {{"algorithm", algorithm_name(m.algorithm)},
            {"knn",
             {{"k", m.knn.k},
              {"similarity", m.knn.similarity == Similarity::Pearson ? "pearson" : "cosine"},
              {"min_overlap", m.knn.min_overlap},
              {"shrink", m.knn.shrink}}},
            {"als", {{"factors", m.als.factors}, {"lambda", m.als.lambda}, {"iterations", m.als.iterations}}},
            {"svd",
             {{"factors", m.svd.factors},
              {"learning_rate", m.svd.learning_rate},
              {"reg", m.svd.reg},
              {"epochs", m.svd.epochs}}}};
}

ModelConfig model_from_json(const json& j) {
    ModelConfig m;
    m.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>());
    if (j.contains("knn")) {
        const json& k = j.at("knn");
        m.knn.k = k.value("k", m.knn.k);
        if (k.contains("similarity")) {
            const std::string s = k.at("similarity").get<std::string>();
            if (s == "pearson")
                m.knn.similarity = Similarity::Pearson;
            else if (s == "cosine")
                m.knn.similarity = Similarity::Cosine;
            else
                throw ConfigError("unknown similarity '" + s + "'");
        }
        m.knn.min_overlap = k.value("min_overlap", m.knn.min_overlap);
        m.knn.shrink = k.value("shrink", m.knn.shrink);
    }
    if (j.contains("als")) {
        const json& a = j.at("als");
        m.als.factors = a.value("factors", m.als.factors);
        m.als.lambda = a.value("lambda", m.als.lambda);
        m.als.iterations = a.value("iterations", m.als.iterations);
    }
    if (j.contains("svd")) {
        const json& s = j.at("svd");
        m.svd.factors = s.value("factors", m.svd.factors);
        m.svd.learning_rate = s.value("learning_rate", m.svd.learning_rate);
        m.svd.reg = s.value("reg", m.svd.reg);
        m.svd.epochs = s.value("epochs", m.svd.epochs);
    }
    return m;
}

json config_to_json(const ExperimentConfig& c) {
    json data;
    if (c.data.synth) {
        data = {{"synth", synth_to_json(*c.data.synth)}};
    } else {
        data = {{"ratings", c.data.ratings_path},
                {"catalog", c.data.catalog_path},
                {"scale_max", c.data.load.scale_max},
                {"zero_policy", c.data.load.zero_policy == ZeroPolicy::Drop ? "drop" : "error"},
                {"delimiter", std::string(1, c.data.load.delimiter)}};
    }
    json modes = json::array();
    for (PipelineMode m : c.modes) modes.push_back(mode_name(m));
    json algorithms = json::array();
    for (const ModelConfig& m : c.algorithms) algorithms.push_back(model_to_json(m));
    json eval = {{"top_n", c.eval.top_n},
                 {"bin_width", c.eval.bin_width},
                 {"bias_profile", c.eval.bias_profile == BiasProfileMode::TopN ? "top-n" : "all-pairs"},
                 {"graded_gains", c.eval.graded_gains}};
    if (c.eval.relevance_threshold)
        eval["relevance_threshold"] = *c.eval.relevance_threshold;
    else
        eval["relevance_threshold"] = nullptr;
    return {{"data", data},
            {"filter",
             {{"enabled", c.filter.enabled},
              {"min_item_ratings", c.filter.min_item_ratings},
              {"min_user_ratings", c.filter.min_user_ratings},
              {"mode", c.filter.mode == FilterMode::Sequential ? "sequential" : "fixpoint"}}},
            {"split",
             {{"test_user_fraction", c.test_user_fraction}, {"holdout_fraction", c.holdout_fraction}}},
            {"algorithms", algorithms},
            {"modes", modes},
            {"eval", eval},
            {"seed", c.seed},
            {"force_zero_theta", c.force_zero_theta},
            {"emit_recommendations", c.emit_recommendations}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    const json& data = j.at("data");
    if (data.contains("synth")) {
        c.data.synth = synth_from_json(data.at("synth"));
    } else {
        c.data.ratings_path = data.at("ratings").get<std::string>();
        c.data.catalog_path = data.at("catalog").get<std::string>();
        c.data.load.scale_max = data.value("scale_max", 5.0);
        const std::string zp = data.value("zero_policy", std::string("drop"));
        if (zp == "drop")
            c.data.load.zero_policy = ZeroPolicy::Drop;
        else if (zp == "error")
            c.data.load.zero_policy = ZeroPolicy::Error;
        else
            throw ConfigError("unknown zero_policy '" + zp + "'");
        const std::string delim = data.value("delimiter", std::string(","));
        if (delim.size() != 1) throw ConfigError("delimiter must be a single character");
        c.data.load.delimiter = delim[0];
    }
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        c.filter.enabled = f.value("enabled", true);
        c.filter.min_item_ratings = f.value("min_item_ratings", c.filter.min_item_ratings);
        c.filter.min_user_ratings = f.value("min_user_ratings", c.filter.min_user_ratings);
        const std::string m = f.value("mode", std::string("sequential"));
        if (m == "sequential")
            c.filter.mode = FilterMode::Sequential;
        else if (m == "fixpoint")
            c.filter.mode = FilterMode::Fixpoint;
        else
            throw ConfigError("unknown filter mode '" + m + "'");
    }
    if (j.contains("split")) {
        c.test_user_fraction = j.at("split").value("test_user_fraction", c.test_user_fraction);
        c.holdout_fraction = j.at("split").value("holdout_fraction", c.holdout_fraction);
    }
    for (const json& m : j.at("algorithms")) c.algorithms.push_back(model_from_json(m));
    if (j.contains("modes")) {
        c.modes.clear();
        for (const json& m : j.at("modes")) c.modes.push_back(mode_from_name(m.get<std::string>()));
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        c.eval.top_n = e.value("top_n", c.eval.top_n);
        if (e.contains("relevance_threshold") && !e.at("relevance_threshold").is_null())
            c.eval.relevance_threshold = e.at("relevance_threshold").get<double>();
        c.eval.bin_width = e.value("bin_width", c.eval.bin_width);
        const std::string bp = e.value("bias_profile", std::string("top-n"));
        if (bp == "top-n")
            c.eval.bias_profile = BiasProfileMode::TopN;
        else if (bp == "all-pairs")
            c.eval.bias_profile = BiasProfileMode::AllPairs;
        else
            throw ConfigError("unknown bias_profile '" + bp + "'");
        c.eval.graded_gains = e.value("graded_gains", c.eval.graded_gains);
    }
    c.seed = j.value("seed", c.seed);
    c.force_zero_theta = j.value("force_zero_theta", c.force_zero_theta);
    c.emit_recommendations = j.value("emit_recommendations", c.emit_recommendations);
    if (c.algorithms.empty()) throw ConfigError("config names no algorithms");
    if (c.modes.empty()) throw ConfigError("config names no modes");
    return c;
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& json_text) {
    json j = json::parse(json_text, nullptr, true, /*ignore_comments=*/true);
    return config_from_json(j);
}

std::string serialize_experiment_config(const ExperimentConfig& config) {
    return config_to_json(config).dump(2) + "\n";
}

std::string config_fingerprint(const ExperimentConfig& config) {
    return to_hex(fnv1a64(serialize_experiment_config(config)));
}

GenerativeConfig parse_generative_config(const std::string& json_text) {
    return synth_from_json(json::parse(json_text, nullptr, true, /*ignore_comments=*/true));
}

// --- run --------------------------------------------------------------------

namespace {

struct WorkingData {
    RatingsDataset dataset;  // loaded/generated, catalog attached, filtered
    ItemCatalog catalog;
    SplitResult split;
    double relevance_threshold = 0.0;
};

ItemCatalog catalog_of(const RatingsDataset& ds) {
    ItemCatalog catalog;
    for (Index i = 0; i < ds.item_count(); ++i) catalog.add(ds.item_id(i), ds.item_group(i));
    return catalog;
}

WorkingData acquire_data(const ExperimentConfig& config) {
    WorkingData w;
    if (config.data.synth) {
        SyntheticDataset synth = generate_dataset(*config.data.synth);
        w.dataset = std::move(synth.ratings);
    } else {
        RatingsDataset raw = load_ratings(config.data.ratings_path, config.data.load);
        ItemCatalog catalog = load_catalog(config.data.catalog_path, config.data.load.delimiter);
        w.dataset = with_catalog(raw, catalog);
    }
    if (config.filter.enabled)
        w.dataset = filter_by_activity(w.dataset, config.filter.min_item_ratings,
                                       config.filter.min_user_ratings, config.filter.mode);
    w.catalog = catalog_of(w.dataset);
    SplitSpec spec;
    spec.test_user_fraction = config.test_user_fraction;
    spec.holdout_fraction = config.holdout_fraction;
    spec.seed = substream_seed(config.seed, fnv1a64("split"));
    w.split = split_users(w.dataset, spec);
    w.relevance_threshold = config.eval.relevance_threshold
                                ? *config.eval.relevance_threshold
                                : std::ceil(0.8 * w.dataset.scale_max());
    return w;
}

BiasMap zero_bias_map(const RatingsDataset& ds) {
    std::vector<UserBiasScore> scores(ds.user_count());
    for (Index u = 0; u < ds.user_count(); ++u) {
        scores[u].user_id = ds.user_id(u);
        scores[u].theta = 0.0;
        scores[u].defined = false;
    }
    return BiasMap(std::move(scores));
}

struct CellEval {
    std::vector<UserBiasScore> theta_tilde;
    double rmse_value = 0.0;
    double mae_value = 0.0;
    double ndcg_value = 0.0;
    double mrr_value = 0.0;
    std::size_t ranked_users = 0;
    std::size_t pairs = 0;
    std::vector<RecommendationProfile> profiles;  // only when recommendations are emitted
};

/// Per-test-user evaluation of one trained model under one mode. Users are
/// independent; the loop runs in parallel and reduces in index order.
CellEval evaluate_cell(const RatingPredictor& model, const RatingsDataset& train,
                       const WorkingData& w, const BiasMap& thetas, PipelineMode mode,
                       const EvalSettings& eval, bool keep_profiles) {
    const std::size_t n_test = w.split.test_users.size();
    const double scale_max = w.dataset.scale_max();
    const std::vector<GroupLabel>& groups = train.item_groups();

    // Fallback for held-out items absent from the training universe: the
    // user's training-view mean in the model's own prediction space.
    std::vector<double> user_mean(train.user_count(), 0.0);
    for (Index u = 0; u < train.user_count(); ++u) {
        const std::uint32_t lo = train.user_offsets()[u], hi = train.user_offsets()[u + 1];
        double s = 0.0;
        for (std::uint32_t k = lo; k < hi; ++k) s += train.user_values()[k];
        user_mean[u] = (hi > lo) ? s / static_cast<double>(hi - lo) : 0.0;
    }

    struct PerUser {
        UserBiasScore theta;
        std::vector<double> preds, truths;
        double ndcg = 0.0, mrr = 0.0;
        bool ranked = false;
        RecommendationProfile profile;
    };
    std::vector<PerUser> slots(n_test);

#pragma omp parallel for schedule(dynamic, 8)
    for (long long t = 0; t < static_cast<long long>(n_test); ++t) {
        const TestUserSplit& tu = w.split.test_users[static_cast<std::size_t>(t)];
        PerUser& slot = slots[static_cast<std::size_t>(t)];
        const Index u = *train.find_user(tu.user_id);
        const double theta_u = thetas.at(tu.user_id).theta;

        std::vector<bool> excluded(train.item_count(), false);
        for (const HeldOutRating& r : tu.visible) {
            auto i = train.find_item(r.item_id);
            if (i) excluded[*i] = true;
        }
        std::vector<ScoredItem> scored = score_candidates(model, u, excluded, train.item_count());
        if (mode == PipelineMode::Full) preference_correct_indexed(scored, theta_u, groups);

        // Held-out accuracy pairs, clamped to the report scale.
        const double correction = std::exp(-theta_u);
        for (const HeldOutRating& r : tu.held_out) {
            auto i = train.find_item(r.item_id);
            double pred = i ? model.predict(u, *i) : user_mean[u];
            if (mode == PipelineMode::Full) {
                auto group = w.catalog.lookup(r.item_id);
                if (group && *group == GroupLabel::Disadvantaged) pred *= correction;
            }
            slot.preds.push_back(std::min(scale_max, std::max(1.0, pred)));
            slot.truths.push_back(r.value);
        }

        // Ranking over the (re-ranked, in full mode) top-N list.
        RecommendationProfile profile = top_n_profile(scored, eval.top_n, train, tu.user_id);
        std::unordered_set<std::string> relevant;
        std::unordered_map<std::string, double> gains;
        for (const HeldOutRating& r : tu.held_out) {
            if (r.value >= w.relevance_threshold) {
                relevant.insert(r.item_id);
                gains.emplace(r.item_id, r.value);
            }
        }
        if (!relevant.empty()) {
            slot.ndcg = ndcg_at_n(profile.items, relevant, eval.top_n,
                                  eval.graded_gains ? &gains : nullptr);
            slot.mrr = mrr(profile.items, relevant);
            slot.ranked = true;
        }

        // Recommendation-profile bias.
        if (eval.bias_profile == BiasProfileMode::TopN) {
            slot.theta = recommendation_log_bias(profile, w.catalog);
        } else {
            std::vector<std::pair<GroupLabel, double>> pairs;
            pairs.reserve(scored.size());
            for (const ScoredItem& s : scored)
                if (s.score > 0.0) pairs.emplace_back(groups[s.item], s.score);
            slot.theta = user_log_bias(group_geometric_means(pairs));
            slot.theta.user_id = tu.user_id;
        }
        if (keep_profiles) slot.profile = std::move(profile);
    }

    CellEval out;
    std::vector<double> preds, truths;
    double ndcg_sum = 0.0, mrr_sum = 0.0;
    for (PerUser& slot : slots) {
        out.theta_tilde.push_back(std::move(slot.theta));
        preds.insert(preds.end(), slot.preds.begin(), slot.preds.end());
        truths.insert(truths.end(), slot.truths.begin(), slot.truths.end());
        if (slot.ranked) {
            ndcg_sum += slot.ndcg;
            mrr_sum += slot.mrr;
            out.ranked_users += 1;
        }
        if (keep_profiles) out.profiles.push_back(std::move(slot.profile));
    }
    out.pairs = preds.size();
    out.rmse_value = rmse(preds, truths);
    out.mae_value = mae(preds, truths);
    out.ndcg_value = out.ranked_users ? ndcg_sum / static_cast<double>(out.ranked_users) : 0.0;
    out.mrr_value = out.ranked_users ? mrr_sum / static_cast<double>(out.ranked_users) : 0.0;
    return out;
}

json metrics_to_json(const MetricsReport& m, std::uint64_t split_hash, const EvalSettings& eval,
                     double relevance_threshold, const ModelConfig& model_config) {
    return {{"fingerprint", m.fingerprint},
            {"algorithm", m.algorithm},
            {"mode", m.mode},
            {"split_hash", to_hex(split_hash)},
            {"mean_log_bias", m.mean_log_bias},
            {"bias_std", m.bias_std},
            {"bias_defined_users", m.bias_defined_users},
            {"rmse", m.rmse},
            {"mae", m.mae},
            {"ndcg", m.ndcg},
            {"mrr", m.mrr},
            {"n_users", m.n_users},
            {"n_pairs", m.n_pairs},
            {"eval",
             {{"top_n", eval.top_n},
              {"relevance_threshold", relevance_threshold},
              {"bias_profile", eval.bias_profile == BiasProfileMode::TopN ? "top-n" : "all-pairs"},
              {"graded_gains", eval.graded_gains},
              {"bin_width", eval.bin_width}}},
            {"model", model_to_json(model_config)}};
}

MetricsReport metrics_from_json(const json& j) {
    MetricsReport m;
    m.fingerprint = j.at("fingerprint").get<std::string>();
    m.algorithm = j.at("algorithm").get<std::string>();
    m.mode = j.at("mode").get<std::string>();
    m.mean_log_bias = j.at("mean_log_bias").get<double>();
    m.bias_std = j.at("bias_std").get<double>();
    m.bias_defined_users = j.at("bias_defined_users").get<std::size_t>();
    m.rmse = j.at("rmse").get<double>();
    m.mae = j.at("mae").get<double>();
    m.ndcg = j.at("ndcg").get<double>();
    m.mrr = j.at("mrr").get<double>();
    m.n_users = j.at("n_users").get<std::size_t>();
    m.n_pairs = j.at("n_pairs").get<std::size_t>();
    return m;
}

void save_recommendations(const std::vector<RecommendationProfile>& profiles,
                          const std::string& path) {
    DelimitedWriter out(path, ',');
    out.write_row({"user_id", "rank", "item_id", "predicted"});
    for (const RecommendationProfile& p : profiles) {
        for (std::size_t rank = 0; rank < p.items.size(); ++rank)
            out.write_row({p.user_id, std::to_string(rank + 1), p.items[rank],
                           format_double(p.predicted.at(p.items[rank]))});
    }
    out.close();
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                         bool with_timings) {
    const auto t_start = std::chrono::steady_clock::now();
    RunResult result;
    result.fingerprint = config_fingerprint(config);

    fs::create_directories(out_dir);
    write_text_file(out_dir + "/config.json", serialize_experiment_config(config));

    WorkingData w = acquire_data(config);
    result.partition_hash = w.split.partition_hash;

    // Manifest goes out before any cell result.
    std::vector<std::string> planned;
    planned.push_back("config.json");
    planned.push_back("manifest.json");
    planned.push_back("status.json");
    planned.push_back("theta_input.csv");
    planned.push_back("input_bias_histogram.csv");
    std::vector<std::pair<std::string, std::pair<ModelConfig, PipelineMode>>> cells;
    for (const ModelConfig& model : config.algorithms) {
        for (PipelineMode mode : config.modes) {
            const std::string name = algorithm_name(model.algorithm) + "_" + mode_name(mode);
            cells.emplace_back(name, std::make_pair(model, mode));
            planned.push_back("cells/" + name + "/metrics.json");
            planned.push_back("cells/" + name + "/theta_tilde.csv");
            planned.push_back("cells/" + name + "/theta_tilde_histogram.csv");
            if (config.emit_recommendations) planned.push_back("cells/" + name + "/recommendations.csv");
        }
    }
    json manifest = {{"fingerprint", result.fingerprint},
                     {"seed", config.seed},
                     {"version", kVersion},
                     {"split_hash", to_hex(w.split.partition_hash)},
                     {"test_users", w.split.test_users.size()},
                     {"skipped_small_profiles", w.split.skipped_small_profiles},
                     {"outputs", planned}};
    write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");

    // Input bias over the training view: test users contribute only their
    // visible ratings, so the estimate never sees evaluation targets.
    BiasMap thetas = config.force_zero_theta ? zero_bias_map(w.split.train)
                                             : compute_user_bias(w.split.train);
    save_bias_map(thetas, out_dir + "/theta_input.csv");
    save_histogram(bias_histogram(thetas.scores(), config.eval.bin_width),
                   out_dir + "/input_bias_histogram.csv");

    std::vector<Index> test_idx;
    test_idx.reserve(w.split.test_users.size());
    for (const TestUserSplit& tu : w.split.test_users)
        test_idx.push_back(*w.split.train.find_user(tu.user_id));

    // The debiased training view is shared by debias-only and full.
    const bool needs_debiased =
        std::any_of(config.modes.begin(), config.modes.end(),
                    [](PipelineMode m) { return m != PipelineMode::Baseline; });
    std::optional<DebiasedDataset> debiased;
    if (needs_debiased) debiased = debias_ratings(w.split.train, thetas);

    json timings = json::object();
    for (const ModelConfig& model_config : config.algorithms) {
        const std::string algo = algorithm_name(model_config.algorithm);
        ModelConfig seeded = model_config;
        seeded.seed = substream_seed(config.seed, fnv1a64("model:" + algo));

        // One trained model per training space, shared across modes.
        std::unique_ptr<RatingPredictor> model_raw, model_debiased;
        std::string train_error;
        auto t_train = std::chrono::steady_clock::now();
        try {
            for (PipelineMode mode : config.modes) {
                if (mode == PipelineMode::Baseline && !model_raw) {
                    model_raw = train_model(w.split.train, seeded);
                    model_raw->fold_in(test_idx);
                } else if (mode != PipelineMode::Baseline && !model_debiased) {
                    model_debiased = train_model(debiased->ratings, seeded);
                    model_debiased->fold_in(test_idx);
                }
            }
        } catch (const Error& e) {
            train_error = e.what();
        }
        if (with_timings)
            timings[algo + "_train_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                              std::chrono::steady_clock::now() - t_train)
                                              .count();

        for (PipelineMode mode : config.modes) {
            CellOutcome outcome;
            outcome.name = algo + "_" + mode_name(mode);
            const std::string cell_dir = out_dir + "/cells/" + outcome.name;
            fs::create_directories(cell_dir);
            try {
                if (!train_error.empty()) throw Error(train_error);
                const bool baseline = mode == PipelineMode::Baseline;
                const RatingPredictor& model = baseline ? *model_raw : *model_debiased;
                const RatingsDataset& train = baseline ? w.split.train : debiased->ratings;
                CellEval eval = evaluate_cell(model, train, w, thetas, mode, config.eval,
                                              config.emit_recommendations);
                BiasAggregate agg = aggregate_bias(eval.theta_tilde, config.eval.bin_width);
                MetricsReport& m = outcome.metrics;
                m.fingerprint = result.fingerprint + ":" + algo;
                m.algorithm = algo;
                m.mode = mode_name(mode);
                m.mean_log_bias = agg.mean;
                m.bias_std = agg.stddev;
                m.bias_defined_users = agg.defined;
                m.rmse = eval.rmse_value;
                m.mae = eval.mae_value;
                m.ndcg = eval.ndcg_value;
                m.mrr = eval.mrr_value;
                m.n_users = w.split.test_users.size();
                m.n_pairs = eval.pairs;
                write_text_file(cell_dir + "/metrics.json",
                                metrics_to_json(m, w.split.partition_hash, config.eval,
                                                w.relevance_threshold, model_config)
                                        .dump(2) +
                                    "\n");
                save_bias_map(BiasMap(eval.theta_tilde), cell_dir + "/theta_tilde.csv");
                save_histogram(agg.histogram, cell_dir + "/theta_tilde_histogram.csv");
                if (config.emit_recommendations)
                    save_recommendations(eval.profiles, cell_dir + "/recommendations.csv");
                outcome.ok = true;
            } catch (const Error& e) {
                outcome.ok = false;
                outcome.error = e.what();
                result.complete = false;
            }
            result.cells.push_back(std::move(outcome));
        }
    }

    json status = json::object();
    json cell_status = json::object();
    for (const CellOutcome& c : result.cells) {
        if (c.ok)
            cell_status[c.name] = {{"ok", true}};
        else
            cell_status[c.name] = {{"ok", false}, {"error", c.error}};
    }
    status["cells"] = cell_status;
    status["complete"] = result.complete;
    write_text_file(out_dir + "/status.json", status.dump(2) + "\n");
    if (with_timings) {
        timings["total_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                  std::chrono::steady_clock::now() - t_start)
                                  .count();
        manifest["timings"] = timings;
        write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
    }
    return result;
}

// --- report -------------------------------------------------------------------

ReportResult write_report(const std::string& run_dir, const std::string& report_dir) {
    ReportResult result;
    const ExperimentConfig config = parse_experiment_config(read_text_file(run_dir + "/config.json"));
    fs::create_directories(report_dir);

    std::unordered_map<std::string, MetricsReport> by_cell;
    for (const ModelConfig& model : config.algorithms) {
        for (PipelineMode mode : config.modes) {
            const std::string name = algorithm_name(model.algorithm) + "_" + mode_name(mode);
            const std::string path = run_dir + "/cells/" + name + "/metrics.json";
            if (!fs::exists(path)) {
                result.missing_cells.push_back(name);
                result.complete = false;
                continue;
            }
            by_cell.emplace(name, metrics_from_json(json::parse(read_text_file(path))));
        }
    }

    // Table-2-shaped summary: one row per case x algorithm.
    DelimitedWriter summary(report_dir + "/summary_table.csv", ',');
    summary.write_row({"case", "algorithm", "mean_log_bias", "rmse", "mae", "ndcg", "mrr"});
    for (PipelineMode mode : config.modes) {
        for (const ModelConfig& model : config.algorithms) {
            const std::string name = algorithm_name(model.algorithm) + "_" + mode_name(mode);
            auto it = by_cell.find(name);
            if (it == by_cell.end()) continue;
            const MetricsReport& m = it->second;
            summary.write_row({m.mode, m.algorithm, format_double(m.mean_log_bias),
                               format_double(m.rmse), format_double(m.mae), format_double(m.ndcg),
                               format_double(m.mrr)});
        }
    }
    summary.close();

    // Table-3-shaped significance: treated modes against the baseline of the
    // same algorithm on the same split.
    DelimitedWriter sig(report_dir + "/significance_table.csv", ',');
    sig.write_row({"algorithm", "mode", "x_bar", "mu", "sigma", "n", "z", "p"});
    DelimitedWriter cmp(report_dir + "/comparison.csv", ',');
    cmp.write_row({"algorithm", "mode", "bias_reduction_pct", "rmse_loss_pct", "mae_loss_pct",
                   "ndcg_loss_pct", "mrr_loss_pct"});
    for (const ModelConfig& model : config.algorithms) {
        const std::string algo = algorithm_name(model.algorithm);
        auto base = by_cell.find(algo + "_baseline");
        if (base == by_cell.end()) continue;
        for (PipelineMode mode : config.modes) {
            if (mode == PipelineMode::Baseline) continue;
            auto treated = by_cell.find(algo + "_" + mode_name(mode));
            if (treated == by_cell.end()) continue;
            const MetricsReport& b = base->second;
            const MetricsReport& t = treated->second;
            if (t.bias_defined_users >= 2 && b.bias_std > 0.0) {
                SignificanceResult z =
                    z_test_left(t.mean_log_bias, b.mean_log_bias, b.bias_std, t.bias_defined_users);
                sig.write_row({algo, t.mode, format_double(z.x_bar), format_double(z.mu),
                               format_double(z.sigma), std::to_string(z.n), format_double(z.z),
                               format_double(z.p)});
            }
            ExperimentComparison c = compare(b, t);
            cmp.write_row({algo, t.mode, format_double(round2(c.bias_reduction_pct)),
                           format_double(round2(c.rmse_loss_pct)), format_double(round2(c.mae_loss_pct)),
                           format_double(round2(c.ndcg_loss_pct)), format_double(round2(c.mrr_loss_pct))});
        }
    }
    sig.close();
    cmp.close();
    return result;
}

}  // namespace fairrec
