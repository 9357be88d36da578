#include <filesystem>
#include <iostream>
#include <unordered_set>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairrec/csv.hpp"
#include "fairrec/enrichment.hpp"
#include "fairrec/experiment.hpp"

namespace fairrec {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> isbn_list_from_ratings(const std::string& path, char delimiter) {
    std::vector<std::string> isbns;
    std::unordered_set<std::string> seen;
    read_delimited(path, delimiter, {"user_id", "item_id", "rating"}, [&](const CsvRow& row) {
        if (row.fields.size() != 3) return;
        std::string item(row.fields[1]);
        if (seen.insert(item).second) isbns.push_back(std::move(item));
    });
    return isbns;
}

std::vector<std::string> isbn_list_from_file(const std::string& path) {
    std::vector<std::string> isbns;
    std::unordered_set<std::string> seen;
    for (std::string_view line : split_fields(read_text_file(path), '\n')) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (line.empty()) continue;
        std::string isbn(line);
        if (seen.insert(isbn).second) isbns.push_back(std::move(isbn));
    }
    return isbns;
}

HttpProviderConfig default_provider(const std::string& id) {
    HttpProviderConfig p;
    p.id = id;
    if (id == "google-books") {
        p.url_template = "https://www.googleapis.com/books/v1/volumes?q=isbn:{isbn}&key={key}";
        p.api_key_env = "GOOGLE_BOOKS_API_KEY";
    } else if (id == "isbndb") {
        p.url_template = "https://api2.isbndb.com/book/{isbn}";
        p.api_key_env = "ISBNDB_API_KEY";
    } else if (id == "open-library") {
        p.url_template = "https://openlibrary.org/api/books?bibkeys=ISBN:{isbn}&format=json&jscmd=data";
    } else if (id == "genderize") {
        p.url_template = "https://api.genderize.io/?name={name}&apikey={key}";
        p.api_key_env = "GENDERIZE_API_KEY";
    } else {
        throw ConfigError("unknown provider id '" + id + "'");
    }
    return p;
}

HttpProviderConfig provider_from_json(const json& j) {
    HttpProviderConfig p = default_provider(j.at("id").get<std::string>());
    if (j.contains("url_template")) p.url_template = j.at("url_template").get<std::string>();
    if (j.contains("api_key_env")) p.api_key_env = j.at("api_key_env").get<std::string>();
    p.max_retries = j.value("max_retries", p.max_retries);
    p.base_delay_ms = j.value("base_delay_ms", p.base_delay_ms);
    p.request_budget = j.value("request_budget", p.request_budget);
    p.max_in_flight = j.value("max_in_flight", p.max_in_flight);
    return p;
}

int run_enrich(const std::string& ratings_path, const std::string& isbn_path,
               const std::string& providers_path, const std::string& fixtures_authors,
               const std::string& fixtures_genders, const std::string& cache_dir,
               const std::string& out_dir, double threshold, bool offline, char delimiter) {
    std::vector<std::string> isbns;
    if (!isbn_path.empty())
        isbns = isbn_list_from_file(isbn_path);
    else if (!ratings_path.empty())
        isbns = isbn_list_from_ratings(ratings_path, delimiter);
    else
        throw ConfigError("enrich needs --ratings or --isbns");

    fs::create_directories(out_dir);
    fs::create_directories(cache_dir);
    EnrichmentCache cache(cache_dir);

    std::vector<std::unique_ptr<AuthorProvider>> author_owned;
    std::vector<std::unique_ptr<GenderProvider>> gender_owned;
    EnrichConfig config;
    config.confidence_threshold = threshold;
    if (!fixtures_authors.empty())
        author_owned.push_back(make_fixture_author_provider(fixtures_authors));
    if (!fixtures_genders.empty())
        gender_owned.push_back(make_fixture_gender_provider(fixtures_genders));
    if (!offline) {
        if (!providers_path.empty()) {
            json j = json::parse(read_text_file(providers_path));
            for (const json& p : j.value("authors", json::array()))
                author_owned.push_back(make_http_author_provider(provider_from_json(p)));
            for (const json& p : j.value("genders", json::array()))
                gender_owned.push_back(make_http_gender_provider(provider_from_json(p)));
        } else {
            for (const char* id : {"google-books", "isbndb", "open-library"})
                author_owned.push_back(make_http_author_provider(default_provider(id)));
            gender_owned.push_back(make_http_gender_provider(default_provider("genderize")));
        }
    }
    for (auto& p : author_owned) config.author_chain.push_back(p.get());
    for (auto& p : gender_owned) config.gender_chain.push_back(p.get());

    ProviderStats stats;
    auto [catalog, drops] = enrich_catalog(isbns, config, cache, &stats);
    save_catalog(catalog, out_dir + "/catalog.csv");
    save_drop_report(drops, out_dir + "/drop_report.csv");
    json summary = {{"input", isbns.size()},
                    {"labeled", catalog.size()},
                    {"advantaged", catalog.advantaged_count()},
                    {"disadvantaged", catalog.disadvantaged_count()},
                    {"dropped", drops.dropped.size()},
                    {"provider_calls", stats.provider_calls},
                    {"cache_hits", stats.cache_hits}};
    write_text_file(out_dir + "/enrich_report.json", summary.dump(2) + "\n");
    std::cout << "enrich: " << catalog.size() << " labeled, " << drops.dropped.size() << " dropped\n";
    return catalog.size() == 0 ? 2 : 0;
}

int run_prepare(const std::string& ratings_path, const std::string& catalog_path, double scale_max,
                const std::string& zero_policy, char delimiter, std::size_t min_item,
                std::size_t min_user, const std::string& filter_mode, const std::string& out_dir) {
    LoadOptions options;
    options.scale_max = scale_max;
    options.delimiter = delimiter;
    if (zero_policy == "drop")
        options.zero_policy = ZeroPolicy::Drop;
    else if (zero_policy == "error")
        options.zero_policy = ZeroPolicy::Error;
    else
        throw ConfigError("unknown zero policy '" + zero_policy + "'");

    LoadReport report;
    RatingsDataset ds = load_ratings(ratings_path, options, &report);
    std::size_t uncataloged = 0;
    if (!catalog_path.empty()) {
        ItemCatalog catalog = load_catalog(catalog_path, delimiter);
        ds = with_catalog(ds, catalog, &uncataloged);
    }
    if (min_item > 1 || min_user > 1) {
        FilterMode mode;
        if (filter_mode == "sequential")
            mode = FilterMode::Sequential;
        else if (filter_mode == "fixpoint")
            mode = FilterMode::Fixpoint;
        else
            throw ConfigError("unknown filter mode '" + filter_mode + "'");
        ds = filter_by_activity(ds, min_item, min_user, mode);
    }
    fs::create_directories(out_dir);
    save_ratings(ds, out_dir + "/ratings.csv", delimiter);
    if (!catalog_path.empty()) {
        ItemCatalog kept;
        for (Index i = 0; i < ds.item_count(); ++i) kept.add(ds.item_id(i), ds.item_group(i));
        save_catalog(kept, out_dir + "/catalog.csv", delimiter);
    }
    json malformed = json::array();
    for (const auto& [line, reason] : report.malformed)
        malformed.push_back({{"line", line}, {"reason", reason}});
    json summary = {{"retained", ds.rating_count()},
                    {"users", ds.user_count()},
                    {"items", ds.item_count()},
                    {"zeros_dropped", report.zeros_dropped},
                    {"duplicates", report.duplicates},
                    {"uncataloged_ratings_dropped", uncataloged},
                    {"malformed", malformed}};
    write_text_file(out_dir + "/prepare_report.json", summary.dump(2) + "\n");
    std::cout << "prepare: " << ds.rating_count() << " ratings, " << ds.user_count() << " users, "
              << ds.item_count() << " items\n";
    return 0;
}

int run_synth(const std::string& config_path, const std::string& out_dir, std::uint64_t seed,
              bool seed_given) {
    GenerativeConfig config = parse_generative_config(read_text_file(config_path));
    if (seed_given) config.seed = seed;
    SyntheticDataset synth = generate_dataset(config);
    fs::create_directories(out_dir);
    save_ratings(synth.ratings, out_dir + "/ratings.csv");
    ItemCatalog catalog;
    for (Index i = 0; i < synth.ratings.item_count(); ++i)
        catalog.add(synth.ratings.item_id(i), synth.ratings.item_group(i));
    save_catalog(catalog, out_dir + "/catalog.csv");
    save_ground_truth(synth.ground_truth, out_dir + "/ground_truth.csv");
    if (config.retain_realized) {
        DelimitedWriter out(out_dir + "/realized.csv", ',');
        out.write_row({"user_id", "item_id", "p", "q"});
        for (const RealizedRating& r : synth.realized)
            out.write_row({r.user_id, r.item_id, format_double(r.p), format_double(r.q)});
        out.close();
    }
    std::cout << "synth: " << synth.ratings.rating_count() << " ratings, "
              << synth.ratings.user_count() << " users (" << synth.empty_profile_users
              << " with empty profiles)\n";
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
    CLI::App app{"Gender-bias quantification and mitigation for explicit-feedback recommenders"};
    app.require_subcommand(1);

    // enrich
    auto* enrich = app.add_subcommand("enrich", "Resolve item authors and genders into a catalog");
    std::string e_ratings, e_isbns, e_providers, e_fix_authors, e_fix_genders;
    std::string e_cache = "enrich_cache", e_out = "enrich_out";
    double e_threshold = 0.9;
    bool e_offline = false;
    std::string e_delim = ",";
    enrich->add_option("--ratings", e_ratings, "Ratings file to pull item ids from");
    enrich->add_option("--isbns", e_isbns, "Plain file with one ISBN per line");
    enrich->add_option("--providers", e_providers, "Provider configuration file (JSON)");
    enrich->add_option("--fixtures-authors", e_fix_authors, "Author fixture records");
    enrich->add_option("--fixtures-genders", e_fix_genders, "Gender fixture records");
    enrich->add_option("--cache", e_cache, "Cache directory");
    enrich->add_option("--out", e_out, "Output directory");
    enrich->add_option("--threshold", e_threshold, "Gender confidence threshold");
    enrich->add_option("--delimiter", e_delim, "Ratings file delimiter");
    enrich->add_flag("--offline", e_offline, "Fixture/cache-only operation, no network");

    // prepare
    auto* prepare = app.add_subcommand("prepare", "Load, label, and activity-filter a dataset");
    std::string p_ratings, p_catalog, p_out = "prepared";
    double p_scale = 5.0;
    std::string p_zero = "drop", p_mode = "sequential", p_delim = ",";
    std::size_t p_min_item = 1, p_min_user = 1;
    prepare->add_option("--ratings", p_ratings, "Ratings file")->required();
    prepare->add_option("--catalog", p_catalog, "Catalog file (item_id,group)");
    prepare->add_option("--scale-max", p_scale, "Rating scale maximum R");
    prepare->add_option("--zero-policy", p_zero, "drop|error");
    prepare->add_option("--delimiter", p_delim, "Field delimiter");
    prepare->add_option("--min-item", p_min_item, "Minimum ratings per item");
    prepare->add_option("--min-user", p_min_user, "Minimum ratings per user");
    prepare->add_option("--filter-mode", p_mode, "sequential|fixpoint");
    prepare->add_option("--out", p_out, "Output directory");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a dataset with known ground truth");
    std::string s_config, s_out = "synth_out";
    std::uint64_t s_seed = 0;
    synth->add_option("--config", s_config, "Generator configuration (JSON)")->required();
    synth->add_option("--out", s_out, "Output directory");
    auto* s_seed_opt = synth->add_option("--seed", s_seed, "Override the configured seed");

    // run
    auto* run = app.add_subcommand("run", "Execute the full experiment pipeline");
    std::string r_config, r_out = "run_out";
    std::uint64_t r_seed = 0;
    bool r_timings = false;
    run->add_option("--config", r_config, "Experiment configuration (JSON)")->required();
    run->add_option("--out", r_out, "Run directory");
    auto* r_seed_opt = run->add_option("--seed", r_seed, "Override the configured seed");
    run->add_flag("--timings", r_timings,
                  "Record wall-clock timings in the manifest (breaks byte-identical reruns)");

    // report
    auto* report = app.add_subcommand("report", "Assemble summary tables from a run directory");
    std::string t_run, t_out;
    report->add_option("--run", t_run, "Run directory")->required();
    report->add_option("--out", t_out, "Report directory (default <run>/report)");

    std::vector<const char*> argv;
    argv.push_back("fairrec");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (enrich->parsed())
            return run_enrich(e_ratings, e_isbns, e_providers, e_fix_authors, e_fix_genders, e_cache,
                              e_out, e_threshold, e_offline, e_delim.empty() ? ',' : e_delim[0]);
        if (prepare->parsed())
            return run_prepare(p_ratings, p_catalog, p_scale, p_zero,
                               p_delim.empty() ? ',' : p_delim[0], p_min_item, p_min_user, p_mode,
                               p_out);
        if (synth->parsed()) return run_synth(s_config, s_out, s_seed, s_seed_opt->count() > 0);
        if (run->parsed()) {
            ExperimentConfig config = parse_experiment_config(read_text_file(r_config));
            if (r_seed_opt->count() > 0) config.seed = r_seed;
            RunResult result = run_experiment(config, r_out, r_timings);
            std::size_t ok = 0;
            for (const CellOutcome& c : result.cells) ok += c.ok ? 1 : 0;
            std::cout << "run: " << ok << "/" << result.cells.size() << " cells ok, outputs in "
                      << r_out << "\n";
            return result.complete ? 0 : 2;
        }
        if (report->parsed()) {
            const std::string out = t_out.empty() ? t_run + "/report" : t_out;
            ReportResult result = write_report(t_run, out);
            for (const std::string& cell : result.missing_cells)
                std::cerr << "report: missing cell " << cell << "\n";
            std::cout << "report: tables written to " << out << "\n";
            return result.complete ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace fairrec
