#include "fairrec/enrichment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "fairrec/csv.hpp"

namespace fairrec {

std::string gender_name(Gender g) {
    switch (g) {
        case Gender::Female: return "female";
        case Gender::Male: return "male";
        case Gender::Unknown: return "unknown";
    }
    return "unknown";
}

Gender gender_from_name(const std::string& name) {
    if (name == "female") return Gender::Female;
    if (name == "male") return Gender::Male;
    if (name == "unknown") return Gender::Unknown;
    throw InputError("unknown gender '" + name + "'");
}

std::string normalize_isbn(const std::string& isbn) {
    std::string out;
    for (char c : isbn)
        if (c != '-' && c != ' ') out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    return out;
}

bool isbn_is_valid(const std::string& isbn) {
    const std::string s = normalize_isbn(isbn);
    if (s.size() == 10) {
        int sum = 0;
        for (int i = 0; i < 10; ++i) {
            int digit;
            if (s[static_cast<std::size_t>(i)] == 'X' && i == 9)
                digit = 10;
            else if (std::isdigit(static_cast<unsigned char>(s[static_cast<std::size_t>(i)])))
                digit = s[static_cast<std::size_t>(i)] - '0';
            else
                return false;
            sum += (10 - i) * digit;
        }
        return sum % 11 == 0;
    }
    if (s.size() == 13) {
        int sum = 0;
        for (int i = 0; i < 13; ++i) {
            if (!std::isdigit(static_cast<unsigned char>(s[static_cast<std::size_t>(i)]))) return false;
            sum += (s[static_cast<std::size_t>(i)] - '0') * (i % 2 == 0 ? 1 : 3);
        }
        return sum % 10 == 0;
    }
    return false;
}

namespace {

const char* kHonorifics[] = {"dr", "mr", "mrs", "ms", "prof", "rev", "sir", "lady"};

bool is_honorific(std::string token) {
    if (!token.empty() && token.back() == '.') token.pop_back();
    for (char& c : token) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    for (const char* h : kHonorifics)
        if (token == h) return true;
    return false;
}

std::vector<std::string> whitespace_tokens(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

}  // namespace

std::string extract_first_name(const std::string& author_full_name) {
    // First listed author only.
    std::string author = author_full_name;
    for (const char* sep : {";", " and ", " & "}) {
        auto pos = author.find(sep);
        if (pos != std::string::npos) author = author.substr(0, pos);
    }
    // "Last, First" -> given names follow the first comma.
    std::string given = author;
    auto comma = author.find(',');
    if (comma != std::string::npos) given = author.substr(comma + 1);
    for (const std::string& token : whitespace_tokens(given)) {
        if (is_honorific(token)) continue;
        std::string cleaned;
        for (char c : token)
            if (std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '\'') cleaned.push_back(c);
        if (!cleaned.empty()) return cleaned;
    }
    return "";
}

// --- cache ---------------------------------------------------------------

namespace {

constexpr char kRecordSep = '\t';

std::string sanitize(std::string s) {
    for (char& c : s)
        if (c == kRecordSep || c == '\n' || c == '\r') c = ' ';
    return s;
}

}  // namespace

EnrichmentCache::EnrichmentCache(const std::string& directory) {
    author_path_ = directory + "/authors.tsv";
    gender_path_ = directory + "/genders.tsv";
    auto load = [](const std::string& path, auto&& on_fields) {
        std::ifstream in(path);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            on_fields(split_fields(line, kRecordSep));
        }
    };
    load(author_path_, [&](const std::vector<std::string_view>& f) {
        if (f.size() != 5 || f[0] != "author") return;
        AuthorRecord r;
        r.isbn = std::string(f[1]);
        r.author_full_name = std::string(f[2]);
        r.first_name = std::string(f[3]);
        r.source = std::string(f[4]);
        authors_.emplace(r.isbn, std::move(r));
    });
    load(gender_path_, [&](const std::vector<std::string_view>& f) {
        if (f.size() != 4 || f[0] != "gender") return;
        GenderInference g;
        g.first_name = std::string(f[1]);
        g.gender = gender_from_name(std::string(f[2]));
        g.confidence = parse_double(f[3], "confidence");
        genders_.emplace(g.first_name, std::move(g));
    });
}

std::optional<AuthorRecord> EnrichmentCache::lookup_author(const std::string& isbn) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = authors_.find(isbn);
    if (it == authors_.end()) return std::nullopt;
    return it->second;
}

void EnrichmentCache::store_author(const std::string& isbn, const AuthorRecord* record_or_null) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (authors_.count(isbn)) return;  // entries are immutable
    AuthorRecord r;
    r.isbn = isbn;
    if (record_or_null) r = *record_or_null;
    authors_.emplace(isbn, r);
    std::ofstream out(author_path_, std::ios::app | std::ios::binary);
    out << "author" << kRecordSep << sanitize(r.isbn) << kRecordSep << sanitize(r.author_full_name)
        << kRecordSep << sanitize(r.first_name) << kRecordSep << sanitize(r.source) << '\n';
}

std::optional<GenderInference> EnrichmentCache::lookup_gender(const std::string& first_name) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = genders_.find(first_name);
    if (it == genders_.end()) return std::nullopt;
    return it->second;
}

void EnrichmentCache::store_gender(const GenderInference& inference) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (genders_.count(inference.first_name)) return;
    genders_.emplace(inference.first_name, inference);
    std::ofstream out(gender_path_, std::ios::app | std::ios::binary);
    out << "gender" << kRecordSep << sanitize(inference.first_name) << kRecordSep
        << gender_name(inference.gender) << kRecordSep << format_double(inference.confidence) << '\n';
}

// --- fixture providers ----------------------------------------------------

namespace {

class FixtureAuthorProvider final : public AuthorProvider {
public:
    explicit FixtureAuthorProvider(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw NotFoundError("fixture file missing: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto f = split_fields(line, kRecordSep);
            if (f.size() >= 3 && f[0] == "author") entries_[std::string(f[1])] = std::string(f[2]);
        }
    }
    std::string id() const override { return "fixture-authors"; }
    std::optional<std::string> lookup(const std::string& isbn) override {
        auto it = entries_.find(isbn);
        if (it == entries_.end() || it->second.empty()) return std::nullopt;
        return it->second;
    }

private:
    std::unordered_map<std::string, std::string> entries_;
};

class FixtureGenderProvider final : public GenderProvider {
public:
    explicit FixtureGenderProvider(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw NotFoundError("fixture file missing: " + path);
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            auto f = split_fields(line, kRecordSep);
            if (f.size() >= 4 && f[0] == "gender")
                entries_[std::string(f[1])] = {gender_from_name(std::string(f[2])),
                                               parse_double(f[3], "confidence")};
        }
    }
    std::string id() const override { return "fixture-genders"; }
    std::optional<std::pair<Gender, double>> lookup(const std::string& first_name) override {
        auto it = entries_.find(first_name);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

private:
    std::unordered_map<std::string, std::pair<Gender, double>> entries_;
};

}  // namespace

std::unique_ptr<AuthorProvider> make_fixture_author_provider(const std::string& path) {
    return std::make_unique<FixtureAuthorProvider>(path);
}

std::unique_ptr<GenderProvider> make_fixture_gender_provider(const std::string& path) {
    return std::make_unique<FixtureGenderProvider>(path);
}

// --- HTTP providers ---------------------------------------------------------

namespace {

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path_query;
};

ParsedUrl parse_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("url without scheme: " + url);
    auto path_start = url.find('/', scheme_end + 3);
    ParsedUrl out;
    if (path_start == std::string::npos) {
        out.origin = url;
        out.path_query = "/";
    } else {
        out.origin = url.substr(0, path_start);
        out.path_query = url.substr(path_start);
    }
    return out;
}

std::string url_encode(const std::string& value) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : value) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~')
            out.push_back(static_cast<char>(c));
        else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 15]);
        }
    }
    return out;
}

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
    const std::string placeholder = "{" + key + "}";
    for (;;) {
        auto pos = tmpl.find(placeholder);
        if (pos == std::string::npos) break;
        tmpl.replace(pos, placeholder.size(), value);
    }
    return tmpl;
}

/// Shared retry/budget/in-flight mechanics for the HTTP providers.
class HttpEndpoint {
public:
    explicit HttpEndpoint(const HttpProviderConfig& config) : config_(config) {
        if (!config.api_key_env.empty()) {
            const char* key = std::getenv(config.api_key_env.c_str());
            if (key) api_key_ = key;
        }
        in_flight_budget_ = config.max_in_flight == 0 ? 1 : config.max_in_flight;
    }

    /// nullopt = clean miss (404 / empty body per caller), throws on
    /// exhausted retries or budget.
    std::optional<std::string> get(const std::string& query_value, const std::string& query_key) {
        std::string url = substitute(config_.url_template, query_key, url_encode(query_value));
        url = substitute(url, "key", api_key_);
        ParsedUrl parsed = parse_url(url);
        for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = config_.base_delay_ms * (1ull << (attempt - 1));
                std::this_thread::sleep_for(std::chrono::milliseconds(std::min<std::size_t>(delay, 10000)));
            }
            if (calls_.fetch_add(1) >= config_.request_budget)
                throw Error(config_.id + ": request budget exhausted");
            auto result = fetch(parsed);
            if (!result) continue;  // transport error -> retry
            if (result->first == 404) return std::nullopt;
            if (result->first == 200) return result->second;
            // 429/5xx and friends: retry
        }
        throw Error(config_.id + ": retries exhausted for " + parsed.path_query);
    }

    const std::string& api_key() const { return api_key_; }

private:
    std::optional<std::pair<int, std::string>> fetch(const ParsedUrl& parsed) {
        // Bounded in-flight requests; plain counter since providers are
        // queried from a handful of threads at most.
        {
            std::unique_lock<std::mutex> lock(mutex_);
            cv_.wait(lock, [&] { return in_flight_ < in_flight_budget_; });
            ++in_flight_;
        }
        httplib::Client client(parsed.origin);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(10, 0);
        httplib::Headers headers;
        if (config_.id == "isbndb" && !api_key_.empty()) headers.emplace("Authorization", api_key_);
        auto response = client.Get(parsed.path_query, headers);
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
        if (!response) return std::nullopt;
        return std::make_pair(response->status, response->body);
    }

    HttpProviderConfig config_;
    std::string api_key_;
    std::atomic<std::size_t> calls_{0};
    std::mutex mutex_;
    std::condition_variable cv_;
    std::size_t in_flight_ = 0;
    std::size_t in_flight_budget_ = 1;
};

std::optional<std::string> parse_author_response(const std::string& provider_id,
                                                 const std::string& body, const std::string& isbn) {
    const auto json = nlohmann::json::parse(body, nullptr, false);
    if (json.is_discarded()) return std::nullopt;
    try {
        if (provider_id == "google-books") {
            if (json.value("totalItems", 0) < 1) return std::nullopt;
            const auto& authors = json.at("items").at(0).at("volumeInfo").at("authors");
            if (!authors.is_array() || authors.empty()) return std::nullopt;
            return authors.at(0).get<std::string>();
        }
        if (provider_id == "isbndb") {
            const auto& authors = json.at("book").at("authors");
            if (!authors.is_array() || authors.empty()) return std::nullopt;
            return authors.at(0).get<std::string>();
        }
        if (provider_id == "open-library") {
            const auto& entry = json.at("ISBN:" + isbn);
            const auto& authors = entry.at("authors");
            if (!authors.is_array() || authors.empty()) return std::nullopt;
            return authors.at(0).at("name").get<std::string>();
        }
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    return std::nullopt;
}

class HttpAuthorProvider final : public AuthorProvider {
public:
    explicit HttpAuthorProvider(const HttpProviderConfig& config)
        : config_(config), endpoint_(config) {}
    std::string id() const override { return config_.id; }
    std::optional<std::string> lookup(const std::string& isbn) override {
        auto body = endpoint_.get(isbn, "isbn");
        if (!body) return std::nullopt;
        return parse_author_response(config_.id, *body, isbn);
    }

private:
    HttpProviderConfig config_;
    HttpEndpoint endpoint_;
};

class HttpGenderProvider final : public GenderProvider {
public:
    explicit HttpGenderProvider(const HttpProviderConfig& config)
        : config_(config), endpoint_(config) {}
    std::string id() const override { return config_.id; }
    std::optional<std::pair<Gender, double>> lookup(const std::string& first_name) override {
        auto body = endpoint_.get(first_name, "name");
        if (!body) return std::nullopt;
        const auto json = nlohmann::json::parse(*body, nullptr, false);
        if (json.is_discarded()) return std::nullopt;
        if (!json.contains("gender") || json.at("gender").is_null()) return std::nullopt;
        const std::string g = json.at("gender").get<std::string>();
        const double prob = json.value("probability", 0.0);
        if (g == "female") return std::make_pair(Gender::Female, prob);
        if (g == "male") return std::make_pair(Gender::Male, prob);
        return std::nullopt;
    }

private:
    HttpProviderConfig config_;
    HttpEndpoint endpoint_;
};

}  // namespace

std::unique_ptr<AuthorProvider> make_http_author_provider(const HttpProviderConfig& config) {
    return std::make_unique<HttpAuthorProvider>(config);
}

std::unique_ptr<GenderProvider> make_http_gender_provider(const HttpProviderConfig& config) {
    return std::make_unique<HttpGenderProvider>(config);
}

// --- resolution -------------------------------------------------------------

std::optional<AuthorRecord> resolve_author(const std::string& isbn,
                                           const std::vector<AuthorProvider*>& chain,
                                           EnrichmentCache& cache, ProviderStats* stats) {
    const std::string key = normalize_isbn(isbn);
    if (!isbn_is_valid(key)) throw InputError("invalid ISBN '" + isbn + "'");
    if (auto cached = cache.lookup_author(key)) {
        if (stats) stats->cache_hits += 1;
        if (cached->author_full_name.empty()) return std::nullopt;  // cached miss
        return cached;
    }
    for (AuthorProvider* provider : chain) {
        std::optional<std::string> author;
        try {
            if (stats) stats->provider_calls += 1;
            author = provider->lookup(key);
        } catch (const Error&) {
            continue;  // provider failed after its own retries; fall through
        }
        if (!author) continue;
        AuthorRecord record;
        record.isbn = key;
        record.author_full_name = *author;
        record.first_name = extract_first_name(*author);
        record.source = provider->id();
        if (record.first_name.empty()) continue;  // unusable author string
        cache.store_author(key, &record);
        return record;
    }
    cache.store_author(key, nullptr);
    return std::nullopt;
}

GenderInference infer_gender(const std::string& first_name, double threshold,
                             const std::vector<GenderProvider*>& chain, EnrichmentCache& cache,
                             ProviderStats* stats) {
    if (first_name.empty()) throw InputError("infer_gender: empty first name");
    if (auto cached = cache.lookup_gender(first_name)) {
        if (stats) stats->cache_hits += 1;
        GenderInference g = *cached;
        if (g.confidence < threshold) g.gender = Gender::Unknown;
        return g;
    }
    GenderInference result;
    result.first_name = first_name;
    bool any_success = false;
    for (GenderProvider* provider : chain) {
        try {
            if (stats) stats->provider_calls += 1;
            auto hit = provider->lookup(first_name);
            any_success = true;
            if (hit) {
                result.gender = hit->first;
                result.confidence = hit->second;
                break;
            }
        } catch (const Error&) {
            continue;
        }
    }
    result.provider_failed = !any_success && !chain.empty();
    // The raw provider answer is what gets cached; the threshold is applied
    // on the way out so raising it later cannot resurrect stale labels.
    if (!result.provider_failed) cache.store_gender(result);
    GenderInference out = result;
    if (out.confidence < threshold) out.gender = Gender::Unknown;
    return out;
}

std::pair<ItemCatalog, DropReport> enrich_catalog(const std::vector<std::string>& isbns,
                                                  const EnrichConfig& config, EnrichmentCache& cache,
                                                  ProviderStats* stats) {
    ItemCatalog catalog;
    DropReport report;
    std::unordered_set<std::string> seen;
    for (const std::string& raw : isbns) {
        const std::string isbn = normalize_isbn(raw);
        if (!seen.insert(isbn).second) continue;
        std::optional<AuthorRecord> record;
        if (isbn_is_valid(isbn)) record = resolve_author(isbn, config.author_chain, cache, stats);
        if (!record) {
            report.dropped.emplace_back(isbn, DropReason::AuthorUnresolved);
            continue;
        }
        GenderInference inference =
            infer_gender(record->first_name, config.confidence_threshold, config.gender_chain, cache, stats);
        if (inference.gender == Gender::Unknown) {
            report.dropped.emplace_back(isbn, DropReason::GenderUnknown);
            continue;
        }
        catalog.add(isbn, inference.gender == Gender::Female ? config.female_group : config.male_group);
    }
    return {std::move(catalog), std::move(report)};
}

void save_drop_report(const DropReport& report, const std::string& path, char delimiter) {
    DelimitedWriter out(path, delimiter);
    out.write_row({"isbn", "reason"});
    for (const auto& [isbn, reason] : report.dropped)
        out.write_row({isbn, reason == DropReason::AuthorUnresolved ? "author-unresolved"
                                                                    : "gender-unknown"});
    out.close();
}

}  // namespace fairrec
