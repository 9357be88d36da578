#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "fairrec/dataset.hpp"

namespace fairrec {

/// Author metadata resolved for one ISBN.
struct AuthorRecord {
    std::string isbn;
    std::string author_full_name;
    std::string first_name;
    std::string source;  // provider id
};

enum class Gender { Female, Male, Unknown };

std::string gender_name(Gender g);
Gender gender_from_name(const std::string& name);

struct GenderInference {
    std::string first_name;
    Gender gender = Gender::Unknown;
    double confidence = 0.0;
    bool provider_failed = false;
};

/// 10- or 13-digit form with a valid check digit (hyphens/spaces ignored).
bool isbn_is_valid(const std::string& isbn);
std::string normalize_isbn(const std::string& isbn);

/// First whitespace token of the given-name part, honorifics stripped.
/// "Last, First" forms are recognized; multi-author strings resolve to the
/// first listed author.
std::string extract_first_name(const std::string& author_full_name);

/// Append-only on-disk record store. Entries are immutable once written:
/// a second store for the same key is ignored. Tab-separated so names with
/// commas survive; fixtures reuse the exact same format.
class EnrichmentCache {
public:
    explicit EnrichmentCache(const std::string& directory);

    /// nullopt = never looked up; a record with empty author = cached miss.
    std::optional<AuthorRecord> lookup_author(const std::string& isbn) const;
    void store_author(const std::string& isbn, const AuthorRecord* record_or_null);

    std::optional<GenderInference> lookup_gender(const std::string& first_name) const;
    void store_gender(const GenderInference& inference);

private:
    std::string author_path_, gender_path_;
    std::unordered_map<std::string, AuthorRecord> authors_;  // empty author_full_name = miss
    std::unordered_map<std::string, GenderInference> genders_;
    mutable std::mutex mutex_;
};

/// One metadata source. `lookup` returns the author string for the ISBN,
/// nullopt on a clean miss, and throws on transport failure (the chain
/// retries, then falls through).
class AuthorProvider {
public:
    virtual ~AuthorProvider() = default;
    virtual std::string id() const = 0;
    virtual std::optional<std::string> lookup(const std::string& isbn) = 0;
};

class GenderProvider {
public:
    virtual ~GenderProvider() = default;
    virtual std::string id() const = 0;
    /// (gender, confidence); nullopt on a clean miss.
    virtual std::optional<std::pair<Gender, double>> lookup(const std::string& first_name) = 0;
};

/// Fixture providers read the cache record format from a local file, which
/// keeps tests and --offline runs fully deterministic.
std::unique_ptr<AuthorProvider> make_fixture_author_provider(const std::string& path);
std::unique_ptr<GenderProvider> make_fixture_gender_provider(const std::string& path);

struct HttpProviderConfig {
    std::string id;            // google-books | isbndb | open-library | genderize
    std::string url_template;  // {isbn} / {name} / {key} placeholders
    std::string api_key_env;   // env var holding the credential; empty = none
    std::size_t max_retries = 2;
    std::size_t base_delay_ms = 200;
    std::size_t request_budget = 100000;
    std::size_t max_in_flight = 4;
};

std::unique_ptr<AuthorProvider> make_http_author_provider(const HttpProviderConfig& config);
std::unique_ptr<GenderProvider> make_http_gender_provider(const HttpProviderConfig& config);

struct ProviderStats {
    std::size_t provider_calls = 0;
    std::size_t cache_hits = 0;
};

/// Queries the chain in order; first success wins and is cached (misses are
/// cached too). Invalid ISBN -> InputError.
std::optional<AuthorRecord> resolve_author(const std::string& isbn,
                                           const std::vector<AuthorProvider*>& chain,
                                           EnrichmentCache& cache, ProviderStats* stats = nullptr);

/// Confidence below `threshold` maps to unknown. Provider failure -> unknown
/// with the failure flag set. Empty name -> InputError.
GenderInference infer_gender(const std::string& first_name, double threshold,
                             const std::vector<GenderProvider*>& chain, EnrichmentCache& cache,
                             ProviderStats* stats = nullptr);

enum class DropReason { AuthorUnresolved, GenderUnknown };

struct DropReport {
    std::vector<std::pair<std::string, DropReason>> dropped;  // input order, deduplicated
};

struct EnrichConfig {
    std::vector<AuthorProvider*> author_chain;
    std::vector<GenderProvider*> gender_chain;
    double confidence_threshold = 0.9;
    /// Which group each resolved gender maps to; the book setting puts
    /// female-authored items in the disadvantaged group.
    GroupLabel female_group = GroupLabel::Disadvantaged;
    GroupLabel male_group = GroupLabel::Advantaged;
};

/// Labels every ISBN or records why it was dropped; syntactically invalid
/// ISBNs cannot be resolved and drop as author-unresolved. Duplicate input
/// ISBNs are processed once.
std::pair<ItemCatalog, DropReport> enrich_catalog(const std::vector<std::string>& isbns,
                                                  const EnrichConfig& config, EnrichmentCache& cache,
                                                  ProviderStats* stats = nullptr);

void save_drop_report(const DropReport& report, const std::string& path, char delimiter = ',');

}  // namespace fairrec
