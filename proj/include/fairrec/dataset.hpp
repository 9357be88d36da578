#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairrec/common.hpp"

namespace fairrec {

/// The two item groups the catalog is partitioned into. In the book setting
/// these are male-authored (advantaged) and female-authored (disadvantaged),
/// but nothing downstream depends on that reading.
enum class GroupLabel : std::uint8_t { Advantaged, Disadvantaged };

char group_code(GroupLabel g);                 // 'A' / 'D'
GroupLabel group_from_code(std::string_view);  // throws InputError

/// item id -> group, with the partition sizes kept alongside.
class ItemCatalog {
public:
    ItemCatalog() = default;

    void add(const std::string& item_id, GroupLabel group);  // duplicate id -> InputError
    std::optional<GroupLabel> lookup(const std::string& item_id) const;
    bool contains(const std::string& item_id) const { return entries_.count(item_id) != 0; }

    std::size_t size() const { return entries_.size(); }
    std::size_t advantaged_count() const { return advantaged_; }
    std::size_t disadvantaged_count() const { return disadvantaged_; }
    const std::unordered_map<std::string, GroupLabel>& entries() const { return entries_; }

private:
    std::unordered_map<std::string, GroupLabel> entries_;
    std::size_t advantaged_ = 0;
    std::size_t disadvantaged_ = 0;
};

struct Rating {
    Index user;
    Index item;
    double value;
};

/// Sparse explicit-feedback ratings plus the group label of every rated item.
/// Immutable once built; all mutating operations return a new dataset.
///
/// Ratings are validated against [1, scale_max] unless the dataset was built
/// with `enforce_scale = false` (synthetic data with clamping off lives
/// outside the scale on purpose).
class RatingsDataset {
public:
    RatingsDataset() = default;

    /// `triples` may arrive in any order; duplicates are a caller bug here
    /// (the loader resolves them before construction).
    static RatingsDataset build(double scale_max, std::vector<std::string> user_ids,
                                std::vector<std::string> item_ids, std::vector<Rating> triples,
                                std::vector<GroupLabel> item_groups, bool enforce_scale = true);

    double scale_max() const { return scale_max_; }
    std::size_t user_count() const { return user_ids_.size(); }
    std::size_t item_count() const { return item_ids_.size(); }
    std::size_t rating_count() const { return triples_.size(); }
    bool scale_enforced() const { return enforce_scale_; }

    const std::vector<Rating>& triples() const { return triples_; }
    const std::string& user_id(Index u) const { return user_ids_[u]; }
    const std::string& item_id(Index i) const { return item_ids_[i]; }
    const std::vector<std::string>& user_ids() const { return user_ids_; }
    const std::vector<std::string>& item_ids() const { return item_ids_; }
    GroupLabel item_group(Index i) const { return item_groups_[i]; }
    const std::vector<GroupLabel>& item_groups() const { return item_groups_; }

    std::optional<Index> find_user(const std::string& user_id) const;
    std::optional<Index> find_item(const std::string& item_id) const;

    /// Per-user rating lists (CSR layout), built once on construction and
    /// sorted by item index. Safe to share across threads.
    const std::vector<std::uint32_t>& user_offsets() const { return user_offsets_; }
    const std::vector<Index>& user_items() const { return user_items_; }
    const std::vector<double>& user_values() const { return user_values_; }

    std::size_t user_degree(Index u) const { return user_offsets_[u + 1] - user_offsets_[u]; }

private:
    double scale_max_ = 0.0;
    bool enforce_scale_ = true;
    std::vector<std::string> user_ids_;
    std::vector<std::string> item_ids_;
    std::vector<Rating> triples_;
    std::vector<GroupLabel> item_groups_;
    std::unordered_map<std::string, Index> user_index_;
    std::unordered_map<std::string, Index> item_index_;
    std::vector<std::uint32_t> user_offsets_;
    std::vector<Index> user_items_;
    std::vector<double> user_values_;
};

enum class ZeroPolicy { Drop, Error };

struct LoadReport {
    std::size_t retained = 0;
    std::size_t zeros_dropped = 0;
    std::size_t duplicates = 0;
    std::vector<std::pair<std::size_t, std::string>> malformed;  // (line, reason), rows skipped
};

struct LoadOptions {
    double scale_max = 5.0;
    ZeroPolicy zero_policy = ZeroPolicy::Drop;
    char delimiter = ',';
};

/// Reads `user_id,item_id,rating` rows. Zero ratings are implicit-feedback
/// marks and are dropped (or rejected) per policy; the last occurrence wins
/// for duplicate (user, item) pairs; a rating above scale_max is a hard
/// error. Malformed rows are skipped and reported with their line numbers.
/// The result carries an empty catalog; attach one with `with_catalog`.
RatingsDataset load_ratings(const std::string& path, const LoadOptions& options,
                            LoadReport* report = nullptr);

ItemCatalog load_catalog(const std::string& path, char delimiter = ',');

/// Restricts the dataset to items present in `catalog` and attaches the
/// labels. `dropped_ratings`, when given, receives the number of ratings
/// removed because their item has no label.
RatingsDataset with_catalog(const RatingsDataset& ds, const ItemCatalog& catalog,
                            std::size_t* dropped_ratings = nullptr);

/// Canonical byte-stable form: rows sorted by (user_id, item_id).
void save_ratings(const RatingsDataset& ds, const std::string& path, char delimiter = ',');
void save_catalog(const ItemCatalog& catalog, const std::string& path, char delimiter = ',');

enum class FilterMode { Sequential, Fixpoint };

/// Activity filter. Sequential drops under-rated items, then under-active
/// users, in one pass (the order the source datasets were described in);
/// fixpoint iterates both constraints to a k-core. Empty result ->
/// EmptyAfterFilterError.
RatingsDataset filter_by_activity(const RatingsDataset& ds, std::size_t min_item_ratings,
                                  std::size_t min_user_ratings, FilterMode mode);

struct SplitSpec {
    double test_user_fraction = 0.2;
    double holdout_fraction = 0.5;  // held-out share of each test user's ratings
    std::uint64_t seed = 0;
};

struct HeldOutRating {
    std::string item_id;
    double value;
};

struct TestUserSplit {
    std::string user_id;
    std::vector<HeldOutRating> visible;
    std::vector<HeldOutRating> held_out;
};

struct SplitResult {
    /// Everything except held-out ratings: full profiles of train users plus
    /// the visible part of each test user's profile.
    RatingsDataset train;
    std::vector<TestUserSplit> test_users;  // sorted by user_id
    std::size_t skipped_small_profiles = 0; // sampled users with < 2 ratings
    std::uint64_t partition_hash = 0;
};

/// Samples round(fraction * |users|) test users and hides `holdout_fraction`
/// of each one's ratings from training. Deterministic for a given
/// (dataset, seed) regardless of input row order.
SplitResult split_users(const RatingsDataset& ds, const SplitSpec& spec);

struct UserProfile {
    std::string user_id;
    std::vector<std::string> items;                     // sorted by item id
    std::unordered_map<std::string, double> ratings;
};

UserProfile user_profile(const RatingsDataset& ds, const std::string& user_id);

}  // namespace fairrec
