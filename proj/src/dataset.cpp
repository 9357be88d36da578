#include "fairrec/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "fairrec/csv.hpp"
#include "fairrec/rng.hpp"

namespace fairrec {

char group_code(GroupLabel g) { return g == GroupLabel::Advantaged ? 'A' : 'D'; }

GroupLabel group_from_code(std::string_view code) {
    if (code == "A") return GroupLabel::Advantaged;
    if (code == "D") return GroupLabel::Disadvantaged;
    throw InputError("unknown group code '" + std::string(code) + "', expected A or D");
}

void ItemCatalog::add(const std::string& item_id, GroupLabel group) {
    auto [it, inserted] = entries_.emplace(item_id, group);
    if (!inserted) throw InputError("duplicate catalog item '" + item_id + "'");
    (group == GroupLabel::Advantaged ? advantaged_ : disadvantaged_) += 1;
}

std::optional<GroupLabel> ItemCatalog::lookup(const std::string& item_id) const {
    auto it = entries_.find(item_id);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

RatingsDataset RatingsDataset::build(double scale_max, std::vector<std::string> user_ids,
                                     std::vector<std::string> item_ids, std::vector<Rating> triples,
                                     std::vector<GroupLabel> item_groups, bool enforce_scale) {
    if (scale_max <= 1.0) throw InputError("scale_max must exceed 1");
    if (item_groups.size() != item_ids.size())
        throw InputError("item_groups size does not match item_ids");
    RatingsDataset ds;
    ds.scale_max_ = scale_max;
    ds.enforce_scale_ = enforce_scale;
    ds.user_ids_ = std::move(user_ids);
    ds.item_ids_ = std::move(item_ids);
    ds.triples_ = std::move(triples);
    ds.item_groups_ = std::move(item_groups);
    ds.user_index_.reserve(ds.user_ids_.size());
    for (Index u = 0; u < ds.user_ids_.size(); ++u) {
        if (!ds.user_index_.emplace(ds.user_ids_[u], u).second)
            throw InputError("duplicate user id '" + ds.user_ids_[u] + "'");
    }
    ds.item_index_.reserve(ds.item_ids_.size());
    for (Index i = 0; i < ds.item_ids_.size(); ++i) {
        if (!ds.item_index_.emplace(ds.item_ids_[i], i).second)
            throw InputError("duplicate item id '" + ds.item_ids_[i] + "'");
    }
    for (const Rating& r : ds.triples_) {
        if (r.user >= ds.user_ids_.size() || r.item >= ds.item_ids_.size())
            throw InputError("rating references unknown user/item index");
        if (enforce_scale && (r.value < 1.0 || r.value > scale_max))
            throw InputError("rating " + format_double(r.value) + " outside [1, " +
                             format_double(scale_max) + "]");
        if (!(r.value > 0.0)) throw InputError("ratings must be positive");
    }

    // CSR by user, items sorted within each row.
    const std::size_t n_users = ds.user_ids_.size();
    ds.user_offsets_.assign(n_users + 1, 0);
    for (const Rating& r : ds.triples_) ds.user_offsets_[r.user + 1] += 1;
    for (std::size_t u = 0; u < n_users; ++u) ds.user_offsets_[u + 1] += ds.user_offsets_[u];
    ds.user_items_.resize(ds.triples_.size());
    ds.user_values_.resize(ds.triples_.size());
    std::vector<std::uint32_t> cursor(ds.user_offsets_.begin(), ds.user_offsets_.end() - 1);
    for (const Rating& r : ds.triples_) {
        std::uint32_t slot = cursor[r.user]++;
        ds.user_items_[slot] = r.item;
        ds.user_values_[slot] = r.value;
    }
    for (std::size_t u = 0; u < n_users; ++u) {
        const std::uint32_t lo = ds.user_offsets_[u], hi = ds.user_offsets_[u + 1];
        std::vector<std::pair<Index, double>> row;
        row.reserve(hi - lo);
        for (std::uint32_t k = lo; k < hi; ++k) row.emplace_back(ds.user_items_[k], ds.user_values_[k]);
        std::sort(row.begin(), row.end());
        for (std::uint32_t k = lo; k < hi; ++k) {
            ds.user_items_[k] = row[k - lo].first;
            ds.user_values_[k] = row[k - lo].second;
            if (k > lo && ds.user_items_[k] == ds.user_items_[k - 1])
                throw InputError("duplicate rating for user '" + ds.user_ids_[u] + "', item '" +
                                 ds.item_ids_[ds.user_items_[k]] + "'");
        }
    }
    return ds;
}

std::optional<Index> RatingsDataset::find_user(const std::string& user_id) const {
    auto it = user_index_.find(user_id);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<Index> RatingsDataset::find_item(const std::string& item_id) const {
    auto it = item_index_.find(item_id);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
}

namespace {

/// Index assignment follows sorted id order so a permuted input file yields
/// the same dataset object.
RatingsDataset from_id_triples(double scale_max,
                               std::vector<std::tuple<std::string, std::string, double>> triples,
                               const std::unordered_map<std::string, GroupLabel>* label_map,
                               bool enforce_scale) {
    std::vector<std::string> users, items;
    for (const auto& [u, i, v] : triples) {
        users.push_back(u);
        items.push_back(i);
    }
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    std::unordered_map<std::string, Index> user_idx, item_idx;
    for (Index u = 0; u < users.size(); ++u) user_idx[users[u]] = u;
    for (Index i = 0; i < items.size(); ++i) item_idx[items[i]] = i;
    std::vector<Rating> rs;
    rs.reserve(triples.size());
    for (const auto& [u, i, v] : triples) rs.push_back({user_idx[u], item_idx[i], v});
    std::vector<GroupLabel> groups(items.size(), GroupLabel::Advantaged);
    if (label_map) {
        for (Index i = 0; i < items.size(); ++i) {
            auto it = label_map->find(items[i]);
            if (it == label_map->end())
                throw InputError("item '" + items[i] + "' missing from catalog");
            groups[i] = it->second;
        }
    }
    return RatingsDataset::build(scale_max, std::move(users), std::move(items), std::move(rs),
                                 std::move(groups), enforce_scale);
}

}  // namespace

RatingsDataset load_ratings(const std::string& path, const LoadOptions& options, LoadReport* report) {
    LoadReport local;
    LoadReport& rep = report ? *report : local;
    // Last occurrence wins for duplicate (user, item) pairs.
    std::unordered_map<std::string, std::unordered_map<std::string, double>> by_user;
    read_delimited(path, options.delimiter, {"user_id", "item_id", "rating"}, [&](const CsvRow& row) {
        if (row.fields.size() != 3) {
            rep.malformed.emplace_back(row.line_number, "expected 3 fields");
            return;
        }
        std::string user(row.fields[0]);
        std::string item(row.fields[1]);
        if (user.empty() || item.empty()) {
            rep.malformed.emplace_back(row.line_number, "empty id");
            return;
        }
        double value;
        try {
            value = parse_double(row.fields[2], "rating");
        } catch (const ParseError&) {
            rep.malformed.emplace_back(row.line_number, "unparsable rating");
            return;
        }
        if (value == 0.0) {
            if (options.zero_policy == ZeroPolicy::Error)
                throw InputError(path + ": line " + std::to_string(row.line_number) +
                                 ": zero rating rejected by policy");
            rep.zeros_dropped += 1;
            return;
        }
        if (value < 1.0 || value > options.scale_max)
            throw InputError(path + ": line " + std::to_string(row.line_number) + ": rating " +
                             format_double(value) + " outside [1, " +
                             format_double(options.scale_max) + "]");
        auto& items = by_user[user];
        auto [it, inserted] = items.emplace(item, value);
        if (!inserted) {
            it->second = value;
            rep.duplicates += 1;
        }
    });
    std::vector<std::tuple<std::string, std::string, double>> triples;
    for (auto& [user, items] : by_user)
        for (auto& [item, value] : items) triples.emplace_back(user, item, value);
    rep.retained = triples.size();
    return from_id_triples(options.scale_max, std::move(triples), nullptr, true);
}

ItemCatalog load_catalog(const std::string& path, char delimiter) {
    ItemCatalog catalog;
    read_delimited(path, delimiter, {"item_id", "group"}, [&](const CsvRow& row) {
        if (row.fields.size() != 2)
            throw ParseError(path + ": line " + std::to_string(row.line_number) + ": expected 2 fields");
        catalog.add(std::string(row.fields[0]), group_from_code(row.fields[1]));
    });
    return catalog;
}

RatingsDataset with_catalog(const RatingsDataset& ds, const ItemCatalog& catalog,
                            std::size_t* dropped_ratings) {
    std::vector<std::tuple<std::string, std::string, double>> triples;
    std::size_t dropped = 0;
    for (const Rating& r : ds.triples()) {
        const std::string& item = ds.item_id(r.item);
        if (catalog.contains(item))
            triples.emplace_back(ds.user_id(r.user), item, r.value);
        else
            dropped += 1;
    }
    if (dropped_ratings) *dropped_ratings = dropped;
    if (triples.empty()) throw EmptyAfterFilterError("no rating has a cataloged item");
    return from_id_triples(ds.scale_max(), std::move(triples), &catalog.entries(),
                           ds.scale_enforced());
}

void save_ratings(const RatingsDataset& ds, const std::string& path, char delimiter) {
    std::vector<const Rating*> order;
    order.reserve(ds.rating_count());
    for (const Rating& r : ds.triples()) order.push_back(&r);
    std::sort(order.begin(), order.end(), [&](const Rating* a, const Rating* b) {
        const std::string& ua = ds.user_id(a->user);
        const std::string& ub = ds.user_id(b->user);
        if (ua != ub) return ua < ub;
        return ds.item_id(a->item) < ds.item_id(b->item);
    });
    DelimitedWriter out(path, delimiter);
    out.write_row({"user_id", "item_id", "rating"});
    for (const Rating* r : order)
        out.write_row({ds.user_id(r->user), ds.item_id(r->item), format_double(r->value)});
    out.close();
}

void save_catalog(const ItemCatalog& catalog, const std::string& path, char delimiter) {
    std::vector<std::pair<std::string, GroupLabel>> entries(catalog.entries().begin(),
                                                            catalog.entries().end());
    std::sort(entries.begin(), entries.end());
    DelimitedWriter out(path, delimiter);
    out.write_row({"item_id", "group"});
    for (const auto& [id, group] : entries) out.write_row({id, std::string(1, group_code(group))});
    out.close();
}

namespace {

RatingsDataset rebuild_subset(const RatingsDataset& ds, const std::vector<bool>& keep_triple) {
    std::vector<std::tuple<std::string, std::string, double>> triples;
    std::unordered_map<std::string, GroupLabel> labels;
    for (std::size_t t = 0; t < ds.triples().size(); ++t) {
        if (!keep_triple[t]) continue;
        const Rating& r = ds.triples()[t];
        triples.emplace_back(ds.user_id(r.user), ds.item_id(r.item), r.value);
        labels.emplace(ds.item_id(r.item), ds.item_group(r.item));
    }
    if (triples.empty()) throw EmptyAfterFilterError("activity filter removed every rating");
    return from_id_triples(ds.scale_max(), std::move(triples), &labels, ds.scale_enforced());
}

}  // namespace

RatingsDataset filter_by_activity(const RatingsDataset& ds, std::size_t min_item_ratings,
                                  std::size_t min_user_ratings, FilterMode mode) {
    if (min_item_ratings < 1 || min_user_ratings < 1)
        throw InputError("activity thresholds must be >= 1");
    std::vector<bool> keep(ds.triples().size(), true);
    std::vector<std::size_t> item_deg(ds.item_count()), user_deg(ds.user_count());
    auto recount = [&]() {
        std::fill(item_deg.begin(), item_deg.end(), 0);
        std::fill(user_deg.begin(), user_deg.end(), 0);
        for (std::size_t t = 0; t < keep.size(); ++t) {
            if (!keep[t]) continue;
            item_deg[ds.triples()[t].item] += 1;
            user_deg[ds.triples()[t].user] += 1;
        }
    };
    auto drop_items = [&]() {
        bool changed = false;
        for (std::size_t t = 0; t < keep.size(); ++t) {
            if (keep[t] && item_deg[ds.triples()[t].item] < min_item_ratings) {
                keep[t] = false;
                changed = true;
            }
        }
        return changed;
    };
    auto drop_users = [&]() {
        bool changed = false;
        for (std::size_t t = 0; t < keep.size(); ++t) {
            if (keep[t] && user_deg[ds.triples()[t].user] < min_user_ratings) {
                keep[t] = false;
                changed = true;
            }
        }
        return changed;
    };
    if (mode == FilterMode::Sequential) {
        recount();
        drop_items();
        recount();
        drop_users();
    } else {
        for (;;) {
            recount();
            bool changed = drop_items();
            recount();
            changed = drop_users() || changed;
            if (!changed) break;
        }
    }
    return rebuild_subset(ds, keep);
}

SplitResult split_users(const RatingsDataset& ds, const SplitSpec& spec) {
    if (!(spec.test_user_fraction > 0.0 && spec.test_user_fraction < 1.0))
        throw InputError("test_user_fraction must lie in (0,1)");
    if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0))
        throw InputError("holdout_fraction must lie in (0,1)");
    if (ds.rating_count() == 0) throw InputError("cannot split an empty dataset");

    // Users considered in sorted-id order so the draw is independent of file
    // row order.
    std::vector<Index> users(ds.user_count());
    for (Index u = 0; u < users.size(); ++u) users[u] = u;
    std::sort(users.begin(), users.end(),
              [&](Index a, Index b) { return ds.user_id(a) < ds.user_id(b); });
    Rng rng(substream_seed(spec.seed, 0x73706c6974ull));  // "split"
    rng.shuffle(users);

    const std::size_t target =
        static_cast<std::size_t>(std::llround(spec.test_user_fraction * static_cast<double>(ds.user_count())));
    SplitResult result;
    std::vector<bool> is_heldout(ds.rating_count(), false);
    std::vector<std::pair<std::string, TestUserSplit>> chosen;
    for (std::size_t k = 0; k < target && k < users.size(); ++k) {
        Index u = users[k];
        if (ds.user_degree(u) < 2) {
            result.skipped_small_profiles += 1;
            continue;
        }
        TestUserSplit split;
        split.user_id = ds.user_id(u);
        // CSR rows are sorted by item index; re-sort by item id and shuffle
        // with a per-user stream so the partition only depends on (seed, ids).
        std::vector<std::pair<std::string, std::uint32_t>> row;  // (item_id, triple slot)
        const std::uint32_t lo = ds.user_offsets()[u], hi = ds.user_offsets()[u + 1];
        for (std::uint32_t slot = lo; slot < hi; ++slot)
            row.emplace_back(ds.item_id(ds.user_items()[slot]), slot);
        std::sort(row.begin(), row.end());
        std::vector<std::size_t> order(row.size());
        for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
        Rng user_rng(substream_seed(spec.seed, fnv1a64(split.user_id)));
        user_rng.shuffle(order);
        std::size_t n_hold = static_cast<std::size_t>(
            std::llround(spec.holdout_fraction * static_cast<double>(row.size())));
        n_hold = std::max<std::size_t>(1, std::min(n_hold, row.size() - 1));
        for (std::size_t j = 0; j < order.size(); ++j) {
            const auto& [item_id, slot] = row[order[j]];
            HeldOutRating hr{item_id, ds.user_values()[slot]};
            if (j < n_hold)
                split.held_out.push_back(hr);
            else
                split.visible.push_back(hr);
        }
        auto sort_by_item = [](std::vector<HeldOutRating>& v) {
            std::sort(v.begin(), v.end(),
                      [](const HeldOutRating& a, const HeldOutRating& b) { return a.item_id < b.item_id; });
        };
        sort_by_item(split.visible);
        sort_by_item(split.held_out);
        chosen.emplace_back(split.user_id, std::move(split));
    }
    std::sort(chosen.begin(), chosen.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    // Mark held-out triples.
    std::unordered_map<std::string, std::unordered_set<std::string>> heldout_items;
    for (const auto& [uid, split] : chosen) {
        auto& set = heldout_items[uid];
        for (const HeldOutRating& hr : split.held_out) set.insert(hr.item_id);
    }
    for (std::size_t t = 0; t < ds.triples().size(); ++t) {
        const Rating& r = ds.triples()[t];
        auto it = heldout_items.find(ds.user_id(r.user));
        if (it != heldout_items.end() && it->second.count(ds.item_id(r.item))) is_heldout[t] = true;
    }
    std::vector<bool> keep(ds.rating_count());
    for (std::size_t t = 0; t < keep.size(); ++t) keep[t] = !is_heldout[t];
    result.train = rebuild_subset(ds, keep);
    result.test_users.reserve(chosen.size());
    for (auto& [uid, split] : chosen) result.test_users.push_back(std::move(split));

    std::uint64_t h = fnv1a64("split-v1");
    for (const TestUserSplit& tu : result.test_users) {
        h = fnv1a64(tu.user_id, h);
        h = fnv1a64("|v", h);
        for (const HeldOutRating& r : tu.visible) h = fnv1a64(r.item_id, h);
        h = fnv1a64("|h", h);
        for (const HeldOutRating& r : tu.held_out) h = fnv1a64(r.item_id, h);
    }
    result.partition_hash = h;
    return result;
}

UserProfile user_profile(const RatingsDataset& ds, const std::string& user_id) {
    auto u = ds.find_user(user_id);
    if (!u) throw NotFoundError("unknown user '" + user_id + "'");
    UserProfile profile;
    profile.user_id = user_id;
    const std::uint32_t lo = ds.user_offsets()[*u], hi = ds.user_offsets()[*u + 1];
    for (std::uint32_t slot = lo; slot < hi; ++slot) {
        const std::string& item = ds.item_id(ds.user_items()[slot]);
        profile.items.push_back(item);
        profile.ratings.emplace(item, ds.user_values()[slot]);
    }
    std::sort(profile.items.begin(), profile.items.end());
    return profile;
}

}  // namespace fairrec
