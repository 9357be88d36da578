#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "fairrec/csv.hpp"
#include "fairrec/dataset.hpp"
#include "fairrec/rng.hpp"

#include "support/temp_dir.hpp"

using namespace fairrec;
using testutil::TempDir;

namespace {
std::string write_file(const TempDir& dir, const std::string& name, const std::string& content) {
    return dir.write(name, content);
}
}  // namespace

TEST_CASE("load_ratings drops zeros per policy and keeps the last duplicate") {
    TempDir dir;
    auto path = write_file(dir, "r.csv",
                           "user_id,item_id,rating\n"
                           "u1,i1,4\n"
                           "u1,i2,0\n"
                           "u2,i1,5\n");
    LoadOptions options;
    options.scale_max = 5.0;
    LoadReport report;
    RatingsDataset ds = load_ratings(path, options, &report);
    CHECK(ds.rating_count() == 2);
    CHECK(report.zeros_dropped == 1);

    auto dup = write_file(dir, "dup.csv",
                          "user_id,item_id,rating\n"
                          "u1,i1,3\n"
                          "u1,i1,5\n");
    RatingsDataset ds2 = load_ratings(dup, options, &report);
    CHECK(ds2.rating_count() == 1);
    CHECK(report.duplicates == 1);
    CHECK(user_profile(ds2, "u1").ratings.at("i1") == 5.0);
}

TEST_CASE("load_ratings rejects out-of-scale ratings and zero when policy says error") {
    TempDir dir;
    auto path = write_file(dir, "r.csv", "user_id,item_id,rating\nu1,i1,11\n");
    LoadOptions options;
    options.scale_max = 10.0;
    CHECK_THROWS_AS(load_ratings(path, options), InputError);

    auto zeros = write_file(dir, "z.csv", "user_id,item_id,rating\nu1,i1,0\n");
    options.zero_policy = ZeroPolicy::Error;
    CHECK_THROWS_AS(load_ratings(zeros, options), InputError);
}

TEST_CASE("load_ratings reports malformed rows with line numbers") {
    TempDir dir;
    auto path = write_file(dir, "r.csv",
                           "user_id,item_id,rating\n"
                           "u1,i1,4\n"
                           "u1,i2\n"
                           "u2,i1,notanumber\n"
                           "u2,i2,3\n");
    LoadOptions options;
    LoadReport report;
    RatingsDataset ds = load_ratings(path, options, &report);
    CHECK(ds.rating_count() == 2);
    REQUIRE(report.malformed.size() == 2);
    CHECK(report.malformed[0].first == 3);
    CHECK(report.malformed[1].first == 4);
}

TEST_CASE("round-trip: serialize(load(f)) reproduces retained triples byte for byte") {
    TempDir dir;
    // Deliberately unsorted input with a duplicate and a zero.
    auto path = write_file(dir, "r.csv",
                           "user_id,item_id,rating\n"
                           "u2,i1,5\n"
                           "u1,i2,3\n"
                           "u1,i1,4\n"
                           "u1,i2,2\n"
                           "u3,i1,0\n");
    LoadOptions options;
    RatingsDataset ds = load_ratings(path, options);
    std::string out1 = dir.file("out1.csv");
    save_ratings(ds, out1);
    RatingsDataset ds2 = load_ratings(out1, options);
    std::string out2 = dir.file("out2.csv");
    save_ratings(ds2, out2);
    CHECK(read_text_file(out1) == read_text_file(out2));
    CHECK(read_text_file(out1) ==
          "user_id,item_id,rating\n"
          "u1,i1,4\n"
          "u1,i2,2\n"
          "u2,i1,5\n");
}

TEST_CASE("round-trip property on random datasets") {
    Rng rng(99);
    LoadOptions options;
    options.scale_max = 10.0;
    for (int round = 0; round < 20; ++round) {
        TempDir dir;
        std::string content = "user_id,item_id,rating\n";
        const std::size_t rows = 1 + rng.bounded(40);
        for (std::size_t k = 0; k < rows; ++k) {
            content += "u" + std::to_string(rng.bounded(8)) + ",i" + std::to_string(rng.bounded(12)) +
                       "," + format_double(1.0 + 9.0 * rng.uniform()) + "\n";
        }
        auto path = write_file(dir, "r.csv", content);
        RatingsDataset ds = load_ratings(path, options);
        auto out1 = dir.file("o1.csv");
        save_ratings(ds, out1);
        auto out2 = dir.file("o2.csv");
        save_ratings(load_ratings(out1, options), out2);
        CHECK(read_text_file(out1) == read_text_file(out2));
    }
}

TEST_CASE("catalog attach restricts to labeled items") {
    TempDir dir;
    auto rpath = write_file(dir, "r.csv",
                            "user_id,item_id,rating\n"
                            "u1,i1,4\nu1,i2,3\nu2,i3,5\n");
    auto cpath = write_file(dir, "c.csv", "item_id,group\ni1,A\ni2,D\n");
    RatingsDataset raw = load_ratings(rpath, LoadOptions{});
    ItemCatalog catalog = load_catalog(cpath);
    CHECK(catalog.advantaged_count() == 1);
    CHECK(catalog.disadvantaged_count() == 1);
    std::size_t dropped = 0;
    RatingsDataset ds = with_catalog(raw, catalog, &dropped);
    CHECK(dropped == 1);
    CHECK(ds.rating_count() == 2);
    CHECK(ds.item_group(*ds.find_item("i2")) == GroupLabel::Disadvantaged);
}

TEST_CASE("filter_by_activity sequential cascades to emptiness on the worked example") {
    // users {a: i1,i2; b: i1; c: i1}: item i2 has one rating and is dropped,
    // user a falls to one rating and is removed, then b and c fail the user
    // threshold too.
    std::vector<std::string> users{"a", "b", "c"};
    std::vector<std::string> items{"i1", "i2"};
    std::vector<Rating> triples{{0, 0, 3}, {0, 1, 4}, {1, 0, 5}, {2, 0, 2}};
    std::vector<GroupLabel> groups{GroupLabel::Advantaged, GroupLabel::Disadvantaged};
    RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);
    CHECK_THROWS_AS(filter_by_activity(ds, 2, 2, FilterMode::Sequential), EmptyAfterFilterError);
    CHECK(filter_by_activity(ds, 1, 1, FilterMode::Sequential).rating_count() == 4);
}

TEST_CASE("filter_by_activity full matrix passes unchanged in both modes") {
    std::vector<std::string> users{"a", "b", "c"};
    std::vector<std::string> items{"i1", "i2", "i3"};
    std::vector<Rating> triples;
    for (Index u = 0; u < 3; ++u)
        for (Index i = 0; i < 3; ++i) triples.push_back({u, i, 3.0});
    std::vector<GroupLabel> groups(3, GroupLabel::Advantaged);
    RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);
    CHECK(filter_by_activity(ds, 2, 2, FilterMode::Sequential).rating_count() == 9);
    CHECK(filter_by_activity(ds, 2, 2, FilterMode::Fixpoint).rating_count() == 9);
}

TEST_CASE("fixpoint filter satisfies both thresholds simultaneously") {
    Rng rng(1234);
    for (int round = 0; round < 10; ++round) {
        std::vector<std::string> users, items;
        for (int u = 0; u < 12; ++u) users.push_back("u" + std::to_string(u + 10));
        for (int i = 0; i < 12; ++i) items.push_back("i" + std::to_string(i + 10));
        std::vector<Rating> triples;
        std::set<std::pair<Index, Index>> seen;
        for (int k = 0; k < 50; ++k) {
            Index u = static_cast<Index>(rng.bounded(12));
            Index i = static_cast<Index>(rng.bounded(12));
            if (seen.emplace(u, i).second) triples.push_back({u, i, 1.0 + 4.0 * rng.uniform()});
        }
        std::vector<GroupLabel> groups(12, GroupLabel::Advantaged);
        RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);
        try {
            RatingsDataset core = filter_by_activity(ds, 2, 2, FilterMode::Fixpoint);
            std::map<std::string, int> user_deg, item_deg;
            for (const Rating& r : core.triples()) {
                user_deg[core.user_id(r.user)] += 1;
                item_deg[core.item_id(r.item)] += 1;
            }
            for (const auto& [id, deg] : user_deg) CHECK(deg >= 2);
            for (const auto& [id, deg] : item_deg) CHECK(deg >= 2);
        } catch (const EmptyAfterFilterError&) {
            // a legal outcome for sparse draws
        }
    }
}

TEST_CASE("split_users is deterministic, sized by rounding, and partitions profiles") {
    std::vector<std::string> users, items;
    for (int u = 0; u < 10; ++u) users.push_back("u" + std::to_string(u + 10));
    for (int i = 0; i < 6; ++i) items.push_back("i" + std::to_string(i + 10));
    std::vector<Rating> triples;
    for (Index u = 0; u < 10; ++u)
        for (Index i = 0; i < 4; ++i) triples.push_back({u, static_cast<Index>((u + i) % 6), 3.0});
    std::vector<GroupLabel> groups(6, GroupLabel::Advantaged);
    RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);

    SplitSpec spec;
    spec.test_user_fraction = 0.2;
    spec.holdout_fraction = 0.5;
    spec.seed = 7;
    SplitResult a = split_users(ds, spec);
    SplitResult b = split_users(ds, spec);
    CHECK(a.test_users.size() == 2);
    REQUIRE(a.test_users.size() == b.test_users.size());
    CHECK(a.partition_hash == b.partition_hash);
    for (std::size_t k = 0; k < a.test_users.size(); ++k)
        CHECK(a.test_users[k].user_id == b.test_users[k].user_id);

    for (const TestUserSplit& tu : a.test_users) {
        // 4 ratings at holdout 0.5: 2 visible, 2 held out, disjoint, covering.
        CHECK(tu.visible.size() == 2);
        CHECK(tu.held_out.size() == 2);
        std::set<std::string> all;
        for (const auto& r : tu.visible) all.insert(r.item_id);
        for (const auto& r : tu.held_out) all.insert(r.item_id);
        CHECK(all.size() == 4);
        UserProfile original = user_profile(ds, tu.user_id);
        CHECK(all == std::set<std::string>(original.items.begin(), original.items.end()));
        // Train view excludes exactly the held-out ratings.
        UserProfile train_view = user_profile(a.train, tu.user_id);
        CHECK(train_view.items.size() == 2);
        for (const auto& r : tu.held_out) CHECK(train_view.ratings.count(r.item_id) == 0);
    }

    SplitSpec other = spec;
    other.seed = 8;
    SplitResult c = split_users(ds, other);
    CHECK(a.partition_hash != c.partition_hash);
}

TEST_CASE("split_users skips users with fewer than 2 ratings") {
    std::vector<std::string> users{"a", "b", "c", "d", "e"};
    std::vector<std::string> items{"i1", "i2"};
    std::vector<Rating> triples{{0, 0, 3}, {1, 0, 3}, {1, 1, 4}, {2, 0, 3},
                                {2, 1, 4}, {3, 0, 3}, {3, 1, 4}, {4, 0, 3}, {4, 1, 4}};
    std::vector<GroupLabel> groups(2, GroupLabel::Advantaged);
    RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);
    SplitSpec spec;
    spec.test_user_fraction = 0.99;  // draw everyone
    spec.holdout_fraction = 0.5;
    spec.seed = 3;
    SplitResult split = split_users(ds, spec);
    CHECK(split.skipped_small_profiles == 1);
    for (const TestUserSplit& tu : split.test_users) CHECK(tu.user_id != "a");
}

TEST_CASE("table-1 sized test group: 20 percent of 44792 users is 8958") {
    CHECK(static_cast<long long>(std::llround(0.2 * 44792)) == 8958);
}

TEST_CASE("user_profile echoes ratings and signals unknown users") {
    std::vector<std::string> users{"u1"};
    std::vector<std::string> items{"i1"};
    std::vector<Rating> triples{{0, 0, 4}};
    std::vector<GroupLabel> groups{GroupLabel::Advantaged};
    RatingsDataset ds = RatingsDataset::build(5.0, users, items, triples, groups);
    UserProfile p = user_profile(ds, "u1");
    CHECK(p.items == std::vector<std::string>{"i1"});
    CHECK(p.ratings.at("i1") == 4.0);
    CHECK_THROWS_AS(user_profile(ds, "nobody"), NotFoundError);
}
