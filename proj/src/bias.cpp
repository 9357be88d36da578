#include "fairrec/bias.hpp"

#include <algorithm>
#include <cmath>

#include "fairrec/csv.hpp"

namespace fairrec {

BiasMap::BiasMap(std::vector<UserBiasScore> scores) : scores_(std::move(scores)) {
    index_.reserve(scores_.size());
    for (std::size_t k = 0; k < scores_.size(); ++k) {
        if (!index_.emplace(scores_[k].user_id, k).second)
            throw InputError("duplicate theta entry for user '" + scores_[k].user_id + "'");
    }
}

const UserBiasScore& BiasMap::at(const std::string& user_id) const {
    const UserBiasScore* s = find(user_id);
    if (!s) throw NotFoundError("no theta for user '" + user_id + "'");
    return *s;
}

const UserBiasScore* BiasMap::find(const std::string& user_id) const {
    auto it = index_.find(user_id);
    return it == index_.end() ? nullptr : &scores_[it->second];
}

GroupMeans group_geometric_means(const std::vector<std::pair<GroupLabel, double>>& ratings) {
    double log_sum_a = 0.0, log_sum_d = 0.0;
    GroupMeans means;
    for (const auto& [group, value] : ratings) {
        if (!(value > 0.0)) continue;  // log undefined; zero-rated entries never reach here from datasets
        if (group == GroupLabel::Advantaged) {
            log_sum_a += std::log(value);
            means.n += 1;
        } else {
            log_sum_d += std::log(value);
            means.m += 1;
        }
    }
    if (means.n > 0) means.advantaged = std::exp(log_sum_a / static_cast<double>(means.n));
    if (means.m > 0) means.disadvantaged = std::exp(log_sum_d / static_cast<double>(means.m));
    return means;
}

UserBiasScore user_log_bias(const GroupMeans& means) {
    UserBiasScore score;
    score.m = means.m;
    score.n = means.n;
    score.mean_advantaged = means.advantaged;
    score.mean_disadvantaged = means.disadvantaged;
    if (means.advantaged && means.disadvantaged) {
        score.theta = std::log(*means.advantaged) - std::log(*means.disadvantaged);
        score.defined = true;
    }
    return score;
}

namespace {

UserBiasScore score_for_user(const RatingsDataset& ds, Index u) {
    std::vector<std::pair<GroupLabel, double>> ratings;
    const std::uint32_t lo = ds.user_offsets()[u], hi = ds.user_offsets()[u + 1];
    ratings.reserve(hi - lo);
    for (std::uint32_t slot = lo; slot < hi; ++slot)
        ratings.emplace_back(ds.item_group(ds.user_items()[slot]), ds.user_values()[slot]);
    UserBiasScore score = user_log_bias(group_geometric_means(ratings));
    score.user_id = ds.user_id(u);
    return score;
}

}  // namespace

BiasMap compute_user_bias(const RatingsDataset& ds) {
    std::vector<UserBiasScore> scores(ds.user_count());
#pragma omp parallel for schedule(static)
    for (long long u = 0; u < static_cast<long long>(ds.user_count()); ++u)
        scores[static_cast<std::size_t>(u)] = score_for_user(ds, static_cast<Index>(u));
    return BiasMap(std::move(scores));
}

BiasMap compute_user_bias_serial(const RatingsDataset& ds) {
    std::vector<UserBiasScore> scores(ds.user_count());
    for (Index u = 0; u < ds.user_count(); ++u) scores[u] = score_for_user(ds, u);
    return BiasMap(std::move(scores));
}

DebiasedDataset debias_ratings(const RatingsDataset& ds, const BiasMap& thetas) {
    std::vector<double> factor(ds.user_count());
    for (Index u = 0; u < ds.user_count(); ++u) {
        const UserBiasScore* s = thetas.find(ds.user_id(u));
        if (!s) throw NotFoundError("debias: user '" + ds.user_id(u) + "' has no theta");
        factor[u] = std::exp(s->theta);
    }
    std::vector<Rating> triples = ds.triples();
    for (Rating& r : triples)
        if (ds.item_group(r.item) == GroupLabel::Disadvantaged) r.value *= factor[r.user];
    DebiasedDataset out;
    out.ratings = RatingsDataset::build(ds.scale_max(), ds.user_ids(), ds.item_ids(),
                                        std::move(triples), ds.item_groups(),
                                        /*enforce_scale=*/false);
    out.source = &thetas;
    return out;
}

void preference_correct(std::vector<std::pair<std::string, double>>& predictions,
                        const std::string& user_id, const BiasMap& thetas,
                        const ItemCatalog& catalog) {
    const UserBiasScore* s = thetas.find(user_id);
    if (!s) throw NotFoundError("preference_correct: user '" + user_id + "' has no theta");
    const double factor = std::exp(-s->theta);
    for (auto& [item, value] : predictions) {
        auto group = catalog.lookup(item);
        if (!group) throw NotFoundError("preference_correct: item '" + item + "' not in catalog");
        if (*group == GroupLabel::Disadvantaged) value *= factor;
    }
}

void preference_correct_indexed(std::vector<ScoredItem>& predictions, double theta,
                                const std::vector<GroupLabel>& groups) {
    const double factor = std::exp(-theta);
    for (ScoredItem& s : predictions)
        if (groups[s.item] == GroupLabel::Disadvantaged) s.score *= factor;
}

UserBiasScore recommendation_log_bias(const RecommendationProfile& profile,
                                      const ItemCatalog& catalog) {
    std::vector<std::pair<GroupLabel, double>> ratings;
    ratings.reserve(profile.items.size());
    for (const std::string& item : profile.items) {
        auto group = catalog.lookup(item);
        if (!group) throw NotFoundError("recommendation bias: item '" + item + "' not in catalog");
        double value = profile.predicted.at(item);
        if (!(value > 0.0)) continue;
        ratings.emplace_back(*group, value);
    }
    UserBiasScore score = user_log_bias(group_geometric_means(ratings));
    score.user_id = profile.user_id;
    return score;
}

GlobalBias global_bias(const std::vector<UserBiasScore>& scores) {
    GlobalBias out;
    double sum = 0.0;
    for (const UserBiasScore& s : scores) {
        if (!s.defined) continue;
        sum += s.theta;
        out.defined_count += 1;
    }
    if (out.defined_count > 0) out.gamma_hat = sum / static_cast<double>(out.defined_count);
    return out;
}

std::vector<HistogramBin> bias_histogram(const std::vector<UserBiasScore>& scores, double bin_width) {
    if (!(bin_width > 0.0)) throw InputError("bin_width must be positive");
    std::vector<double> thetas;
    for (const UserBiasScore& s : scores)
        if (s.defined) thetas.push_back(s.theta);
    if (thetas.empty()) return {};
    auto bin_of = [&](double x) { return static_cast<long long>(std::floor(x / bin_width)); };
    long long lo_bin = bin_of(thetas[0]), hi_bin = lo_bin;
    for (double t : thetas) {
        lo_bin = std::min(lo_bin, bin_of(t));
        hi_bin = std::max(hi_bin, bin_of(t));
    }
    std::vector<HistogramBin> bins;
    bins.reserve(static_cast<std::size_t>(hi_bin - lo_bin + 1));
    for (long long b = lo_bin; b <= hi_bin; ++b)
        bins.push_back({static_cast<double>(b) * bin_width, static_cast<double>(b + 1) * bin_width, 0});
    for (double t : thetas) bins[static_cast<std::size_t>(bin_of(t) - lo_bin)].count += 1;
    return bins;
}

void save_bias_map(const BiasMap& map, const std::string& path, char delimiter) {
    std::vector<const UserBiasScore*> order;
    order.reserve(map.size());
    for (const UserBiasScore& s : map.scores()) order.push_back(&s);
    std::sort(order.begin(), order.end(),
              [](const UserBiasScore* a, const UserBiasScore* b) { return a->user_id < b->user_id; });
    DelimitedWriter out(path, delimiter);
    out.write_row({"user_id", "theta", "defined", "m", "n"});
    for (const UserBiasScore* s : order)
        out.write_row({s->user_id, format_double(s->theta), s->defined ? "1" : "0",
                       std::to_string(s->m), std::to_string(s->n)});
    out.close();
}

BiasMap load_bias_map(const std::string& path, char delimiter) {
    std::vector<UserBiasScore> scores;
    read_delimited(path, delimiter, {"user_id", "theta", "defined", "m", "n"}, [&](const CsvRow& row) {
        if (row.fields.size() != 5)
            throw ParseError(path + ": line " + std::to_string(row.line_number) + ": expected 5 fields");
        UserBiasScore s;
        s.user_id = std::string(row.fields[0]);
        s.theta = parse_double(row.fields[1], "theta");
        s.defined = row.fields[2] == "1";
        s.m = static_cast<std::size_t>(parse_double(row.fields[3], "m"));
        s.n = static_cast<std::size_t>(parse_double(row.fields[4], "n"));
        scores.push_back(std::move(s));
    });
    return BiasMap(std::move(scores));
}

void save_histogram(const std::vector<HistogramBin>& bins, const std::string& path, char delimiter) {
    DelimitedWriter out(path, delimiter);
    out.write_row({"bin_lo", "bin_hi", "count"});
    for (const HistogramBin& b : bins)
        out.write_row({format_double(b.lo), format_double(b.hi), std::to_string(b.count)});
    out.close();
}

}  // namespace fairrec
