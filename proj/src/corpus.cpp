// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "ger/common.hpp"

namespace ger::corpus {

namespace {

using json = nlohmann::ordered_json;

std::optional<std::string> get_string(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) return std::nullopt;
    return it->get<std::string>();
}

std::optional<std::string> first_string(const json& j, std::initializer_list<const char*> keys) {
    for (const char* k : keys) {
        auto v = get_string(j, k);
        if (v && !v->empty()) return v;
    }
    return std::nullopt;
}

std::string json_scalar_to_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

}  // namespace

ReviewLoadResult load_reviews(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open reviews file: " + path);
    ReviewLoadResult result;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++result.malformed;
            continue;
        }
        Interaction it;
        auto user = get_string(j, "user_id");
        auto item = first_string(j, {"item_id", "parent_asin", "asin"});
        if (!user || user->empty() || !item) {
            ++result.malformed;
            continue;
        }
        it.user_id = *user;
        it.item_id = *item;
        auto rating = j.find("rating");
        auto ts = j.find("timestamp");
        if (rating == j.end() || !rating->is_number() || ts == j.end() || !ts->is_number()) {
            ++result.malformed;
            continue;
        }
        it.rating = rating->get<double>();
        it.timestamp = ts->is_number_float()
                           ? static_cast<std::int64_t>(std::llround(ts->get<double>()))
                           : ts->get<std::int64_t>();
        if (it.rating < 1.0 || it.rating > 5.0 || it.timestamp < 0) {
            ++result.malformed;
            continue;
        }
        it.summary = first_string(j, {"summary", "title"}).value_or("");
        it.review_text = first_string(j, {"text", "review_text", "reviewText"}).value_or("");
        result.interactions.push_back(std::move(it));
    }
    return result;
}

MetadataLoadResult load_metadata(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metadata file: " + path);
    MetadataLoadResult result;
    std::unordered_set<std::string> seen;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            ++result.malformed;
            continue;
        }
        ItemRecord rec;
        auto id = first_string(j, {"item_id", "parent_asin", "asin"});
        auto title = get_string(j, "title");
        if (!id || !title || title->empty()) {
            ++result.malformed;
            continue;
        }
        rec.item_id = *id;
        rec.title = *title;
        if (auto it = j.find("description"); it != j.end()) {
            if (it->is_string()) {
                rec.description = it->get<std::string>();
            } else if (it->is_array()) {
                std::string joined;
                for (const auto& part : *it) {
                    if (!part.is_string()) continue;
                    if (!joined.empty()) joined += "\n";
                    joined += part.get<std::string>();
                }
                rec.description = joined;
            }
        }
        if (auto it = j.find("categories"); it != j.end() && it->is_array())
            for (const auto& c : *it)
                if (c.is_string()) rec.categories.push_back(c.get<std::string>());
        if (auto it = j.find("details"); it != j.end() && it->is_object())
            for (const auto& [k, v] : it->items())
                rec.details.emplace_back(k, json_scalar_to_text(v));
        if (auto it = j.find("average_rating"); it != j.end() && it->is_number())
            rec.average_rating = it->get<double>();
        if (auto it = j.find("rating_count"); it != j.end() && it->is_number_integer())
            rec.rating_count = it->get<std::int64_t>();
        if (!seen.insert(rec.item_id).second) {
            ++result.duplicates;
            continue;
        }
        result.records.push_back(std::move(rec));
    }
    return result;
}

Dataset preprocess(const std::vector<Interaction>& interactions,
                   const std::vector<ItemRecord>& item_records,
                   std::size_t min_item_interactions,
                   std::size_t min_user_interactions,
                   PreprocessCounts* counts) {
    if (min_item_interactions < 1 || min_user_interactions < 1)
        throw ConfigError("preprocess: thresholds must be >= 1");
    PreprocessCounts local;
    PreprocessCounts& c = counts ? *counts : local;
    c = PreprocessCounts{};

    std::unordered_map<std::string, const ItemRecord*> meta;
    for (const ItemRecord& r : item_records) meta.emplace(r.item_id, &r);

    // exact-duplicate removal on the (user, item, timestamp) triple,
    // first occurrence wins
    std::vector<Interaction> live;
    live.reserve(interactions.size());
    std::set<std::tuple<std::string, std::string, std::int64_t>> triples;
    for (const Interaction& it : interactions) {
        if (it.user_id.empty() || it.item_id.empty())
            continue;
        if (!meta.count(it.item_id)) {
            ++c.unknown_item_interactions;
            continue;
        }
        if (!triples.insert({it.user_id, it.item_id, it.timestamp}).second) {
            ++c.duplicate_interactions;
            continue;
        }
        live.push_back(it);
    }

    // item filter then user filter, iterated to a fixed point
    std::unordered_set<std::string> banned_items, banned_users;
    bool changed = true;
    while (changed) {
        changed = false;
        ++c.filter_rounds;
        std::unordered_map<std::string, std::size_t> item_count;
        for (const Interaction& it : live)
            if (!banned_users.count(it.user_id)) ++item_count[it.item_id];
        for (const auto& [id, rec] : meta) {
            if (banned_items.count(id)) continue;
            auto found = item_count.find(id);
            std::size_t n = found == item_count.end() ? 0 : found->second;
            if (n < min_item_interactions) {
                banned_items.insert(id);
                ++c.removed_items;
                changed = true;
            }
        }
        std::unordered_map<std::string, std::size_t> user_count;
        for (const Interaction& it : live)
            if (!banned_items.count(it.item_id) && !banned_users.count(it.user_id))
                ++user_count[it.user_id];
        std::unordered_set<std::string> users_seen;
        for (const Interaction& it : live) {
            if (banned_users.count(it.user_id) || !users_seen.insert(it.user_id).second) continue;
            auto found = user_count.find(it.user_id);
            std::size_t n = found == user_count.end() ? 0 : found->second;
            if (n < min_user_interactions) {
                banned_users.insert(it.user_id);
                ++c.removed_users;
                changed = true;
            }
        }
    }

    Dataset ds;
    for (const Interaction& it : live) {
        if (banned_items.count(it.item_id) || banned_users.count(it.user_id)) continue;
        ds.users[it.user_id].push_back(it);
        if (!ds.items.count(it.item_id)) ds.items[it.item_id] = *meta.at(it.item_id);
    }
    for (auto& [user, seq] : ds.users)
        std::sort(seq.begin(), seq.end(), [](const Interaction& a, const Interaction& b) {
            if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
            return a.item_id < b.item_id;
        });
    ds.stats = dataset_stats(ds);
    if (ds.stats.num_reviews == 0) {
        std::ostringstream msg;
        msg << "preprocess: empty dataset after filtering"
            << " (input interactions=" << interactions.size()
            << ", duplicates=" << c.duplicate_interactions
            << ", unknown items=" << c.unknown_item_interactions
            << ", removed items=" << c.removed_items
            << ", removed users=" << c.removed_users << ")";
        throw Error(msg.str());
    }
    return ds;
}

DatasetStats dataset_stats(const Dataset& dataset) {
    DatasetStats s;
    s.num_users = dataset.users.size();
    s.num_items = dataset.items.size();
    for (const auto& [user, seq] : dataset.users) s.num_reviews += seq.size();
    return s;
}

SplitDataset split_leave_one_out(const Dataset& dataset) {
    SplitDataset split;
    for (const auto& [user, seq] : dataset.users) {
        UserSplit us;
        if (seq.size() >= 3) {
            us.train_len = seq.size() - 2;
            us.validation_target = seq.size() - 2;
            us.test_target = seq.size() - 1;
        } else {
            us.train_len = seq.size();
        }
        split.users[user] = us;
    }
    return split;
}

namespace {

std::string profile_tokens(const std::vector<double>& scores) {
    std::string out;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j) out += " ";
        out += "a" + std::to_string(j + 1) + "=" + format_fixed(scores[j], 1);
    }
    return out;
}

std::vector<double> draw_profile(Rng& rng, std::size_t m) {
    std::vector<double> v(m);
    for (double& x : v) x = (10.0 + static_cast<double>(rng.below(91))) / 10.0;
    return v;
}

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

}  // namespace

Dataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.num_aspects < 1) throw ConfigError("generate_synthetic: need at least one aspect");
    if (spec.num_items < 10) throw ConfigError("generate_synthetic: need at least 10 items");
    if (spec.num_users < 1) throw ConfigError("generate_synthetic: need at least one user");
    if (spec.seq_len_min < 1 || spec.seq_len_min > spec.seq_len_max)
        throw ConfigError("generate_synthetic: invalid sequence length range");
    if (spec.noise_scale < 0) throw ConfigError("generate_synthetic: noise_scale must be >= 0");

    Dataset ds;
    PlantedTruth truth;
    truth.noise_scale = spec.noise_scale;
    truth.seed = spec.seed;
    Rng master(spec.seed);

    char buf[32];
    std::vector<std::string> item_ids;
    Rng item_rng = master.fork("items");
    for (std::size_t i = 0; i < spec.num_items; ++i) {
        std::snprintf(buf, sizeof(buf), "i%05zu", i);
        std::string id(buf);
        item_ids.push_back(id);
        std::vector<double> aspects = draw_profile(item_rng, spec.num_aspects);
        ItemRecord rec;
        rec.item_id = id;
        rec.title = "Item " + id;
        rec.description =
            "Synthetic catalog entry. aspect profile: " + profile_tokens(aspects);
        truth.item_aspects[id] = std::move(aspects);
        ds.items[id] = std::move(rec);
    }

    Rng pref_rng = master.fork("prefs");
    std::vector<std::string> user_ids;
    for (std::size_t u = 0; u < spec.num_users; ++u) {
        std::snprintf(buf, sizeof(buf), "u%05zu", u);
        user_ids.push_back(buf);
        truth.user_prefs[user_ids.back()] = draw_profile(pref_rng, spec.num_aspects);
    }

    const std::int64_t epoch0 = 1600000000000;  // fixed origin for synthetic clocks
    for (std::size_t u = 0; u < spec.num_users; ++u) {
        const std::string& user_id = user_ids[u];
        const std::vector<double>& prefs = truth.user_prefs.at(user_id);
        Rng rng = master.fork("user-" + user_id);

        std::vector<double> logits = planted_selection_logits(truth, user_id, item_ids);
        for (double& l : logits) l += spec.noise_scale * rng.normal();
        double max_logit = *std::max_element(logits.begin(), logits.end());
        std::vector<double> probs(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i)
            probs[i] = std::exp(logits[i] - max_logit);

        // distance quantile per item: fraction of items strictly closer,
        // ties broken by item id, drives the rating
        std::vector<double> dist(item_ids.size());
        for (std::size_t i = 0; i < item_ids.size(); ++i)
            dist[i] = sq_distance(truth.item_aspects.at(item_ids[i]), prefs);
        std::vector<std::size_t> order(item_ids.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (dist[a] != dist[b]) return dist[a] < dist[b];
            return item_ids[a] < item_ids[b];
        });
        std::vector<double> quantile(item_ids.size());
        for (std::size_t r = 0; r < order.size(); ++r)
            quantile[order[r]] =
                static_cast<double>(r) / static_cast<double>(item_ids.size() - 1);

        std::size_t len =
            spec.seq_len_min + rng.below(spec.seq_len_max - spec.seq_len_min + 1);
        std::string taste = "taste profile: " + profile_tokens(prefs);
        std::vector<Interaction>& seq = ds.users[user_id];
        for (std::size_t k = 0; k < len; ++k) {
            std::size_t pick = rng.categorical(probs);
            Interaction it;
            it.user_id = user_id;
            it.item_id = item_ids[pick];
            double q = quantile[pick];
            it.rating = 5.0 - std::clamp(4.0 * q, 0.0, 4.0);
            it.timestamp = epoch0 + static_cast<std::int64_t>(u) * 3600000 +
                           static_cast<std::int64_t>(k + 1) * 86400000;
            it.summary = "review " + std::to_string(k + 1) + " by " + user_id;
            it.review_text = taste;
            seq.push_back(std::move(it));
        }
    }

    ds.stats = dataset_stats(ds);
    ds.planted = std::move(truth);
    return ds;
}

std::vector<double> planted_selection_logits(const PlantedTruth& truth,
                                             const std::string& user_id,
                                             const std::vector<std::string>& item_ids) {
    auto pit = truth.user_prefs.find(user_id);
    if (pit == truth.user_prefs.end())
        throw Error("planted_selection_logits: unknown user " + user_id);
    const std::vector<double>& prefs = pit->second;
    std::vector<double> logits(item_ids.size());
    double denom = 2.0 * static_cast<double>(prefs.size());
    for (std::size_t i = 0; i < item_ids.size(); ++i) {
        auto ait = truth.item_aspects.find(item_ids[i]);
        if (ait == truth.item_aspects.end())
            throw Error("planted_selection_logits: unknown item " + item_ids[i]);
        logits[i] = -sq_distance(ait->second, prefs) / denom;
    }
    return logits;
}

namespace {

json item_to_json(const ItemRecord& r) {
    json j;
    j["item_id"] = r.item_id;
    j["title"] = r.title;
    j["description"] = r.description;
    j["categories"] = r.categories;
    json det = json::array();
    for (const auto& [k, v] : r.details) det.push_back(json::array({k, v}));
    j["details"] = det;
    j["average_rating"] = r.average_rating ? json(*r.average_rating) : json(nullptr);
    j["rating_count"] = r.rating_count ? json(*r.rating_count) : json(nullptr);
    return j;
}

ItemRecord item_from_json(const json& j) {
    ItemRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.description = j.at("description").get<std::string>();
    for (const auto& c : j.at("categories")) r.categories.push_back(c.get<std::string>());
    for (const auto& d : j.at("details"))
        r.details.emplace_back(d.at(0).get<std::string>(), d.at(1).get<std::string>());
    if (!j.at("average_rating").is_null()) r.average_rating = j.at("average_rating").get<double>();
    if (!j.at("rating_count").is_null())
        r.rating_count = j.at("rating_count").get<std::int64_t>();
    return r;
}

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& path) {
    json j;
    j["format"] = "ger.dataset.v1";
    json items = json::array();
    for (const auto& [id, rec] : dataset.items) items.push_back(item_to_json(rec));
    j["items"] = std::move(items);
    json users = json::array();
    for (const auto& [id, seq] : dataset.users) {
        json u;
        u["user_id"] = id;
        json inter = json::array();
        for (const Interaction& it : seq) {
            json e;
            e["item_id"] = it.item_id;
            e["rating"] = it.rating;
            e["timestamp"] = it.timestamp;
            e["summary"] = it.summary;
            e["text"] = it.review_text;
            inter.push_back(std::move(e));
        }
        u["interactions"] = std::move(inter);
        users.push_back(std::move(u));
    }
    j["users"] = std::move(users);
    if (dataset.planted) {
        json p;
        p["noise_scale"] = dataset.planted->noise_scale;
        p["seed"] = dataset.planted->seed;
        p["item_aspects"] = dataset.planted->item_aspects;
        p["user_prefs"] = dataset.planted->user_prefs;
        j["planted"] = std::move(p);
    } else {
        j["planted"] = nullptr;
    }
    write_text_file(path, j.dump(1));
}

Dataset load_dataset(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("dataset archive " + path + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "ger.dataset.v1")
        throw IoError("dataset archive " + path + ": unsupported format tag");
    Dataset ds;
    for (const auto& it : j.at("items")) {
        ItemRecord r = item_from_json(it);
        std::string id = r.item_id;
        ds.items[id] = std::move(r);
    }
    for (const auto& u : j.at("users")) {
        std::string user_id = u.at("user_id").get<std::string>();
        std::vector<Interaction>& seq = ds.users[user_id];
        for (const auto& e : u.at("interactions")) {
            Interaction it;
            it.user_id = user_id;
            it.item_id = e.at("item_id").get<std::string>();
            it.rating = e.at("rating").get<double>();
            it.timestamp = e.at("timestamp").get<std::int64_t>();
            it.summary = e.at("summary").get<std::string>();
            it.review_text = e.at("text").get<std::string>();
            seq.push_back(std::move(it));
        }
    }
    if (j.contains("planted") && !j.at("planted").is_null()) {
        PlantedTruth t;
        const auto& p = j.at("planted");
        t.noise_scale = p.at("noise_scale").get<double>();
        t.seed = p.at("seed").get<std::uint64_t>();
        t.item_aspects =
            p.at("item_aspects").get<std::map<std::string, std::vector<double>>>();
        t.user_prefs = p.at("user_prefs").get<std::map<std::string, std::vector<double>>>();
        ds.planted = std::move(t);
    }
    ds.stats = dataset_stats(ds);
    return ds;
}

}  // namespace ger::corpus
