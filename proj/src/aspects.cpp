// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#include "ger/aspects.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ger/common.hpp"

namespace ger::aspects {

std::string domain_name(Domain d) {
    switch (d) {
        case Domain::movies: return "movies";
        case Domain::clothing: return "clothing";
        case Domain::games: return "games";
        case Domain::custom: return "custom";
    }
    return "custom";
}

Domain parse_domain(const std::string& name) {
    if (name == "movies") return Domain::movies;
    if (name == "clothing") return Domain::clothing;
    if (name == "games") return Domain::games;
    if (name == "custom") return Domain::custom;
    throw ConfigError("unknown domain '" + name + "' (valid: movies, clothing, games, custom)");
}

std::string AspectCatalog::fingerprint() const {
    std::uint64_t h = fnv1a64(domain_name(domain));
    for (const Aspect& a : aspects) {
        h = fnv1a64(a.name, h);
        h = fnv1a64("\x1f", h);
        h = fnv1a64(a.description, h);
        h = fnv1a64("\x1e", h);
    }
    return hex64(h);
}

AspectCatalog builtin_catalog(Domain domain) {
    AspectCatalog c;
    c.domain = domain;
    switch (domain) {
        case Domain::movies:
            c.aspects = {
                {"story complexity",
                 "How intricate and multi-layered the storyline is (e.g., 1 for very simple, 10 "
                 "for highly complex)."},
                {"dialogue complexity",
                 "The sophistication of the conversations and monologues (e.g., 1 for simple, 10 "
                 "for highly sophisticated)."},
                {"intellectual challenge",
                 "How hard to understand the movie is for the audience (e.g., 1 for not "
                 "challenging, 10 for very hard)."},
                {"emotional intensity",
                 "The degree to which the movie elicits strong emotional responses (e.g., 1 for "
                 "no emotional impact, 10 for deeply emotional)."},
                {"visual & auditory intensity",
                 "The impact of visuals, special effects, and sound design (e.g., 1 for minimal "
                 "impact, 10 for highly intense)."},
                {"tension level",
                 "The suspense and edge-of-your-seat moments (e.g., 1 for no tension, 10 for "
                 "extremely tense)."},
                {"pace",
                 "The rhythm of the movie, from slow and reflective to fast and action-packed "
                 "(e.g., 1 for very slow, 10 for very fast)."},
                {"realism vs. fantasy",
                 "Rate from realism to fantasy (e.g., 1 for highly realistic, 10 for pure "
                 "fantasy)."},
                {"historical vs. contemporary",
                 "Rate from historical to contemporary (e.g., 1 for purely historical, 10 for "
                 "completely modern)."},
                {"social value alignment",
                 "The degree to which the movie reflects social values or conveys meaningful "
                 "societal themes (e.g., 1 for no alignment, 10 for strong alignment)."},
                {"individual viewing vs. group viewing",
                 "Rate based on suitability for watching alone vs. with a group (e.g., 1 for "
                 "perfect for solo viewing, 10 for ideal for group viewing)."},
                {"movie length (duration)",
                 "Evaluate how long is the movie (e.g., 1 for very short, 10 for very long)."},
            };
            break;
        case Domain::clothing:
            c.aspects = {
                {"color brightness",
                 "Bright colors vs. dark colors (e.g., 1 for dark, 10 for bright)."},
                {"color diversity",
                 "Monochromatic vs. multicolored items (e.g., 1 for monochromatic, 10 for "
                 "multicolored)."},
                {"complexity",
                 "Simple design vs. intricate details (e.g., 1 for simple, 10 for intricate)."},
                {"shape or structure",
                 "Loose vs. fitted designs (e.g., 1 for loose, 10 for fitted)."},
                {"formality", "Casual vs. formal wear (e.g., 1 for casual, 10 for formal)."},
                {"versatility",
                 "Single-purpose vs. multipurpose items (e.g., 1 for single-purpose, 10 for "
                 "multipurpose)."},
                {"trendiness",
                 "Classic vs. trendy styles (e.g., 1 for classic, 10 for trendy)."},
                {"social class",
                 "Items associated with a social message (e.g., 1 for no social message, 10 for "
                 "social message)."},
                {"brand popularity",
                 "Well-known vs. niche brands (e.g., 1 for niche, 10 for well-known)."},
                {"occasion suitability",
                 "Everyday use vs. special occasion items (e.g., 1 for everyday, 10 for special "
                 "occasion)."},
                {"storage features",
                 "Availability of pockets, compartments, or zippers (e.g., 1 for no storage, 10 "
                 "for multiple storage options)."},
                {"ease of care",
                 "Machine washable vs. dry clean only, need Iron v.s. Iron-free (e.g., 1 for dry "
                 "clean only, 10 for machine washable)."},
            };
            break;
        case Domain::games:
            c.aspects = {
                {"difficulty level",
                 "Easy to play vs. challenging to master (e.g., 1 for very easy, 10 for "
                 "extremely challenging)."},
                {"genre popularity",
                 "Niche genre vs. mainstream genre (e.g., 1 for niche, 10 for mainstream)."},
                {"game length",
                 "Short play sessions vs. long campaigns (e.g., 1 for short, 10 for long)."},
                {"graphics quality",
                 "Retro-style graphics vs. cutting-edge visuals (e.g., 1 for retro, 10 for "
                 "cutting-edge)."},
                {"replay value",
                 "Low replayability vs. high replayability (e.g., 1 for low, 10 for high)."},
                {"story depth",
                 "Simple storylines vs. intricate narratives (e.g., 1 for simple, 10 for "
                 "intricate)."},
                {"multiplayer focus",
                 "Solo play vs. multiplayer emphasis (e.g., 1 for solo, 10 for multiplayer)."},
                {"accessibility",
                 "Casual-friendly vs. requiring advanced skills/equipment (e.g., 1 for casual, "
                 "10 for advanced)."},
                {"gaming style and emotional resonance",
                 "Relaxed exploration vs. competitive gameplay, Games that elicit strong "
                 "emotions vs. neutral tones (e.g., 1 for relaxed, 10 for competitive)."},
                {"customization",
                 "Games with deep customization options v.s. limited customization options "
                 "(e.g., 1 for deep customization, 10 for limited customization)."},
                {"realism",
                 "Preference for realistic simulations vs. fantasy settings (e.g., 1 for "
                 "realistic, 10 for fantasy)."},
                {"achievement system",
                 "Rich achievement integration vs. basic completion tracking (e.g., 1 for basic, "
                 "10 for rich)."},
            };
            break;
        case Domain::custom:
            throw ConfigError("no built-in catalog for domain 'custom' (valid: movies, clothing, games)");
    }
    return c;
}

AspectCatalog truncate_catalog(const AspectCatalog& catalog, std::size_t k) {
    if (k < 1 || k > catalog.size())
        throw ConfigError("truncate_catalog: k must be in [1, " +
                          std::to_string(catalog.size()) + "], got " + std::to_string(k));
    AspectCatalog out;
    out.domain = catalog.domain;
    out.aspects.assign(catalog.aspects.begin(), catalog.aspects.begin() + static_cast<long>(k));
    return out;
}

AspectCatalog load_catalog_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("catalog file " + path + ": " + e.what());
    }
    AspectCatalog c;
    c.domain = Domain::custom;
    if (j.contains("domain")) c.domain = parse_domain(j.at("domain").get<std::string>());
    if (!j.contains("aspects") || !j.at("aspects").is_array() || j.at("aspects").empty())
        throw ConfigError("catalog file " + path + ": needs a non-empty 'aspects' array");
    std::set<std::string> seen;
    for (const auto& e : j.at("aspects")) {
        Aspect a{e.at("name").get<std::string>(), e.at("description").get<std::string>()};
        if (a.name.empty() || a.description.empty())
            throw ConfigError("catalog file " + path + ": empty aspect name or description");
        if (!seen.insert(lower(a.name)).second)
            throw ConfigError("catalog file " + path + ": duplicate aspect name '" + a.name + "'");
        c.aspects.push_back(std::move(a));
    }
    return c;
}

namespace {

std::string critic_persona(Domain d) {
    switch (d) {
        case Domain::movies: return "You are a movie critic.";
        case Domain::clothing: return "You are a fashion critic.";
        case Domain::games: return "You are a video game critic.";
        case Domain::custom: return "You are a critic.";
    }
    return "You are a critic.";
}

std::string recommender_persona(Domain d) {
    switch (d) {
        case Domain::movies: return "You are a movie recommender.";
        case Domain::clothing: return "You are a fashion recommender.";
        case Domain::games: return "You are a video game recommender.";
        case Domain::custom: return "You are a recommender.";
    }
    return "You are a recommender.";
}

std::string aspect_blocks(const AspectCatalog& catalog) {
    std::ostringstream out;
    for (const Aspect& a : catalog.aspects) out << a.name << ": " << a.description << "\n";
    out << "\n"
        << "Your response should be in the following format, where <rating> is a number "
           "between 1 and 10:\n";
    for (const Aspect& a : catalog.aspects) out << a.name << ": <rating>\n";
    out << "\n"
        << "Do NOT include any other information in your response.";
    return out.str();
}

std::string item_system_prompt(const AspectCatalog& catalog) {
    std::ostringstream out;
    out << critic_persona(catalog.domain) << " You have been asked to review a movie.\n\n"
        << "You should rate the movie on a scale of 1 to 10 (1 is the most negative and 10 is "
           "the most positive) on the following dimensions:\n"
        << aspect_blocks(catalog);
    return out.str();
}

std::string user_system_prompt(const AspectCatalog& catalog) {
    std::ostringstream out;
    out << recommender_persona(catalog.domain)
        << " You will be given some previous movie reviews of a user. You have been asked to "
           "recommend a movie to the user.\n\n"
        << "You should rate the movie which you think the user will like on a scale of 1 to 10 "
           "(1 is the least likely and 10 is the most likely) on the following dimensions:\n"
        << aspect_blocks(catalog);
    return out.str();
}

void emit_field(std::ostringstream& out, const std::string& key, const std::string& value) {
    if (value.empty()) return;
    out << key << ":\n" << indent_block(value, 2) << "\n";
}

}  // namespace

std::string render_item_block(const corpus::ItemRecord& item) {
    std::ostringstream out;
    emit_field(out, "title", item.title);
    emit_field(out, "description", item.description);
    if (item.average_rating) {
        std::string rating = format_fixed(*item.average_rating, 1) + "/5.0";
        if (item.rating_count)
            rating += " (" + std::to_string(*item.rating_count) + " users)";
        emit_field(out, "rating", rating);
    }
    if (!item.categories.empty()) {
        std::string cats;
        for (std::size_t i = 0; i < item.categories.size(); ++i) {
            if (i) cats += "\n";
            cats += item.categories[i];
        }
        emit_field(out, "categories", cats);
    }
    if (!item.details.empty()) {
        std::string details;
        for (std::size_t i = 0; i < item.details.size(); ++i) {
            if (i) details += "\n";
            details += item.details[i].first + ": " + item.details[i].second;
        }
        emit_field(out, "details", details);
    }
    std::string s = out.str();
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

std::string render_review_block(const ReviewEntry& entry) {
    std::ostringstream out;
    emit_field(out, "rating", format_fixed(entry.interaction.rating, 1));
    emit_field(out, "reviewTime", iso_date_utc(entry.interaction.timestamp));
    emit_field(out, "summary", entry.interaction.summary);
    emit_field(out, "reviewText", entry.interaction.review_text);
    emit_field(out, "product", render_item_block(entry.item));
    std::string s = out.str();
    if (!s.empty() && s.back() == '\n') s.pop_back();
    return s;
}

PromptPair render_item_prompt(const corpus::ItemRecord& item, const AspectCatalog& catalog) {
    PromptPair p;
    p.system = item_system_prompt(catalog);
    p.user = "Here is some information about a movie:\n" + render_item_block(item);
    return p;
}

PromptPair render_user_prompt(const std::vector<ReviewEntry>& history,
                              const AspectCatalog& catalog,
                              std::size_t max_reviews) {
    if (history.empty()) throw Error("render_user_prompt: empty history");
    if (max_reviews < 1) throw ConfigError("render_user_prompt: max_reviews must be >= 1");
    std::size_t n = std::min(history.size(), max_reviews);
    std::size_t first = history.size() - n;  // most recent window, oldest first
    std::ostringstream out;
    out << "Here are some previous movie reviews of the user:\n";
    for (std::size_t i = 0; i < n; ++i) {
        out << "review " << (i + 1) << ":\n"
            << indent_block(render_review_block(history[first + i]), 2);
        if (i + 1 < n) out << "\n";
    }
    PromptPair p;
    p.system = user_system_prompt(catalog);
    p.user = out.str();
    return p;
}

}  // namespace ger::aspects
