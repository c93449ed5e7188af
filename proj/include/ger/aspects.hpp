// Copyright 2026 the ger authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ger/corpus.hpp"

namespace ger::aspects {

/// One interpretable attribute with a 1-10 anchored description.
struct Aspect {
    std::string name;
    std::string description;
};

enum class Domain { movies, clothing, games, custom };

std::string domain_name(Domain d);
Domain parse_domain(const std::string& name);

/// Ordered aspect list; the order defines guided-embedding coordinates.
struct AspectCatalog {
    Domain domain = Domain::custom;
    std::vector<Aspect> aspects;

    std::size_t size() const { return aspects.size(); }
    /// Hash over domain, names and descriptions; used as cache key part.
    std::string fingerprint() const;
};

struct PromptPair {
    std::string system;
    std::string user;
};

/// The built-in 12-aspect catalog for one of the shipped domains.
AspectCatalog builtin_catalog(Domain domain);

/// First k aspects, in catalog order.
AspectCatalog truncate_catalog(const AspectCatalog& catalog, std::size_t k);

/// Loads a custom catalog from a JSON file:
///   {"domain": "custom", "aspects": [{"name": ..., "description": ...}, ...]}
AspectCatalog load_catalog_file(const std::string& path);

/// Scoring prompt for a single item: persona system prompt with the
/// aspect descriptions and the required "name: <rating>" answer format,
/// plus the rendered item card. Empty fields are omitted from the card.
PromptPair render_item_prompt(const corpus::ItemRecord& item, const AspectCatalog& catalog);

/// One interaction joined with its item record, for history rendering.
struct ReviewEntry {
    corpus::Interaction interaction;
    corpus::ItemRecord item;
};

/// Scoring prompt for a user: persona system prompt plus the user's most
/// recent `max_reviews` reviews, oldest first, each with a nested item card.
PromptPair render_user_prompt(const std::vector<ReviewEntry>& history,
                              const AspectCatalog& catalog,
                              std::size_t max_reviews = 10);

/// The item card block ("title:\n  ...\n...") without the prompt framing.
std::string render_item_block(const corpus::ItemRecord& item);

/// A single review block (rating, reviewTime, summary, reviewText, product).
std::string render_review_block(const ReviewEntry& entry);

}  // namespace ger::aspects
