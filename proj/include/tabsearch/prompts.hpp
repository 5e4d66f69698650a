#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

// Prompt texts shared by the offline indexer and the online pipeline. The
// offline generator reads these prompts back, so the marker lines below are
// part of the contract.
namespace tabsearch::prompts {

inline constexpr std::string_view kQueryMarker = "Query: ";
inline constexpr std::string_view kBackgroundMarker = "Background: ";
inline constexpr std::string_view kProfileMarker = "Profile:";
inline constexpr std::string_view kCountMarker = "Write exactly ";
inline constexpr std::string_view kCandidateMarker = "Candidate ";
inline constexpr std::string_view kIdMarker = "ID: ";
inline constexpr std::string_view kScoreMarker = "Retrieval score: ";

std::string pseudoquery_prompt(std::string_view rendered_profile, std::size_t count);
std::string expansion_prompt(std::string_view query, std::size_t max_words);
std::string decomposition_prompt(std::string_view query, std::string_view background, std::size_t max_subqueries);

struct RerankItem {
    std::string dataset_id;
    std::size_t retrieval_score = 0;
    std::string profile_text;
};

std::string rerank_prompt(std::string_view query, const std::vector<RerankItem>& items);

/// Keeps whole column blocks from the head of a rendered profile while the
/// word count stays within budget; a lone oversized block is cut to budget.
std::string truncate_profile(std::string_view rendered_profile, std::size_t max_words);

/// Reads a model answer as a list of strings: a JSON array when one is
/// present, else one item per non-empty line with list bullets stripped.
/// nullopt when nothing usable is found.
std::optional<std::vector<std::string>> parse_string_list(std::string_view output);

/// Value after the first line starting with marker, or nullopt.
std::optional<std::string> field_after(std::string_view prompt, std::string_view marker);

}  // namespace tabsearch::prompts
