#include "tabsearch/prompts.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tabsearch/text_util.hpp"

namespace tabsearch::prompts {

std::string pseudoquery_prompt(std::string_view rendered_profile, std::size_t count) {
    return fmt::format(
        "You help index tabular datasets for search. Below is the statistical profile of one dataset, "
        "one line per column.\n"
        "{}{} pseudoqueries: realistic natural-language requests a user could type into a dataset search "
        "engine to find this dataset.\n"
        "Cover the dataset broadly rather than a few columns, and mention relationships between variables "
        "whenever the profile makes them plausible. Do not simply list column names.\n"
        "Return a JSON array of {} strings and nothing else.\n\n"
        "{}\n{}\n",
        kCountMarker, count, count, kProfileMarker, rendered_profile);
}

std::string expansion_prompt(std::string_view query, std::size_t max_words) {
    return fmt::format(
        "Write a short background document of at most {} words for the dataset search request below. "
        "Include context, relevant terminology and domain concepts that help interpret the request. "
        "Do not answer the request and do not list datasets.\n\n"
        "{}{}\n",
        max_words, kQueryMarker, text::normalize_whitespace(query));
}

std::string decomposition_prompt(std::string_view query, std::string_view background, std::size_t max_subqueries) {
    return fmt::format(
        "Rewrite the dataset search request below into between 1 and {} subqueries. Use as many as the "
        "request needs: one for a simple request, more for a request with several facets. Each subquery "
        "must be short, explicit and retrieval-oriented, and use the terminology of the background where "
        "it removes ambiguity.\n"
        "Return a JSON array of strings and nothing else.\n\n"
        "{}{}\n{}{}\n",
        max_subqueries, kQueryMarker, text::normalize_whitespace(query), kBackgroundMarker,
        text::normalize_whitespace(background));
}

std::string rerank_prompt(std::string_view query, const std::vector<RerankItem>& items) {
    std::string out = fmt::format(
        "Rank the candidate datasets by how well they satisfy the search request. Each candidate lists "
        "its identifier, its retrieval score (how many indexed pseudoqueries of the dataset matched the "
        "request) and its statistical profile.\n"
        "Return a JSON array with every candidate identifier exactly once, most relevant first, and "
        "nothing else.\n\n"
        "{}{}\n",
        kQueryMarker, text::normalize_whitespace(query));
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += fmt::format("\n{}{}\n{}{}\n{}{}\n{}\n{}\n", kCandidateMarker, i + 1, kIdMarker, items[i].dataset_id,
                           kScoreMarker, items[i].retrieval_score, kProfileMarker, items[i].profile_text);
    }
    return out;
}

std::string truncate_profile(std::string_view rendered_profile, std::size_t max_words) {
    auto blocks = text::split_lines(rendered_profile);
    std::string out;
    std::size_t used = 0;
    std::size_t kept = 0;
    for (const auto& block : blocks) {
        auto words = text::word_count(block);
        if (used + words > max_words) {
            if (kept == 0) {
                out = text::truncate_words(block, max_words);
                kept = 1;
            }
            break;
        }
        if (!out.empty()) out.push_back('\n');
        out += block;
        used += words;
        ++kept;
    }
    if (kept < blocks.size()) out += fmt::format("\n({} more columns omitted)", blocks.size() - kept);
    return out;
}

namespace {

std::optional<std::vector<std::string>> parse_json_array(std::string_view output) {
    auto open = output.find('[');
    auto close = output.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    auto parsed = nlohmann::json::parse(output.substr(open, close - open + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) return std::nullopt;
    std::vector<std::string> items;
    for (const auto& item : parsed) {
        if (item.is_string()) {
            items.push_back(item.get<std::string>());
        } else if (item.is_number_integer()) {
            items.push_back(std::to_string(item.get<long long>()));
        } else if (item.is_object() && item.contains("id") && item["id"].is_string()) {
            items.push_back(item["id"].get<std::string>());
        } else {
            return std::nullopt;
        }
    }
    return items;
}

std::string strip_bullet(std::string_view line) {
    auto s = text::trim(line);
    if (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '+')) {
        s.remove_prefix(1);
    } else {
        std::size_t i = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') ++i;
        if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) s.remove_prefix(i + 1);
    }
    s = text::trim(s);
    if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '\'' && s.back() == '\''))) {
        s = s.substr(1, s.size() - 2);
    }
    return std::string(text::trim(s));
}

}  // namespace

std::optional<std::vector<std::string>> parse_string_list(std::string_view output) {
    if (auto items = parse_json_array(output)) return items;
    std::vector<std::string> items;
    for (const auto& line : text::split_lines(output)) {
        auto item = strip_bullet(line);
        if (item.empty() || item == "```" || item.starts_with("```")) continue;
        items.push_back(std::move(item));
    }
    if (items.empty()) return std::nullopt;
    return items;
}

std::optional<std::string> field_after(std::string_view prompt, std::string_view marker) {
    for (const auto& line : text::split_lines(prompt)) {
        if (line.starts_with(marker)) return line.substr(marker.size());
    }
    return std::nullopt;
}

}  // namespace tabsearch::prompts
