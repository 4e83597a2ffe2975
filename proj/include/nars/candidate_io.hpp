#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nars/search_space.hpp"

namespace nars {

/// Every field explicit; recipe values in table units.
nlohmann::json to_json(const Candidate &candidate);
nlohmann::json to_json(const ArchConfig &arch);
nlohmann::json to_json(const RecipeConfig &recipe);

/// Throws ParseError on missing or mistyped fields.
Candidate candidate_from_json(const nlohmann::json &j);
ArchConfig arch_from_json(const nlohmann::json &j);
RecipeConfig recipe_from_json(const nlohmann::json &j);

/// Candidate file: one JSON object per line.
void write_candidates(std::ostream &out, std::span<const Candidate> candidates);
std::vector<Candidate> read_candidates(std::istream &in);

}  // namespace nars
