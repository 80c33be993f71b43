#pragma once

#include <string>

#include <json.hpp>

#include "logcave/density.hpp"

namespace logcave {

using Json = nlohmann::json;

// {"dim", "knots", "values", "triangulation"}; 1D knots are numbers, 2D knots
// [x, y] pairs, triangulation is [] in 1D. Doubles are written in their
// shortest round-trip decimal form (at most 17 significant digits).
Json tent_to_json(const TentFunction& t);
TentFunction tent_from_json(const Json& j);

// {"family": name, "params": [...]} for the parametric families,
// {"family": "mixture", "components": [{"weight", "family", "params"}, ...]},
// {"family": "product", "components": [x-marginal, y-marginal]}.
// normal2 params are [mean_x, mean_y, var_x, var_y, cov_xy].
Json density_to_json(const AnalyticDensity& f);
AnalyticDensity density_from_json(const Json& j);

// A tent object (has "knots") or a density spec.
DensityLike density_like_from_json(const Json& j);

// Parse errors and missing files raise INVALID_INPUT naming the path.
Json read_json_file(const std::string& path);
// Writes via a temporary file and rename.
void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace logcave
