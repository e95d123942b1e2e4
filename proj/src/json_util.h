// Internal JSON helpers shared by the file-format code.

#ifndef RXN_SRC_JSON_UTIL_H_
#define RXN_SRC_JSON_UTIL_H_

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rxn/errors.h"
#include "rxn/geometry.h"

namespace rxn::detail {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// Integral coordinates are written as integers so "38" stays "38".
inline ordered_json number_json(double v) {
  if (std::isfinite(v) && v == std::floor(v) && std::abs(v) < 9.0e15) {
    return static_cast<std::int64_t>(v);
  }
  return v;
}

inline ordered_json region_to_json(const geom::Region& r) {
  ordered_json arr = ordered_json::array();
  if (const auto* box = std::get_if<geom::AxisBox>(&r)) {
    for (double v : box->to_array()) arr.push_back(number_json(v));
  } else {
    for (double v : std::get<geom::OrientedQuad>(r).to_array()) {
      arr.push_back(number_json(v));
    }
  }
  return arr;
}

// 4 numbers -> AxisBox, 8 numbers -> OrientedQuad.
template <typename Json>
geom::Region region_from_json(const Json& j, const std::string& pointer) {
  if (!j.is_array()) throw SchemaError(pointer, "bbox must be an array");
  std::vector<double> xs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw SchemaError(pointer + "/" + std::to_string(i), "bbox entry is not a number");
    }
    xs.push_back(j[i].template get<double>());
  }
  try {
    if (xs.size() == 4) return geom::AxisBox(xs[0], xs[1], xs[2], xs[3]);
    if (xs.size() == 8) return geom::OrientedQuad::from_flat(xs);
  } catch (const GeometryError& e) {
    throw SchemaError(pointer, e.what());
  }
  throw SchemaError(pointer, "bbox must have 4 or 8 numbers, got " +
                                 std::to_string(xs.size()));
}

// Drops surrounding whitespace and a Markdown code fence, if any.
inline std::string_view strip_code_fence(std::string_view raw) {
  auto trim = [](std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return std::string_view{};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  };
  std::string_view s = trim(raw);
  if (s.starts_with("```")) {
    const auto nl = s.find('\n');
    const auto close = s.rfind("```");
    if (nl != std::string_view::npos && close != std::string_view::npos && close > nl) {
      s = trim(s.substr(nl + 1, close - nl - 1));
    }
  }
  return s;
}

}  // namespace rxn::detail

#endif  // RXN_SRC_JSON_UTIL_H_
