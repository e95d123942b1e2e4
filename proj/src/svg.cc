#include "rxn/svg.h"

#include <cmath>

#include <fmt/format.h>

#include "rxn/errors.h"

namespace rxn {
namespace {

std::string_view kind_color(EntityKind k) {
  switch (k) {
    case EntityKind::kMolecule:
      return "#1f77b4";
    case EntityKind::kArrow:
      return "#d62728";
    case EntityKind::kText:
      return "#2ca02c";
    case EntityKind::kIdentifier:
      return "#9467bd";
  }
  return "#000000";
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

// Fixed precision keeps the text identical across platforms.
std::string num(double v) {
  std::string s = fmt::format("{:.2f}", v);
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s == "-0" ? "0" : s;
}

std::string points(const std::vector<geom::Point>& pts) {
  std::string out;
  for (const geom::Point& p : pts) {
    if (!out.empty()) out += ' ';
    out += num(p.x) + "," + num(p.y);
  }
  return out;
}

std::string shape(const Entity& e, std::string_view stroke, std::string_view fill,
                  std::string_view extra) {
  if (const auto* q = std::get_if<geom::OrientedQuad>(&e.region)) {
    std::vector<geom::Point> pts(q->vertices().begin(), q->vertices().end());
    return fmt::format("<polygon points=\"{}\" stroke=\"{}\" fill=\"{}\"{}/>", points(pts), stroke,
                       fill, extra);
  }
  const auto& b = std::get<geom::AxisBox>(e.region);
  return fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" stroke=\"{}\" fill=\"{}\"{}/>",
                     num(b.x_min()), num(b.y_min()), num(b.width()), num(b.height()), stroke, fill,
                     extra);
}

std::string chevron(const ArrowPayload& a) {
  const geom::Point d = a.head - a.tail;
  const double len = geom::norm(d);
  if (len == 0) return {};
  const geom::Point u = (1.0 / len) * d;
  const geom::Point n{-u.y, u.x};
  const double s = std::min(15.0, len / 4);
  const geom::Point left = a.head - s * u + (s * 0.6) * n;
  const geom::Point right = a.head - s * u - (s * 0.6) * n;
  return fmt::format("<polyline class=\"chevron\" points=\"{}\" stroke=\"#d62728\" fill=\"none\"/>",
                     points({left, a.head, right}));
}

const Entity& lookup(const ReactionDocument& doc, const std::string& id) {
  const Entity* e = doc.find(id);
  if (e == nullptr) throw ReferenceError("reaction refers to unknown entity \"" + id + "\"");
  return *e;
}

}  // namespace

std::string render_svg(const ReactionDocument& doc, std::span<const Reaction> reactions) {
  for (const Reaction& r : reactions) {
    for (const auto* ids : {&r.reactants, &r.products, &r.conditions, &r.arrows}) {
      for (const std::string& id : *ids) lookup(doc, id);
    }
  }
  const geom::AxisBox& d = doc.diagram_bounds;
  std::string out = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"{} {} {} {}\">\n",
      num(d.width()), num(d.height()), num(d.x_min()), num(d.y_min()), num(d.width()),
      num(d.height()));
  out += "<g class=\"entities\" stroke-width=\"2\">\n";
  for (const Entity& e : doc.entities) {
    out += "  " + shape(e, kind_color(e.kind), "none",
                        fmt::format(" data-id=\"{}\" data-kind=\"{}\"", xml_escape(e.id),
                                    to_string(e.kind))) +
           "\n";
    if (const ArrowPayload* a = e.arrow()) out += "  " + chevron(*a) + "\n";
  }
  out += "</g>\n";

  for (std::size_t k = 0; k < reactions.size(); ++k) {
    const Reaction& r = reactions[k];
    const double hue = std::fmod(static_cast<double>(k) * 137.508, 360.0);
    const std::string color = fmt::format("hsl({},70%,45%)", num(hue));
    out += fmt::format("<g class=\"reaction\" data-index=\"{}\" stroke-width=\"3\">\n", k + 1);
    auto members = [&](const std::vector<std::string>& ids, std::string_view role) {
      for (const std::string& id : ids) {
        const Entity& e = lookup(doc, id);
        out += "  " + shape(e, color, color,
                            fmt::format(" fill-opacity=\"0.12\" data-role=\"{}\"", role)) +
               "\n";
        const geom::AxisBox b = geom::bounding_box(e.region);
        out += fmt::format(
            "  <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">R{} {}</text>\n", num(b.x_min() + 2),
            num(b.y_min() + 12), color, k + 1, role);
      }
    };
    members(r.reactants, "reactant");
    members(r.conditions, "condition");
    members(r.products, "product");
    members(r.arrows, "arrow");
    out += "</g>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace rxn
