#include "lnl/schema.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lnl/errors.hpp"

namespace lnl {

std::string_view to_string(Laterality l) noexcept {
  switch (l) {
    case Laterality::left: return "left";
    case Laterality::right: return "right";
    case Laterality::midline: return "midline";
  }
  return "?";
}

Laterality laterality_from_string(std::string_view s) {
  if (s == "left") return Laterality::left;
  if (s == "right") return Laterality::right;
  if (s == "midline") return Laterality::midline;
  throw ValidationError("unknown laterality '" + std::string(s) + "'");
}

const LevelDef* LevelSchema::find(LevelId id) const noexcept {
  for (const auto& l : levels) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

const LevelDef* LevelSchema::find(std::string_view name) const noexcept {
  for (const auto& l : levels) {
    if (l.name == name) return &l;
  }
  return nullptr;
}

LevelId LevelSchema::id_of(std::string_view name) const {
  if (const auto* l = find(name)) return l->id;
  throw ValidationError("unknown level name '" + std::string(name) + "'");
}

LevelId LevelSchema::partner(LevelId id) const {
  if (const auto* l = find(id)) return l->mirror_partner;
  if (id == background_id) return id;
  throw ValidationError("level id " + std::to_string(id) + " not in schema " + schema_id);
}

std::array<LevelId, 256> LevelSchema::partner_table() const {
  std::array<LevelId, 256> t{};
  for (int i = 0; i < 256; ++i) t[i] = static_cast<LevelId>(i);
  for (const auto& l : levels) t[l.id] = l.mirror_partner;
  return t;
}

std::vector<std::string> LevelSchema::violations() const {
  std::vector<std::string> out;
  std::set<int> ids;
  std::set<std::string> names;
  for (const auto& l : levels) {
    if (l.id == background_id) out.push_back("level '" + l.name + "' uses the background id");
    if (!ids.insert(l.id).second) out.push_back("duplicate level id " + std::to_string(l.id));
    if (l.name.empty()) out.push_back("level " + std::to_string(l.id) + " has an empty name");
    if (!names.insert(l.name).second) out.push_back("duplicate level name '" + l.name + "'");
  }
  for (const auto& l : levels) {
    const LevelDef* p = find(l.mirror_partner);
    if (p == nullptr) {
      out.push_back("level '" + l.name + "' has dangling mirror partner " + std::to_string(l.mirror_partner));
      continue;
    }
    if (p->mirror_partner != l.id) {
      out.push_back("mirror relation is not an involution: partner(" + std::to_string(l.id) + ")=" +
                    std::to_string(p->id) + " but partner(" + std::to_string(p->id) + ")=" +
                    std::to_string(p->mirror_partner));
    }
    switch (l.laterality) {
      case Laterality::midline:
        if (p->id != l.id) out.push_back("midline level '" + l.name + "' must be its own partner");
        break;
      case Laterality::left:
        if (p->laterality != Laterality::right) {
          out.push_back("left level '" + l.name + "' must pair with a right level");
        }
        break;
      case Laterality::right:
        if (p->laterality != Laterality::left) {
          out.push_back("right level '" + l.name + "' must pair with a left level");
        }
        break;
    }
  }
  for (std::size_t g = 0; g < exclusion_groups.size(); ++g) {
    const auto& group = exclusion_groups[g];
    if (group.size() < 2) out.push_back("exclusion group " + std::to_string(g) + " has fewer than two members");
    std::set<int> seen;
    for (auto id : group) {
      if (!contains(id)) {
        out.push_back("exclusion group " + std::to_string(g) + " references unknown level " + std::to_string(id));
      }
      if (!seen.insert(id).second) {
        out.push_back("exclusion group " + std::to_string(g) + " repeats level " + std::to_string(id));
      }
    }
  }
  return out;
}

void LevelSchema::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid level schema '" + schema_id + "':";
  for (const auto& s : v) msg += "\n  - " + s;
  throw ValidationError(msg);
}

LevelSchema default_schema() {
  LevelSchema s;
  s.schema_id = std::string(kDefaultSchemaId);
  s.background_id = 0;
  LevelId next = 1;
  auto midline = [&](const char* name) {
    s.levels.push_back({next, name, Laterality::midline, next});
    ++next;
  };
  auto bilateral = [&](const std::string& base) {
    const LevelId l = next, r = static_cast<LevelId>(next + 1);
    s.levels.push_back({l, base + "_left", Laterality::left, r});
    s.levels.push_back({r, base + "_right", Laterality::right, l});
    next += 2;
  };
  midline("Ia");
  bilateral("Ib");
  bilateral("II");
  bilateral("III");
  bilateral("IVa");
  bilateral("IVb");
  bilateral("V");
  midline("VIa");
  midline("VIb");
  midline("VIIa");
  bilateral("VIIb");
  bilateral("VIII");

  for (const char* side : {"_left", "_right"}) {
    const std::string sfx = side;
    s.exclusion_groups.push_back({s.id_of("II" + sfx), s.id_of("III" + sfx)});
    s.exclusion_groups.push_back({s.id_of("III" + sfx), s.id_of("IVa" + sfx)});
    s.exclusion_groups.push_back({s.id_of("IVa" + sfx), s.id_of("IVb" + sfx)});
  }
  s.exclusion_groups.push_back({s.id_of("Ia"), s.id_of("VIa")});
  s.exclusion_groups.push_back({s.id_of("VIa"), s.id_of("VIb")});
  return s;
}

namespace {

using nlohmann::json;

int require_int(const json& j, const char* key, const std::string& where, std::vector<std::string>& errs) {
  if (!j.contains(key)) {
    errs.push_back(where + ": missing '" + key + "'");
    return -1;
  }
  if (!j.at(key).is_number_integer()) {
    errs.push_back(where + ": '" + key + "' must be an integer");
    return -1;
  }
  const auto v = j.at(key).get<long long>();
  if (v < 0 || v > 255) {
    errs.push_back(where + ": '" + key + "' outside 0..255");
    return -1;
  }
  return static_cast<int>(v);
}

}  // namespace

LevelSchema parse_schema(std::string_view text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("schema", e.what());
  }
  if (!root.is_object()) throw ParseError("schema", "top level must be an object");

  std::vector<std::string> errs;
  LevelSchema s;
  s.schema_id = root.value("schema_id", std::string(kDefaultSchemaId));
  if (root.contains("background_id")) {
    const int bg = require_int(root, "background_id", "schema", errs);
    if (bg >= 0) s.background_id = static_cast<LevelId>(bg);
  }

  if (!root.contains("levels") || !root.at("levels").is_array()) {
    throw ValidationError("invalid level schema: 'levels' must be an array");
  }
  // Partners may be given by name; resolve after all levels are known.
  std::vector<std::pair<std::size_t, std::string>> partner_names;
  for (std::size_t n = 0; n < root.at("levels").size(); ++n) {
    const auto& jl = root.at("levels")[n];
    const std::string where = "levels[" + std::to_string(n) + "]";
    if (!jl.is_object()) {
      errs.push_back(where + " must be an object");
      continue;
    }
    LevelDef d;
    const int id = require_int(jl, "id", where, errs);
    d.id = static_cast<LevelId>(std::max(id, 0));
    d.name = jl.value("name", std::string{});
    try {
      d.laterality = laterality_from_string(jl.value("laterality", std::string{}));
    } catch (const ValidationError& e) {
      errs.push_back(where + ": " + e.what());
    }
    if (jl.contains("mirror_partner") && jl.at("mirror_partner").is_string()) {
      partner_names.emplace_back(s.levels.size(), jl.at("mirror_partner").get<std::string>());
    } else {
      const int p = require_int(jl, "mirror_partner", where, errs);
      d.mirror_partner = static_cast<LevelId>(std::max(p, 0));
    }
    s.levels.push_back(std::move(d));
  }
  for (const auto& [idx, name] : partner_names) {
    if (const auto* p = s.find(name)) {
      s.levels[idx].mirror_partner = p->id;
    } else {
      errs.push_back("level '" + s.levels[idx].name + "' has dangling mirror partner '" + name + "'");
      s.levels[idx].mirror_partner = s.levels[idx].id;
    }
  }

  if (root.contains("exclusion_groups")) {
    const auto& groups = root.at("exclusion_groups");
    if (!groups.is_array()) {
      errs.push_back("'exclusion_groups' must be an array of arrays of level names");
    } else {
      for (std::size_t g = 0; g < groups.size(); ++g) {
        std::vector<LevelId> members;
        if (!groups[g].is_array()) {
          errs.push_back("exclusion_groups[" + std::to_string(g) + "] must be an array");
          continue;
        }
        for (const auto& m : groups[g]) {
          if (m.is_string()) {
            if (const auto* l = s.find(m.get<std::string>())) {
              members.push_back(l->id);
            } else {
              errs.push_back("exclusion_groups[" + std::to_string(g) + "] has dangling member '" +
                             m.get<std::string>() + "'");
            }
          } else if (m.is_number_integer() && m.get<long long>() >= 0 && m.get<long long>() <= 255) {
            members.push_back(static_cast<LevelId>(m.get<int>()));
          } else {
            errs.push_back("exclusion_groups[" + std::to_string(g) + "] members must be level names");
          }
        }
        s.exclusion_groups.push_back(std::move(members));
      }
    }
  }

  for (auto& v : s.violations()) errs.push_back(std::move(v));
  if (!errs.empty()) {
    std::string msg = "invalid level schema '" + s.schema_id + "':";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ValidationError(msg);
  }
  return s;
}

LevelSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_schema(ss.str());
}

std::string schema_to_json(const LevelSchema& s) {
  json root;
  root["schema_id"] = s.schema_id;
  root["background_id"] = s.background_id;
  root["levels"] = json::array();
  for (const auto& l : s.levels) {
    root["levels"].push_back({{"id", l.id},
                              {"name", l.name},
                              {"laterality", std::string(to_string(l.laterality))},
                              {"mirror_partner", l.mirror_partner}});
  }
  root["exclusion_groups"] = json::array();
  for (const auto& g : s.exclusion_groups) {
    json names = json::array();
    for (auto id : g) {
      const auto* l = s.find(id);
      names.push_back(l ? json(l->name) : json(id));
    }
    root["exclusion_groups"].push_back(std::move(names));
  }
  return root.dump(2) + "\n";
}

std::array<std::uint8_t, 3> level_color(LevelId id) noexcept {
  if (id == 0) return {0, 0, 0};
  // Golden-angle hue walk, full saturation and value.
  const double h = std::fmod(static_cast<double>(id) * 137.50776405, 360.0) / 60.0;
  const double x = 1.0 - std::abs(std::fmod(h, 2.0) - 1.0);
  double r = 0, g = 0, b = 0;
  switch (static_cast<int>(h)) {
    case 0: r = 1; g = x; break;
    case 1: r = x; g = 1; break;
    case 2: g = 1; b = x; break;
    case 3: g = x; b = 1; break;
    case 4: r = x; b = 1; break;
    default: r = 1; b = x; break;
  }
  auto c = [](double v) { return static_cast<std::uint8_t>(std::lround(v * 255.0)); };
  return {c(r), c(g), c(b)};
}

}  // namespace lnl
