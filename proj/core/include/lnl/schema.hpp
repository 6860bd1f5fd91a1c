#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lnl {

using LevelId = std::uint8_t;

enum class Laterality { left, right, midline };

std::string_view to_string(Laterality l) noexcept;
Laterality laterality_from_string(std::string_view s);

struct LevelDef {
  LevelId id = 0;
  std::string name;
  Laterality laterality = Laterality::midline;
  LevelId mirror_partner = 0;

  friend bool operator==(const LevelDef&, const LevelDef&) = default;
};

/// Level taxonomy plus the groups of levels that may not share an axial slice.
///
/// Instances produced by default_schema(), parse_schema() and load_schema() are
/// always valid; validate() is exposed for schemas assembled by hand.
struct LevelSchema {
  std::string schema_id;
  LevelId background_id = 0;
  std::vector<LevelDef> levels;
  std::vector<std::vector<LevelId>> exclusion_groups;

  const LevelDef* find(LevelId id) const noexcept;
  const LevelDef* find(std::string_view name) const noexcept;
  /// Throws ValidationError for unknown names.
  LevelId id_of(std::string_view name) const;
  bool contains(LevelId id) const noexcept { return find(id) != nullptr; }
  LevelId partner(LevelId id) const;
  /// Maps every class id to its mirror partner; background and undeclared ids map to themselves.
  std::array<LevelId, 256> partner_table() const;
  /// Number of classes including background.
  std::size_t class_count() const noexcept { return levels.size() + 1; }

  /// Throws ValidationError listing every violated invariant.
  void validate() const;
  std::vector<std::string> violations() const;

  friend bool operator==(const LevelSchema&, const LevelSchema&) = default;
};

inline constexpr std::string_view kDefaultSchemaId = "hn-lymph-node-levels-20";

/// The 20 head-and-neck lymph node levels (4 midline, 8 bilateral) with ids 1..20:
///
///    1 Ia            2 Ib_left       3 Ib_right      4 II_left       5 II_right
///    6 III_left      7 III_right     8 IVa_left      9 IVa_right    10 IVb_left
///   11 IVb_right    12 V_left       13 V_right      14 VIa          15 VIb
///   16 VIIa         17 VIIb_left    18 VIIb_right   19 VIII_left    20 VIII_right
///
/// Exclusion groups pair craniocaudally adjacent levels: II/III, III/IVa, IVa/IVb per
/// side, plus Ia/VIa and VIa/VIb.
LevelSchema default_schema();

LevelSchema parse_schema(std::string_view json_text);
LevelSchema load_schema(const std::filesystem::path& path);
std::string schema_to_json(const LevelSchema& schema);

/// Deterministic display color for a level id (background is black).
std::array<std::uint8_t, 3> level_color(LevelId id) noexcept;

}  // namespace lnl
