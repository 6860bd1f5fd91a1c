#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lnl::cli {

struct ManifestCase {
  std::string id;
  std::filesystem::path image;                         // may be empty
  std::map<std::string, std::filesystem::path> labels;  // contour-set name -> label file
  std::vector<std::string> set_order;                  // as listed in the file
};

/// {"schema": path?, "output_root": path?, "cases": [{"id", "image", "labels": {set: path}}]}
/// Relative paths resolve against the manifest's directory.
struct Manifest {
  std::filesystem::path dir;
  std::optional<std::filesystem::path> schema;
  std::filesystem::path output_root;
  std::vector<ManifestCase> cases;

  /// Set names in first-appearance order across cases.
  std::vector<std::string> set_names() const;
  /// Throws IoError naming the first path that does not exist.
  void check_paths_exist() const;
};

Manifest load_manifest(const std::filesystem::path& path);
std::string manifest_to_json(const Manifest& m);

}  // namespace lnl::cli
