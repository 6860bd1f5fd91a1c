#include "manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lnl/errors.hpp"

namespace lnl::cli {

using json = nlohmann::ordered_json;

std::vector<std::string> Manifest::set_names() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& c : cases) {
    for (const auto& s : c.set_order) {
      if (seen.insert(s).second) out.push_back(s);
    }
  }
  return out;
}

void Manifest::check_paths_exist() const {
  for (const auto& c : cases) {
    if (!c.image.empty() && !std::filesystem::exists(c.image)) {
      throw IoError("case '" + c.id + "': image not found: " + c.image.string());
    }
    for (const auto& [set, p] : c.labels) {
      if (!std::filesystem::exists(p)) {
        throw IoError("case '" + c.id + "', set '" + set + "': labels not found: " + p.string());
      }
    }
  }
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Manifest m;
  m.dir = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path q(p);
    return q.is_relative() ? m.dir / q : q;
  };
  try {
    const json j = json::parse(ss.str());
    if (j.contains("schema") && !j["schema"].is_null()) m.schema = resolve(j["schema"].get<std::string>());
    m.output_root = resolve(j.value("output_root", std::string(".")));
    std::set<std::string> ids;
    for (const auto& jc : j.at("cases")) {
      ManifestCase c;
      c.id = jc.at("id").get<std::string>();
      if (c.id.empty()) throw ParseError("manifest", "empty case id");
      if (!ids.insert(c.id).second) throw ParseError("manifest", "duplicate case id '" + c.id + "'");
      if (jc.contains("image")) c.image = resolve(jc["image"].get<std::string>());
      for (const auto& [set, p] : jc.at("labels").items()) {
        c.labels[set] = resolve(p.get<std::string>());
        c.set_order.push_back(set);
      }
      m.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ParseError("manifest", path.string() + ": " + e.what());
  }
  return m;
}

std::string manifest_to_json(const Manifest& m) {
  auto rel = [&](const std::filesystem::path& p) { return p.lexically_relative(m.dir).generic_string(); };
  json j;
  if (m.schema) j["schema"] = rel(*m.schema);
  j["output_root"] = rel(m.output_root);
  j["cases"] = json::array();
  for (const auto& c : m.cases) {
    json labels = json::object();
    for (const auto& s : c.set_order) labels[s] = rel(c.labels.at(s));
    j["cases"].push_back({{"id", c.id}, {"image", rel(c.image)}, {"labels", labels}});
  }
  return j.dump(2) + "\n";
}

}  // namespace lnl::cli
