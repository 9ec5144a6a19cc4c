#include "shadowlab/dataio.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/random.hpp"

namespace shadowlab {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "valid") return Split::Valid;
  if (s == "test") return Split::Test;
  throw ValidationError("unknown split '" + s + "'");
}

const char* to_string(CompositeMode m) noexcept {
  return m == CompositeMode::Literal ? "literal" : "attenuated";
}

CompositeMode parse_composite_mode(const std::string& s) {
  if (s == "literal") return CompositeMode::Literal;
  if (s == "attenuated") return CompositeMode::Attenuated;
  throw ValidationError("unknown compositing mode '" + s + "' (expected literal|attenuated)");
}

SplitCounts DatasetManifest::counts() const {
  SplitCounts c;
  for (const auto& r : records) {
    switch (r.split) {
      case Split::Train: ++c.train; break;
      case Split::Valid: ++c.valid; break;
      case Split::Test: ++c.test; break;
    }
  }
  return c;
}

bool DatasetManifest::matches_ratio() const { return counts() == split_sizes(records.size()); }

std::vector<const SampleRecord*> DatasetManifest::in_split(Split s) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::string format_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", index);
  return buf;
}

SplitCounts split_sizes(std::size_t n) {
  SplitCounts c;
  c.valid = n * 3 / 16;
  c.test = n / 16;
  c.train = n - c.valid - c.test;
  return c;
}

namespace {
constexpr std::uint64_t kSplitStream = 0x5317;
}

DatasetManifest split_dataset(std::vector<SampleRecord> records, std::uint64_t seed) {
  if (records.empty()) throw InvalidInput("split_dataset: empty record list");
  // Fisher-Yates with our own index draw so the order is library independent.
  Engine rng = make_engine(seed, kSplitStream);
  for (std::size_t i = records.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(records[i], records[j]);
  }
  const SplitCounts sizes = split_sizes(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    records[i].split = i < sizes.train ? Split::Train
                       : i < sizes.train + sizes.valid ? Split::Valid
                                                       : Split::Test;
  }
  DatasetManifest m;
  m.records = std::move(records);
  return m;
}

namespace {

json affine_to_json(const AffineParams& p) {
  return json{{"scale", p.scale},           {"rotation_deg", p.rotation_deg},
              {"offset_x", p.offset_x},     {"offset_y", p.offset_y},
              {"out_height", p.out_height}, {"out_width", p.out_width}};
}

AffineParams affine_from_json(const json& j) {
  AffineParams p;
  p.scale = j.at("scale").get<double>();
  p.rotation_deg = j.at("rotation_deg").get<double>();
  p.offset_x = j.at("offset_x").get<double>();
  p.offset_y = j.at("offset_y").get<double>();
  p.out_height = j.at("out_height").get<int>();
  p.out_width = j.at("out_width").get<int>();
  return p;
}

}  // namespace

std::string serialize_manifest(const DatasetManifest& m) {
  json records = json::array();
  for (const auto& r : m.records) {
    json j{{"id", r.id},
           {"shadow", r.shadow_path},
           {"gt", r.gt_path},
           {"mask", r.mask_path},
           {"split", to_string(r.split)}};
    if (r.params) {
      const auto& p = *r.params;
      j["synth"] = json{{"weight", p.weight},
                        {"color", p.color},
                        {"mode", to_string(p.mode)},
                        {"gt_transform", affine_to_json(p.gt_transform)},
                        {"mask_transform", affine_to_json(p.mask_transform)},
                        {"seed", p.seed},
                        {"gt_source", p.gt_source},
                        {"template_source", p.template_source}};
    }
    records.push_back(std::move(j));
  }
  const SplitCounts c = m.counts();
  json doc{{"version", m.version},
           {"split_counts", {{"train", c.train}, {"valid", c.valid}, {"test", c.test}}},
           {"records", std::move(records)}};
  // Doubles are printed with round-trip precision by nlohmann::json.
  return doc.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.version = doc.at("version").get<std::string>();
    if (m.version != DatasetManifest::kVersion) {
      throw ValidationError("unsupported manifest version '" + m.version + "'");
    }
    for (const auto& j : doc.at("records")) {
      SampleRecord r;
      r.id = j.at("id").get<std::string>();
      r.shadow_path = j.at("shadow").get<std::string>();
      r.gt_path = j.at("gt").get<std::string>();
      r.mask_path = j.at("mask").get<std::string>();
      r.split = parse_split(j.at("split").get<std::string>());
      if (j.contains("synth")) {
        const auto& s = j.at("synth");
        SynthParams p;
        p.weight = s.at("weight").get<double>();
        p.color = s.at("color").get<std::array<double, 3>>();
        p.mode = parse_composite_mode(s.at("mode").get<std::string>());
        p.gt_transform = affine_from_json(s.at("gt_transform"));
        p.mask_transform = affine_from_json(s.at("mask_transform"));
        p.seed = s.at("seed").get<std::uint64_t>();
        p.gt_source = s.at("gt_source").get<std::size_t>();
        p.template_source = s.at("template_source").get<std::size_t>();
        r.params = p;
      }
      m.records.push_back(std::move(r));
    }
    if (doc.contains("split_counts")) {
      const auto& sc = doc.at("split_counts");
      const SplitCounts declared{sc.at("train").get<std::size_t>(), sc.at("valid").get<std::size_t>(),
                                 sc.at("test").get<std::size_t>()};
      if (!(declared == m.counts())) throw ValidationError("manifest split_counts disagree with records");
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  }
  std::set<std::string> ids;
  for (const auto& r : m.records) {
    if (!ids.insert(r.id).second) throw ValidationError("duplicate sample id '" + r.id + "'");
  }
  return m;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

void save_manifest(const fs::path& root, const DatasetManifest& m) {
  write_text_file(root / "manifest.json", serialize_manifest(m));
}

DatasetManifest load_manifest(const fs::path& root) {
  DatasetManifest m = parse_manifest(read_text_file(root / "manifest.json"));
  for (const auto& r : m.records) {
    for (const auto* rel : {&r.shadow_path, &r.gt_path, &r.mask_path}) {
      if (!fs::exists(root / *rel)) {
        throw IoError((root / *rel).string(), "referenced by sample " + r.id + " but missing");
      }
    }
  }
  return m;
}

LoadedSample load_sample(const fs::path& root, const SampleRecord& rec) {
  return LoadedSample{rec.id, read_image(root / rec.shadow_path), read_image(root / rec.gt_path),
                      read_image(root / rec.mask_path)};
}

}  // namespace shadowlab
