#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "shadowlab/image.hpp"

namespace shadowlab {

// 8-bit PNG codec. Reading divides by 255; writing rounds half away from zero.
Image read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Image& img);

std::uint8_t quantize(float v) noexcept;

enum class Split { Train, Valid, Test };
const char* to_string(Split s) noexcept;
Split parse_split(const std::string& s);

enum class CompositeMode { Literal, Attenuated };
const char* to_string(CompositeMode m) noexcept;
CompositeMode parse_composite_mode(const std::string& s);

// Everything needed to regenerate one synthetic sample.
struct SynthParams {
  double weight = 1.0;
  std::array<double, 3> color{0.0, 0.0, 0.0};
  CompositeMode mode = CompositeMode::Literal;
  AffineParams gt_transform{};
  AffineParams mask_transform{};
  std::uint64_t seed = 0;
  std::size_t gt_source = 0;
  std::size_t template_source = 0;

  friend bool operator==(const SynthParams&, const SynthParams&) = default;
};

struct SampleRecord {
  std::string id;  // zero-padded to 5 digits
  std::string shadow_path;
  std::string gt_path;
  std::string mask_path;
  Split split = Split::Train;
  std::optional<SynthParams> params;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t valid = 0;
  std::size_t test = 0;
  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct DatasetManifest {
  static constexpr const char* kVersion = "shadowlab-manifest/1";

  std::string version = kVersion;
  std::vector<SampleRecord> records;

  SplitCounts counts() const;
  // True when the split sizes equal those produced by split_sizes(records.size()).
  bool matches_ratio() const;
  std::vector<const SampleRecord*> in_split(Split s) const;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string format_id(std::size_t index);

// 12:3:1 partition. valid = floor(3n/16), test = floor(n/16), train takes the rest.
SplitCounts split_sizes(std::size_t n);

// Shuffles record order deterministically from the seed, then assigns 12:3:1 splits.
// The returned manifest keeps the shuffled order grouped train, valid, test.
DatasetManifest split_dataset(std::vector<SampleRecord> records, std::uint64_t seed);

std::string serialize_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text);

// root/manifest.json; load checks that every referenced file exists and ids are unique.
void save_manifest(const std::filesystem::path& root, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& root);

struct LoadedSample {
  std::string id;
  Image shadow;
  Image gt;
  Image mask;
};

LoadedSample load_sample(const std::filesystem::path& root, const SampleRecord& rec);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace shadowlab
