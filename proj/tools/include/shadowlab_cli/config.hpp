#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "shadowlab/model.hpp"
#include "shadowlab/sde.hpp"
#include "shadowlab/ssgm.hpp"
#include "shadowlab/synth.hpp"
#include "shadowlab/verify.hpp"

namespace shadowlab::cli {

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every recognised key with its built-in default, in documentation order.
const std::vector<ConfigKey>& config_keys();

// Flat key=value settings layered as default < file < command line.
class CliConfig {
 public:
  CliConfig();

  // Throws ValidationError naming the key when it is not registered.
  void set(const std::string& key, const std::string& value);
  // UTF-8 text, one key = value per line; '#' starts a comment.
  void load_file(const std::filesystem::path& path);
  // Parses "key=value".
  void set_assignment(const std::string& assignment);

  const std::string& get(const std::string& key) const;
  double get_double(const std::string& key) const;
  long long get_int(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::uint64_t seed() const;

  SsgmConfig ssgm() const;
  SynthConfig synth() const;
  SdeSchedule schedule() const;
  Polarity polarity() const;
  ReverseMode reverse_mode() const;
  ModelConfig model() const;
  TrainConfig train() const;
  SdeVerifyConfig verify() const;
  int remove_samples() const;
  int hist_bins() const;

  // Builds every module config once so bad values surface before any work starts.
  void validate() const;

  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

// Comma-separated doubles.
std::vector<double> parse_double_list(const std::string& key, const std::string& text);

}  // namespace shadowlab::cli
