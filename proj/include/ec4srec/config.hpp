#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ec4srec/trainer.hpp"

namespace ec4srec::config {

// Flat "key = value" text with dotted keys ('#' comments allowed). The map
// is ordered so dumps are canonical.
struct KeyValues {
  std::map<std::string, std::string> entries;

  static KeyValues from_file(const std::string& path);
  static KeyValues from_text(const std::string& text);
  void set(const std::string& key, const std::string& value) { entries[key] = value; }
  void apply(const std::vector<std::pair<std::string, std::string>>& overrides);
  std::string dump() const;
};

// One experiment plus run plumbing (dataset, seeds, cutoffs).
struct RunConfig {
  trainer::ExperimentConfig experiment;
  std::vector<uint64_t> seeds{7};       // experiment.seed is set per run
  std::vector<int> eval_ks{5, 10, 20};
  std::string dataset = "synthetic";    // path to interactions, or "synthetic"
  uint64_t synthetic_seed = 13;

  void validate() const;
};

// Applies every entry; an unknown key raises ConfigError naming the valid
// keys; a malformed value raises ParseError naming the key.
RunConfig parse_run_config(const KeyValues& kv);

// Canonical flat form of a RunConfig (parse_run_config round-trips it).
KeyValues to_key_values(const RunConfig& rc);

const std::vector<std::string>& known_keys();

}  // namespace ec4srec::config
