#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ec4srec/config.hpp"
#include "ec4srec/data.hpp"
#include "ec4srec/trainer.hpp"

namespace ec4srec::commands {

using Overrides = std::vector<std::pair<std::string, std::string>>;

// Explicit request wins, then $EC4SREC_OUT/<leaf>, then out/<leaf>.
std::string resolve_out_dir(const std::string& requested, const std::string& leaf);

// Loads the config file (optional), applies --key value overrides.
config::RunConfig load_run_config(const std::string& config_file, const Overrides& overrides);

// Builds the split the run config describes ("synthetic" or a file path).
data::SplitDataset prepare_split(const config::RunConfig& rc);

// k-core filter + id map + stats summary for a raw interaction file.
int cmd_preprocess(const std::string& input, int k_core, const std::string& out_dir);

// One run per seed: trainer state, line-delimited history, metrics tables
// and a validation curve. Returns 0 on success.
int cmd_train(const std::string& config_file, const Overrides& overrides,
              const std::string& out_dir);

// Re-evaluates a saved trainer state on the valid or test split.
int cmd_evaluate(const std::string& state_path, const std::string& config_file,
                 const Overrides& overrides, const std::string& part,
                 const std::string& out_dir);

// Axis sweep: one training run per value, a comparison table and a figure.
// Axes: mu_e | p | losses | explanation | augment-removal. Empty `values`
// selects the axis defaults. Per-run failures are reported, not fatal to
// the remaining runs; a nonzero return means at least one run failed.
// `parallel` > 1 runs that many axis points concurrently (results are
// independent of the worker count).
int cmd_sweep(const std::string& config_file, const Overrides& overrides,
              const std::string& axis, const std::vector<std::string>& values,
              const std::string& out_dir, int parallel = 1);

// Random-vs-oracle masking study on the synthetic corpus.
int cmd_synthetic(uint64_t seed, const trainer::OracleOptions& opts, const std::string& out_dir);

// Recomputes importance scores from a saved state and writes them as a
// text sidecar plus a per-user bar figure.
int cmd_explain_dump(const std::string& state_path, const std::string& config_file,
                     const Overrides& overrides, int user, const std::string& out_dir);

}  // namespace ec4srec::commands
