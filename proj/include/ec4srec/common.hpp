#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>

namespace ec4srec {

inline constexpr const char* kVersion = "0.1.0";

// Reserved ids shared across the whole pipeline. Real items start at
// kFirstItemId; id 0 is left-padding, id 1 the learnable mask token.
inline constexpr int kPaddingId = 0;
inline constexpr int kMaskId = 1;
inline constexpr int kFirstItemId = 2;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (interaction logs, config files, checkpoints).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid option combinations or out-of-range hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A capability the selected component does not provide
// (e.g. attention maps from a recurrent encoder).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss; carries a state dump path.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

uint64_t splitmix64(uint64_t x);

// Derives an independent stream from a base seed and a list of tags
// (epoch, step, sample index, ...). Same inputs -> same stream, so any
// point of the run can be reproduced without replaying RNG history.
uint64_t mix_seed(uint64_t seed, std::initializer_list<uint64_t> tags);
std::mt19937_64 make_rng(uint64_t seed, std::initializer_list<uint64_t> tags = {});

void log_warn(const std::string& msg);
void log_info(const std::string& msg);
// Silences log_info/log_warn (tests exercise warning paths on purpose).
void set_log_quiet(bool quiet);

}  // namespace ec4srec
