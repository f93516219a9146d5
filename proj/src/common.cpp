#include "ec4srec/common.hpp"

#include <atomic>
#include <cstdio>

namespace ec4srec {

namespace {
std::atomic<bool> g_quiet{false};
}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t mix_seed(uint64_t seed, std::initializer_list<uint64_t> tags) {
  uint64_t h = splitmix64(seed);
  for (uint64_t t : tags) h = splitmix64(h ^ (t + 0x9e3779b97f4a7c15ULL));
  return h;
}

std::mt19937_64 make_rng(uint64_t seed, std::initializer_list<uint64_t> tags) {
  return std::mt19937_64(mix_seed(seed, tags));
}

void log_warn(const std::string& msg) {
  if (!g_quiet.load()) std::fprintf(stderr, "[warn] %s\n", msg.c_str());
}

void log_info(const std::string& msg) {
  if (!g_quiet.load()) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

void set_log_quiet(bool quiet) { g_quiet.store(quiet); }

}  // namespace ec4srec
