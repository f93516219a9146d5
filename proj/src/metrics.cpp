#include "ec4srec/metrics.hpp"

#include <cmath>

namespace ec4srec::metrics {

int rank_of_target(const Eigen::VectorXd& scores, int target) {
  const int vocab = static_cast<int>(scores.size());
  if (target < kFirstItemId || target >= vocab) {
    throw Error("target " + std::to_string(target) + " is not a real item id");
  }
  const double ts = scores(target);
  int rank = 1;
  for (int v = kFirstItemId; v < vocab; ++v) {
    if (v == target) continue;
    if (scores(v) > ts || (scores(v) == ts && v < target)) ++rank;
  }
  return rank;
}

void Accumulator::add(int rank) {
  if (rank < 1) throw Error("ranks are 1-based");
  ranks_.push_back(rank);
}

double Accumulator::hit_ratio(int k) const {
  if (ranks_.empty()) throw Error("no ranks collected");
  int hits = 0;
  for (int r : ranks_) hits += r <= k ? 1 : 0;
  return static_cast<double>(hits) / ranks_.size();
}

double Accumulator::ndcg(int k) const {
  if (ranks_.empty()) throw Error("no ranks collected");
  double sum = 0.0;
  for (int r : ranks_) {
    if (r <= k) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  }
  return sum / ranks_.size();
}

}  // namespace ec4srec::metrics
