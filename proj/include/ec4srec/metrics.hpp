#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ec4srec/common.hpp"

namespace ec4srec::metrics {

// 1-based rank of `target` among real items, scores descending; equal
// scores break toward the smaller item id. Reserved rows never count.
int rank_of_target(const Eigen::VectorXd& scores, int target);

// Collects per-user ranks and reduces them to top-k metrics.
class Accumulator {
 public:
  void add(int rank);
  int count() const { return static_cast<int>(ranks_.size()); }
  // Share of users whose target landed in the top k.
  double hit_ratio(int k) const;
  // Mean of 1/log2(rank+1) for hits, 0 for misses.
  double ndcg(int k) const;

 private:
  std::vector<int> ranks_;
};

}  // namespace ec4srec::metrics
