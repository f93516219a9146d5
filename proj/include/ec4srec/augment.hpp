#pragma once

#include <random>
#include <utility>
#include <vector>

#include "ec4srec/common.hpp"
#include "ec4srec/data.hpp"
#include "ec4srec/explain.hpp"

namespace ec4srec::augment {

enum class Operator {
  crop,
  mask,
  reorder,
  retrieval,
  guided_crop_pos,
  guided_crop_neg,
  guided_mask_pos,
  guided_mask_neg,
  guided_reorder,
  guided_retrieval,
  oracle_mask,  // masks only ground-truth-unimportant positions (synthetic runs)
};

std::string to_string(Operator op);

enum class Polarity { positive, negative };

struct AugmentedView {
  std::vector<int> items;
  Polarity polarity = Polarity::positive;
  Operator op = Operator::crop;
  int source_user = -1;  // whose sequence the items came from
};

struct AugmentParams {
  double crop_ratio = 0.6;     // share of the sequence a crop keeps
  double mask_ratio = 0.3;     // share of positions a mask hides
  double reorder_ratio = 0.5;  // share of the sequence a reorder shuffles
  double guided_ratio = 0.5;   // share counted as "least important" (k)

  void validate() const;
};

// Positions of the k lowest/highest scores, ascending-position tie-break;
// returned sorted by position.
std::vector<int> lowest_k_positions(const std::vector<double>& scores, int k);
std::vector<int> highest_k_positions(const std::vector<double>& scores, int k);

// --- unguided random operations (positive views) ---

// Keeps a contiguous span of floor(ratio*|s|) items (at least one).
AugmentedView random_crop(const std::vector<int>& s, int user, double ratio,
                          std::mt19937_64& rng);
// Replaces floor(ratio*|s|) uniformly chosen positions with the mask token.
AugmentedView random_mask(const std::vector<int>& s, int user, double ratio,
                          std::mt19937_64& rng);
// Shuffles a contiguous span of floor(ratio*|s|) items in place.
AugmentedView random_reorder(const std::vector<int>& s, int user, double ratio,
                             std::mt19937_64& rng);
// Uniformly picks another user's training sequence with the same target;
// with no candidates, falls back to random_mask on s (documented fallback).
AugmentedView random_retrieval(const data::Sample& s, const data::SplitDataset& split,
                               double mask_fallback_ratio, std::mt19937_64& rng);

// --- importance-guided operations ---
// k = floor(guided_ratio * |s|). A guided_ratio so large that the positive
// crop view would be empty (k = |s|) is an error; a negative view needs
// k >= 1. k = 0 leaves mask/reorder views identical to the input.

// positive: drop the k least important items; negative: keep only them.
AugmentedView guided_crop(const std::vector<int>& s, const std::vector<double>& scores,
                          int user, Polarity polarity, double guided_ratio);
// positive: mask the k least important; negative: mask the k most important.
AugmentedView guided_mask(const std::vector<int>& s, const std::vector<double>& scores,
                          int user, Polarity polarity, double guided_ratio);
// Shuffles the k least important items among their own positions.
AugmentedView guided_reorder(const std::vector<int>& s, const std::vector<double>& scores,
                             int user, double guided_ratio, std::mt19937_64& rng);
// Samples a same-target candidate proportionally to
// jaccard(s, c) * sum of importance of shared items; all-zero utilities
// degrade to uniform, no candidates to the random_mask fallback.
AugmentedView guided_retrieval(const data::Sample& s, const std::vector<double>& scores,
                               const data::SplitDataset& split, double mask_fallback_ratio,
                               std::mt19937_64& rng);

// Masks `n` positions drawn uniformly from the non-important ones.
AugmentedView oracle_mask(const std::vector<int>& s, int user,
                          const std::vector<bool>& important, int n, std::mt19937_64& rng);

// Selection weights for guided_retrieval, exposed for testing.
std::vector<double> retrieval_utilities(const std::vector<int>& s,
                                        const std::vector<double>& scores,
                                        const std::vector<const std::vector<int>*>& candidates);

// Two distinct operators applied to s. With `guided` false the pool is
// {crop, mask, reorder}; with true it is the positive guided trio. `removed`
// excludes one family (ablation); Operator::retrieval means none removed.
std::pair<AugmentedView, AugmentedView> sample_view_pair(
    const std::vector<int>& s, int user, const AugmentParams& params,
    const std::vector<double>* scores, bool guided, std::mt19937_64& rng,
    Operator removed = Operator::retrieval);

// One negative view from {guided_crop-, guided_mask-}. Sequences too short
// for a non-empty negative crop fall back to the mask variant.
AugmentedView sample_negative_view(const std::vector<int>& s, int user,
                                   const AugmentParams& params,
                                   const std::vector<double>& scores, std::mt19937_64& rng,
                                   Operator removed = Operator::retrieval);

}  // namespace ec4srec::augment
