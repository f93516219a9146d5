#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ec4srec/common.hpp"

namespace ec4srec::data {

// Chronological interaction sequences with contiguous internal ids.
// Internal item ids start at kFirstItemId; 0/1 are reserved (pad, mask).
struct InteractionDataset {
  std::vector<std::vector<int>> sequences;  // indexed by internal user id
  int vocab_size = kFirstItemId;            // real items + reserved rows
  std::vector<std::string> user_names;      // internal user -> original id
  std::vector<std::string> item_names;      // (internal item - kFirstItemId) -> original id

  int num_users() const { return static_cast<int>(sequences.size()); }
  int num_items() const { return vocab_size - kFirstItemId; }
  std::int64_t num_interactions() const;
  // 1 - interactions / (users * items)
  double sparsity() const;
};

enum class InteractionFormat { user_per_line };

// Text format: one user per line, whitespace-separated tokens, first token
// the user id, the rest the item ids in chronological order.
InteractionDataset load_interactions(const std::string& path,
                                     InteractionFormat fmt = InteractionFormat::user_per_line);
void save_interactions(const InteractionDataset& ds, const std::string& path);
// Two columns per line: original item id, internal item id.
void save_id_map(const InteractionDataset& ds, const std::string& path);

// Collapses consecutive repeats, then alternates item-support and
// user-length filtering until both constraints hold (k-core fixpoint),
// then reindexes to contiguous ids. Applying it twice is the identity.
InteractionDataset apply_k_core(const InteractionDataset& ds, int k);

struct Sample {
  int user = -1;
  std::vector<int> prefix;  // model input, internal ids
  int target = kPaddingId;  // next item to predict
};

// Leave-one-out protocol: last item is the test target, second-to-last the
// validation target, and every earlier prefix is a training sample.
struct SplitDataset {
  std::vector<Sample> train;
  std::vector<Sample> valid;
  std::vector<Sample> test;
  // One per user: the longest training prefix and its target. Importance
  // scores are always computed against these.
  std::vector<Sample> score_anchors;
  // target item -> indices into train, for retrieval-style augmentation.
  std::unordered_map<int, std::vector<int>> train_by_target;
  int vocab_size = kFirstItemId;
  int num_users = 0;
};

// Users shorter than 3 are excluded with a logged warning.
SplitDataset split_leave_one_out(const InteractionDataset& ds);

// Keeps only the `keep` longest training prefixes per user (0 = all).
// A cheap way to shrink desk-scale experiments without touching eval.
std::vector<Sample> cap_train_prefixes(const std::vector<Sample>& train, int keep);

struct Batch {
  int rows = 0;
  int width = 0;             // min(max_len, longest kept sequence)
  std::vector<int> ids;      // rows*width, row-major, left-padded
  std::vector<int> lengths;  // post-truncation lengths
  std::vector<int> targets;  // empty for batches of augmented views
  std::vector<int> users;

  int at(int r, int c) const { return ids[static_cast<size_t>(r) * width + c]; }
};

// Left-pads to a common width; sequences longer than max_len keep their
// most recent max_len items. Targets may be empty (view batches).
Batch make_batch(const std::vector<std::vector<int>>& seqs, const std::vector<int>& users,
                 const std::vector<int>& targets, int max_len);
Batch make_batch(const std::vector<Sample>& samples, int max_len);

// Shuffled index groups for one training pass. batch_size must be >= 2
// (pairwise losses need company); a trailing singleton is dropped with a
// warning. Exposed so callers can keep per-row bookkeeping aligned.
std::vector<std::vector<int>> batch_plan(size_t n, int batch_size, uint64_t shuffle_seed);

// batch_plan applied to samples, each group padded into a Batch.
std::vector<Batch> batch_sequences(const std::vector<Sample>& samples, int batch_size,
                                   int max_len, uint64_t shuffle_seed);
// Deterministic order, singletons allowed; for evaluation / scoring only.
std::vector<Batch> eval_batches(const std::vector<Sample>& samples, int batch_size, int max_len);

// Synthetic corpus with ground-truth importance: 500 users, 200-item
// catalog; each sequence has 10 historical items of which exactly 3 (drawn
// from a designated 60-item pool) are important, plus 3 next-items that are
// a fixed permutation of those 3 important items (train/valid/test targets).
struct SyntheticDataset {
  InteractionDataset interactions;               // sequences of length 13
  std::vector<std::array<int, 3>> important_positions;  // ascending, within [0,10)
  std::vector<std::array<int, 3>> next_items;           // = last 3 sequence items
};

inline constexpr int kSyntheticUsers = 500;
inline constexpr int kSyntheticPoolItems = 60;    // important-item pool
inline constexpr int kSyntheticFillerItems = 140; // rest of the catalog
inline constexpr int kSyntheticHistory = 10;
inline constexpr int kSyntheticImportant = 3;

// The permutation assigning the sorted important triple to the three
// next-item roles; pure in the triple, so next-items can be re-derived
// from the ground-truth mask alone.
std::array<int, 3> synthetic_next_items(const std::array<int, 3>& important_sorted);

SyntheticDataset generate_synthetic(uint64_t seed);

}  // namespace ec4srec::data
