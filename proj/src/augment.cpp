#include "ec4srec/augment.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>
#include <unordered_set>

namespace ec4srec::augment {

std::string to_string(Operator op) {
  switch (op) {
    case Operator::crop: return "crop";
    case Operator::mask: return "mask";
    case Operator::reorder: return "reorder";
    case Operator::retrieval: return "retrieval";
    case Operator::guided_crop_pos: return "guided-crop+";
    case Operator::guided_crop_neg: return "guided-crop-";
    case Operator::guided_mask_pos: return "guided-mask+";
    case Operator::guided_mask_neg: return "guided-mask-";
    case Operator::guided_reorder: return "guided-reorder";
    case Operator::guided_retrieval: return "guided-retrieval";
    case Operator::oracle_mask: return "oracle-mask";
  }
  return "unknown";
}

void AugmentParams::validate() const {
  auto check = [](double v, const char* name) {
    if (!(v > 0.0 && v <= 1.0)) {
      throw ConfigError(std::string(name) + " must lie in (0, 1], got " + std::to_string(v));
    }
  };
  check(crop_ratio, "crop_ratio");
  check(mask_ratio, "mask_ratio");
  check(reorder_ratio, "reorder_ratio");
  check(guided_ratio, "guided_ratio");
}

namespace {

// k distinct positions ranked by comparator over (score, position); the
// position tie-break keeps equal scores reproducible.
std::vector<int> ranked_positions(const std::vector<double>& scores, int k, bool lowest) {
  const int n = static_cast<int>(scores.size());
  k = std::clamp(k, 0, n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[a] != scores[b]) return lowest ? scores[a] < scores[b] : scores[a] > scores[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

// n distinct indices drawn uniformly from `pool` (partial Fisher-Yates).
std::vector<int> draw_distinct(std::vector<int> pool, int n, std::mt19937_64& rng) {
  n = std::clamp(n, 0, static_cast<int>(pool.size()));
  for (int i = 0; i < n; ++i) {
    std::uniform_int_distribution<int> pick(i, static_cast<int>(pool.size()) - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(n);
  return pool;
}

int guided_k(const std::vector<int>& s, const std::vector<double>& scores, double ratio) {
  if (scores.size() != s.size()) {
    throw Error("importance scores cover " + std::to_string(scores.size()) +
                " positions but the sequence has " + std::to_string(s.size()));
  }
  if (s.empty()) throw Error("cannot augment an empty sequence");
  return static_cast<int>(ratio * static_cast<double>(s.size()));
}

AugmentedView make_view(std::vector<int> items, Polarity pol, Operator op, int user) {
  AugmentedView v;
  v.items = std::move(items);
  v.polarity = pol;
  v.op = op;
  v.source_user = user;
  return v;
}

std::vector<int> same_target_candidates(const data::Sample& s, const data::SplitDataset& split) {
  std::vector<int> out;
  auto it = split.train_by_target.find(s.target);
  if (it == split.train_by_target.end()) return out;
  for (int idx : it->second) {
    if (split.train[idx].user != s.user) out.push_back(idx);
  }
  return out;
}

}  // namespace

std::vector<int> lowest_k_positions(const std::vector<double>& scores, int k) {
  return ranked_positions(scores, k, true);
}

std::vector<int> highest_k_positions(const std::vector<double>& scores, int k) {
  return ranked_positions(scores, k, false);
}

AugmentedView random_crop(const std::vector<int>& s, int user, double ratio,
                          std::mt19937_64& rng) {
  const int n = static_cast<int>(s.size());
  if (n < 2) return make_view(s, Polarity::positive, Operator::crop, user);
  const int keep = std::max(1, static_cast<int>(ratio * n));
  std::uniform_int_distribution<int> start_dist(0, n - keep);
  const int start = start_dist(rng);
  std::vector<int> items(s.begin() + start, s.begin() + start + keep);
  return make_view(std::move(items), Polarity::positive, Operator::crop, user);
}

AugmentedView random_mask(const std::vector<int>& s, int user, double ratio,
                          std::mt19937_64& rng) {
  const int n = static_cast<int>(s.size());
  if (n == 0) throw Error("cannot augment an empty sequence");
  const int hide = static_cast<int>(ratio * n);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::vector<int> items = s;
  for (int pos : draw_distinct(std::move(all), hide, rng)) items[pos] = kMaskId;
  return make_view(std::move(items), Polarity::positive, Operator::mask, user);
}

AugmentedView random_reorder(const std::vector<int>& s, int user, double ratio,
                             std::mt19937_64& rng) {
  const int n = static_cast<int>(s.size());
  if (n == 0) throw Error("cannot augment an empty sequence");
  const int span = static_cast<int>(ratio * n);
  std::vector<int> items = s;
  if (span > 1) {
    std::uniform_int_distribution<int> start_dist(0, n - span);
    const int start = start_dist(rng);
    std::shuffle(items.begin() + start, items.begin() + start + span, rng);
  }
  return make_view(std::move(items), Polarity::positive, Operator::reorder, user);
}

AugmentedView random_retrieval(const data::Sample& s, const data::SplitDataset& split,
                               double mask_fallback_ratio, std::mt19937_64& rng) {
  const std::vector<int> candidates = same_target_candidates(s, split);
  if (candidates.empty()) return random_mask(s.prefix, s.user, mask_fallback_ratio, rng);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates.size()) - 1);
  const data::Sample& chosen = split.train[candidates[pick(rng)]];
  return make_view(chosen.prefix, Polarity::positive, Operator::retrieval, chosen.user);
}

AugmentedView guided_crop(const std::vector<int>& s, const std::vector<double>& scores,
                          int user, Polarity polarity, double guided_ratio) {
  const int k = guided_k(s, scores, guided_ratio);
  const int n = static_cast<int>(s.size());
  if (polarity == Polarity::negative && k < 1) {
    throw Error("guided_ratio too small: a negative crop view would be empty");
  }
  if (polarity == Polarity::positive && k == n) {
    throw Error("guided_ratio too large: the positive crop view would be empty");
  }
  const std::vector<int> low = lowest_k_positions(scores, k);
  std::vector<int> items;
  if (polarity == Polarity::positive) {
    items.reserve(n - k);
    size_t next = 0;
    for (int i = 0; i < n; ++i) {
      if (next < low.size() && low[next] == i) {
        ++next;
      } else {
        items.push_back(s[i]);
      }
    }
  } else {
    items.reserve(k);
    for (int pos : low) items.push_back(s[pos]);
  }
  const Operator op = polarity == Polarity::positive ? Operator::guided_crop_pos
                                                     : Operator::guided_crop_neg;
  return make_view(std::move(items), polarity, op, user);
}

AugmentedView guided_mask(const std::vector<int>& s, const std::vector<double>& scores,
                          int user, Polarity polarity, double guided_ratio) {
  const int k = guided_k(s, scores, guided_ratio);
  const std::vector<int> hit = polarity == Polarity::positive ? lowest_k_positions(scores, k)
                                                              : highest_k_positions(scores, k);
  std::vector<int> items = s;
  for (int pos : hit) items[pos] = kMaskId;
  const Operator op = polarity == Polarity::positive ? Operator::guided_mask_pos
                                                     : Operator::guided_mask_neg;
  return make_view(std::move(items), polarity, op, user);
}

AugmentedView guided_reorder(const std::vector<int>& s, const std::vector<double>& scores,
                             int user, double guided_ratio, std::mt19937_64& rng) {
  const int k = guided_k(s, scores, guided_ratio);
  std::vector<int> items = s;
  if (k > 1) {
    const std::vector<int> low = lowest_k_positions(scores, k);
    std::vector<int> picked;
    picked.reserve(low.size());
    for (int pos : low) picked.push_back(s[pos]);
    std::shuffle(picked.begin(), picked.end(), rng);
    for (size_t i = 0; i < low.size(); ++i) items[low[i]] = picked[i];
  }
  return make_view(std::move(items), Polarity::positive, Operator::guided_reorder, user);
}

std::vector<double> retrieval_utilities(const std::vector<int>& s,
                                        const std::vector<double>& scores,
                                        const std::vector<const std::vector<int>*>& candidates) {
  if (scores.size() != s.size()) {
    throw Error("importance scores cover " + std::to_string(scores.size()) +
                " positions but the sequence has " + std::to_string(s.size()));
  }
  // Item-level importance; a repeated item accumulates its positional scores.
  std::unordered_map<int, double> item_score;
  for (size_t i = 0; i < s.size(); ++i) item_score[s[i]] += scores[i];

  std::vector<double> utils;
  utils.reserve(candidates.size());
  for (const std::vector<int>* cand : candidates) {
    std::unordered_set<int> cand_items(cand->begin(), cand->end());
    double shared_score = 0.0;
    int shared = 0;
    for (const auto& [item, sc] : item_score) {
      if (cand_items.count(item)) {
        ++shared;
        shared_score += sc;
      }
    }
    const int uni = static_cast<int>(item_score.size()) + static_cast<int>(cand_items.size()) - shared;
    utils.push_back(uni > 0 ? (static_cast<double>(shared) / uni) * shared_score : 0.0);
  }
  return utils;
}

AugmentedView guided_retrieval(const data::Sample& s, const std::vector<double>& scores,
                               const data::SplitDataset& split, double mask_fallback_ratio,
                               std::mt19937_64& rng) {
  const std::vector<int> candidates = same_target_candidates(s, split);
  if (candidates.empty()) return random_mask(s.prefix, s.user, mask_fallback_ratio, rng);

  std::vector<const std::vector<int>*> prefixes;
  prefixes.reserve(candidates.size());
  for (int idx : candidates) prefixes.push_back(&split.train[idx].prefix);
  const std::vector<double> utils = retrieval_utilities(s.prefix, scores, prefixes);
  const double total = std::accumulate(utils.begin(), utils.end(), 0.0);

  int chosen;
  if (total > 0.0) {
    std::uniform_real_distribution<double> u(0.0, total);
    double x = u(rng);
    chosen = static_cast<int>(candidates.size()) - 1;
    for (size_t i = 0; i < utils.size(); ++i) {
      x -= utils[i];
      if (x <= 0.0) {
        chosen = static_cast<int>(i);
        break;
      }
    }
  } else {
    std::uniform_int_distribution<int> pick(0, static_cast<int>(candidates.size()) - 1);
    chosen = pick(rng);
  }
  const data::Sample& hit = split.train[candidates[chosen]];
  return make_view(hit.prefix, Polarity::positive, Operator::guided_retrieval, hit.user);
}

AugmentedView oracle_mask(const std::vector<int>& s, int user,
                          const std::vector<bool>& important, int n, std::mt19937_64& rng) {
  if (important.size() != s.size()) {
    throw Error("importance mask covers " + std::to_string(important.size()) +
                " positions but the sequence has " + std::to_string(s.size()));
  }
  std::vector<int> unimportant;
  for (size_t i = 0; i < s.size(); ++i) {
    if (!important[i]) unimportant.push_back(static_cast<int>(i));
  }
  std::vector<int> items = s;
  for (int pos : draw_distinct(std::move(unimportant), n, rng)) items[pos] = kMaskId;
  return make_view(std::move(items), Polarity::positive, Operator::oracle_mask, user);
}

namespace {

AugmentedView apply_operator(Operator op, const std::vector<int>& s, int user,
                             const AugmentParams& params, const std::vector<double>* scores,
                             std::mt19937_64& rng) {
  switch (op) {
    case Operator::crop: return random_crop(s, user, params.crop_ratio, rng);
    case Operator::mask: return random_mask(s, user, params.mask_ratio, rng);
    case Operator::reorder: return random_reorder(s, user, params.reorder_ratio, rng);
    case Operator::guided_crop_pos:
      return guided_crop(s, *scores, user, Polarity::positive, params.guided_ratio);
    case Operator::guided_mask_pos:
      return guided_mask(s, *scores, user, Polarity::positive, params.guided_ratio);
    case Operator::guided_reorder:
      return guided_reorder(s, *scores, user, params.guided_ratio, rng);
    default: throw Error("operator " + to_string(op) + " cannot build a standalone view");
  }
}

// Maps an ablation handle to the concrete operator in the given pool.
bool same_family(Operator removed, Operator candidate) {
  switch (removed) {
    case Operator::crop: return candidate == Operator::crop || candidate == Operator::guided_crop_pos;
    case Operator::mask: return candidate == Operator::mask || candidate == Operator::guided_mask_pos;
    case Operator::reorder:
      return candidate == Operator::reorder || candidate == Operator::guided_reorder;
    default: return false;
  }
}

}  // namespace

std::pair<AugmentedView, AugmentedView> sample_view_pair(
    const std::vector<int>& s, int user, const AugmentParams& params,
    const std::vector<double>* scores, bool guided, std::mt19937_64& rng, Operator removed) {
  if (guided && scores == nullptr) {
    throw Error("guided view sampling needs importance scores");
  }
  std::vector<Operator> pool =
      guided ? std::vector<Operator>{Operator::guided_crop_pos, Operator::guided_mask_pos,
                                     Operator::guided_reorder}
             : std::vector<Operator>{Operator::crop, Operator::mask, Operator::reorder};
  std::erase_if(pool, [&](Operator op) { return same_family(removed, op); });
  if (pool.size() < 2) {
    throw Error("need at least two augmentation operators to form a view pair");
  }
  std::uniform_int_distribution<int> first_dist(0, static_cast<int>(pool.size()) - 1);
  const int first = first_dist(rng);
  const Operator op_a = pool[first];
  pool.erase(pool.begin() + first);
  std::uniform_int_distribution<int> second_dist(0, static_cast<int>(pool.size()) - 1);
  const Operator op_b = pool[second_dist(rng)];
  AugmentedView a = apply_operator(op_a, s, user, params, scores, rng);
  AugmentedView b = apply_operator(op_b, s, user, params, scores, rng);
  return {std::move(a), std::move(b)};
}

AugmentedView sample_negative_view(const std::vector<int>& s, int user,
                                   const AugmentParams& params,
                                   const std::vector<double>& scores, std::mt19937_64& rng,
                                   Operator removed) {
  const int k = guided_k(s, scores, params.guided_ratio);
  std::vector<Operator> pool;
  if (removed != Operator::crop && k >= 1) pool.push_back(Operator::guided_crop_neg);
  if (removed != Operator::mask) pool.push_back(Operator::guided_mask_neg);
  if (pool.empty()) {
    // Nothing feasible: the mask variant degrades to an identity view.
    return guided_mask(s, scores, user, Polarity::negative, params.guided_ratio);
  }
  std::uniform_int_distribution<int> pick(0, static_cast<int>(pool.size()) - 1);
  const Operator op = pool[pick(rng)];
  if (op == Operator::guided_crop_neg) {
    return guided_crop(s, scores, user, Polarity::negative, params.guided_ratio);
  }
  return guided_mask(s, scores, user, Polarity::negative, params.guided_ratio);
}

}  // namespace ec4srec::augment
