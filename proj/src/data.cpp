#include "ec4srec/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ec4srec::data {

std::int64_t InteractionDataset::num_interactions() const {
  std::int64_t n = 0;
  for (const auto& s : sequences) n += static_cast<std::int64_t>(s.size());
  return n;
}

double InteractionDataset::sparsity() const {
  if (num_users() == 0 || num_items() == 0) return 1.0;
  return 1.0 - static_cast<double>(num_interactions()) /
                   (static_cast<double>(num_users()) * num_items());
}

InteractionDataset load_interactions(const std::string& path, InteractionFormat fmt) {
  (void)fmt;  // single format for now
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open interaction file: " + path);
  InteractionDataset ds;
  std::unordered_map<std::string, int> item_ids;
  std::unordered_map<std::string, int> user_lines;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string user;
    if (!(ss >> user)) continue;  // blank line
    auto [u_it, u_new] = user_lines.try_emplace(user, line_no);
    if (!u_new)
      throw ParseError("user '" + user + "' appears twice (lines " +
                       std::to_string(u_it->second) + " and " + std::to_string(line_no) +
                       ") in " + path);
    std::vector<int> seq;
    std::string tok;
    while (ss >> tok) {
      auto [it, inserted] = item_ids.try_emplace(tok, ds.vocab_size);
      if (inserted) {
        ++ds.vocab_size;
        ds.item_names.push_back(tok);
      }
      seq.push_back(it->second);
    }
    if (seq.empty())
      throw ParseError("user with no interactions at line " + std::to_string(line_no) +
                       " of " + path);
    ds.user_names.push_back(user);
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) throw ParseError("no interactions in " + path);
  return ds;
}

void save_interactions(const InteractionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (int u = 0; u < ds.num_users(); ++u) {
    out << ds.user_names[u];
    for (int id : ds.sequences[u]) out << ' ' << ds.item_names[id - kFirstItemId];
    out << '\n';
  }
}

void save_id_map(const InteractionDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (int i = 0; i < ds.num_items(); ++i)
    out << ds.item_names[i] << ' ' << (i + kFirstItemId) << '\n';
}

namespace {

std::vector<int> drop_consecutive_repeats(const std::vector<int>& seq) {
  std::vector<int> out;
  out.reserve(seq.size());
  for (int id : seq)
    if (out.empty() || out.back() != id) out.push_back(id);
  return out;
}

}  // namespace

InteractionDataset apply_k_core(const InteractionDataset& ds, int k) {
  if (k < 1) throw ConfigError("k-core threshold must be >= 1");
  // Work on (user index, sequence) pairs with original internal ids.
  std::vector<std::pair<int, std::vector<int>>> rows;
  rows.reserve(ds.sequences.size());
  for (int u = 0; u < ds.num_users(); ++u)
    rows.emplace_back(u, drop_consecutive_repeats(ds.sequences[u]));

  bool changed = true;
  while (changed) {
    changed = false;
    std::unordered_map<int, int> support;
    for (const auto& [u, seq] : rows)
      for (int id : seq) ++support[id];
    for (auto& [u, seq] : rows) {
      std::vector<int> kept;
      kept.reserve(seq.size());
      for (int id : seq)
        if (support[id] >= k) kept.push_back(id);
      if (kept.size() != seq.size()) {
        changed = true;
        // Removal can merge previously separated repeats.
        seq = drop_consecutive_repeats(kept);
      }
    }
    size_t before = rows.size();
    rows.erase(std::remove_if(rows.begin(), rows.end(),
                              [&](const auto& r) { return r.second.size() < static_cast<size_t>(k); }),
               rows.end());
    if (rows.size() != before) changed = true;
  }
  if (rows.empty()) throw Error("k-core filtering removed every user (k=" + std::to_string(k) + ")");

  InteractionDataset out;
  std::unordered_map<int, int> remap;  // old internal id -> new internal id
  for (const auto& [u, seq] : rows) {
    std::vector<int> mapped;
    mapped.reserve(seq.size());
    for (int id : seq) {
      auto [it, inserted] = remap.try_emplace(id, out.vocab_size);
      if (inserted) {
        ++out.vocab_size;
        out.item_names.push_back(ds.item_names[id - kFirstItemId]);
      }
      mapped.push_back(it->second);
    }
    out.user_names.push_back(ds.user_names[u]);
    out.sequences.push_back(std::move(mapped));
  }
  return out;
}

SplitDataset split_leave_one_out(const InteractionDataset& ds) {
  SplitDataset split;
  split.vocab_size = ds.vocab_size;
  for (int u = 0; u < ds.num_users(); ++u) {
    const auto& seq = ds.sequences[u];
    if (seq.size() < 3) {
      log_warn("user " + ds.user_names[u] + " has fewer than 3 interactions; excluded from split");
      continue;
    }
    const int n = static_cast<int>(seq.size());
    // Train targets stop at v[n-3]: the last two items are reserved for
    // validation and test.
    for (int t = 1; t <= n - 3; ++t) {
      Sample s;
      s.user = u;
      s.prefix.assign(seq.begin(), seq.begin() + t);
      s.target = seq[t];
      if (t == n - 3) split.score_anchors.push_back(s);
      split.train_by_target[s.target].push_back(static_cast<int>(split.train.size()));
      split.train.push_back(std::move(s));
    }
    // validation: all but the last two as input, second-to-last as target
    Sample val;
    val.user = u;
    val.prefix.assign(seq.begin(), seq.end() - 2);
    val.target = seq[n - 2];
    split.valid.push_back(std::move(val));
    // test: all but the last as input, last as target
    Sample test;
    test.user = u;
    test.prefix.assign(seq.begin(), seq.end() - 1);
    test.target = seq[n - 1];
    split.test.push_back(std::move(test));
    ++split.num_users;
  }
  if (split.num_users == 0) throw Error("no user long enough for a leave-one-out split");
  return split;
}

std::vector<Sample> cap_train_prefixes(const std::vector<Sample>& train, int keep) {
  if (keep <= 0) return train;
  // Training samples for one user are contiguous and ordered by prefix
  // length, so keeping the last `keep` per user keeps the longest ones.
  std::vector<Sample> out;
  size_t i = 0;
  while (i < train.size()) {
    size_t j = i;
    while (j < train.size() && train[j].user == train[i].user) ++j;
    size_t first = j - i > static_cast<size_t>(keep) ? j - keep : i;
    for (size_t s = first; s < j; ++s) out.push_back(train[s]);
    i = j;
  }
  return out;
}

Batch make_batch(const std::vector<std::vector<int>>& seqs, const std::vector<int>& users,
                 const std::vector<int>& targets, int max_len) {
  if (max_len < 1) throw ConfigError("max_len must be >= 1");
  Batch b;
  b.rows = static_cast<int>(seqs.size());
  int longest = 0;
  for (const auto& s : seqs) {
    if (s.empty()) throw Error("cannot batch an empty sequence");
    longest = std::max(longest, static_cast<int>(s.size()));
  }
  b.width = std::min(max_len, longest);
  b.ids.assign(static_cast<size_t>(b.rows) * b.width, kPaddingId);
  b.lengths.resize(b.rows);
  b.users = users;
  b.targets = targets;
  for (int r = 0; r < b.rows; ++r) {
    const auto& s = seqs[r];
    const int len = std::min(static_cast<int>(s.size()), b.width);
    b.lengths[r] = len;
    // keep the most recent items, right-aligned
    const int src0 = static_cast<int>(s.size()) - len;
    for (int c = 0; c < len; ++c)
      b.ids[static_cast<size_t>(r) * b.width + (b.width - len + c)] = s[src0 + c];
  }
  for (int t : b.targets)
    if (t == kPaddingId) throw Error("batch target collides with the padding id");
  return b;
}

Batch make_batch(const std::vector<Sample>& samples, int max_len) {
  std::vector<std::vector<int>> seqs;
  std::vector<int> users, targets;
  seqs.reserve(samples.size());
  for (const auto& s : samples) {
    seqs.push_back(s.prefix);
    users.push_back(s.user);
    targets.push_back(s.target);
  }
  return make_batch(seqs, users, targets, max_len);
}

std::vector<std::vector<int>> batch_plan(size_t n, int batch_size, uint64_t shuffle_seed) {
  if (batch_size < 2)
    throw ConfigError("batch_size must be >= 2: pairwise losses need at least two sequences");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(shuffle_seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::vector<int>> groups;
  for (size_t at = 0; at < order.size(); at += batch_size) {
    size_t end = std::min(order.size(), at + batch_size);
    if (end - at < 2) {
      log_warn("dropping a trailing singleton batch");
      break;
    }
    groups.emplace_back(order.begin() + at, order.begin() + end);
  }
  return groups;
}

std::vector<Batch> batch_sequences(const std::vector<Sample>& samples, int batch_size,
                                   int max_len, uint64_t shuffle_seed) {
  std::vector<Batch> batches;
  for (const auto& group : batch_plan(samples.size(), batch_size, shuffle_seed)) {
    std::vector<Sample> chunk;
    chunk.reserve(group.size());
    for (int i : group) chunk.push_back(samples[i]);
    batches.push_back(make_batch(chunk, max_len));
  }
  return batches;
}

std::vector<Batch> eval_batches(const std::vector<Sample>& samples, int batch_size, int max_len) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  std::vector<Batch> batches;
  for (size_t at = 0; at < samples.size(); at += batch_size) {
    size_t end = std::min(samples.size(), at + batch_size);
    std::vector<Sample> chunk(samples.begin() + at, samples.begin() + end);
    batches.push_back(make_batch(chunk, max_len));
  }
  return batches;
}

std::array<int, 3> synthetic_next_items(const std::array<int, 3>& important_sorted) {
  uint64_t h = splitmix64(0x5eedULL);
  for (int id : important_sorted) h = splitmix64(h ^ static_cast<uint64_t>(id));
  static constexpr int kPerm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                      {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  const int* p = kPerm[h % 6];
  return {important_sorted[p[0]], important_sorted[p[1]], important_sorted[p[2]]};
}

SyntheticDataset generate_synthetic(uint64_t seed) {
  SyntheticDataset synth;
  auto& ds = synth.interactions;
  ds.vocab_size = kFirstItemId + kSyntheticPoolItems + kSyntheticFillerItems;
  for (int i = 0; i < ds.num_items(); ++i) ds.item_names.push_back("i" + std::to_string(i));

  const int pool_first = kFirstItemId;
  const int filler_first = kFirstItemId + kSyntheticPoolItems;

  for (int u = 0; u < kSyntheticUsers; ++u) {
    auto rng = make_rng(seed, {0x51, static_cast<uint64_t>(u)});

    // 3 distinct important items from the pool, 7 distinct fillers.
    std::array<int, 3> important{};
    {
      std::vector<int> pool(kSyntheticPoolItems);
      std::iota(pool.begin(), pool.end(), pool_first);
      for (int i = 0; i < kSyntheticImportant; ++i) {
        std::uniform_int_distribution<int> pick(i, kSyntheticPoolItems - 1);
        std::swap(pool[i], pool[pick(rng)]);
        important[static_cast<size_t>(i)] = pool[i];
      }
    }
    std::vector<int> history(important.begin(), important.end());
    {
      std::vector<int> filler(kSyntheticFillerItems);
      std::iota(filler.begin(), filler.end(), filler_first);
      for (int i = 0; i < kSyntheticHistory - kSyntheticImportant; ++i) {
        std::uniform_int_distribution<int> pick(i, kSyntheticFillerItems - 1);
        std::swap(filler[i], filler[pick(rng)]);
        history.push_back(filler[i]);
      }
    }
    std::shuffle(history.begin(), history.end(), rng);

    std::array<int, 3> pos{};
    int found = 0;
    for (int p = 0; p < kSyntheticHistory; ++p)
      if (history[p] >= pool_first && history[p] < filler_first) pos[found++] = p;
    if (found != kSyntheticImportant) throw Error("synthetic generator lost an important item");

    std::array<int, 3> sorted = important;
    std::sort(sorted.begin(), sorted.end());
    std::array<int, 3> nxt = synthetic_next_items(sorted);

    std::vector<int> seq = history;
    seq.insert(seq.end(), nxt.begin(), nxt.end());
    ds.user_names.push_back("u" + std::to_string(u));
    ds.sequences.push_back(std::move(seq));
    synth.important_positions.push_back(pos);
    synth.next_items.push_back(nxt);
  }
  return synth;
}

}  // namespace ec4srec::data
