#include "ec4srec/explain.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ec4srec::explain {

Method method_from_string(const std::string& name) {
  if (name == "occlusion") return Method::occlusion;
  if (name == "saliency") return Method::saliency;
  if (name == "integrated-gradients") return Method::integrated_gradients;
  if (name == "attention") return Method::attention;
  throw ConfigError("unknown explanation method: " + name +
                    " (expected occlusion|saliency|integrated-gradients|attention)");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::occlusion: return "occlusion";
    case Method::saliency: return "saliency";
    case Method::integrated_gradients: return "integrated-gradients";
    case Method::attention: return "attention";
  }
  return "?";
}

std::vector<double> ScoringModel::target_scores(const std::vector<std::vector<int>>& seqs,
                                                const std::vector<int>& targets) const {
  std::vector<double> out(seqs.size());
  for (size_t i = 0; i < seqs.size(); ++i) out[i] = target_score(seqs[i], targets[i]);
  return out;
}

std::vector<double> ScoringModel::attention(const std::vector<int>&) const {
  throw UnsupportedError("this encoder does not expose attention weights");
}

ImportanceScores normalize_scores(const std::vector<double>& raw) {
  if (raw.empty()) throw Error("cannot normalize an empty score vector");
  ImportanceScores out;
  out.values.resize(raw.size());
  double sum = 0.0;
  bool ok = true;
  for (double v : raw) {
    if (v < 0.0) throw Error("importance scores cannot be negative; take absolute values first");
    if (!std::isfinite(v)) {
      ok = false;
      break;
    }
    sum += v;
  }
  if (!ok || sum <= 0.0) {
    std::fill(out.values.begin(), out.values.end(), 1.0 / static_cast<double>(raw.size()));
    return out;
  }
  for (size_t i = 0; i < raw.size(); ++i) out.values[i] = raw[i] / sum;
  return out;
}

std::vector<double> occlusion_scores(const ScoringModel& m, const std::vector<int>& seq,
                                     int target) {
  if (seq.empty()) throw Error("cannot explain an empty sequence");
  const double base = m.target_score(seq, target);
  std::vector<std::vector<int>> variants;
  variants.reserve(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) {
    variants.push_back(seq);
    variants.back()[i] = kMaskId;
  }
  std::vector<double> scores =
      m.target_scores(variants, std::vector<int>(seq.size(), target));
  std::vector<double> out(seq.size());
  for (size_t i = 0; i < seq.size(); ++i) out[i] = std::abs(base - scores[i]);
  return out;
}

std::vector<double> saliency_scores(const ScoringModel& m, const std::vector<int>& seq,
                                    int target) {
  if (seq.empty()) throw Error("cannot explain an empty sequence");
  Eigen::MatrixXd rows = m.embed(seq);
  Eigen::MatrixXd grad;
  m.score_from_embeddings(rows, target, &grad);
  std::vector<double> out(seq.size());
  for (size_t i = 0; i < seq.size(); ++i)
    out[i] = grad.row(static_cast<Eigen::Index>(i)).cwiseAbs().sum();
  return out;
}

IntegratedGradientsDetail integrated_gradients_detail(const ScoringModel& m,
                                                      const std::vector<int>& seq, int target,
                                                      int steps) {
  if (steps < 1) throw ConfigError("integrated gradients needs at least one step");
  if (seq.empty()) throw Error("cannot explain an empty sequence");
  const Eigen::MatrixXd input = m.embed(seq);
  Eigen::MatrixXd baseline(input.rows(), input.cols());
  baseline.rowwise() = m.mask_embedding();
  const Eigen::MatrixXd diff = input - baseline;

  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(input.rows(), input.cols());
  for (int k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / steps;
    Eigen::MatrixXd point = baseline + alpha * diff;
    Eigen::MatrixXd grad;
    m.score_from_embeddings(point, target, &grad);
    acc += grad;
  }
  acc /= static_cast<double>(steps);

  IntegratedGradientsDetail detail;
  detail.signed_attributions.resize(seq.size());
  for (size_t i = 0; i < seq.size(); ++i)
    detail.signed_attributions[i] =
        acc.row(static_cast<Eigen::Index>(i)).cwiseProduct(diff.row(static_cast<Eigen::Index>(i))).sum();
  detail.score_at_input = m.score_from_embeddings(input, target, nullptr);
  detail.score_at_baseline = m.score_from_embeddings(baseline, target, nullptr);
  return detail;
}

double IntegratedGradientsDetail::completeness_residual() const {
  double total = 0.0;
  for (double a : signed_attributions) total += a;
  return std::abs(total - (score_at_input - score_at_baseline));
}

std::vector<double> integrated_gradient_scores(const ScoringModel& m,
                                               const std::vector<int>& seq, int target,
                                               int steps) {
  auto detail = integrated_gradients_detail(m, seq, target, steps);
  std::vector<double> out(detail.signed_attributions.size());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::abs(detail.signed_attributions[i]);
  return out;
}

std::vector<double> attention_scores(const ScoringModel& m, const std::vector<int>& seq) {
  return m.attention(seq);
}

ImportanceScores explain_one(Method method, const ScoringModel& m, const std::vector<int>& seq,
                             int target, int ig_steps) {
  if (seq.empty()) throw Error("cannot explain an empty sequence");
  switch (method) {
    case Method::occlusion: return normalize_scores(occlusion_scores(m, seq, target));
    case Method::saliency: return normalize_scores(saliency_scores(m, seq, target));
    case Method::integrated_gradients:
      return normalize_scores(integrated_gradient_scores(m, seq, target, ig_steps));
    case Method::attention: return normalize_scores(attention_scores(m, seq));
  }
  throw Error("unreachable");
}

const ImportanceScores* ScoreStore::find(int user) const {
  auto it = by_user.find(user);
  return it == by_user.end() ? nullptr : &it->second;
}

bool UpdateSchedule::contains(int epoch) const {
  return std::find(epochs.begin(), epochs.end(), epoch) != epochs.end();
}

UpdateSchedule schedule_updates(int total_epochs, int updates) {
  if (total_epochs < 1) throw ConfigError("total_epochs must be >= 1");
  if (updates < 0) throw ConfigError("the number of score updates cannot be negative");
  UpdateSchedule s;
  s.total_epochs = total_epochs;
  s.updates = updates;
  const int stride = total_epochs / (updates + 1);
  if (updates > 0 && stride < 1) {
    throw ConfigError("update schedule needs total_epochs >= updates + 1 (the stride floors to 0)");
  }
  for (int l = 1; l <= updates; ++l) s.epochs.push_back(l * stride);
  return s;
}

void refresh_store(ScoreStore& store, Method method, const ScoringModel& m,
                   const std::vector<data::Sample>& anchors, int ig_steps, int epoch) {
  const int window = m.max_len();
  for (const auto& anchor : anchors) {
    const auto& prefix = anchor.prefix;
    const int len = static_cast<int>(prefix.size());
    const int kept = std::min(len, window);
    std::vector<int> tail(prefix.end() - kept, prefix.end());
    ImportanceScores tail_scores = explain_one(method, m, tail, anchor.target, ig_steps);
    ImportanceScores full;
    full.values.assign(static_cast<size_t>(len), 0.0);
    std::copy(tail_scores.values.begin(), tail_scores.values.end(),
              full.values.begin() + (len - kept));
    store.by_user[anchor.user] = std::move(full);
  }
  store.refreshed_at_epoch = epoch;
}

void save_score_store(const ScoreStore& store, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  std::vector<int> users;
  users.reserve(store.by_user.size());
  for (const auto& [u, _] : store.by_user) users.push_back(u);
  std::sort(users.begin(), users.end());
  out.precision(17);
  for (int u : users) {
    out << u;
    for (double v : store.by_user.at(u).values) out << ' ' << v;
    out << '\n';
  }
}

ScoreStore load_score_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open score store: " + path);
  ScoreStore store;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    int user;
    if (!(ss >> user)) continue;
    ImportanceScores s;
    double v;
    while (ss >> v) s.values.push_back(v);
    if (s.values.empty()) throw ParseError("score store line without scores: " + line);
    store.by_user[user] = std::move(s);
  }
  return store;
}

}  // namespace ec4srec::explain
