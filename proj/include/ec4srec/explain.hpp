#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "ec4srec/common.hpp"
#include "ec4srec/data.hpp"

namespace ec4srec::explain {

enum class Method { occlusion, saliency, integrated_gradients, attention };

Method method_from_string(const std::string& name);
std::string to_string(Method m);

// The capabilities attribution methods need from a model. Kept abstract so
// tests can plug in closed-form surrogates with known attributions.
class ScoringModel {
 public:
  virtual ~ScoringModel() = default;

  virtual int vocab_size() const = 0;
  virtual int dim() const = 0;
  virtual int max_len() const = 0;

  // Pre-softmax score of `target` after consuming `seq` (internal ids).
  virtual double target_score(const std::vector<int>& seq, int target) const = 0;
  // Batched variant; the default just loops.
  virtual std::vector<double> target_scores(const std::vector<std::vector<int>>& seqs,
                                            const std::vector<int>& targets) const;

  // Input-embedding rows for seq (|seq| x d) and the mask-token row.
  virtual Eigen::MatrixXd embed(const std::vector<int>& seq) const = 0;
  virtual Eigen::RowVectorXd mask_embedding() const = 0;

  // Score of `target` computed from raw input-embedding rows; when grad is
  // non-null it receives d(score)/d(rows), same shape as rows.
  virtual double score_from_embeddings(const Eigen::MatrixXd& rows, int target,
                                       Eigen::MatrixXd* grad) const = 0;

  // Distribution over positions from the model's own attention; optional.
  virtual std::vector<double> attention(const std::vector<int>& seq) const;
};

// Per-position importance; non-negative and summing to one.
struct ImportanceScores {
  std::vector<double> values;
};

// Raw magnitudes -> distribution over positions. An all-zero (or all
// non-finite) input falls back to the uniform distribution.
ImportanceScores normalize_scores(const std::vector<double>& raw);

// |f(seq) - f(seq with position i replaced by the mask token)| per position.
std::vector<double> occlusion_scores(const ScoringModel& m, const std::vector<int>& seq,
                                     int target);

// L1 norm of d(score)/d(embedding row i) per position.
std::vector<double> saliency_scores(const ScoringModel& m, const std::vector<int>& seq,
                                    int target);

// Right-endpoint Riemann approximation of the path integral from the
// mask-token baseline to the input, `steps` slices.
std::vector<double> integrated_gradient_scores(const ScoringModel& m,
                                               const std::vector<int>& seq, int target,
                                               int steps);

struct IntegratedGradientsDetail {
  std::vector<double> signed_attributions;  // per position, summed over dims
  double score_at_input = 0.0;
  double score_at_baseline = 0.0;
  // |sum(attributions) - (f(input) - f(baseline))|; shrinks with more steps.
  double completeness_residual() const;
};

IntegratedGradientsDetail integrated_gradients_detail(const ScoringModel& m,
                                                      const std::vector<int>& seq, int target,
                                                      int steps);

// The model's own attention over positions (optional capability).
std::vector<double> attention_scores(const ScoringModel& m, const std::vector<int>& seq);

// Dispatch + normalize. `ig_steps` only matters for integrated gradients.
ImportanceScores explain_one(Method method, const ScoringModel& m, const std::vector<int>& seq,
                             int target, int ig_steps);

// Importance scores for training users, refreshed on schedule. Scores are
// aligned with the user's longest training prefix; when that prefix exceeds
// the model's max_len, leading positions get score zero.
struct ScoreStore {
  std::unordered_map<int, ImportanceScores> by_user;
  int refreshed_at_epoch = -1;

  const ImportanceScores* find(int user) const;
};

// Epochs (1-based) at which the store is refreshed:
// { l * floor(total/(updates+1)) : 1 <= l <= updates }. A stride that
// floors to zero is a configuration error.
struct UpdateSchedule {
  int total_epochs = 0;
  int updates = 0;
  std::vector<int> epochs;

  bool contains(int epoch) const;
};

UpdateSchedule schedule_updates(int total_epochs, int updates);

void refresh_store(ScoreStore& store, Method method, const ScoringModel& m,
                   const std::vector<data::Sample>& anchors, int ig_steps, int epoch);

// Text sidecar: one line per user, "user score_1 ... score_n".
void save_score_store(const ScoreStore& store, const std::string& path);
ScoreStore load_score_store(const std::string& path);

}  // namespace ec4srec::explain
