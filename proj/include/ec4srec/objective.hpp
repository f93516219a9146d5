#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "ec4srec/common.hpp"

namespace ec4srec::objective {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Training objectives. warmup combines the two unguided contrastive terms;
// cl4srec/duorec are the unguided baselines; ssl/sl/full add the
// explanation-guided terms (positive+negative views, guided retrieval, both).
enum class Mode { warmup, cl4srec, duorec, ssl, sl, full };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);

struct LossConfig {
  double lambda_cl = 0.1;        // unguided contrastive weight (warmup, cl4srec, duorec)
  double lambda_cl_plus = 0.1;   // guided positive-view contrast
  double lambda_cl_minus = 0.1;  // guided negative-view contrast
  double lambda_sl_plus = 0.1;   // guided retrieval contrast
  double tau = 1.0;              // temperature; supervised (retrieval) losses only

  void validate() const;
};

// All pairwise similarities are plain dot products.
double sim(const Vector& a, const Vector& b);

// One directed InfoNCE term with an explicit negative set:
//   -log( e^{a.p/tau} / (e^{a.p/tau} + sum_k e^{a.n_k/tau}) ).
// Optional outputs receive the analytic gradients (overwritten, not added).
double info_nce(const Vector& anchor, const Vector& positive, const Matrix& negatives,
                double tau, Vector* g_anchor = nullptr, Vector* g_positive = nullptr,
                Matrix* g_negatives = nullptr);

// Cross-entropy of the target against scores over every real item row of the
// embedding table (reserved pad/mask rows are excluded from the softmax).
double rec_loss(const Vector& h, const Matrix& items, int target,
                Vector* g_h = nullptr, Matrix* g_items = nullptr);
// Mean over the batch; rows of h pair with targets.
double rec_loss_batch(const Matrix& h, const Matrix& items, const std::vector<int>& targets,
                      Matrix* g_h = nullptr, Matrix* g_items = nullptr);

// Pairwise contrastive loss over two views per user. The negative set for
// user u is every other view in the batch; the two anchor orders are
// averaged. Mean over users; requires >= 2 users.
double cl_loss(const Matrix& view_a, const Matrix& view_b,
               Matrix* g_a = nullptr, Matrix* g_b = nullptr);
double cl_loss_user(const Matrix& view_a, const Matrix& view_b, int u);

// Same structure over guided positive views; `extra_positives` (may be null)
// joins the shared negative pool, e.g. retrieved views when present.
double cl_plus_loss(const Matrix& view_a, const Matrix& view_b, const Matrix* extra_positives,
                    Matrix* g_a = nullptr, Matrix* g_b = nullptr, Matrix* g_extra = nullptr);

// Retrieval-supervised contrast between each user's representation and a
// same-target view. Two directed terms are summed per user (no averaging),
// negatives drawn from both stacks; mean over users.
double sl_loss(const Matrix& anchors, const Matrix& retrieved, double tau,
               Matrix* g_anchors = nullptr, Matrix* g_retrieved = nullptr);
double sl_loss_user(const Matrix& anchors, const Matrix& retrieved, int u, double tau);
double sl_plus_loss(const Matrix& anchors, const Matrix& retrieved, double tau,
                    Matrix* g_anchors = nullptr, Matrix* g_retrieved = nullptr);

// Negative-view loss: pull each user's negative view toward every OTHER
// user's negative view, normalized against all positive views. `positives`
// stacks every positive view row in the batch. Mean over users; >= 2 users.
double cl_minus_loss(const Matrix& negatives, const Matrix& positives,
                     Matrix* g_neg = nullptr, Matrix* g_pos = nullptr);
double cl_minus_loss_user(const Matrix& negatives, const Matrix& positives, int u);

// Everything one optimizer step consumes. Empty matrices mean "this view
// family was not built"; composite() checks presence against the mode.
struct ViewBatch {
  Matrix anchors;             // encodings of the original prefixes
  Matrix view_a, view_b;      // the per-user positive view pair
  Matrix retrieved;           // same-target retrieved/guided-retrieved views
  Matrix negatives;           // one guided negative view per user
  std::vector<int> targets;   // real next items, one per batch row
};

struct ViewNeeds {
  bool pair = false;       // view_a/view_b
  bool retrieved = false;  // retrieved
  bool negatives = false;  // negatives
};

ViewNeeds views_needed(Mode mode, const LossConfig& cfg);

struct Breakdown {
  double total = 0, rec = 0, cl = 0, sl = 0, cl_plus = 0, cl_minus = 0, sl_plus = 0;
};

struct Gradients {
  Matrix anchors, view_a, view_b, retrieved, negatives, items;
};

// Mode-weighted sum of the component losses (each a batch mean).
// Zero-coefficient components are skipped entirely, so their views may be
// absent. `grads`, when given, receives shape-matched accumulated gradients.
Breakdown composite(Mode mode, const LossConfig& cfg, const ViewBatch& views,
                    const Matrix& items, Gradients* grads = nullptr);

}  // namespace ec4srec::objective
