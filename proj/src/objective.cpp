#include "ec4srec/objective.hpp"

#include <algorithm>
#include <cmath>

namespace ec4srec::objective {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::warmup: return "warmup";
    case Mode::cl4srec: return "cl4srec";
    case Mode::duorec: return "duorec";
    case Mode::ssl: return "ssl";
    case Mode::sl: return "sl";
    case Mode::full: return "full";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "warmup") return Mode::warmup;
  if (s == "cl4srec") return Mode::cl4srec;
  if (s == "duorec") return Mode::duorec;
  if (s == "ssl") return Mode::ssl;
  if (s == "sl") return Mode::sl;
  if (s == "full") return Mode::full;
  throw ConfigError("unknown mode '" + s +
                    "' (expected warmup|cl4srec|duorec|ssl|sl|full)");
}

void LossConfig::validate() const {
  auto non_negative = [](double v, const char* name) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw ConfigError(std::string(name) + " must be finite and >= 0, got " + std::to_string(v));
    }
  };
  non_negative(lambda_cl, "lambda_cl");
  non_negative(lambda_cl_plus, "lambda_cl_plus");
  non_negative(lambda_cl_minus, "lambda_cl_minus");
  non_negative(lambda_sl_plus, "lambda_sl_plus");
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw ConfigError("tau must be finite and > 0, got " + std::to_string(tau));
  }
}

double sim(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw Error("sim: dimension mismatch");
  return a.dot(b);
}

double info_nce(const Vector& anchor, const Vector& positive, const Matrix& negatives,
                double tau, Vector* g_anchor, Vector* g_positive, Matrix* g_negatives) {
  const int k = static_cast<int>(negatives.rows());
  const double lp = anchor.dot(positive) / tau;
  Vector ln(k);
  for (int i = 0; i < k; ++i) ln(i) = anchor.dot(negatives.row(i)) / tau;

  double m = lp;
  for (int i = 0; i < k; ++i) m = std::max(m, ln(i));
  double z = std::exp(lp - m);
  for (int i = 0; i < k; ++i) z += std::exp(ln(i) - m);
  const double lse = m + std::log(z);
  const double loss = lse - lp;

  if (g_anchor || g_positive || g_negatives) {
    const double wp = std::exp(lp - lse);
    if (g_anchor) {
      *g_anchor = (wp - 1.0) / tau * positive;
      for (int i = 0; i < k; ++i) {
        g_anchor->noalias() += std::exp(ln(i) - lse) / tau * negatives.row(i).transpose();
      }
    }
    if (g_positive) *g_positive = (wp - 1.0) / tau * anchor;
    if (g_negatives) {
      g_negatives->resize(k, anchor.size());
      for (int i = 0; i < k; ++i) {
        g_negatives->row(i) = std::exp(ln(i) - lse) / tau * anchor.transpose();
      }
    }
  }
  return loss;
}

double rec_loss_batch(const Matrix& h, const Matrix& items, const std::vector<int>& targets,
                      Matrix* g_h, Matrix* g_items) {
  const int b = static_cast<int>(h.rows());
  const int vocab = static_cast<int>(items.rows());
  const int real = vocab - kFirstItemId;
  if (b == 0) throw Error("recommendation loss needs a non-empty batch");
  if (static_cast<int>(targets.size()) != b) {
    throw Error("recommendation loss: " + std::to_string(targets.size()) + " targets for " +
                std::to_string(b) + " rows");
  }
  if (real < 1) throw Error("item table holds no real items");
  for (int t : targets) {
    if (t < kFirstItemId || t >= vocab) {
      throw Error("target " + std::to_string(t) + " is not a real item id");
    }
  }

  const auto real_items = items.bottomRows(real);
  Matrix logits = h * real_items.transpose();  // b x real
  double total = 0.0;
  // In place, logits becomes (softmax - onehot) scaled for the mean.
  for (int r = 0; r < b; ++r) {
    const double m = logits.row(r).maxCoeff();
    const double z = (logits.row(r).array() - m).exp().sum();
    const double lse = m + std::log(z);
    total += lse - logits(r, targets[r] - kFirstItemId);
    if (g_h || g_items) {
      logits.row(r) = ((logits.row(r).array() - lse).exp() / b).matrix();
      logits(r, targets[r] - kFirstItemId) -= 1.0 / b;
    }
  }
  if (g_h) g_h->noalias() = logits * real_items;
  if (g_items) {
    g_items->setZero(vocab, items.cols());
    g_items->bottomRows(real).noalias() = logits.transpose() * h;
  }
  return total / b;
}

double rec_loss(const Vector& h, const Matrix& items, int target, Vector* g_h, Matrix* g_items) {
  Matrix hb = h.transpose();
  Matrix gh;
  const double loss = rec_loss_batch(hb, items, {target}, g_h ? &gh : nullptr, g_items);
  if (g_h) *g_h = gh.row(0).transpose();
  return loss;
}

namespace {

// Shared kernel for the paired contrastive losses. X stacks one view per
// row: rows [0,b) and [b,2b) are each user's pair, rows >= 2b extra
// negatives shared by everyone. Per user, two directed terms (anchor u vs
// b+u and the swap) are combined by `combine_scale` (0.5 = average, 1 =
// sum); the negative set is every row except the user's own pair. Returns
// the mean over users; per_user, when given, receives each user's value.
double paired_contrast(const Matrix& x, int b, double tau, double combine_scale, Matrix* g_x,
                       std::vector<double>* per_user) {
  const int rows = static_cast<int>(x.rows());
  if (b < 2) throw Error("contrastive losses need at least two users in the batch");
  if (rows < 2 * b) throw Error("paired contrast: missing view rows");

  const Matrix logits = (x * x.transpose()) / tau;  // rows x rows
  if (g_x) g_x->setZero(rows, x.cols());
  if (per_user) per_user->assign(b, 0.0);

  double total = 0.0;
  const double scale = combine_scale / b;  // per-direction weight in the mean
  for (int u = 0; u < b; ++u) {
    for (int dir = 0; dir < 2; ++dir) {
      const int i = dir == 0 ? u : b + u;
      const int j = dir == 0 ? b + u : u;
      // Logit set: the positive pair plus every row outside the own pair.
      double m = logits(i, j);
      for (int k = 0; k < rows; ++k) {
        if (k != u && k != b + u) m = std::max(m, logits(i, k));
      }
      double z = std::exp(logits(i, j) - m);
      for (int k = 0; k < rows; ++k) {
        if (k != u && k != b + u) z += std::exp(logits(i, k) - m);
      }
      const double lse = m + std::log(z);
      const double term = lse - logits(i, j);
      total += combine_scale * term;
      if (per_user) (*per_user)[u] += combine_scale * term;

      if (g_x) {
        const double wj = std::exp(logits(i, j) - lse);
        g_x->row(i).noalias() += scale * (wj - 1.0) / tau * x.row(j);
        g_x->row(j).noalias() += scale * (wj - 1.0) / tau * x.row(i);
        for (int k = 0; k < rows; ++k) {
          if (k == u || k == b + u) continue;
          const double wk = std::exp(logits(i, k) - lse);
          g_x->row(i).noalias() += scale * wk / tau * x.row(k);
          g_x->row(k).noalias() += scale * wk / tau * x.row(i);
        }
      }
    }
  }
  return total / b;
}

Matrix stack_pair(const Matrix& a, const Matrix& b, const Matrix* extra) {
  const int e = extra ? static_cast<int>(extra->rows()) : 0;
  Matrix x(a.rows() + b.rows() + e, a.cols());
  x.topRows(a.rows()) = a;
  x.middleRows(a.rows(), b.rows()) = b;
  if (e > 0) x.bottomRows(e) = *extra;
  return x;
}

void check_pair_shapes(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(std::string(what) + ": view stacks disagree in shape");
  }
  if (a.rows() == 0) throw Error(std::string(what) + ": empty batch");
}

}  // namespace

double cl_loss(const Matrix& view_a, const Matrix& view_b, Matrix* g_a, Matrix* g_b) {
  check_pair_shapes(view_a, view_b, "pair contrast");
  const int b = static_cast<int>(view_a.rows());
  Matrix gx;
  const double loss =
      paired_contrast(stack_pair(view_a, view_b, nullptr), b, 1.0, 0.5,
                      (g_a || g_b) ? &gx : nullptr, nullptr);
  if (g_a) *g_a = gx.topRows(b);
  if (g_b) *g_b = gx.bottomRows(b);
  return loss;
}

double cl_loss_user(const Matrix& view_a, const Matrix& view_b, int u) {
  check_pair_shapes(view_a, view_b, "pair contrast");
  std::vector<double> per_user;
  paired_contrast(stack_pair(view_a, view_b, nullptr), static_cast<int>(view_a.rows()), 1.0, 0.5,
                  nullptr, &per_user);
  return per_user.at(u);
}

double cl_plus_loss(const Matrix& view_a, const Matrix& view_b, const Matrix* extra_positives,
                    Matrix* g_a, Matrix* g_b, Matrix* g_extra) {
  check_pair_shapes(view_a, view_b, "guided pair contrast");
  const int b = static_cast<int>(view_a.rows());
  const int e = extra_positives ? static_cast<int>(extra_positives->rows()) : 0;
  Matrix gx;
  const bool want = g_a || g_b || g_extra;
  const double loss = paired_contrast(stack_pair(view_a, view_b, extra_positives), b, 1.0, 0.5,
                                      want ? &gx : nullptr, nullptr);
  if (g_a) *g_a = gx.topRows(b);
  if (g_b) *g_b = gx.middleRows(b, b);
  if (g_extra) {
    if (e > 0) {
      *g_extra = gx.bottomRows(e);
    } else {
      g_extra->resize(0, view_a.cols());
    }
  }
  return loss;
}

double sl_loss(const Matrix& anchors, const Matrix& retrieved, double tau, Matrix* g_anchors,
               Matrix* g_retrieved) {
  check_pair_shapes(anchors, retrieved, "retrieval contrast");
  const int b = static_cast<int>(anchors.rows());
  Matrix gx;
  const double loss = paired_contrast(stack_pair(anchors, retrieved, nullptr), b, tau, 1.0,
                                      (g_anchors || g_retrieved) ? &gx : nullptr, nullptr);
  if (g_anchors) *g_anchors = gx.topRows(b);
  if (g_retrieved) *g_retrieved = gx.bottomRows(b);
  return loss;
}

double sl_loss_user(const Matrix& anchors, const Matrix& retrieved, int u, double tau) {
  check_pair_shapes(anchors, retrieved, "retrieval contrast");
  std::vector<double> per_user;
  paired_contrast(stack_pair(anchors, retrieved, nullptr), static_cast<int>(anchors.rows()), tau,
                  1.0, nullptr, &per_user);
  return per_user.at(u);
}

double sl_plus_loss(const Matrix& anchors, const Matrix& retrieved, double tau, Matrix* g_anchors,
                    Matrix* g_retrieved) {
  return sl_loss(anchors, retrieved, tau, g_anchors, g_retrieved);
}

double cl_minus_loss(const Matrix& negatives, const Matrix& positives, Matrix* g_neg,
                     Matrix* g_pos) {
  const int b = static_cast<int>(negatives.rows());
  const int p = static_cast<int>(positives.rows());
  if (b < 2) throw Error("negative-view contrast needs at least two users in the batch");
  if (p == 0) throw Error("negative-view contrast needs positive views for its denominator");
  if (positives.cols() != negatives.cols()) {
    throw Error("negative-view contrast: dimension mismatch between view stacks");
  }

  const Matrix lp = negatives * positives.transpose();  // b x p
  const Matrix ln = negatives * negatives.transpose();  // b x b
  if (g_neg) g_neg->setZero(b, negatives.cols());
  if (g_pos) g_pos->setZero(p, negatives.cols());

  const double scale = 1.0 / (static_cast<double>(b) * (b - 1));
  double total = 0.0;
  for (int u = 0; u < b; ++u) {
    // One stability shift per user covers every u' term.
    double m = lp.row(u).maxCoeff();
    for (int v = 0; v < b; ++v) {
      if (v != u) m = std::max(m, ln(u, v));
    }
    const Eigen::ArrayXd ep = (lp.row(u).transpose().array() - m).exp();
    const double sp = ep.sum();
    double inv_sum = 0.0;  // sum over u' of 1/Z(u,u'), for the shared positive grads
    for (int v = 0; v < b; ++v) {
      if (v == u) continue;
      const double en = std::exp(ln(u, v) - m);
      const double z = sp + en;
      total += scale * (m + std::log(z) - ln(u, v));
      if (g_neg || g_pos) {
        const double wn = en / z;
        inv_sum += 1.0 / z;
        if (g_neg) {
          g_neg->row(u).noalias() += scale * (wn - 1.0) * negatives.row(v);
          g_neg->row(v).noalias() += scale * (wn - 1.0) * negatives.row(u);
        }
      }
    }
    if (g_neg) g_neg->row(u).noalias() += scale * inv_sum * (ep.matrix().transpose() * positives);
    if (g_pos) g_pos->noalias() += scale * inv_sum * (ep.matrix() * negatives.row(u));
  }
  // scale already folds the user mean into every term.
  return total;
}

double cl_minus_loss_user(const Matrix& negatives, const Matrix& positives, int u) {
  const int b = static_cast<int>(negatives.rows());
  if (b < 2) throw Error("negative-view contrast needs at least two users in the batch");
  if (u < 0 || u >= b) throw Error("user index out of range");
  double sum = 0.0;
  for (int v = 0; v < b; ++v) {
    if (v == u) continue;
    const double num = negatives.row(u).dot(negatives.row(v));
    double m = num;
    for (int s = 0; s < positives.rows(); ++s) {
      m = std::max(m, negatives.row(u).dot(positives.row(s)));
    }
    double z = std::exp(num - m);
    for (int s = 0; s < positives.rows(); ++s) {
      z += std::exp(negatives.row(u).dot(positives.row(s)) - m);
    }
    sum += m + std::log(z) - num;
  }
  return sum / (b - 1);
}

ViewNeeds views_needed(Mode mode, const LossConfig& cfg) {
  ViewNeeds n;
  switch (mode) {
    case Mode::warmup:
      n.pair = cfg.lambda_cl > 0;
      n.retrieved = cfg.lambda_cl > 0;
      break;
    case Mode::cl4srec: n.pair = cfg.lambda_cl > 0; break;
    case Mode::duorec: n.retrieved = cfg.lambda_cl > 0; break;
    case Mode::ssl:
      n.pair = cfg.lambda_cl_plus > 0 || cfg.lambda_cl_minus > 0;
      n.negatives = cfg.lambda_cl_minus > 0;
      break;
    case Mode::sl: n.retrieved = cfg.lambda_sl_plus > 0; break;
    case Mode::full:
      n.pair = cfg.lambda_cl_plus > 0 || cfg.lambda_cl_minus > 0;
      n.negatives = cfg.lambda_cl_minus > 0;
      n.retrieved = cfg.lambda_sl_plus > 0;
      break;
  }
  return n;
}

Breakdown composite(Mode mode, const LossConfig& cfg, const ViewBatch& views,
                    const Matrix& items, Gradients* grads) {
  cfg.validate();
  const int b = static_cast<int>(views.anchors.rows());
  if (b == 0) throw Error("composite loss needs encoded anchors");

  const ViewNeeds needs = views_needed(mode, cfg);
  auto require = [&](const Matrix& m, bool needed, const char* what) {
    if (needed && m.rows() != b) {
      throw Error(std::string("mode ") + to_string(mode) + " needs " + what + " for every row (" +
                  std::to_string(m.rows()) + " of " + std::to_string(b) + " present)");
    }
  };
  require(views.view_a, needs.pair, "a positive view pair");
  require(views.view_b, needs.pair, "a positive view pair");
  require(views.retrieved, needs.retrieved, "retrieved views");
  require(views.negatives, needs.negatives, "negative views");

  if (grads) {
    grads->anchors.setZero(b, views.anchors.cols());
    grads->view_a.setZero(views.view_a.rows(), views.view_a.cols());
    grads->view_b.setZero(views.view_b.rows(), views.view_b.cols());
    grads->retrieved.setZero(views.retrieved.rows(), views.retrieved.cols());
    grads->negatives.setZero(views.negatives.rows(), views.negatives.cols());
    grads->items.setZero(items.rows(), items.cols());
  }

  Breakdown out;
  Matrix ga, gb, gc;

  out.rec = rec_loss_batch(views.anchors, items, views.targets, grads ? &ga : nullptr,
                           grads ? &gb : nullptr);
  out.total = out.rec;
  if (grads) {
    grads->anchors += ga;
    grads->items += gb;
  }

  auto add_pair = [&](double weight, double& slot) {
    if (weight <= 0) return;
    slot = cl_loss(views.view_a, views.view_b, grads ? &ga : nullptr, grads ? &gb : nullptr);
    out.total += weight * slot;
    if (grads) {
      grads->view_a += weight * ga;
      grads->view_b += weight * gb;
    }
  };
  auto add_retrieval = [&](double weight, double& slot) {
    if (weight <= 0) return;
    slot = sl_loss(views.anchors, views.retrieved, cfg.tau, grads ? &ga : nullptr,
                   grads ? &gb : nullptr);
    out.total += weight * slot;
    if (grads) {
      grads->anchors += weight * ga;
      grads->retrieved += weight * gb;
    }
  };
  auto add_guided_pair = [&](double weight) {
    if (weight <= 0) return;
    const Matrix* extra = views.retrieved.rows() == b ? &views.retrieved : nullptr;
    out.cl_plus = cl_plus_loss(views.view_a, views.view_b, extra, grads ? &ga : nullptr,
                               grads ? &gb : nullptr, grads ? &gc : nullptr);
    out.total += weight * out.cl_plus;
    if (grads) {
      grads->view_a += weight * ga;
      grads->view_b += weight * gb;
      if (extra) grads->retrieved += weight * gc;
    }
  };
  auto add_guided_negative = [&](double weight) {
    if (weight <= 0) return;
    const bool with_retrieved = views.retrieved.rows() == b;
    const Matrix positives =
        stack_pair(views.view_a, views.view_b, with_retrieved ? &views.retrieved : nullptr);
    out.cl_minus = cl_minus_loss(views.negatives, positives, grads ? &ga : nullptr,
                                 grads ? &gb : nullptr);
    out.total += weight * out.cl_minus;
    if (grads) {
      grads->negatives += weight * ga;
      grads->view_a += weight * gb.topRows(b);
      grads->view_b += weight * gb.middleRows(b, b);
      if (with_retrieved) grads->retrieved += weight * gb.bottomRows(b);
    }
  };

  switch (mode) {
    case Mode::warmup:
      add_pair(cfg.lambda_cl, out.cl);
      add_retrieval(cfg.lambda_cl, out.sl);
      break;
    case Mode::cl4srec: add_pair(cfg.lambda_cl, out.cl); break;
    case Mode::duorec: add_retrieval(cfg.lambda_cl, out.sl); break;
    case Mode::ssl:
      add_guided_pair(cfg.lambda_cl_plus);
      add_guided_negative(cfg.lambda_cl_minus);
      break;
    case Mode::sl: add_retrieval(cfg.lambda_sl_plus, out.sl_plus); break;
    case Mode::full:
      add_guided_pair(cfg.lambda_cl_plus);
      add_guided_negative(cfg.lambda_cl_minus);
      add_retrieval(cfg.lambda_sl_plus, out.sl_plus);
      break;
  }
  return out;
}

}  // namespace ec4srec::objective
