#include "ec4srec/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ec4srec/checkpoint.hpp"

namespace ec4srec::encoder {

namespace {
constexpr double kBlocked = -1e30;  // additive mask for disallowed attention

ad::Matrix init_normal(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                       double stddev = 0.02) {
  std::normal_distribution<double> dist(0.0, stddev);
  ad::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  return m;
}

ad::Var param(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  return ad::make_leaf(init_normal(rng, rows, cols), true);
}

ad::Var zeros_param(Eigen::Index rows, Eigen::Index cols) {
  return ad::make_leaf(ad::Matrix::Zero(rows, cols), true);
}

ad::Var ones_param(Eigen::Index rows, Eigen::Index cols) {
  return ad::make_leaf(ad::Matrix::Ones(rows, cols), true);
}

std::vector<int> last_position_rows(int rows, int width) {
  std::vector<int> idx(static_cast<size_t>(rows));
  for (int r = 0; r < rows; ++r) idx[static_cast<size_t>(r)] = r * width + width - 1;
  return idx;
}
}  // namespace

Kind kind_from_string(const std::string& name) {
  if (name == "self-attention") return Kind::self_attention;
  if (name == "recurrent") return Kind::recurrent;
  if (name == "convolutional") return Kind::convolutional;
  throw ConfigError("unknown encoder kind: " + name +
                    " (expected self-attention|recurrent|convolutional)");
}

std::string to_string(Kind k) {
  switch (k) {
    case Kind::self_attention: return "self-attention";
    case Kind::recurrent: return "recurrent";
    case Kind::convolutional: return "convolutional";
  }
  return "?";
}

void EncoderSpec::validate() const {
  if (dim < 1) throw ConfigError("encoder dim must be >= 1");
  if (layers < 1) throw ConfigError("encoder layers must be >= 1");
  if (max_len < 1) throw ConfigError("encoder max_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (kind == Kind::self_attention) {
    if (heads < 1) throw ConfigError("attention heads must be >= 1");
    if (dim % heads != 0) throw ConfigError("attention heads must divide dim");
    if (ffn_hidden < 0) throw ConfigError("ffn_hidden cannot be negative");
  }
  if (kind == Kind::convolutional) {
    if (conv_filters < 1) throw ConfigError("conv_filters must be >= 1");
    if (conv_heights.empty()) throw ConfigError("conv_heights cannot be empty");
    for (int h : conv_heights)
      if (h < 1 || h > max_len) throw ConfigError("conv window heights must lie in [1, max_len]");
  }
}

Model::Model(EncoderSpec spec, int vocab_size, uint64_t init_seed)
    : spec_(std::move(spec)), vocab_size_(vocab_size) {
  spec_.validate();
  if (vocab_size_ < kFirstItemId + 1)
    throw ConfigError("vocabulary must contain at least one real item");
  if (spec_.ffn_hidden == 0) spec_.ffn_hidden = spec_.dim;

  auto rng = make_rng(init_seed, {0xec});
  const int d = spec_.dim;
  item_embeddings_ = param(rng, vocab_size_, d);
  item_embeddings_->value.row(kPaddingId).setZero();

  switch (spec_.kind) {
    case Kind::self_attention: {
      position_embeddings_ = param(rng, spec_.max_len, d);
      emb_ln_gain_ = ones_param(1, d);
      emb_ln_bias_ = zeros_param(1, d);
      for (int l = 0; l < spec_.layers; ++l) {
        AttnLayer layer;
        layer.wq = param(rng, d, d);
        layer.bq = zeros_param(1, d);
        layer.wk = param(rng, d, d);
        layer.bk = zeros_param(1, d);
        layer.wv = param(rng, d, d);
        layer.bv = zeros_param(1, d);
        layer.wo = param(rng, d, d);
        layer.bo = zeros_param(1, d);
        layer.ln1_gain = ones_param(1, d);
        layer.ln1_bias = zeros_param(1, d);
        layer.w1 = param(rng, d, spec_.ffn_hidden);
        layer.b1 = zeros_param(1, spec_.ffn_hidden);
        layer.w2 = param(rng, spec_.ffn_hidden, d);
        layer.b2 = zeros_param(1, d);
        layer.ln2_gain = ones_param(1, d);
        layer.ln2_bias = zeros_param(1, d);
        attn_layers_.push_back(std::move(layer));
      }
      break;
    }
    case Kind::recurrent: {
      for (int l = 0; l < spec_.layers; ++l) {
        GruLayer layer;
        layer.wxr = param(rng, d, d);
        layer.wxz = param(rng, d, d);
        layer.wxn = param(rng, d, d);
        layer.whr = param(rng, d, d);
        layer.whz = param(rng, d, d);
        layer.whn = param(rng, d, d);
        layer.bxr = zeros_param(1, d);
        layer.bxz = zeros_param(1, d);
        layer.bxn = zeros_param(1, d);
        layer.bhr = zeros_param(1, d);
        layer.bhz = zeros_param(1, d);
        layer.bhn = zeros_param(1, d);
        gru_layers_.push_back(std::move(layer));
      }
      break;
    }
    case Kind::convolutional: {
      for (int h : spec_.conv_heights) {
        ConvFilter f;
        f.height = h;
        f.w = param(rng, static_cast<Eigen::Index>(h) * d, spec_.conv_filters);
        f.b = zeros_param(1, spec_.conv_filters);
        conv_filters_.push_back(std::move(f));
      }
      conv_fc_w_ = param(rng, static_cast<Eigen::Index>(spec_.conv_heights.size()) * spec_.conv_filters, d);
      conv_fc_b_ = zeros_param(1, d);
      break;
    }
  }
}

std::vector<std::pair<std::string, ad::Var>> Model::parameters() const {
  std::vector<std::pair<std::string, ad::Var>> out;
  out.emplace_back("item_embeddings", item_embeddings_);
  auto add = [&out](const std::string& name, const ad::Var& v) { out.emplace_back(name, v); };
  switch (spec_.kind) {
    case Kind::self_attention: {
      add("position_embeddings", position_embeddings_);
      add("emb_ln.gain", emb_ln_gain_);
      add("emb_ln.bias", emb_ln_bias_);
      for (size_t l = 0; l < attn_layers_.size(); ++l) {
        const auto& lay = attn_layers_[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "wq", lay.wq);
        add(p + "bq", lay.bq);
        add(p + "wk", lay.wk);
        add(p + "bk", lay.bk);
        add(p + "wv", lay.wv);
        add(p + "bv", lay.bv);
        add(p + "wo", lay.wo);
        add(p + "bo", lay.bo);
        add(p + "ln1.gain", lay.ln1_gain);
        add(p + "ln1.bias", lay.ln1_bias);
        add(p + "ffn.w1", lay.w1);
        add(p + "ffn.b1", lay.b1);
        add(p + "ffn.w2", lay.w2);
        add(p + "ffn.b2", lay.b2);
        add(p + "ln2.gain", lay.ln2_gain);
        add(p + "ln2.bias", lay.ln2_bias);
      }
      break;
    }
    case Kind::recurrent: {
      for (size_t l = 0; l < gru_layers_.size(); ++l) {
        const auto& lay = gru_layers_[l];
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "wxr", lay.wxr);
        add(p + "wxz", lay.wxz);
        add(p + "wxn", lay.wxn);
        add(p + "whr", lay.whr);
        add(p + "whz", lay.whz);
        add(p + "whn", lay.whn);
        add(p + "bxr", lay.bxr);
        add(p + "bxz", lay.bxz);
        add(p + "bxn", lay.bxn);
        add(p + "bhr", lay.bhr);
        add(p + "bhz", lay.bhz);
        add(p + "bhn", lay.bhn);
      }
      break;
    }
    case Kind::convolutional: {
      for (const auto& f : conv_filters_) {
        const std::string p = "conv_h" + std::to_string(f.height) + ".";
        add(p + "w", f.w);
        add(p + "b", f.b);
      }
      add("conv_fc.w", conv_fc_w_);
      add("conv_fc.b", conv_fc_b_);
      break;
    }
  }
  return out;
}

void Model::clear_gradients() const {
  for (auto& [name, v] : parameters()) v->grad.resize(0, 0);
}

ad::Var Model::forward(ad::Tape& tape, ad::Var emb, const data::Batch& batch, bool train,
                       std::mt19937_64* rng, Eigen::MatrixXd* attn_capture) const {
  if (train && rng == nullptr) throw Error("training forward pass needs a dropout rng");
  switch (spec_.kind) {
    case Kind::self_attention:
      return forward_attention(tape, emb, batch, train, rng, attn_capture);
    case Kind::recurrent:
      if (attn_capture) throw UnsupportedError("recurrent encoder has no attention weights");
      return forward_recurrent(tape, emb, batch, train, rng);
    case Kind::convolutional:
      if (attn_capture) throw UnsupportedError("convolutional encoder has no attention weights");
      return forward_convolutional(tape, emb, batch, train, rng);
  }
  throw Error("unreachable");
}

ad::Var Model::forward_attention(ad::Tape& tape, ad::Var emb, const data::Batch& batch,
                                 bool train, std::mt19937_64* rng,
                                 Eigen::MatrixXd* attn_capture) const {
  const int rows = batch.rows, width = batch.width;
  const int d = spec_.dim, heads = spec_.heads, dh = d / heads;
  const double drop = spec_.dropout;

  // Positions count back from the sequence end, so the same suffix gets the
  // same position ids no matter how much left-padding a batch added.
  std::vector<int> pos_ids(static_cast<size_t>(rows) * width);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < width; ++c) pos_ids[static_cast<size_t>(r) * width + c] = width - 1 - c;
  ad::Var x = tape.add(emb, tape.embedding(position_embeddings_, pos_ids));
  x = tape.layer_norm(x, emb_ln_gain_, emb_ln_bias_);
  if (train) x = tape.dropout(x, drop, *rng);

  // Additive mask: query (r,t) may look at earlier non-padding keys plus
  // itself (so even an all-padding query row has a well-defined softmax).
  ad::Matrix mask(static_cast<Eigen::Index>(rows) * width, width);
  mask.setConstant(kBlocked);
  for (int r = 0; r < rows; ++r)
    for (int t = 0; t < width; ++t) {
      auto row = mask.row(static_cast<Eigen::Index>(r) * width + t);
      for (int j = 0; j <= t; ++j)
        if (batch.at(r, j) != kPaddingId) row(j) = 0.0;
      row(t) = 0.0;
    }

  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (size_t l = 0; l < attn_layers_.size(); ++l) {
    const auto& lay = attn_layers_[l];
    ad::Var q = tape.add_row_broadcast(tape.matmul(x, lay.wq), lay.bq);
    ad::Var k = tape.add_row_broadcast(tape.matmul(x, lay.wk), lay.bk);
    ad::Var v = tape.add_row_broadcast(tape.matmul(x, lay.wv), lay.bv);

    std::vector<ad::Var> head_outputs;
    Eigen::MatrixXd capture;
    if (attn_capture && l + 1 == attn_layers_.size())
      capture = Eigen::MatrixXd::Zero(rows, width);
    for (int h = 0; h < heads; ++h) {
      ad::Var qh = tape.slice_cols(q, h * dh, dh);
      ad::Var kh = tape.slice_cols(k, h * dh, dh);
      ad::Var vh = tape.slice_cols(v, h * dh, dh);
      ad::Var scores = tape.scale(tape.batched_scores(qh, kh, rows, width), scale);
      ad::Var probs = tape.softmax_rows(scores, mask);
      if (attn_capture && l + 1 == attn_layers_.size())
        for (int r = 0; r < rows; ++r)
          capture.row(r) += probs->value.row(static_cast<Eigen::Index>(r) * width + width - 1);
      if (train) probs = tape.dropout(probs, drop, *rng);
      head_outputs.push_back(tape.batched_weighted_sum(probs, vh, rows, width));
    }
    if (attn_capture && l + 1 == attn_layers_.size()) *attn_capture = capture / heads;

    ad::Var attn_out = heads == 1 ? head_outputs[0] : tape.concat_cols(head_outputs);
    attn_out = tape.add_row_broadcast(tape.matmul(attn_out, lay.wo), lay.bo);
    if (train) attn_out = tape.dropout(attn_out, drop, *rng);
    x = tape.layer_norm(tape.add(x, attn_out), lay.ln1_gain, lay.ln1_bias);

    ad::Var f = tape.relu(tape.add_row_broadcast(tape.matmul(x, lay.w1), lay.b1));
    f = tape.add_row_broadcast(tape.matmul(f, lay.w2), lay.b2);
    if (train) f = tape.dropout(f, drop, *rng);
    x = tape.layer_norm(tape.add(x, f), lay.ln2_gain, lay.ln2_bias);
  }
  return tape.gather_rows(x, last_position_rows(rows, width));
}

ad::Var Model::forward_recurrent(ad::Tape& tape, ad::Var emb, const data::Batch& batch,
                                 bool train, std::mt19937_64* rng) const {
  const int rows = batch.rows, width = batch.width, d = spec_.dim;
  const double drop = spec_.dropout;

  ad::Var x = emb;
  if (train) x = tape.dropout(x, drop, *rng);

  // Per-timestep inputs for the first layer.
  std::vector<ad::Var> inputs;
  inputs.reserve(static_cast<size_t>(width));
  for (int t = 0; t < width; ++t) {
    std::vector<int> idx(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) idx[static_cast<size_t>(r)] = r * width + t;
    inputs.push_back(tape.gather_rows(x, idx));
  }

  // Padding columns hold the previous state; with left-padding this just
  // delays the start of the recurrence.
  std::vector<Eigen::VectorXd> real(static_cast<size_t>(width));
  for (int t = 0; t < width; ++t) {
    Eigen::VectorXd m(rows);
    for (int r = 0; r < rows; ++r) m(r) = batch.at(r, t) != kPaddingId ? 1.0 : 0.0;
    real[static_cast<size_t>(t)] = std::move(m);
  }

  ad::Var h;
  for (size_t l = 0; l < gru_layers_.size(); ++l) {
    const auto& lay = gru_layers_[l];
    h = tape.constant(ad::Matrix::Zero(rows, d));
    std::vector<ad::Var> outputs;
    outputs.reserve(static_cast<size_t>(width));
    for (int t = 0; t < width; ++t) {
      ad::Var xt = inputs[static_cast<size_t>(t)];
      if (l > 0 && train) xt = tape.dropout(xt, drop, *rng);
      ad::Var r_gate = tape.sigmoid(
          tape.add(tape.add_row_broadcast(tape.matmul(xt, lay.wxr), lay.bxr),
                   tape.add_row_broadcast(tape.matmul(h, lay.whr), lay.bhr)));
      ad::Var z_gate = tape.sigmoid(
          tape.add(tape.add_row_broadcast(tape.matmul(xt, lay.wxz), lay.bxz),
                   tape.add_row_broadcast(tape.matmul(h, lay.whz), lay.bhz)));
      ad::Var n_gate = tape.tanh_act(
          tape.add(tape.add_row_broadcast(tape.matmul(xt, lay.wxn), lay.bxn),
                   tape.hadamard(r_gate, tape.add_row_broadcast(tape.matmul(h, lay.whn), lay.bhn))));
      // h' = (1 - z) . n + z . h
      ad::Var h_new = tape.add(tape.sub(n_gate, tape.hadamard(z_gate, n_gate)),
                               tape.hadamard(z_gate, h));
      const auto& m = real[static_cast<size_t>(t)];
      h = tape.add(tape.scale_rows(h_new, m),
                   tape.scale_rows(h, (1.0 - m.array()).matrix()));
      outputs.push_back(h);
    }
    inputs = std::move(outputs);
  }
  if (train) h = tape.dropout(h, drop, *rng);
  return h;
}

ad::Var Model::forward_convolutional(ad::Tape& tape, ad::Var emb, const data::Batch& batch,
                                     bool train, std::mt19937_64* rng) const {
  const int rows = batch.rows, width = batch.width;
  const double drop = spec_.dropout;

  ad::Var x = emb;
  if (train) x = tape.dropout(x, drop, *rng);

  std::vector<ad::Var> pooled_parts;
  for (const auto& filt : conv_filters_) {
    const int hgt = filt.height;
    const int offsets = width - hgt + 1;
    ad::Var pooled = tape.constant(ad::Matrix::Zero(rows, spec_.conv_filters));
    if (offsets > 0) {
      // A window is valid when it contains no padding; mean over valid ones.
      std::vector<double> valid_count(static_cast<size_t>(rows), 0.0);
      std::vector<std::vector<bool>> valid(static_cast<size_t>(rows));
      for (int r = 0; r < rows; ++r) {
        valid[static_cast<size_t>(r)].resize(static_cast<size_t>(offsets));
        for (int t = 0; t < offsets; ++t) {
          bool ok = true;
          for (int j = t; j < t + hgt; ++j)
            if (batch.at(r, j) == kPaddingId) ok = false;
          valid[static_cast<size_t>(r)][static_cast<size_t>(t)] = ok;
          if (ok) valid_count[static_cast<size_t>(r)] += 1.0;
        }
      }
      for (int t = 0; t < offsets; ++t) {
        std::vector<ad::Var> cols;
        cols.reserve(static_cast<size_t>(hgt));
        for (int j = t; j < t + hgt; ++j) {
          std::vector<int> idx(static_cast<size_t>(rows));
          for (int r = 0; r < rows; ++r) idx[static_cast<size_t>(r)] = r * width + j;
          cols.push_back(tape.gather_rows(x, idx));
        }
        ad::Var win = hgt == 1 ? cols[0] : tape.concat_cols(cols);
        ad::Var act = tape.relu(tape.add_row_broadcast(tape.matmul(win, filt.w), filt.b));
        Eigen::VectorXd f(rows);
        for (int r = 0; r < rows; ++r)
          f(r) = valid[static_cast<size_t>(r)][static_cast<size_t>(t)]
                     ? 1.0 / valid_count[static_cast<size_t>(r)]
                     : 0.0;
        pooled = tape.add(pooled, tape.scale_rows(act, f));
      }
    }
    pooled_parts.push_back(pooled);
  }
  ad::Var z = pooled_parts.size() == 1 ? pooled_parts[0] : tape.concat_cols(pooled_parts);
  if (train) z = tape.dropout(z, drop, *rng);
  return tape.add_row_broadcast(tape.matmul(z, conv_fc_w_), conv_fc_b_);
}

Encoded Model::encode(ad::Tape& tape, const data::Batch& batch, bool train,
                      std::mt19937_64* rng) const {
  Encoded out;
  out.input_embeddings = tape.embedding(item_embeddings_, batch.ids);
  out.representation = forward(tape, out.input_embeddings, batch, train, rng, nullptr);
  bool any_empty = false;
  for (int len : batch.lengths) any_empty |= (len == 0);
  if (any_empty) {
    // An all-padding row has nothing to represent; pin it to zero.
    log_warn("batch contains an all-padding row; its representation is zero");
    Eigen::VectorXd keep(batch.rows);
    for (int r = 0; r < batch.rows; ++r) keep(r) = batch.lengths[r] > 0 ? 1.0 : 0.0;
    out.representation = tape.scale_rows(out.representation, keep);
  }
  return out;
}

ad::Var Model::encode_from_embeddings(ad::Tape& tape, ad::Var input,
                                      const data::Batch& batch) const {
  return forward(tape, input, batch, false, nullptr, nullptr);
}

Eigen::MatrixXd Model::encode_eval(const data::Batch& batch) const {
  ad::Tape tape;
  return encode(tape, batch, false, nullptr).representation->value;
}

Eigen::MatrixXd Model::attention_weights(const data::Batch& batch) const {
  if (spec_.kind != Kind::self_attention)
    throw UnsupportedError("attention weights require the self-attention encoder");
  ad::Tape tape;
  ad::Var emb = tape.embedding(item_embeddings_, batch.ids);
  Eigen::MatrixXd capture;
  forward(tape, emb, batch, false, nullptr, &capture);
  return capture;
}

double Model::target_score(const std::vector<int>& seq, int target) const {
  return target_scores({seq}, {target})[0];
}

std::vector<double> Model::target_scores(const std::vector<std::vector<int>>& seqs,
                                         const std::vector<int>& targets) const {
  if (seqs.size() != targets.size()) throw Error("sequence/target count mismatch");
  std::vector<double> out(seqs.size());
  constexpr size_t kChunk = 512;
  for (size_t at = 0; at < seqs.size(); at += kChunk) {
    const size_t end = std::min(seqs.size(), at + kChunk);
    std::vector<std::vector<int>> chunk(seqs.begin() + at, seqs.begin() + end);
    std::vector<int> users(chunk.size(), -1);
    std::vector<int> tgt(targets.begin() + at, targets.begin() + end);
    data::Batch b = data::make_batch(chunk, users, tgt, spec_.max_len);
    Eigen::MatrixXd h = encode_eval(b);
    for (size_t i = 0; i < chunk.size(); ++i)
      out[at + i] = h.row(static_cast<Eigen::Index>(i))
                        .dot(item_embeddings_->value.row(tgt[i]));
  }
  return out;
}

Eigen::MatrixXd Model::embed(const std::vector<int>& seq) const {
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(seq.size()), spec_.dim);
  for (size_t i = 0; i < seq.size(); ++i) {
    if (seq[i] < 0 || seq[i] >= vocab_size_) throw Error("item id out of range in embed()");
    rows.row(static_cast<Eigen::Index>(i)) = item_embeddings_->value.row(seq[i]);
  }
  return rows;
}

Eigen::RowVectorXd Model::mask_embedding() const {
  return item_embeddings_->value.row(kMaskId);
}

double Model::score_from_embeddings(const Eigen::MatrixXd& rows, int target,
                                    Eigen::MatrixXd* grad) const {
  const int len = static_cast<int>(rows.rows());
  if (len < 1) throw Error("cannot score an empty embedding matrix");
  if (len > spec_.max_len)
    throw Error("embedding matrix longer than max_len; slice to the window first");

  ad::Tape tape;
  ad::Var input = ad::make_leaf(rows, grad != nullptr);
  data::Batch geometry;
  geometry.rows = 1;
  geometry.width = len;
  geometry.lengths = {len};
  geometry.ids.assign(static_cast<size_t>(len), kMaskId);  // only padding-ness matters here
  ad::Var h = forward(tape, input, geometry, false, nullptr, nullptr);
  ad::Var score = tape.dot_embedding_rows(h, item_embeddings_, {target});
  const double value = score->value(0, 0);
  if (grad) {
    score->accumulate(ad::Matrix::Ones(1, 1));
    tape.backward();
    *grad = input->has_grad() ? input->grad : ad::Matrix::Zero(rows.rows(), rows.cols());
    // The shared table picked up a gradient via the scoring dot; drop it so
    // attribution passes cannot leak into the next optimizer step.
    item_embeddings_->grad.resize(0, 0);
  }
  return value;
}

std::vector<double> Model::attention(const std::vector<int>& seq) const {
  if (seq.empty()) throw Error("cannot explain an empty sequence");
  data::Batch b = data::make_batch({seq}, {-1}, {}, spec_.max_len);
  Eigen::MatrixXd w = attention_weights(b);
  std::vector<double> out(seq.size(), 0.0);
  // Batch truncation keeps the most recent max_len items; align weights to
  // the tail of the original sequence.
  const int kept = b.width < static_cast<int>(seq.size()) ? b.width : static_cast<int>(seq.size());
  const int offset = static_cast<int>(seq.size()) - kept;
  for (int c = 0; c < kept; ++c) out[static_cast<size_t>(offset + c)] = w(0, b.width - kept + c);
  return out;
}

void Model::save(const std::string& path, int epoch) const {
  ckpt::Container c;
  c.meta["kind"] = "model";
  c.meta["epoch"] = epoch;
  c.meta["vocab_size"] = vocab_size_;
  nlohmann::json enc;
  enc["kind"] = to_string(spec_.kind);
  enc["dim"] = spec_.dim;
  enc["layers"] = spec_.layers;
  enc["heads"] = spec_.heads;
  enc["max_len"] = spec_.max_len;
  enc["dropout"] = spec_.dropout;
  enc["ffn_hidden"] = spec_.ffn_hidden;
  enc["conv_filters"] = spec_.conv_filters;
  enc["conv_heights"] = spec_.conv_heights;
  c.meta["encoder"] = std::move(enc);
  for (const auto& [name, v] : parameters()) c.arrays.emplace_back(name, v->value);
  ckpt::save(c, path);
}

static EncoderSpec spec_from_meta(const nlohmann::json& enc) {
  EncoderSpec spec;
  spec.kind = kind_from_string(enc.at("kind").get<std::string>());
  spec.dim = enc.at("dim").get<int>();
  spec.layers = enc.at("layers").get<int>();
  spec.heads = enc.at("heads").get<int>();
  spec.max_len = enc.at("max_len").get<int>();
  spec.dropout = enc.at("dropout").get<double>();
  spec.ffn_hidden = enc.at("ffn_hidden").get<int>();
  spec.conv_filters = enc.at("conv_filters").get<int>();
  spec.conv_heights = enc.at("conv_heights").get<std::vector<int>>();
  return spec;
}

Model Model::load(const std::string& path, int* epoch) {
  ckpt::Container c = ckpt::load(path);
  if (c.meta.value("kind", "") != "model")
    throw ParseError("checkpoint does not hold a bare model: " + path);
  Model m(spec_from_meta(c.meta.at("encoder")), c.meta.at("vocab_size").get<int>(), 0);
  for (auto& [name, v] : m.parameters()) {
    const Eigen::MatrixXd& stored = c.array(name);
    if (stored.rows() != v->value.rows() || stored.cols() != v->value.cols())
      throw ParseError("checkpoint array " + name + " has unexpected shape");
    v->value = stored;
  }
  if (epoch) *epoch = c.meta.at("epoch").get<int>();
  return m;
}

Eigen::MatrixXd score_items(const Eigen::MatrixXd& representations,
                            const Eigen::MatrixXd& item_table) {
  Eigen::MatrixXd scores = representations * item_table.transpose();
  scores.col(kPaddingId).setConstant(-std::numeric_limits<double>::infinity());
  scores.col(kMaskId).setConstant(-std::numeric_limits<double>::infinity());
  return scores;
}

std::vector<std::vector<int>> predict_next(const Eigen::MatrixXd& scores, int k) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  std::vector<std::vector<int>> out(static_cast<size_t>(scores.rows()));
  const int n = static_cast<int>(scores.cols());
  const int kk = std::min(k, n - kFirstItemId);
  for (Eigen::Index r = 0; r < scores.rows(); ++r) {
    std::vector<int> ids(static_cast<size_t>(n - kFirstItemId));
    std::iota(ids.begin(), ids.end(), kFirstItemId);
    std::partial_sort(ids.begin(), ids.begin() + kk, ids.end(), [&](int a, int b) {
      const double sa = scores(r, a), sb = scores(r, b);
      return sa > sb || (sa == sb && a < b);
    });
    out[static_cast<size_t>(r)].assign(ids.begin(), ids.begin() + kk);
  }
  return out;
}

}  // namespace ec4srec::encoder
