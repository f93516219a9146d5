#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ec4srec/autodiff.hpp"
#include "ec4srec/data.hpp"
#include "ec4srec/explain.hpp"

namespace ec4srec::encoder {

enum class Kind { self_attention, recurrent, convolutional };

Kind kind_from_string(const std::string& name);
std::string to_string(Kind k);

struct EncoderSpec {
  Kind kind = Kind::self_attention;
  int dim = 64;
  int layers = 2;
  int heads = 2;       // self-attention only; must divide dim
  int max_len = 50;
  double dropout = 0.2;
  int ffn_hidden = 0;  // 0 -> dim
  int conv_filters = 16;
  std::vector<int> conv_heights{1, 2, 3};

  void validate() const;
};

struct Encoded {
  ad::Var representation;    // rows x dim, one row per sequence
  ad::Var input_embeddings;  // (rows*width) x dim, the gathered item rows
};

// Sequence encoder with interchangeable backbones. All three map a batch of
// left-padded item-id rows to one d-dimensional representation per row:
//   self_attention - causal transformer; representation = final position's
//                    last-layer state; positions are indexed by distance
//                    from the sequence end so padding cannot shift them.
//   recurrent      - stacked GRU; padding columns carry the hidden state
//                    through unchanged; representation = final hidden state.
//   convolutional  - horizontal convolutions of several heights over the
//                    embedding matrix, mean-pooled over valid windows only,
//                    concatenated and projected to d.
// Next-item scores are dot products with the shared item-embedding table.
class Model final : public explain::ScoringModel {
 public:
  Model(EncoderSpec spec, int vocab_size, uint64_t init_seed);

  const EncoderSpec& spec() const { return spec_; }
  int vocab_size() const override { return vocab_size_; }
  int dim() const override { return spec_.dim; }
  int max_len() const override { return spec_.max_len; }

  // Builds the forward graph on `tape`. Dropout fires only when train=true,
  // drawing from `rng` (required then).
  Encoded encode(ad::Tape& tape, const data::Batch& batch, bool train,
                 std::mt19937_64* rng = nullptr) const;

  // Same network over caller-provided embedding rows ((rows*width) x dim);
  // used by gradient-based attribution, so no dropout.
  ad::Var encode_from_embeddings(ad::Tape& tape, ad::Var input, const data::Batch& batch) const;

  // Forward values only, no gradients.
  Eigen::MatrixXd encode_eval(const data::Batch& batch) const;

  ad::Var item_embeddings() const { return item_embeddings_; }
  // Stable (name, parameter) pairs; order is the checkpoint array order.
  std::vector<std::pair<std::string, ad::Var>> parameters() const;
  void clear_gradients() const;

  // Last-layer attention from the final query position, head-averaged;
  // one row per batch row, one column per position. Self-attention only.
  Eigen::MatrixXd attention_weights(const data::Batch& batch) const;

  // explain::ScoringModel:
  double target_score(const std::vector<int>& seq, int target) const override;
  std::vector<double> target_scores(const std::vector<std::vector<int>>& seqs,
                                    const std::vector<int>& targets) const override;
  Eigen::MatrixXd embed(const std::vector<int>& seq) const override;
  Eigen::RowVectorXd mask_embedding() const override;
  double score_from_embeddings(const Eigen::MatrixXd& rows, int target,
                               Eigen::MatrixXd* grad) const override;
  std::vector<double> attention(const std::vector<int>& seq) const override;

  void save(const std::string& path, int epoch) const;
  static Model load(const std::string& path, int* epoch = nullptr);

 private:
  struct AttnLayer {
    ad::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Var ln1_gain, ln1_bias;
    ad::Var w1, b1, w2, b2;
    ad::Var ln2_gain, ln2_bias;
  };
  struct GruLayer {
    ad::Var wxr, wxz, wxn, whr, whz, whn;
    ad::Var bxr, bxz, bxn, bhr, bhz, bhn;
  };
  struct ConvFilter {
    int height;
    ad::Var w, b;
  };

  ad::Var forward(ad::Tape& tape, ad::Var emb, const data::Batch& batch, bool train,
                  std::mt19937_64* rng, Eigen::MatrixXd* attn_capture) const;
  ad::Var forward_attention(ad::Tape&, ad::Var, const data::Batch&, bool, std::mt19937_64*,
                            Eigen::MatrixXd*) const;
  ad::Var forward_recurrent(ad::Tape&, ad::Var, const data::Batch&, bool, std::mt19937_64*) const;
  ad::Var forward_convolutional(ad::Tape&, ad::Var, const data::Batch&, bool,
                                std::mt19937_64*) const;

  EncoderSpec spec_;
  int vocab_size_ = 0;
  ad::Var item_embeddings_;      // vocab x dim
  ad::Var position_embeddings_;  // max_len x dim (self-attention)
  ad::Var emb_ln_gain_, emb_ln_bias_;
  std::vector<AttnLayer> attn_layers_;
  std::vector<GruLayer> gru_layers_;
  std::vector<ConvFilter> conv_filters_;
  ad::Var conv_fc_w_, conv_fc_b_;
};

// rows x vocab score matrix h . E^T with the reserved columns (padding and
// mask token) forced to -infinity so they can never be recommended.
Eigen::MatrixXd score_items(const Eigen::MatrixXd& representations,
                            const Eigen::MatrixXd& item_table);

// Top-k item ids per row, descending score, ties broken by ascending id.
std::vector<std::vector<int>> predict_next(const Eigen::MatrixXd& scores, int k);

}  // namespace ec4srec::encoder
