#include "ec4srec/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "ec4srec/checkpoint.hpp"

namespace ec4srec::trainer {

void ExperimentConfig::validate() const {
  encoder.validate();
  loss.validate();
  augment.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (updates < 0) throw ConfigError("updates must be >= 0");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (eval_batch_size < 1) throw ConfigError("eval_batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and > 0");
  }
  if (ig_steps < 1) throw ConfigError("ig_steps must be >= 1");
  if (max_train_prefixes < 0) throw ConfigError("max_train_prefixes must be >= 0");
  switch (removed_op) {
    case augment::Operator::retrieval:  // sentinel: nothing removed
    case augment::Operator::crop:
    case augment::Operator::mask:
    case augment::Operator::reorder: break;
    default:
      throw ConfigError("removed_op must be crop, mask or reorder (or unset)");
  }
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["encoder"] = {{"kind", encoder::to_string(cfg.encoder.kind)},
                  {"dim", cfg.encoder.dim},
                  {"layers", cfg.encoder.layers},
                  {"heads", cfg.encoder.heads},
                  {"max_len", cfg.encoder.max_len},
                  {"dropout", cfg.encoder.dropout},
                  {"ffn_hidden", cfg.encoder.ffn_hidden},
                  {"conv_filters", cfg.encoder.conv_filters},
                  {"conv_heights", cfg.encoder.conv_heights}};
  j["loss"] = {{"lambda_cl", cfg.loss.lambda_cl},
               {"lambda_cl_plus", cfg.loss.lambda_cl_plus},
               {"lambda_cl_minus", cfg.loss.lambda_cl_minus},
               {"lambda_sl_plus", cfg.loss.lambda_sl_plus},
               {"tau", cfg.loss.tau}};
  j["augment"] = {{"crop_ratio", cfg.augment.crop_ratio},
                  {"mask_ratio", cfg.augment.mask_ratio},
                  {"reorder_ratio", cfg.augment.reorder_ratio},
                  {"guided_ratio", cfg.augment.guided_ratio}};
  j["method"] = explain::to_string(cfg.method);
  j["mode"] = objective::to_string(cfg.mode);
  j["epochs"] = cfg.epochs;
  j["updates"] = cfg.updates;
  j["batch_size"] = cfg.batch_size;
  j["learning_rate"] = cfg.learning_rate;
  j["seed"] = cfg.seed;
  j["ig_steps"] = cfg.ig_steps;
  j["max_train_prefixes"] = cfg.max_train_prefixes;
  j["eval_batch_size"] = cfg.eval_batch_size;
  j["removed_op"] = cfg.removed_op == augment::Operator::retrieval
                        ? "none"
                        : augment::to_string(cfg.removed_op);
  j["dump_path"] = cfg.dump_path;
  return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  const auto& e = j.at("encoder");
  cfg.encoder.kind = encoder::kind_from_string(e.at("kind").get<std::string>());
  cfg.encoder.dim = e.at("dim").get<int>();
  cfg.encoder.layers = e.at("layers").get<int>();
  cfg.encoder.heads = e.at("heads").get<int>();
  cfg.encoder.max_len = e.at("max_len").get<int>();
  cfg.encoder.dropout = e.at("dropout").get<double>();
  cfg.encoder.ffn_hidden = e.at("ffn_hidden").get<int>();
  cfg.encoder.conv_filters = e.at("conv_filters").get<int>();
  cfg.encoder.conv_heights = e.at("conv_heights").get<std::vector<int>>();
  const auto& l = j.at("loss");
  cfg.loss.lambda_cl = l.at("lambda_cl").get<double>();
  cfg.loss.lambda_cl_plus = l.at("lambda_cl_plus").get<double>();
  cfg.loss.lambda_cl_minus = l.at("lambda_cl_minus").get<double>();
  cfg.loss.lambda_sl_plus = l.at("lambda_sl_plus").get<double>();
  cfg.loss.tau = l.at("tau").get<double>();
  const auto& a = j.at("augment");
  cfg.augment.crop_ratio = a.at("crop_ratio").get<double>();
  cfg.augment.mask_ratio = a.at("mask_ratio").get<double>();
  cfg.augment.reorder_ratio = a.at("reorder_ratio").get<double>();
  cfg.augment.guided_ratio = a.at("guided_ratio").get<double>();
  cfg.method = explain::method_from_string(j.at("method").get<std::string>());
  cfg.mode = objective::mode_from_string(j.at("mode").get<std::string>());
  cfg.epochs = j.at("epochs").get<int>();
  cfg.updates = j.at("updates").get<int>();
  cfg.batch_size = j.at("batch_size").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.seed = j.at("seed").get<uint64_t>();
  cfg.ig_steps = j.at("ig_steps").get<int>();
  cfg.max_train_prefixes = j.at("max_train_prefixes").get<int>();
  cfg.eval_batch_size = j.at("eval_batch_size").get<int>();
  const std::string rm = j.at("removed_op").get<std::string>();
  if (rm == "none") {
    cfg.removed_op = augment::Operator::retrieval;
  } else if (rm == "crop") {
    cfg.removed_op = augment::Operator::crop;
  } else if (rm == "mask") {
    cfg.removed_op = augment::Operator::mask;
  } else if (rm == "reorder") {
    cfg.removed_op = augment::Operator::reorder;
  } else {
    throw ParseError("unknown removed_op '" + rm + "'");
  }
  cfg.dump_path = j.at("dump_path").get<std::string>();
  return cfg;
}

nlohmann::json history_to_json(const History& h) {
  nlohmann::json j;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : h.steps) {
    j["steps"].push_back({{"step", s.step},
                          {"epoch", s.epoch},
                          {"mode", s.mode},
                          {"rec", s.rec},
                          {"cl", s.cl},
                          {"sl", s.sl},
                          {"cl_plus", s.cl_plus},
                          {"cl_minus", s.cl_minus},
                          {"sl_plus", s.sl_plus},
                          {"total", s.total}});
  }
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : h.epochs) {
    j["epochs"].push_back({{"epoch", e.epoch},
                           {"mode", e.mode},
                           {"mean_loss", e.mean_loss},
                           {"valid_ndcg5", e.valid_ndcg5},
                           {"refreshed", e.refreshed}});
  }
  j["refreshes"] = h.refreshes;
  j["view_counts"] = h.view_counts;
  return j;
}

History history_from_json(const nlohmann::json& j) {
  History h;
  for (const auto& s : j.at("steps")) {
    h.steps.push_back({s.at("step").get<long>(), s.at("epoch").get<int>(),
                       s.at("mode").get<std::string>(), s.at("rec").get<double>(),
                       s.at("cl").get<double>(), s.at("sl").get<double>(),
                       s.at("cl_plus").get<double>(), s.at("cl_minus").get<double>(),
                       s.at("sl_plus").get<double>(), s.at("total").get<double>()});
  }
  for (const auto& e : j.at("epochs")) {
    h.epochs.push_back({e.at("epoch").get<int>(), e.at("mode").get<std::string>(),
                        e.at("mean_loss").get<double>(), e.at("valid_ndcg5").get<double>(),
                        e.at("refreshed").get<bool>()});
  }
  h.refreshes = j.at("refreshes").get<std::vector<int>>();
  h.view_counts = j.at("view_counts").get<std::map<std::string, long>>();
  return h;
}

bool identical(const History& a, const History& b) {
  return history_to_json(a) == history_to_json(b);
}

double EvalResult::hr_at(int k) const {
  for (size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return hit_ratio[i];
  }
  throw Error("no hit ratio was computed for k=" + std::to_string(k));
}

double EvalResult::ndcg_at(int k) const {
  for (size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) return ndcg[i];
  }
  throw Error("no ndcg was computed for k=" + std::to_string(k));
}

EvalResult evaluate_model(const encoder::Model& model, const std::vector<data::Sample>& samples,
                          const std::vector<int>& ks, int eval_batch_size) {
  if (ks.empty()) throw ConfigError("at least one cutoff k is required");
  if (samples.empty()) throw Error("evaluation needs at least one sample");
  metrics::Accumulator acc;
  for (const auto& b : data::eval_batches(samples, eval_batch_size, model.max_len())) {
    const Eigen::MatrixXd reps = model.encode_eval(b);
    const Eigen::MatrixXd scores = encoder::score_items(reps, model.item_embeddings()->value);
    for (int r = 0; r < b.rows; ++r) {
      acc.add(metrics::rank_of_target(scores.row(r).transpose(), b.targets[r]));
    }
  }
  EvalResult out;
  out.ks = ks;
  out.users = acc.count();
  for (int k : ks) {
    out.hit_ratio.push_back(acc.hit_ratio(k));
    out.ndcg.push_back(acc.ndcg(k));
  }
  return out;
}

Trainer::Trainer(const ExperimentConfig& cfg, const data::SplitDataset* split)
    : cfg_(cfg), split_(split) {
  cfg_.validate();
  if (split_ == nullptr) throw Error("trainer needs a split dataset");
  if (split_->train.empty()) throw Error("split has no training samples");
  model_ = std::make_unique<encoder::Model>(cfg_.encoder, split_->vocab_size,
                                            mix_seed(cfg_.seed, {0x10de1}));
  params_ = model_->parameters();
  adam_m_.reserve(params_.size());
  adam_v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    adam_m_.emplace_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
    adam_v_.emplace_back(Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols()));
  }
  schedule_ = explain::schedule_updates(cfg_.epochs, cfg_.updates);
  train_ = data::cap_train_prefixes(split_->train, cfg_.max_train_prefixes);
}

bool Trainer::guided_phase(int epoch) const {
  switch (cfg_.mode) {
    case objective::Mode::ssl:
    case objective::Mode::sl:
    case objective::Mode::full: break;
    default: return false;
  }
  return !schedule_.epochs.empty() && epoch >= schedule_.epochs.front();
}

objective::Mode Trainer::mode_for_epoch(int epoch) const {
  switch (cfg_.mode) {
    case objective::Mode::warmup:
    case objective::Mode::cl4srec:
    case objective::Mode::duorec: return cfg_.mode;
    default: return guided_phase(epoch) ? cfg_.mode : objective::Mode::warmup;
  }
}

std::vector<double> Trainer::scores_for(const data::Sample& s) const {
  const explain::ImportanceScores* sc = store_.find(s.user);
  if (sc == nullptr) {
    throw Error("importance-score store has no entry for user " + std::to_string(s.user) +
                "; guided views need a refreshed store");
  }
  if (sc->values.size() < s.prefix.size()) {
    throw Error("stored scores cover " + std::to_string(sc->values.size()) +
                " positions but the prefix has " + std::to_string(s.prefix.size()));
  }
  return {sc->values.begin(), sc->values.begin() + static_cast<long>(s.prefix.size())};
}

void Trainer::count_view(const augment::AugmentedView& v) {
  ++history_.view_counts[augment::to_string(v.op)];
}

void Trainer::adam_step() {
  ++adam_t_;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    ad::Var& p = params_[i].second;
    const Eigen::MatrixXd g = p->has_grad()
                                  ? p->grad
                                  : Eigen::MatrixXd::Zero(p->value.rows(), p->value.cols());
    adam_m_[i] = kBeta1 * adam_m_[i] + (1.0 - kBeta1) * g;
    adam_v_[i] = kBeta2 * adam_v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
    p->value.array() -=
        cfg_.learning_rate * (adam_m_[i].array() / c1) / ((adam_v_[i].array() / c2).sqrt() + kEps);
  }
}

void Trainer::train_epoch(int epoch) {
  const bool refresh_now = schedule_.contains(epoch);
  if (refresh_now) {
    explain::refresh_store(store_, cfg_.method, *model_, split_->score_anchors, cfg_.ig_steps,
                           epoch);
    history_.refreshes.push_back(epoch);
  }
  const objective::Mode mode = mode_for_epoch(epoch);
  const bool guided = guided_phase(epoch);
  const objective::ViewNeeds needs = objective::views_needed(mode, cfg_.loss);
  const int max_len = cfg_.encoder.max_len;

  const auto plan = data::batch_plan(train_.size(), cfg_.batch_size,
                                     mix_seed(cfg_.seed, {0xBA7C4, static_cast<uint64_t>(epoch)}));
  double loss_sum = 0.0;
  long steps = 0;
  for (size_t bi = 0; bi < plan.size(); ++bi) {
    const std::vector<int>& group = plan[bi];
    auto aug_rng = make_rng(cfg_.seed, {0xA96, static_cast<uint64_t>(epoch), bi});
    auto drop_rng = make_rng(cfg_.seed, {0xD40, static_cast<uint64_t>(epoch), bi});

    std::vector<std::vector<int>> prefixes, va, vb, vr, vn;
    std::vector<int> users, targets;
    prefixes.reserve(group.size());
    for (int gi : group) {
      const data::Sample& s = train_[gi];
      prefixes.push_back(s.prefix);
      users.push_back(s.user);
      targets.push_back(s.target);
      std::vector<double> sc;
      if (guided) sc = scores_for(s);
      if (needs.pair) {
        std::pair<augment::AugmentedView, augment::AugmentedView> pr;
        if (pair_sampler_) {
          pr = pair_sampler_(s, aug_rng);
        } else {
          pr = augment::sample_view_pair(s.prefix, s.user, cfg_.augment, guided ? &sc : nullptr,
                                         guided, aug_rng, cfg_.removed_op);
        }
        count_view(pr.first);
        count_view(pr.second);
        va.push_back(std::move(pr.first.items));
        vb.push_back(std::move(pr.second.items));
      }
      if (needs.retrieved) {
        augment::AugmentedView v =
            guided ? augment::guided_retrieval(s, sc, *split_, cfg_.augment.mask_ratio, aug_rng)
                   : augment::random_retrieval(s, *split_, cfg_.augment.mask_ratio, aug_rng);
        count_view(v);
        vr.push_back(std::move(v.items));
      }
      if (needs.negatives) {
        augment::AugmentedView v =
            augment::sample_negative_view(s.prefix, s.user, cfg_.augment, sc, aug_rng,
                                          cfg_.removed_op);
        count_view(v);
        vn.push_back(std::move(v.items));
      }
    }

    ad::Tape tape;
    const data::Batch anchor_batch = data::make_batch(prefixes, users, targets, max_len);
    encoder::Encoded anchors = model_->encode(tape, anchor_batch, true, &drop_rng);
    objective::ViewBatch views;
    views.targets = anchor_batch.targets;
    views.anchors = anchors.representation->value;
    ad::Var va_var, vb_var, vr_var, vn_var;
    auto encode_views = [&](const std::vector<std::vector<int>>& seqs) {
      const data::Batch vb_batch = data::make_batch(seqs, users, {}, max_len);
      return model_->encode(tape, vb_batch, true, &drop_rng).representation;
    };
    if (needs.pair) {
      va_var = encode_views(va);
      vb_var = encode_views(vb);
      views.view_a = va_var->value;
      views.view_b = vb_var->value;
    }
    if (needs.retrieved) {
      vr_var = encode_views(vr);
      views.retrieved = vr_var->value;
    }
    if (needs.negatives) {
      vn_var = encode_views(vn);
      views.negatives = vn_var->value;
    }

    objective::Gradients grads;
    const objective::Breakdown bd =
        objective::composite(mode, cfg_.loss, views, model_->item_embeddings()->value, &grads);
    if (!std::isfinite(bd.total)) {
      std::string where = "epoch " + std::to_string(epoch) + ", step " +
                          std::to_string(global_step_ + 1);
      if (!cfg_.dump_path.empty()) {
        save(cfg_.dump_path);
        where += "; state dumped to " + cfg_.dump_path;
      }
      throw DivergenceError("training loss became non-finite at " + where);
    }

    anchors.representation->accumulate(grads.anchors);
    if (needs.pair) {
      va_var->accumulate(grads.view_a);
      vb_var->accumulate(grads.view_b);
    }
    if (needs.retrieved) vr_var->accumulate(grads.retrieved);
    if (needs.negatives) vn_var->accumulate(grads.negatives);
    model_->item_embeddings()->accumulate(grads.items);
    tape.backward();
    adam_step();
    model_->clear_gradients();

    ++global_step_;
    ++steps;
    loss_sum += bd.total;
    history_.steps.push_back({global_step_, epoch, objective::to_string(mode), bd.rec, bd.cl,
                              bd.sl, bd.cl_plus, bd.cl_minus, bd.sl_plus, bd.total});
  }

  const EvalResult ev = evaluate(split_->valid, {5});
  history_.epochs.push_back({epoch, objective::to_string(mode),
                             steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0,
                             ev.ndcg_at(5), refresh_now});
  epochs_done_ = epoch;
}

void Trainer::run(int stop_after) {
  int last = cfg_.epochs;
  if (stop_after > 0) last = std::min(last, stop_after);
  for (int e = epochs_done_ + 1; e <= last; ++e) train_epoch(e);
}

EvalResult Trainer::evaluate(const std::vector<data::Sample>& samples,
                             const std::vector<int>& ks) const {
  return evaluate_model(*model_, samples, ks, cfg_.eval_batch_size);
}

void Trainer::save(const std::string& path) const {
  ckpt::Container c;
  c.meta["format"] = "trainer-state";
  c.meta["vocab_size"] = split_->vocab_size;
  c.meta["epochs_done"] = epochs_done_;
  c.meta["adam_t"] = adam_t_;
  c.meta["global_step"] = global_step_;
  c.meta["config"] = config_to_json(cfg_);
  c.meta["history"] = history_to_json(history_);
  c.meta["store_epoch"] = store_.refreshed_at_epoch;
  std::vector<int> store_users;
  store_users.reserve(store_.by_user.size());
  for (const auto& [user, scores] : store_.by_user) store_users.push_back(user);
  std::sort(store_users.begin(), store_users.end());
  c.meta["store_users"] = store_users;

  for (const auto& [name, p] : params_) c.arrays.emplace_back("model." + name, p->value);
  for (size_t i = 0; i < params_.size(); ++i) {
    c.arrays.emplace_back("adam_m." + params_[i].first, adam_m_[i]);
  }
  for (size_t i = 0; i < params_.size(); ++i) {
    c.arrays.emplace_back("adam_v." + params_[i].first, adam_v_[i]);
  }
  for (int user : store_users) {
    const auto& values = store_.by_user.at(user).values;
    Eigen::MatrixXd row(1, static_cast<long>(values.size()));
    for (size_t i = 0; i < values.size(); ++i) row(0, static_cast<long>(i)) = values[i];
    c.arrays.emplace_back("scores." + std::to_string(user), row);
  }
  ckpt::save(c, path);
}

Trainer Trainer::restore(const std::string& path, const data::SplitDataset* split) {
  const ckpt::Container c = ckpt::load(path);
  if (!c.meta.contains("format") || c.meta.at("format") != "trainer-state") {
    throw ParseError(path + " is not a trainer state file");
  }
  Trainer t(config_from_json(c.meta.at("config")), split);
  const int vocab = c.meta.at("vocab_size").get<int>();
  if (vocab != split->vocab_size) {
    throw Error("checkpoint was trained on a " + std::to_string(vocab) +
                "-item vocabulary, the split has " + std::to_string(split->vocab_size));
  }
  t.epochs_done_ = c.meta.at("epochs_done").get<int>();
  t.adam_t_ = c.meta.at("adam_t").get<long>();
  t.global_step_ = c.meta.at("global_step").get<long>();
  t.history_ = history_from_json(c.meta.at("history"));
  t.store_.refreshed_at_epoch = c.meta.at("store_epoch").get<int>();
  for (int user : c.meta.at("store_users").get<std::vector<int>>()) {
    const Eigen::MatrixXd& row = c.array("scores." + std::to_string(user));
    explain::ImportanceScores sc;
    sc.values.assign(row.data(), row.data() + row.size());
    t.store_.by_user[user] = std::move(sc);
  }
  for (size_t i = 0; i < t.params_.size(); ++i) {
    const auto& [name, p] = t.params_[i];
    const Eigen::MatrixXd& value = c.array("model." + name);
    if (value.rows() != p->value.rows() || value.cols() != p->value.cols()) {
      throw ParseError("checkpoint array model." + name + " has the wrong shape");
    }
    p->value = value;
    t.adam_m_[i] = c.array("adam_m." + name);
    t.adam_v_[i] = c.array("adam_v." + name);
  }
  return t;
}

OracleReport run_oracle_experiment(uint64_t seed, const OracleOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  const data::SyntheticDataset synth = data::generate_synthetic(seed);
  const data::SplitDataset split = data::split_leave_one_out(synth.interactions);

  std::vector<std::vector<bool>> important(synth.interactions.num_users(),
                                           std::vector<bool>(data::kSyntheticHistory, false));
  for (int u = 0; u < synth.interactions.num_users(); ++u) {
    for (int pos : synth.important_positions[u]) important[u][pos] = true;
  }

  ExperimentConfig cfg;
  cfg.mode = objective::Mode::cl4srec;
  cfg.encoder.kind = encoder::Kind::self_attention;
  cfg.encoder.dim = opts.encoder_dim;
  cfg.encoder.layers = opts.encoder_layers;
  cfg.encoder.heads = 2;
  cfg.encoder.max_len = data::kSyntheticHistory + data::kSyntheticImportant;
  cfg.loss.lambda_cl = opts.lambda_cl;
  cfg.epochs = opts.epochs;
  cfg.updates = 0;
  cfg.batch_size = opts.batch_size;
  cfg.max_train_prefixes = 1;  // exactly the full historical sequence per user

  OracleReport report;
  for (int si = 0; si < opts.seeds; ++si) {
    cfg.seed = mix_seed(seed, {0x0acce, static_cast<uint64_t>(si)});
    for (int arm = 0; arm < 2; ++arm) {
      const bool oracle = arm == 1;
      Trainer tr(cfg, &split);
      tr.set_pair_sampler([&important, &opts, oracle](const data::Sample& s,
                                                      std::mt19937_64& rng) {
        // Random arm: every position is fair game (empty importance mask);
        // oracle arm: only ground-truth-unimportant positions get masked.
        std::vector<bool> mask_from(s.prefix.size(), false);
        if (oracle) {
          const auto& imp = important[s.user];
          for (size_t i = 0; i < s.prefix.size() && i < imp.size(); ++i) mask_from[i] = imp[i];
        }
        auto v1 = augment::oracle_mask(s.prefix, s.user, mask_from, opts.mask_count, rng);
        auto v2 = augment::oracle_mask(s.prefix, s.user, mask_from, opts.mask_count, rng);
        return std::make_pair(std::move(v1), std::move(v2));
      });
      tr.run();
      const EvalResult ev = tr.evaluate(split.test, {3});
      OracleReport::Arm& slot = oracle ? report.oracle_arm : report.random_arm;
      slot.seed_hr3.push_back(ev.hr_at(3));
      slot.seed_ndcg3.push_back(ev.ndcg_at(3));
    }
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  report.random_arm.hr3 = mean(report.random_arm.seed_hr3);
  report.random_arm.ndcg3 = mean(report.random_arm.seed_ndcg3);
  report.oracle_arm.hr3 = mean(report.oracle_arm.seed_hr3);
  report.oracle_arm.ndcg3 = mean(report.oracle_arm.seed_ndcg3);
  report.relative_ndcg_gain = (report.oracle_arm.ndcg3 - report.random_arm.ndcg3) /
                              std::max(report.random_arm.ndcg3, 1e-12);
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace ec4srec::trainer
