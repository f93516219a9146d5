#include "ec4srec/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ec4srec/explain.hpp"
#include "ec4srec/svg_plot.hpp"

namespace ec4srec::commands {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setfill('0') << std::setw(16) << v;
  return os.str();
}

std::string fmt(double v, int places = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(places) << v;
  return os.str();
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  fs::create_directories(path, ec);
  if (ec) throw Error("cannot create directory '" + path + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

// One evaluation metric value: metric name, cutoff, value, seed label
// ("mean" for cross-seed averages).
struct MetricRow {
  std::string metric;
  int k = 0;
  double value = 0;
  std::string seed;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  out << "metric,k,value,seed\n";
  for (const auto& r : rows)
    out << r.metric << ',' << r.k << ',' << fmt(r.value) << ',' << r.seed << '\n';
}

std::vector<MetricRow> eval_rows(const trainer::EvalResult& ev, const std::string& seed) {
  std::vector<MetricRow> rows;
  for (size_t i = 0; i < ev.ks.size(); ++i) {
    rows.push_back({"hr", ev.ks[i], ev.hit_ratio[i], seed});
    rows.push_back({"ndcg", ev.ks[i], ev.ndcg[i], seed});
  }
  return rows;
}

// Appends cross-seed means (seed column "mean") for every (metric, k).
void append_mean_rows(std::vector<MetricRow>& rows) {
  std::map<std::pair<std::string, int>, std::pair<double, int>> acc;
  for (const auto& r : rows) {
    auto& a = acc[{r.metric, r.k}];
    a.first += r.value;
    a.second += 1;
  }
  for (const auto& [key, a] : acc)
    rows.push_back({key.first, key.second, a.first / a.second, "mean"});
}

void print_eval_table(std::ostream& os, const std::vector<MetricRow>& rows,
                      const std::string& seed_label) {
  std::map<int, std::pair<double, double>> by_k;  // k -> (hr, ndcg)
  for (const auto& r : rows) {
    if (r.seed != seed_label) continue;
    if (r.metric == "hr") by_k[r.k].first = r.value;
    if (r.metric == "ndcg") by_k[r.k].second = r.value;
  }
  os << "  k      HR@k    NDCG@k\n";
  for (const auto& [k, v] : by_k)
    os << std::setw(3) << k << "  " << fmt(v.first) << "  " << fmt(v.second) << '\n';
}

void write_history_jsonl(const std::string& path, const trainer::History& h) {
  auto out = open_out(path);
  for (const auto& s : h.steps) {
    json j{{"type", "step"},       {"step", s.step},         {"epoch", s.epoch},
           {"mode", s.mode},       {"rec", s.rec},           {"cl", s.cl},
           {"sl", s.sl},           {"cl_plus", s.cl_plus},   {"cl_minus", s.cl_minus},
           {"sl_plus", s.sl_plus}, {"total", s.total}};
    out << j.dump() << '\n';
  }
  for (const auto& e : h.epochs) {
    json j{{"type", "epoch"},     {"epoch", e.epoch},
           {"mode", e.mode},      {"mean_loss", e.mean_loss},
           {"valid_ndcg5", e.valid_ndcg5}, {"refreshed", e.refreshed}};
    out << j.dump() << '\n';
  }
}

json run_config_json(const config::RunConfig& rc) {
  json j = trainer::config_to_json(rc.experiment);
  j["run"] = {{"seeds", rc.seeds},
              {"eval_ks", rc.eval_ks},
              {"dataset", rc.dataset},
              {"synthetic_seed", rc.synthetic_seed}};
  return j;
}

}  // namespace

std::string resolve_out_dir(const std::string& requested, const std::string& leaf) {
  if (!requested.empty()) return requested;
  const char* root = std::getenv("EC4SREC_OUT");
  std::string base = (root != nullptr && *root != '\0') ? root : "out";
  return base + "/" + leaf;
}

config::RunConfig load_run_config(const std::string& config_file, const Overrides& overrides) {
  config::KeyValues kv;
  if (!config_file.empty()) kv = config::KeyValues::from_file(config_file);
  kv.apply(overrides);
  return config::parse_run_config(kv);
}

data::SplitDataset prepare_split(const config::RunConfig& rc) {
  if (rc.dataset == "synthetic") {
    auto synth = data::generate_synthetic(rc.synthetic_seed);
    return data::split_leave_one_out(synth.interactions);
  }
  return data::split_leave_one_out(data::load_interactions(rc.dataset));
}

int cmd_preprocess(const std::string& input, int k_core, const std::string& out_dir) {
  auto raw = data::load_interactions(input);
  auto filtered = data::apply_k_core(raw, k_core);

  std::string out = resolve_out_dir(out_dir, "preprocess");
  ensure_dir(out);
  data::save_interactions(filtered, out + "/dataset.txt");
  data::save_id_map(filtered, out + "/id_map.txt");

  double avg_len = filtered.num_users() > 0
                       ? static_cast<double>(filtered.num_interactions()) / filtered.num_users()
                       : 0.0;
  {
    auto stats = open_out(out + "/stats.txt");
    stats << "users " << filtered.num_users() << '\n'
          << "items " << filtered.num_items() << '\n'
          << "interactions " << filtered.num_interactions() << '\n'
          << "avg_length " << fmt(avg_len, 4) << '\n'
          << "sparsity " << fmt(filtered.sparsity(), 4) << '\n';
  }

  std::cout << "preprocessed '" << input << "' with " << k_core << "-core filtering\n"
            << "  users " << raw.num_users() << " -> " << filtered.num_users() << '\n'
            << "  items " << raw.num_items() << " -> " << filtered.num_items() << '\n'
            << "  interactions " << raw.num_interactions() << " -> "
            << filtered.num_interactions() << '\n'
            << "  sparsity " << fmt(filtered.sparsity(), 4) << '\n'
            << "wrote " << out << "/{dataset.txt,id_map.txt,stats.txt}\n";
  return 0;
}

int cmd_train(const std::string& config_file, const Overrides& overrides,
              const std::string& out_dir) {
  auto rc = load_run_config(config_file, overrides);
  std::string out = resolve_out_dir(out_dir, "train");
  ensure_dir(out);

  auto split = prepare_split(rc);

  json manifest{{"command", "train"},
                {"config", run_config_json(rc)},
                {"config_hash", hex64(fnv1a(config::to_key_values(rc).dump()))},
                {"seeds", rc.seeds},
                {"output_dir", out}};
  open_out(out + "/manifest.json") << manifest.dump(2) << '\n';

  std::vector<MetricRow> all_rows;
  std::vector<svg::Series> curves;
  for (uint64_t seed : rc.seeds) {
    std::string dir = out + "/seed_" + std::to_string(seed);
    ensure_dir(dir);

    trainer::ExperimentConfig cfg = rc.experiment;
    cfg.seed = seed;
    cfg.dump_path = dir + "/diverged.state";

    std::cout << "seed " << seed << ": training " << cfg.epochs << " epochs ("
              << objective::to_string(cfg.mode) << ")\n";
    trainer::Trainer t(cfg, &split);
    t.run();
    t.save(dir + "/final.ckpt");
    write_history_jsonl(dir + "/history.jsonl", t.history());

    auto ev = t.evaluate(split.test, rc.eval_ks);
    auto rows = eval_rows(ev, std::to_string(seed));
    write_metrics_csv(dir + "/metrics.csv", rows);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());

    svg::Series curve;
    curve.label = "seed " + std::to_string(seed);
    for (const auto& e : t.history().epochs) {
      curve.xs.push_back(e.epoch);
      curve.ys.push_back(e.valid_ndcg5);
    }
    curves.push_back(std::move(curve));
  }

  append_mean_rows(all_rows);
  write_metrics_csv(out + "/metrics.csv", all_rows);
  svg::write_line_chart(out + "/validation.svg", "validation NDCG@5 by epoch", "epoch",
                        "NDCG@5", curves);

  std::cout << "test metrics (mean over " << rc.seeds.size() << " seed"
            << (rc.seeds.size() == 1 ? "" : "s") << ")\n";
  print_eval_table(std::cout, all_rows, "mean");
  std::cout << "wrote " << out << "/metrics.csv\n";
  return 0;
}

int cmd_evaluate(const std::string& state_path, const std::string& config_file,
                 const Overrides& overrides, const std::string& part,
                 const std::string& out_dir) {
  if (part != "valid" && part != "test")
    throw ConfigError("unknown split part '" + part + "' (expected valid or test)");

  auto rc = load_run_config(config_file, overrides);
  auto split = prepare_split(rc);
  auto t = trainer::Trainer::restore(state_path, &split);

  const auto& samples = part == "valid" ? split.valid : split.test;
  auto ev = t.evaluate(samples, rc.eval_ks);
  auto rows = eval_rows(ev, std::to_string(t.config().seed));

  std::cout << part << " metrics after " << t.epochs_done() << " epochs ("
            << ev.users << " users)\n";
  print_eval_table(std::cout, rows, std::to_string(t.config().seed));

  std::string out = resolve_out_dir(out_dir, "evaluate");
  ensure_dir(out);
  write_metrics_csv(out + "/metrics.csv", rows);
  std::cout << "wrote " << out << "/metrics.csv\n";
  return 0;
}

namespace {

// ---- sweep machinery -------------------------------------------------

struct SweepPoint {
  std::string value;        // row label as given on the axis
  config::RunConfig rc;     // fully-applied run config for this point
};

std::vector<std::string> default_axis_values(const std::string& axis) {
  if (axis == "mu_e")
    return {"0.1", "0.2", "0.3", "0.4", "0.5", "0.6", "0.7", "0.8", "0.9"};
  if (axis == "p") return {"0", "1", "2", "3", "5"};
  if (axis == "losses")
    return {"cl_plus",         "cl_minus",         "sl_plus",
            "cl_plus+cl_minus", "cl_plus+sl_plus", "cl_minus+sl_plus",
            "cl_plus+cl_minus+sl_plus"};
  if (axis == "explanation")
    return {"occlusion", "saliency", "integrated-gradients", "attention"};
  if (axis == "augment-removal") return {"none", "reorder", "mask", "crop"};
  throw ConfigError("unknown sweep axis '" + axis +
                    "' (expected mu_e, p, losses, explanation or augment-removal)");
}

std::vector<std::string> split_tokens(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream is(s);
  while (std::getline(is, tok, sep)) out.push_back(tok);
  return out;
}

config::RunConfig apply_axis(const config::RunConfig& base, const std::string& axis,
                             const std::string& value) {
  config::KeyValues kv;  // reuses the config parsers for value validation
  if (axis == "mu_e") {
    kv.set("augment.guided_ratio", value);
  } else if (axis == "p") {
    kv.set("updates", value);
  } else if (axis == "losses") {
    auto toks = split_tokens(value, '+');
    for (const auto& tok : toks)
      if (tok != "cl_plus" && tok != "cl_minus" && tok != "sl_plus")
        throw ConfigError("unknown loss term '" + tok +
                          "' (expected cl_plus, cl_minus, sl_plus joined by '+')");
    auto on = [&](const char* name) {
      return std::find(toks.begin(), toks.end(), name) != toks.end();
    };
    // A term participates at its configured strength (default 0.1 when the
    // base config zeroed it); excluded terms are switched off.
    auto coeff = [&](bool included, double base_coeff) {
      return included ? (base_coeff > 0 ? base_coeff : 0.1) : 0.0;
    };
    kv.set("mode", "full");
    kv.set("loss.lambda_cl_plus", fmt(coeff(on("cl_plus"), base.experiment.loss.lambda_cl_plus)));
    kv.set("loss.lambda_cl_minus",
           fmt(coeff(on("cl_minus"), base.experiment.loss.lambda_cl_minus)));
    kv.set("loss.lambda_sl_plus", fmt(coeff(on("sl_plus"), base.experiment.loss.lambda_sl_plus)));
  } else if (axis == "explanation") {
    kv.set("method", value);
  } else if (axis == "augment-removal") {
    kv.set("removed_op", value);
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
  auto base_kv = config::to_key_values(base);
  for (const auto& [k, v] : kv.entries) base_kv.set(k, v);
  return config::parse_run_config(base_kv);
}

struct SweepRow {
  std::string value;
  double hr5 = 0, ndcg5 = 0;
  bool ok = false;
  std::string error;
};

}  // namespace

int cmd_sweep(const std::string& config_file, const Overrides& overrides,
              const std::string& axis, const std::vector<std::string>& values,
              const std::string& out_dir, int parallel) {
  auto base = load_run_config(config_file, overrides);
  std::vector<std::string> points = values.empty() ? default_axis_values(axis) : values;
  if (points.empty()) throw ConfigError("sweep needs at least one axis value");

  std::string out = resolve_out_dir(out_dir, "sweep-" + axis);
  ensure_dir(out);

  auto split = prepare_split(base);
  std::vector<SweepRow> rows(points.size());
  std::mutex io;
  auto run_point = [&](size_t i) {
    SweepRow row;
    row.value = points[i];
    try {
      auto rc = apply_axis(base, axis, points[i]);
      std::vector<int> ks = rc.eval_ks;
      if (std::find(ks.begin(), ks.end(), 5) == ks.end()) ks.push_back(5);
      double hr5 = 0, ndcg5 = 0;
      for (uint64_t seed : rc.seeds) {
        trainer::ExperimentConfig cfg = rc.experiment;
        cfg.seed = seed;
        trainer::Trainer t(cfg, &split);
        t.run();
        auto ev = t.evaluate(split.test, ks);
        hr5 += ev.hr_at(5);
        ndcg5 += ev.ndcg_at(5);
      }
      row.hr5 = hr5 / rc.seeds.size();
      row.ndcg5 = ndcg5 / rc.seeds.size();
      row.ok = true;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    {
      std::lock_guard<std::mutex> lock(io);
      if (row.ok)
        std::cout << axis << " = " << row.value << ": HR@5 " << fmt(row.hr5) << "  NDCG@5 "
                  << fmt(row.ndcg5) << '\n';
      else
        std::cout << axis << " = " << row.value << ": FAILED (" << row.error << ")\n";
    }
    rows[i] = std::move(row);
  };

  int workers = std::min<int>(std::max(1, parallel), static_cast<int>(points.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < points.size(); ++i) run_point(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < points.size(); i = next.fetch_add(1))
          run_point(i);
      });
    for (auto& th : pool) th.join();
  }

  {
    auto csv = open_out(out + "/sweep.csv");
    csv << "value,hr@5,ndcg@5,status\n";
    for (const auto& r : rows)
      csv << r.value << ',' << (r.ok ? fmt(r.hr5) : "") << ',' << (r.ok ? fmt(r.ndcg5) : "")
          << ',' << (r.ok ? "ok" : "failed: " + r.error) << '\n';
  }

  std::vector<SweepRow> done;
  for (const auto& r : rows)
    if (r.ok) done.push_back(r);
  if (!done.empty()) {
    bool numeric_axis = axis == "mu_e" || axis == "p";
    if (numeric_axis) {
      svg::Series hr{"HR@5", {}, {}}, nd{"NDCG@5", {}, {}};
      for (const auto& r : done) {
        double x = std::stod(r.value);
        hr.xs.push_back(x);
        hr.ys.push_back(r.hr5);
        nd.xs.push_back(x);
        nd.ys.push_back(r.ndcg5);
      }
      svg::write_line_chart(out + "/sweep.svg", "sweep over " + axis, axis, "metric@5",
                            {nd, hr});
    } else {
      std::vector<std::string> labels;
      std::vector<double> vals;
      for (const auto& r : done) {
        labels.push_back(r.value);
        vals.push_back(r.ndcg5);
      }
      svg::write_bar_chart(out + "/sweep.svg", "sweep over " + axis, "NDCG@5", labels, vals);
    }
  }

  size_t failed = rows.size() - done.size();
  std::cout << "wrote " << out << "/sweep.csv";
  if (!done.empty()) std::cout << " and sweep.svg";
  std::cout << '\n';
  if (failed > 0) {
    std::cout << failed << " of " << rows.size() << " runs failed\n";
    return 1;
  }
  return 0;
}

int cmd_synthetic(uint64_t seed, const trainer::OracleOptions& opts, const std::string& out_dir) {
  auto report = trainer::run_oracle_experiment(seed, opts);

  std::string out = resolve_out_dir(out_dir, "synthetic");
  ensure_dir(out);
  json j{{"seed", seed},
         {"seeds", opts.seeds},
         {"epochs", opts.epochs},
         {"random", {{"hr3", report.random_arm.hr3}, {"ndcg3", report.random_arm.ndcg3},
                     {"seed_hr3", report.random_arm.seed_hr3},
                     {"seed_ndcg3", report.random_arm.seed_ndcg3}}},
         {"oracle", {{"hr3", report.oracle_arm.hr3}, {"ndcg3", report.oracle_arm.ndcg3},
                     {"seed_hr3", report.oracle_arm.seed_hr3},
                     {"seed_ndcg3", report.oracle_arm.seed_ndcg3}}},
         {"relative_ndcg_gain", report.relative_ndcg_gain},
         {"seconds", report.seconds}};
  open_out(out + "/oracle_report.json") << j.dump(2) << '\n';

  std::ostringstream table;
  table << "masking study on the synthetic corpus (" << opts.seeds << " paired seeds)\n"
        << "  arm      HR@3    NDCG@3\n"
        << "  random  " << fmt(report.random_arm.hr3, 4) << "  " << fmt(report.random_arm.ndcg3, 4)
        << '\n'
        << "  oracle  " << fmt(report.oracle_arm.hr3, 4) << "  " << fmt(report.oracle_arm.ndcg3, 4)
        << '\n'
        << "relative NDCG@3 gain: " << fmt(report.relative_ndcg_gain * 100.0, 1) << "%\n"
        << "elapsed: " << fmt(report.seconds, 1) << "s\n";
  open_out(out + "/oracle_report.txt") << table.str();
  std::cout << table.str() << "wrote " << out << "/oracle_report.{json,txt}\n";
  return 0;
}

int cmd_explain_dump(const std::string& state_path, const std::string& config_file,
                     const Overrides& overrides, int user, const std::string& out_dir) {
  auto rc = load_run_config(config_file, overrides);
  auto split = prepare_split(rc);
  auto t = trainer::Trainer::restore(state_path, &split);

  std::vector<data::Sample> anchors;
  if (user < 0) {
    anchors = split.score_anchors;
  } else {
    for (const auto& a : split.score_anchors)
      if (a.user == user) anchors.push_back(a);
    if (anchors.empty()) throw Error("no score anchor for user " + std::to_string(user));
  }

  const auto& cfg = t.config();
  explain::ScoreStore store;
  explain::refresh_store(store, cfg.method, t.model(), anchors, cfg.ig_steps, t.epochs_done());

  std::string out = resolve_out_dir(out_dir, "explain");
  ensure_dir(out);
  explain::save_score_store(store, out + "/scores.txt");

  const auto& first = anchors.front();
  const auto* scores = store.find(first.user);
  std::vector<std::string> labels;
  for (size_t i = 0; i < scores->values.size(); ++i) labels.push_back("p" + std::to_string(i));
  svg::write_bar_chart(out + "/user_" + std::to_string(first.user) + ".svg",
                       explain::to_string(cfg.method) + " importance, user " +
                           std::to_string(first.user),
                       "importance", labels, scores->values);

  // Debug dump: the guided views these scores would produce.
  {
    auto views = open_out(out + "/views.txt");
    auto dump_view = [&](const augment::AugmentedView& v) {
      views << "  " << augment::to_string(v.op) << " [";
      for (size_t i = 0; i < v.items.size(); ++i) views << (i ? " " : "") << v.items[i];
      views << "]\n";
    };
    size_t shown = std::min<size_t>(anchors.size(), 8);
    for (size_t i = 0; i < shown; ++i) {
      const auto& a = anchors[i];
      const auto* sc = store.find(a.user);
      auto rng = make_rng(cfg.seed, {0xD09, static_cast<uint64_t>(a.user)});
      auto [va, vb] = augment::sample_view_pair(a.prefix, a.user, cfg.augment, &sc->values,
                                                true, rng, cfg.removed_op);
      auto vn = augment::sample_negative_view(a.prefix, a.user, cfg.augment, sc->values, rng,
                                              cfg.removed_op);
      views << "user " << a.user << " prefix [";
      for (size_t p = 0; p < a.prefix.size(); ++p) views << (p ? " " : "") << a.prefix[p];
      views << "]\n";
      dump_view(va);
      dump_view(vb);
      dump_view(vn);
    }
  }

  std::cout << "scored " << anchors.size() << " user" << (anchors.size() == 1 ? "" : "s")
            << " with " << explain::to_string(cfg.method) << "; wrote " << out
            << "/{scores.txt,views.txt}\n";
  return 0;
}

}  // namespace ec4srec::commands
