#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ec4srec/commands.hpp"

using namespace ec4srec;

namespace {

// Leftover "--key value" / "--key=value" tokens become config overrides.
commands::Overrides parse_overrides(const std::vector<std::string>& extras) {
  commands::Overrides out;
  for (size_t i = 0; i < extras.size(); ++i) {
    std::string key = extras[i];
    if (key.rfind("--", 0) != 0)
      throw ConfigError("unexpected argument '" + key + "' (overrides look like --key value)");
    key = key.substr(2);
    const auto eq = key.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(key.substr(0, eq), key.substr(eq + 1));
      continue;
    }
    if (i + 1 >= extras.size())
      throw ConfigError("override '--" + key + "' is missing a value");
    out.emplace_back(key, extras[++i]);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"explanation-guided contrastive learning for sequential recommendation"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string pre_input, pre_out;
  int k_core = 5;
  auto* pre = app.add_subcommand("preprocess",
                                 "k-core filter, id map and stats for a raw interaction file");
  pre->add_option("input", pre_input, "one user per line: user-id item-id...")->required();
  pre->add_option("--k-core", k_core, "minimum interactions per user and per item");
  pre->add_option("--out", pre_out, "output directory");

  std::string tr_config, tr_out;
  auto* tr = app.add_subcommand("train", "train one run per seed and report test metrics");
  tr->add_option("--config", tr_config, "flat 'key = value' config file");
  tr->add_option("--out", tr_out, "output directory");
  tr->allow_extras();

  std::string ev_state, ev_config, ev_part = "test", ev_out;
  auto* ev = app.add_subcommand("evaluate", "re-evaluate a saved trainer state");
  ev->add_option("state", ev_state, "trainer state file (final.ckpt of a run)")->required();
  ev->add_option("--config", ev_config, "config file the state was trained with");
  ev->add_option("--part", ev_part, "valid or test")->check(CLI::IsMember({"valid", "test"}));
  ev->add_option("--out", ev_out, "output directory");
  ev->allow_extras();

  std::string sw_config, sw_axis, sw_out;
  std::vector<std::string> sw_values;
  int sw_parallel = 1;
  auto* sw = app.add_subcommand("sweep", "one training run per axis value, plus table and figure");
  sw->add_option("axis", sw_axis, "mu_e | p | losses | explanation | augment-removal")
      ->required();
  sw->add_option("--values", sw_values, "axis values (default: the axis' standard grid)")
      ->delimiter(',');
  sw->add_option("--config", sw_config, "flat 'key = value' config file");
  sw->add_option("--out", sw_out, "output directory");
  sw->add_option("--parallel", sw_parallel, "run up to n axis points concurrently")
      ->check(CLI::PositiveNumber);
  sw->allow_extras();

  uint64_t sy_seed = 7;
  std::string sy_out;
  trainer::OracleOptions sy_opts;
  auto* sy = app.add_subcommand("synthetic", "random-vs-oracle masking study on synthetic data");
  sy->add_option("--seed", sy_seed, "base seed; per-run seeds derive from it");
  sy->add_option("--runs", sy_opts.seeds, "paired runs per arm");
  sy->add_option("--epochs", sy_opts.epochs, "training epochs per run");
  sy->add_option("--out", sy_out, "output directory");

  std::string xd_state, xd_config, xd_out;
  int xd_user = -1;
  auto* xd = app.add_subcommand("explain-dump",
                                "dump importance scores and sampled views for inspection");
  xd->add_option("state", xd_state, "trainer state file")->required();
  xd->add_option("--config", xd_config, "config file the state was trained with");
  xd->add_option("--user", xd_user, "restrict to one internal user id (-1 = all)");
  xd->add_option("--out", xd_out, "output directory");
  xd->allow_extras();

  CLI11_PARSE(app, argc, argv);

  try {
    if (pre->parsed()) return commands::cmd_preprocess(pre_input, k_core, pre_out);
    if (tr->parsed())
      return commands::cmd_train(tr_config, parse_overrides(tr->remaining()), tr_out);
    if (ev->parsed())
      return commands::cmd_evaluate(ev_state, ev_config, parse_overrides(ev->remaining()),
                                    ev_part, ev_out);
    if (sw->parsed())
      return commands::cmd_sweep(sw_config, parse_overrides(sw->remaining()), sw_axis,
                                 sw_values, sw_out, sw_parallel);
    if (sy->parsed()) return commands::cmd_synthetic(sy_seed, sy_opts, sy_out);
    if (xd->parsed())
      return commands::cmd_explain_dump(xd_state, xd_config, parse_overrides(xd->remaining()),
                                        xd_user, xd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
