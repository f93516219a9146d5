#include "ec4srec/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace ec4srec::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

long long parse_ll(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParseError("key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  return static_cast<int>(parse_ll(key, v));
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ParseError("key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ParseError("key '" + key + "': '" + v + "' is not a number");
  }
}

std::vector<std::string> split_csv(const std::string& v) {
  std::vector<std::string> parts;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

augment::Operator removed_from_string(const std::string& key, const std::string& v) {
  if (v == "none") return augment::Operator::retrieval;
  if (v == "crop") return augment::Operator::crop;
  if (v == "mask") return augment::Operator::mask;
  if (v == "reorder") return augment::Operator::reorder;
  throw ParseError("key '" + key + "': expected none|crop|mask|reorder, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t = {
      {"mode", [](RunConfig& rc, const std::string&, const std::string& v) {
         rc.experiment.mode = objective::mode_from_string(v);
       }},
      {"method", [](RunConfig& rc, const std::string&, const std::string& v) {
         rc.experiment.method = explain::method_from_string(v);
       }},
      {"epochs", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.epochs = parse_int(k, v);
       }},
      {"updates", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.updates = parse_int(k, v);
       }},
      {"batch_size", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.batch_size = parse_int(k, v);
       }},
      {"learning_rate", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.learning_rate = parse_double(k, v);
       }},
      {"ig_steps", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.ig_steps = parse_int(k, v);
       }},
      {"max_train_prefixes", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.max_train_prefixes = parse_int(k, v);
       }},
      {"eval_batch_size", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.eval_batch_size = parse_int(k, v);
       }},
      {"removed_op", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.removed_op = removed_from_string(k, v);
       }},
      {"encoder.kind", [](RunConfig& rc, const std::string&, const std::string& v) {
         rc.experiment.encoder.kind = encoder::kind_from_string(v);
       }},
      {"encoder.dim", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.dim = parse_int(k, v);
       }},
      {"encoder.layers", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.layers = parse_int(k, v);
       }},
      {"encoder.heads", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.heads = parse_int(k, v);
       }},
      {"encoder.max_len", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.max_len = parse_int(k, v);
       }},
      {"encoder.dropout", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.dropout = parse_double(k, v);
       }},
      {"encoder.ffn_hidden", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.ffn_hidden = parse_int(k, v);
       }},
      {"encoder.conv_filters", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.encoder.conv_filters = parse_int(k, v);
       }},
      {"encoder.conv_heights", [](RunConfig& rc, const std::string& k, const std::string& v) {
         std::vector<int> hs;
         for (const auto& part : split_csv(v)) hs.push_back(parse_int(k, part));
         rc.experiment.encoder.conv_heights = hs;
       }},
      {"loss.lambda_cl", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.loss.lambda_cl = parse_double(k, v);
       }},
      {"loss.lambda_cl_plus", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.loss.lambda_cl_plus = parse_double(k, v);
       }},
      {"loss.lambda_cl_minus", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.loss.lambda_cl_minus = parse_double(k, v);
       }},
      {"loss.lambda_sl_plus", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.loss.lambda_sl_plus = parse_double(k, v);
       }},
      {"loss.tau", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.loss.tau = parse_double(k, v);
       }},
      {"augment.crop_ratio", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.augment.crop_ratio = parse_double(k, v);
       }},
      {"augment.mask_ratio", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.augment.mask_ratio = parse_double(k, v);
       }},
      {"augment.reorder_ratio", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.augment.reorder_ratio = parse_double(k, v);
       }},
      {"augment.guided_ratio", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.experiment.augment.guided_ratio = parse_double(k, v);
       }},
      {"run.seeds", [](RunConfig& rc, const std::string& k, const std::string& v) {
         std::vector<uint64_t> seeds;
         for (const auto& part : split_csv(v)) seeds.push_back(parse_u64(k, part));
         rc.seeds = seeds;
       }},
      {"run.eval_ks", [](RunConfig& rc, const std::string& k, const std::string& v) {
         std::vector<int> ks;
         for (const auto& part : split_csv(v)) ks.push_back(parse_int(k, part));
         rc.eval_ks = ks;
       }},
      {"run.dataset", [](RunConfig& rc, const std::string&, const std::string& v) {
         rc.dataset = v;
       }},
      {"run.synthetic_seed", [](RunConfig& rc, const std::string& k, const std::string& v) {
         rc.synthetic_seed = parse_u64(k, v);
       }},
    };
    // Short flag-style aliases for the most swept knobs.
    t["p"] = t.at("updates");
    t["seeds"] = t.at("run.seeds");
    t["mu_e"] = t.at("augment.guided_ratio");
    return t;
  }();
  return table;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> ks;
    for (const auto& [key, setter] : setters()) ks.push_back(key);
    return ks;
  }();
  return keys;
}

KeyValues KeyValues::from_text(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(lineno) + " has no '=': " + line);
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ParseError("config line " + std::to_string(lineno) + " has an empty key");
    }
    kv.entries[key] = value;
  }
  return kv;
}

KeyValues KeyValues::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void KeyValues::apply(const std::vector<std::pair<std::string, std::string>>& overrides) {
  for (const auto& [k, v] : overrides) entries[k] = v;
}

std::string KeyValues::dump() const {
  std::string out;
  for (const auto& [k, v] : entries) {
    out += k;
    out += " = ";
    out += v;
    out += "\n";
  }
  return out;
}

void RunConfig::validate() const {
  experiment.validate();
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (eval_ks.empty()) throw ConfigError("run.eval_ks must not be empty");
  for (int k : eval_ks) {
    if (k < 1) throw ConfigError("run.eval_ks entries must be >= 1");
  }
  if (dataset.empty()) throw ConfigError("run.dataset must not be empty");
}

RunConfig parse_run_config(const KeyValues& kv) {
  RunConfig rc;
  const auto& table = setters();
  for (const auto& [key, value] : kv.entries) {
    const auto it = table.find(key);
    if (it == table.end()) {
      std::string msg = "unknown config key '" + key + "'; valid keys:";
      for (const auto& k : known_keys()) {
        msg += " ";
        msg += k;
      }
      throw ConfigError(msg);
    }
    it->second(rc, key, value);
  }
  rc.validate();
  return rc;
}

KeyValues to_key_values(const RunConfig& rc) {
  KeyValues kv;
  const auto& e = rc.experiment;
  kv.set("mode", objective::to_string(e.mode));
  kv.set("method", explain::to_string(e.method));
  kv.set("epochs", std::to_string(e.epochs));
  kv.set("updates", std::to_string(e.updates));
  kv.set("batch_size", std::to_string(e.batch_size));
  {
    std::ostringstream lr;
    lr.precision(17);
    lr << e.learning_rate;
    kv.set("learning_rate", lr.str());
  }
  kv.set("ig_steps", std::to_string(e.ig_steps));
  kv.set("max_train_prefixes", std::to_string(e.max_train_prefixes));
  kv.set("eval_batch_size", std::to_string(e.eval_batch_size));
  kv.set("removed_op", e.removed_op == augment::Operator::retrieval
                           ? "none"
                           : augment::to_string(e.removed_op));
  kv.set("encoder.kind", encoder::to_string(e.encoder.kind));
  kv.set("encoder.dim", std::to_string(e.encoder.dim));
  kv.set("encoder.layers", std::to_string(e.encoder.layers));
  kv.set("encoder.heads", std::to_string(e.encoder.heads));
  kv.set("encoder.max_len", std::to_string(e.encoder.max_len));
  auto fmt = [](double v) {
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
  };
  kv.set("encoder.dropout", fmt(e.encoder.dropout));
  kv.set("encoder.ffn_hidden", std::to_string(e.encoder.ffn_hidden));
  kv.set("encoder.conv_filters", std::to_string(e.encoder.conv_filters));
  {
    std::string hs;
    for (size_t i = 0; i < e.encoder.conv_heights.size(); ++i) {
      if (i) hs += ",";
      hs += std::to_string(e.encoder.conv_heights[i]);
    }
    kv.set("encoder.conv_heights", hs);
  }
  kv.set("loss.lambda_cl", fmt(e.loss.lambda_cl));
  kv.set("loss.lambda_cl_plus", fmt(e.loss.lambda_cl_plus));
  kv.set("loss.lambda_cl_minus", fmt(e.loss.lambda_cl_minus));
  kv.set("loss.lambda_sl_plus", fmt(e.loss.lambda_sl_plus));
  kv.set("loss.tau", fmt(e.loss.tau));
  kv.set("augment.crop_ratio", fmt(e.augment.crop_ratio));
  kv.set("augment.mask_ratio", fmt(e.augment.mask_ratio));
  kv.set("augment.reorder_ratio", fmt(e.augment.reorder_ratio));
  kv.set("augment.guided_ratio", fmt(e.augment.guided_ratio));
  {
    std::string ss;
    for (size_t i = 0; i < rc.seeds.size(); ++i) {
      if (i) ss += ",";
      ss += std::to_string(rc.seeds[i]);
    }
    kv.set("run.seeds", ss);
  }
  {
    std::string ks;
    for (size_t i = 0; i < rc.eval_ks.size(); ++i) {
      if (i) ks += ",";
      ks += std::to_string(rc.eval_ks[i]);
    }
    kv.set("run.eval_ks", ks);
  }
  kv.set("run.dataset", rc.dataset);
  kv.set("run.synthetic_seed", std::to_string(rc.synthetic_seed));
  return kv;
}

}  // namespace ec4srec::config
