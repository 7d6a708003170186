#include "fedvr/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <vector>

namespace fedvr {

namespace {

std::string fmt_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::int64_t to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::int64_t out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    fail(Errc::config_error, "key '" + key + "': cannot parse '" + v + "' as an integer");
  }
  require(used == v.size(), Errc::config_error,
          "key '" + key + "': trailing characters in '" + v + "'");
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  const std::int64_t s = to_int(key, v);
  require(s >= 0, Errc::config_error, "key '" + key + "': must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

double to_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    fail(Errc::config_error, "key '" + key + "': cannot parse '" + v + "' as a real");
  }
  require(used == v.size(), Errc::config_error,
          "key '" + key + "': trailing characters in '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail(Errc::config_error, "key '" + key + "': expected true or false, got '" + v + "'");
}

struct KeyHandler {
  const char* name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyHandler>& key_table() {
  static const std::vector<KeyHandler> table = {
      {"model",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "logistic") c.model = ModelKind::logistic;
         else if (v == "mlp2") c.model = ModelKind::mlp2;
         else fail(Errc::config_error, "key 'model': expected logistic or mlp2, got '" + v + "'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.model == ModelKind::logistic ? "logistic" : "mlp2");
       }},
      {"input_dim", [](ExperimentConfig& c, const std::string& v) { c.input_dim = static_cast<int>(to_int("input_dim", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.input_dim); }},
      {"hidden_dim", [](ExperimentConfig& c, const std::string& v) { c.hidden_dim = static_cast<int>(to_int("hidden_dim", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.hidden_dim); }},
      {"num_classes", [](ExperimentConfig& c, const std::string& v) { c.num_classes = static_cast<int>(to_int("num_classes", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.num_classes); }},
      {"l2_lambda", [](ExperimentConfig& c, const std::string& v) { c.l2_lambda = to_real("l2_lambda", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.l2_lambda); }},
      {"data",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "synthetic") c.data = DataSource::synthetic;
         else if (v == "mnist") c.data = DataSource::mnist;
         else fail(Errc::config_error, "key 'data': expected synthetic or mnist, got '" + v + "'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.data == DataSource::synthetic ? "synthetic" : "mnist");
       }},
      {"mnist_dir", [](ExperimentConfig& c, const std::string& v) { c.mnist_dir = v; },
       [](const ExperimentConfig& c) { return c.mnist_dir; }},
      {"train_limit", [](ExperimentConfig& c, const std::string& v) { c.train_limit = to_int("train_limit", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.train_limit); }},
      {"test_limit", [](ExperimentConfig& c, const std::string& v) { c.test_limit = to_int("test_limit", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.test_limit); }},
      {"synth_train", [](ExperimentConfig& c, const std::string& v) { c.synth_train = to_int("synth_train", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.synth_train); }},
      {"synth_test", [](ExperimentConfig& c, const std::string& v) { c.synth_test = to_int("synth_test", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.synth_test); }},
      {"synth_noise", [](ExperimentConfig& c, const std::string& v) { c.synth_noise = to_real("synth_noise", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.synth_noise); }},
      {"clients", [](ExperimentConfig& c, const std::string& v) { c.clients = static_cast<int>(to_int("clients", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.clients); }},
      {"alpha", [](ExperimentConfig& c, const std::string& v) { c.alpha = to_real("alpha", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.alpha); }},
      {"partition_seed", [](ExperimentConfig& c, const std::string& v) { c.partition_seed = to_uint("partition_seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.partition_seed); }},
      {"algorithm",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "proposed") { c.algorithm = Algorithm::proposed; return; }
         if (v == "fedavg") { c.algorithm = Algorithm::fedavg; return; }
         if (v == "fedprox") { c.algorithm = Algorithm::fedprox; return; }
         if (v.size() == 4 && v.rfind("row", 0) == 0 && v[3] >= '1' && v[3] <= '7') {
           const int row = v[3] - '0';
           const ExperimentConfig grid = preset_ablation(row);
           c.algorithm = Algorithm::proposed;
           c.adaptive_lr = grid.adaptive_lr;
           c.local_momentum = grid.local_momentum;
           c.local_mvr = grid.local_mvr;
           c.global_mvr = grid.global_mvr;
           return;
         }
         fail(Errc::config_error,
              "key 'algorithm': expected proposed, fedavg, fedprox, or row1..row7, got '" + v + "'");
       },
       [](const ExperimentConfig& c) {
         switch (c.algorithm) {
           case Algorithm::proposed: return std::string("proposed");
           case Algorithm::fedavg: return std::string("fedavg");
           case Algorithm::fedprox: return std::string("fedprox");
         }
         return std::string("proposed");
       }},
      {"adaptive_lr", [](ExperimentConfig& c, const std::string& v) { c.adaptive_lr = to_bool("adaptive_lr", v); },
       [](const ExperimentConfig& c) { return std::string(c.adaptive_lr ? "true" : "false"); }},
      {"local_momentum", [](ExperimentConfig& c, const std::string& v) { c.local_momentum = to_bool("local_momentum", v); },
       [](const ExperimentConfig& c) { return std::string(c.local_momentum ? "true" : "false"); }},
      {"local_mvr", [](ExperimentConfig& c, const std::string& v) { c.local_mvr = to_bool("local_mvr", v); },
       [](const ExperimentConfig& c) { return std::string(c.local_mvr ? "true" : "false"); }},
      {"global_mvr", [](ExperimentConfig& c, const std::string& v) { c.global_mvr = to_bool("global_mvr", v); },
       [](const ExperimentConfig& c) { return std::string(c.global_mvr ? "true" : "false"); }},
      {"k", [](ExperimentConfig& c, const std::string& v) { c.k = to_real("k", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.k); }},
      {"w", [](ExperimentConfig& c, const std::string& v) { c.w = to_real("w", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.w); }},
      {"fixed_lr", [](ExperimentConfig& c, const std::string& v) { c.fixed_lr = to_real("fixed_lr", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.fixed_lr); }},
      {"local_momentum_beta",
       [](ExperimentConfig& c, const std::string& v) { c.local_momentum_beta = to_real("local_momentum_beta", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.local_momentum_beta); }},
      {"fedprox_mu", [](ExperimentConfig& c, const std::string& v) { c.fedprox_mu = to_real("fedprox_mu", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.fedprox_mu); }},
      {"beta_mode",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "constant") c.beta_mode = BetaMode::constant;
         else if (v == "decaying") c.beta_mode = BetaMode::decaying;
         else fail(Errc::config_error, "key 'beta_mode': expected constant or decaying, got '" + v + "'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.beta_mode == BetaMode::constant ? "constant" : "decaying");
       }},
      {"beta0", [](ExperimentConfig& c, const std::string& v) { c.beta0 = to_real("beta0", v); },
       [](const ExperimentConfig& c) { return fmt_real(c.beta0); }},
      {"batch_size", [](ExperimentConfig& c, const std::string& v) { c.batch_size = to_int("batch_size", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.batch_size); }},
      {"epochs", [](ExperimentConfig& c, const std::string& v) { c.epochs = to_int("epochs", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.epochs); }},
      {"rounds", [](ExperimentConfig& c, const std::string& v) { c.rounds = to_int("rounds", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.rounds); }},
      {"participants", [](ExperimentConfig& c, const std::string& v) { c.participants = static_cast<int>(to_int("participants", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.participants); }},
      {"weighting",
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "uniform") c.weighting = Weighting::uniform;
         else if (v == "sample_size") c.weighting = Weighting::sample_size;
         else fail(Errc::config_error, "key 'weighting': expected uniform or sample_size, got '" + v + "'");
       },
       [](const ExperimentConfig& c) {
         return std::string(c.weighting == Weighting::uniform ? "uniform" : "sample_size");
       }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_uint("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      {"eval_every", [](ExperimentConfig& c, const std::string& v) { c.eval_every = to_int("eval_every", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.eval_every); }},
      {"parallelism", [](ExperimentConfig& c, const std::string& v) { c.parallelism = static_cast<int>(to_int("parallelism", v)); },
       [](const ExperimentConfig& c) { return std::to_string(c.parallelism); }},
  };
  return table;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

const KeyHandler* find_key(const std::string& name) {
  for (const auto& h : key_table())
    if (name == h.name) return &h;
  return nullptr;
}

std::string nearest_key(const std::string& name) {
  std::size_t best = static_cast<std::size_t>(-1);
  std::string pick;
  for (const auto& h : key_table()) {
    const auto d = edit_distance(name, h.name);
    if (d < best) {
      best = d;
      pick = h.name;
    }
  }
  return pick;
}

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r");
  return s.substr(from, to - from + 1);
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::set<std::string> seen;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, Errc::config_error,
            "line " + std::to_string(lineno) + ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::config_error, "line " + std::to_string(lineno) + ": empty key");
    const KeyHandler* h = find_key(key);
    if (!h)
      fail(Errc::config_error, "line " + std::to_string(lineno) + ": unknown key '" + key +
                                   "'; closest is '" + nearest_key(key) + "'");
    require(seen.insert(key).second, Errc::config_error,
            "line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    h->set(base, value);
  }
  return base;
}

ExperimentConfig parse_config(const std::string& path, ExperimentConfig base) {
  std::ifstream f(path);
  if (!f) fail(Errc::io_error, "cannot open config " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& h : key_table()) {
    out += h.name;
    out += " = ";
    out += h.get(cfg);
    out += '\n';
  }
  return out;
}

ExperimentConfig preset_desk() {
  ExperimentConfig c;
  c.data = DataSource::mnist;
  c.train_limit = 2000;
  c.test_limit = 1000;
  // step numerator tuned for this benchmark scale; the config default stays 0.1
  c.k = 0.6;
  return c;
}

ExperimentConfig preset_ablation(int row, bool paper_scale) {
  require(row >= 1 && row <= 7, Errc::invalid_argument, "grid rows are 1..7");
  ExperimentConfig c = preset_desk();
  c.algorithm = Algorithm::proposed;
  struct Flags {
    bool a, m, l, g;
  };
  static constexpr Flags rows[7] = {
      {false, false, false, false}, {false, true, false, false}, {true, false, false, false},
      {true, true, false, false},   {false, true, true, false},  {false, true, true, true},
      {true, true, true, true},
  };
  const Flags f = rows[row - 1];
  c.adaptive_lr = f.a;
  c.local_momentum = f.m;
  c.local_mvr = f.l;
  c.global_mvr = f.g;
  if (paper_scale) {
    c.train_limit = 0;
    c.test_limit = 0;
    c.clients = 100;
    c.participants = 10;
    c.rounds = 400;
    c.epochs = 80;
    c.batch_size = 50;
  }
  return c;
}

std::string partition_stats_report(const Dataset& ds, const std::vector<ClientShard>& shards) {
  const auto hists = class_histograms(ds, shards);
  std::ostringstream out;
  out << "client  size  class_counts\n";
  std::int64_t min_size = ds.size(), max_size = 0, total = 0;
  for (std::size_t k = 0; k < shards.size(); ++k) {
    const auto sz = shards[k].size();
    min_size = std::min(min_size, sz);
    max_size = std::max(max_size, sz);
    total += sz;
    out << shards[k].client_id << "\t" << sz << "\t[";
    for (std::size_t c = 0; c < hists[k].size(); ++c) {
      if (c) out << ", ";
      out << hists[k][c];
    }
    out << "]\n";
  }
  char line[160];
  std::snprintf(line, sizeof line,
                "clients=%zu assigned=%lld min=%lld max=%lld mean=%.2f mean_pairwise_tv=%.4f\n",
                shards.size(), static_cast<long long>(total), static_cast<long long>(min_size),
                static_cast<long long>(max_size),
                static_cast<double>(total) / static_cast<double>(shards.size()),
                shards.size() >= 2 ? mean_pairwise_tv(hists) : 0.0);
  out << line;
  return out.str();
}

}  // namespace fedvr
