#include "beliefsim/run_config.hpp"

#include <set>

#include "beliefsim/error.hpp"

namespace beliefsim {

namespace {

constexpr const char* kModule = "config";

namespace ex = experiments;

class Section {
 public:
  Section(const toml::Table& table, std::string name, std::filesystem::path base)
      : table_(table), name_(std::move(name)), base_(std::move(base)) {}

  ~Section() = default;

  const toml::Value* find(const std::string& key) {
    seen_.insert(key);
    const auto it = table_.find(key);
    return it == table_.end() ? nullptr : &it->second;
  }

  void integer(const std::string& key, int& out) {
    if (const auto* v = find(key)) out = static_cast<int>(as_int(key, *v));
  }

  void integer(const std::string& key, std::size_t& out) {
    if (const auto* v = find(key)) {
      const auto value = as_int(key, *v);
      if (value < 0) fail(key, "must be >= 0");
      out = static_cast<std::size_t>(value);
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      const auto value = as_int(key, *v);
      if (value < 0) fail(key, "must be >= 0");
      out = static_cast<std::uint64_t>(value);
    }
  }

  void real(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (const auto* i = std::get_if<std::int64_t>(&v->data)) {
        out = static_cast<double>(*i);
      } else if (const auto* d = std::get_if<double>(&v->data)) {
        out = *d;
      } else {
        wrong_type(key, "a number", *v);
      }
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      const auto* b = std::get_if<bool>(&v->data);
      if (!b) wrong_type(key, "a boolean", *v);
      out = *b;
    }
  }

  std::optional<std::string> string(const std::string& key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    const auto* s = std::get_if<std::string>(&v->data);
    if (!s) wrong_type(key, "a string", *v);
    return *s;
  }

  void string(const std::string& key, std::string& out) {
    if (auto s = string(key)) out = *s;
  }

  std::optional<std::filesystem::path> path(const std::string& key) {
    auto s = string(key);
    if (!s) return std::nullopt;
    if (s->empty()) return std::filesystem::path();
    const std::filesystem::path p(*s);
    return p.is_absolute() ? p : (base_ / p).lexically_normal();
  }

  void path(const std::string& key, std::filesystem::path& out) {
    if (auto p = path(key)) out = *p;
  }

  std::optional<std::vector<std::int64_t>> int_list(const std::string& key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    const auto* array = std::get_if<toml::Array>(&v->data);
    if (!array) wrong_type(key, "an array of integers", *v);
    std::vector<std::int64_t> out;
    for (const auto& item : *array) {
      const auto* i = std::get_if<std::int64_t>(&item.data);
      if (!i) wrong_type(key, "an array of integers", item);
      out.push_back(*i);
    }
    return out;
  }

  void int_list(const std::string& key, std::vector<int>& out) {
    if (auto list = int_list(key)) out.assign(list->begin(), list->end());
  }

  std::optional<std::vector<std::string>> string_list(const std::string& key) {
    const auto* v = find(key);
    if (!v) return std::nullopt;
    const auto* array = std::get_if<toml::Array>(&v->data);
    if (!array) wrong_type(key, "an array of strings", *v);
    std::vector<std::string> out;
    for (const auto& item : *array) {
      const auto* s = std::get_if<std::string>(&item.data);
      if (!s) wrong_type(key, "an array of strings", item);
      out.push_back(*s);
    }
    return out;
  }

  const toml::Table* table(const std::string& key) {
    const auto* v = find(key);
    if (!v) return nullptr;
    if (!v->is_table()) wrong_type(key, "a table", *v);
    return &v->table();
  }

  // Call after reading every known key.
  void reject_unknown() const {
    for (const auto& [key, value] : table_) {
      if (!seen_.contains(key)) {
        throw ConfigError(kModule, "unknown key '" + qualified(key) + "'");
      }
    }
  }

  [[noreturn]] void fail(const std::string& key, const std::string& message) const {
    throw ConfigError(kModule, "'" + qualified(key) + "' " + message);
  }

 private:
  std::int64_t as_int(const std::string& key, const toml::Value& v) const {
    const auto* i = std::get_if<std::int64_t>(&v.data);
    if (!i) wrong_type(key, "an integer", v);
    return *i;
  }

  [[noreturn]] void wrong_type(const std::string& key, const std::string& expected, const toml::Value& v) const {
    fail(key, "must be " + expected + " (got " + v.type_name() + ")");
  }

  std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

  const toml::Table& table_;
  std::string name_;
  std::filesystem::path base_;
  std::set<std::string> seen_;
};

const toml::Table kEmpty;

template <typename Fn>
void with_section(Section& root, const std::string& name, const std::filesystem::path& base, Fn fn) {
  const auto* table = root.table(name);
  Section section(table ? *table : kEmpty, name, base);
  fn(section);
  section.reject_unknown();
}

void require_level(const std::string& what, int level) {
  if (level < 1 || level > 5) {
    throw ConfigError(kModule, what + " must be in 1..5 (got " + std::to_string(level) + ")");
  }
}

std::string int_array(const std::vector<int>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + std::to_string(values[i]);
  return out + "]";
}

std::string string_array(const std::vector<std::string>& values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? ", " : "") + toml::quote(values[i]);
  return out + "]";
}

std::string path_text(const std::filesystem::path& path) {
  if (path.empty()) return toml::quote("");
  return toml::quote(std::filesystem::absolute(path).lexically_normal().string());
}

}  // namespace

DatasetKind RunConfig::dataset_kind() const {
  if (dataset.kind) return *dataset.kind;
  const auto extension = dataset.path.extension().string();
  if (extension == ".csv") return DatasetKind::mmlu;
  if (extension == ".json") return DatasetKind::aporia;
  throw ConfigError(kModule, "cannot infer dataset.kind from '" + dataset.path.string() +
                                 "'; set dataset.kind to mmlu or aporia");
}

std::vector<int> RunConfig::peer_group_sizes() const {
  if (!peer_pressure.group_sizes.empty()) return peer_pressure.group_sizes;
  if (dataset_kind() == DatasetKind::mmlu) return {1, 3};
  return {1, 2, 3, 4};
}

DebateConfig RunConfig::debate_config() const {
  DebateConfig config;
  config.rounds = debate.rounds;
  config.runs = debate.runs;
  config.seed = seed;
  config.reassess_every_round = debate.reassess_every_round;
  config.statement_window = debate.statement_window;
  config.persuasion_max_sentences = debate.persuasion_max_sentences;
  config.peer_max_sentences = debate.peer_max_sentences;
  return config;
}

BackendConfig RunConfig::backend_config(const toml::EnvLookup& env) const {
  BackendConfig config;
  config.base_url = backend.url;
  config.model_name = backend.model;
  config.temperature = backend.temperature;
  config.timeout = std::chrono::milliseconds(backend.timeout_ms);
  config.max_retries = backend.max_retries;
  config.initial_backoff = std::chrono::milliseconds(backend.initial_backoff_ms);
  config.api_key = backend.api_key;
  if (!config.api_key) {
    if (auto key = env(kApiKeyEnv); key && !key->empty()) config.api_key = *key;
  }
  return config;
}

RunConfig run_config_from_toml(const toml::Table& table, const std::filesystem::path& base_dir) {
  RunConfig config;
  Section root(table, "", base_dir);
  if (auto experiment = root.string("experiment")) {
    config.experiment = ex::experiment_kind_from_string(*experiment);
  }
  root.seed("seed", config.seed);
  root.path("out", config.out);
  root.integer("concurrency", config.concurrency);

  with_section(root, "dataset", base_dir, [&](Section& s) {
    if (auto kind = s.string("kind")) config.dataset.kind = dataset_kind_from_string(*kind);
    s.path("path", config.dataset.path);
    s.integer("samples", config.dataset.samples);
  });
  with_section(root, "backend", base_dir, [&](Section& s) {
    s.string("url", config.backend.url);
    s.string("model", config.backend.model);
    s.real("temperature", config.backend.temperature);
    s.integer("timeout_ms", config.backend.timeout_ms);
    s.integer("max_retries", config.backend.max_retries);
    s.integer("initial_backoff_ms", config.backend.initial_backoff_ms);
    if (auto key = s.string("api_key")) config.backend.api_key = *key;
    if (auto scripted = s.path("scripted"); scripted && !scripted->empty()) config.backend.scripted = *scripted;
  });
  with_section(root, "debate", base_dir, [&](Section& s) {
    s.integer("rounds", config.debate.rounds);
    s.integer("runs", config.debate.runs);
    s.boolean("reassess_every_round", config.debate.reassess_every_round);
    if (auto window = s.string("statement_window")) {
      config.debate.statement_window = statement_window_from_string(*window);
    }
    s.integer("persuasion_max_sentences", config.debate.persuasion_max_sentences);
    s.integer("peer_max_sentences", config.debate.peer_max_sentences);
  });
  with_section(root, "bfi2", base_dir, [&](Section& s) {
    s.path("items", config.bfi2.items);
    s.int_list("levels", config.bfi2.levels);
    s.integer("runs", config.bfi2.runs);
  });
  with_section(root, "open_mindedness", base_dir, [&](Section& s) {
    s.int_list("levels", config.open_mindedness.levels);
    s.integer("runs", config.open_mindedness.runs);
    if (auto directions = s.string_list("directions")) {
      config.open_mindedness.directions.clear();
      for (const auto& d : *directions) {
        if (d == "misaligned_to_aligned") {
          config.open_mindedness.directions.push_back(prompts::ChangeDirection::misaligned_to_aligned);
        } else if (d == "aligned_to_misaligned") {
          config.open_mindedness.directions.push_back(prompts::ChangeDirection::aligned_to_misaligned);
        } else {
          s.fail("directions", "entries must be misaligned_to_aligned or aligned_to_misaligned");
        }
      }
    }
  });
  with_section(root, "persuasion", base_dir, [&](Section& s) {
    if (auto labels = s.string_list("conditions")) {
      config.persuasion.conditions.clear();
      for (const auto& label : *labels) {
        config.persuasion.conditions.push_back(ex::persuasion_condition_from_string(label));
      }
    }
    s.integer("target_openness", config.persuasion.spec.target_openness);
    s.integer("persuader_openness", config.persuasion.spec.persuader_openness);
    s.integer("target_strength", config.persuasion.spec.target_strength);
  });
  with_section(root, "peer_pressure", base_dir, [&](Section& s) {
    s.int_list("group_sizes", config.peer_pressure.group_sizes);
    s.integer("openness", config.peer_pressure.spec.openness);
    s.integer("initial_strength", config.peer_pressure.spec.initial_strength);
    int threshold = -1;
    s.integer("change_threshold", threshold);
    if (threshold >= 0) config.peer_pressure.spec.change_rule.strength_threshold = threshold;
  });
  root.reject_unknown();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path, const toml::EnvLookup& env) {
  const auto text = read_text_file(path);
  const auto base = std::filesystem::absolute(path).parent_path();
  try {
    return run_config_from_toml(toml::parse(text, env), base);
  } catch (const ConfigError& error) {
    throw ConfigError(kModule, path.string() + ": " +
                                   std::string(error.what()).substr(std::string(kModule).size() + 2));
  }
}

void validate(const RunConfig& config) {
  using ex::ExperimentKind;
  if (config.concurrency < 1) throw ConfigError(kModule, "concurrency must be >= 1");
  if (config.out.empty()) throw ConfigError(kModule, "out must name an output directory");

  if (!config.backend.scripted) {
    if (config.backend.url.empty()) {
      throw ConfigError(kModule, "no backend: set backend.url (or --backend-url) or backend.scripted (or --scripted)");
    }
    if (config.backend.model.empty()) throw ConfigError(kModule, "backend.model is required with backend.url");
  }
  if (!(config.backend.temperature >= 0.0)) throw ConfigError(kModule, "backend.temperature must be >= 0");
  if (config.backend.timeout_ms < 1) throw ConfigError(kModule, "backend.timeout_ms must be >= 1");
  if (config.backend.max_retries < 0) throw ConfigError(kModule, "backend.max_retries must be >= 0");
  if (config.backend.initial_backoff_ms < 0) throw ConfigError(kModule, "backend.initial_backoff_ms must be >= 0");

  if (config.experiment == ExperimentKind::bfi2) {
    if (config.bfi2.items.empty()) throw ConfigError(kModule, "bfi2.items must name an item bank file");
    if (config.bfi2.levels.empty()) throw ConfigError(kModule, "bfi2.levels is empty");
    for (int level : config.bfi2.levels) require_level("bfi2.levels entries", level);
    if (config.bfi2.runs < 1) throw ConfigError(kModule, "bfi2.runs must be >= 1");
    return;
  }

  if (config.dataset.path.empty()) throw ConfigError(kModule, "dataset.path must name a dataset file");
  const auto kind = config.dataset_kind();
  if (config.debate.rounds < 1) throw ConfigError(kModule, "debate.rounds must be >= 1");
  if (config.debate.runs < 1) throw ConfigError(kModule, "debate.runs must be >= 1");
  if (config.debate.persuasion_max_sentences < 1 || config.debate.peer_max_sentences < 1) {
    throw ConfigError(kModule, "debate sentence limits must be >= 1");
  }

  switch (config.experiment) {
    case ExperimentKind::open_mindedness:
      if (kind != DatasetKind::aporia) throw ConfigError(kModule, "open_mindedness needs an Aporia dataset");
      if (config.open_mindedness.levels.empty()) throw ConfigError(kModule, "open_mindedness.levels is empty");
      for (int level : config.open_mindedness.levels) require_level("open_mindedness.levels entries", level);
      if (config.open_mindedness.directions.empty()) {
        throw ConfigError(kModule, "open_mindedness.directions is empty");
      }
      if (config.open_mindedness.runs < 1) throw ConfigError(kModule, "open_mindedness.runs must be >= 1");
      break;
    case ExperimentKind::persuasion:
      if (kind != DatasetKind::aporia) throw ConfigError(kModule, "persuasion needs an Aporia dataset");
      if (config.persuasion.conditions.empty()) throw ConfigError(kModule, "persuasion.conditions is empty");
      require_level("persuasion.target_openness", config.persuasion.spec.target_openness);
      require_level("persuasion.persuader_openness", config.persuasion.spec.persuader_openness);
      require_level("persuasion.target_strength", config.persuasion.spec.target_strength);
      break;
    case ExperimentKind::peer_pressure:
      for (int size : config.peer_group_sizes()) {
        if (size < 1) throw ConfigError(kModule, "peer_pressure.group_sizes entries must be >= 1");
      }
      require_level("peer_pressure.openness", config.peer_pressure.spec.openness);
      require_level("peer_pressure.initial_strength", config.peer_pressure.spec.initial_strength);
      if (const auto t = config.peer_pressure.spec.change_rule.strength_threshold; t && (*t < 0 || *t > 5)) {
        throw ConfigError(kModule, "peer_pressure.change_threshold must be in 0..5");
      }
      break;
    case ExperimentKind::bfi2:
      break;
  }
}

std::string to_toml(const RunConfig& c) {
  std::string out;
  out += "# Configuration that produced this output directory.\n";
  out += "experiment = " + toml::quote(ex::to_string(c.experiment)) + "\n";
  out += "seed = " + std::to_string(c.seed) + "\n";
  out += "out = " + path_text(c.out) + "\n";
  out += "concurrency = " + std::to_string(c.concurrency) + "\n";

  out += "\n[dataset]\n";
  if (c.dataset.kind) out += "kind = " + toml::quote(to_string(*c.dataset.kind)) + "\n";
  out += "path = " + path_text(c.dataset.path) + "\n";
  out += "samples = " + std::to_string(c.dataset.samples) + "\n";

  out += "\n[backend]\n";
  out += "url = " + toml::quote(c.backend.url) + "\n";
  out += "model = " + toml::quote(c.backend.model) + "\n";
  out += "temperature = " + ex::format_double(c.backend.temperature) + "\n";
  out += "timeout_ms = " + std::to_string(c.backend.timeout_ms) + "\n";
  out += "max_retries = " + std::to_string(c.backend.max_retries) + "\n";
  out += "initial_backoff_ms = " + std::to_string(c.backend.initial_backoff_ms) + "\n";
  if (c.backend.scripted) out += "scripted = " + path_text(*c.backend.scripted) + "\n";
  out += std::string("# api_key is not recorded; set ") + kApiKeyEnv + " when re-running.\n";

  out += "\n[debate]\n";
  out += "rounds = " + std::to_string(c.debate.rounds) + "\n";
  out += "runs = " + std::to_string(c.debate.runs) + "\n";
  out += std::string("reassess_every_round = ") + (c.debate.reassess_every_round ? "true" : "false") + "\n";
  out += "statement_window = " + toml::quote(to_string(c.debate.statement_window)) + "\n";
  out += "persuasion_max_sentences = " + std::to_string(c.debate.persuasion_max_sentences) + "\n";
  out += "peer_max_sentences = " + std::to_string(c.debate.peer_max_sentences) + "\n";

  out += "\n[bfi2]\n";
  out += "items = " + path_text(c.bfi2.items) + "\n";
  out += "levels = " + int_array(c.bfi2.levels) + "\n";
  out += "runs = " + std::to_string(c.bfi2.runs) + "\n";

  out += "\n[open_mindedness]\n";
  out += "levels = " + int_array(c.open_mindedness.levels) + "\n";
  std::vector<std::string> directions;
  for (auto d : c.open_mindedness.directions) directions.push_back(prompts::to_string(d));
  out += "directions = " + string_array(directions) + "\n";
  out += "runs = " + std::to_string(c.open_mindedness.runs) + "\n";

  out += "\n[persuasion]\n";
  std::vector<std::string> labels;
  for (const auto& condition : c.persuasion.conditions) labels.push_back(condition.label());
  out += "conditions = " + string_array(labels) + "\n";
  out += "target_openness = " + std::to_string(c.persuasion.spec.target_openness) + "\n";
  out += "persuader_openness = " + std::to_string(c.persuasion.spec.persuader_openness) + "\n";
  out += "target_strength = " + std::to_string(c.persuasion.spec.target_strength) + "\n";

  out += "\n[peer_pressure]\n";
  out += "group_sizes = " + int_array(c.peer_pressure.group_sizes) + "\n";
  out += "openness = " + std::to_string(c.peer_pressure.spec.openness) + "\n";
  out += "initial_strength = " + std::to_string(c.peer_pressure.spec.initial_strength) + "\n";
  if (const auto t = c.peer_pressure.spec.change_rule.strength_threshold) {
    out += "change_threshold = " + std::to_string(*t) + "\n";
  }
  return out;
}

}  // namespace beliefsim
