#include "mesh/run_config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace mesh {

const char* profile_name(Profile p) { return p == Profile::desk ? "desk" : "full"; }

Profile parse_profile(const std::string& text) {
  if (text == "full") return Profile::full;
  if (text == "desk") return Profile::desk;
  throw ConfigError("profile must be full or desk, got '" + text + "'");
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* end = value.data() + value.size();
  const auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || p != end) throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  throw ConfigError("'" + key + "' expects true or false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Field {
  const char* key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

Field size_field(const char* key, std::size_t RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_number<std::size_t>(key, v); },
          [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field u64_field(const char* key, std::uint64_t RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_number<std::uint64_t>(key, v); },
          [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Field double_field(const char* key, double RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_number<double>(key, v); },
          [=](const RunConfig& c) { return format_double(c.*member); }};
}

Field bool_field(const char* key, bool RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = parse_bool(key, v); },
          [=](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field ablation_field(const char* key, bool AblationConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.ablation.*member = parse_bool(key, v); },
          [=](const RunConfig& c) { return std::string(c.ablation.*member ? "true" : "false"); }};
}

Field string_field(const char* key, std::string RunConfig::*member) {
  return {key, [=](RunConfig& c, const std::string& v) { c.*member = v; },
          [=](const RunConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      string_field("dataset", &RunConfig::dataset),
      {"profile", [](RunConfig& c, const std::string& v) { c.profile = parse_profile(v); },
       [](const RunConfig& c) { return std::string(profile_name(c.profile)); }},
      size_field("dim", &RunConfig::dim),
      size_field("llm_dim", &RunConfig::llm_dim),
      size_field("adapter_hidden", &RunConfig::adapter_hidden),
      size_field("channels", &RunConfig::channels),
      size_field("kernel_width", &RunConfig::kernel_width),
      size_field("window", &RunConfig::window),
      size_field("layers", &RunConfig::layers),
      double_field("dropout", &RunConfig::dropout),
      bool_field("normalize", &RunConfig::normalize),
      size_field("experts_historical", &RunConfig::experts_historical),
      size_field("experts_non_historical", &RunConfig::experts_non_historical),
      double_field("omega", &RunConfig::omega),
      double_field("learning_rate", &RunConfig::learning_rate),
      size_field("stage0_epochs", &RunConfig::stage0_epochs),
      size_field("stage1_epochs", &RunConfig::stage1_epochs),
      u64_field("seed", &RunConfig::seed),
      {"loss_mode", [](RunConfig& c, const std::string& v) { c.loss_mode = parse_loss_mode(v); },
       [](const RunConfig& c) { return std::string(loss_mode_name(c.loss_mode)); }},
      size_field("batch_size", &RunConfig::batch_size),
      ablation_field("disable_semantic", &AblationConfig::disable_semantic),
      ablation_field("disable_structural", &AblationConfig::disable_structural),
      ablation_field("disable_event_aware", &AblationConfig::disable_event_aware),
      ablation_field("disable_prediction_expert", &AblationConfig::disable_prediction_expert),
      {"gate_input", [](RunConfig& c, const std::string& v) { c.ablation.gate_input = parse_gate_input(v); },
       [](const RunConfig& c) { return std::string(gate_input_name(c.ablation.gate_input)); }},
      string_field("embeddings", &RunConfig::embeddings),
      bool_field("synthetic_embeddings", &RunConfig::synthetic_embeddings),
      u64_field("synthetic_seed", &RunConfig::synthetic_seed),
      size_field("max_timestamps", &RunConfig::max_timestamps),
      size_field("cache_budget_mb", &RunConfig::cache_budget_mb),
      string_field("out", &RunConfig::out),
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const Field& f : fields())
    if (key == f.key) return f;
  throw ConfigError("unknown configuration key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

RunConfig RunConfig::preset(Profile profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == Profile::desk) {
    c.dim = 32;
    c.llm_dim = 128;
    c.channels = 8;
    c.window = 3;
    c.stage0_epochs = 30;
    c.stage1_epochs = 20;
    c.synthetic_embeddings = true;
    c.max_timestamps = 100;
    c.cache_budget_mb = 512;
  }
  return c;
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.emplace_back(f.key);
    return k;
  }();
  return out;
}

void RunConfig::set(const std::string& key, const std::string& value) { field(key).set(*this, value); }

std::string RunConfig::get(const std::string& key) const { return field(key).get(*this); }

std::string RunConfig::echo() const {
  std::string out;
  for (const Field& f : fields()) out += std::string(f.key) + " = " + f.get(*this) + "\n";
  return out;
}

void RunConfig::validate() const {
  auto positive = [](std::size_t v, const char* key) {
    if (v == 0) throw ConfigError(std::string(key) + " must be positive");
  };
  positive(dim, "dim");
  positive(llm_dim, "llm_dim");
  positive(adapter_hidden, "adapter_hidden");
  positive(channels, "channels");
  positive(window, "window");
  positive(experts_historical, "experts_historical");
  positive(experts_non_historical, "experts_non_historical");
  if (kernel_width % 2 == 0) throw ConfigError("kernel_width must be odd");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(omega >= 0)) throw ConfigError("omega must be non-negative");
  if (!(learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  ablation.validate();
  if (embeddings.empty() && !synthetic_embeddings)
    throw ConfigError("no semantic embedding file given and synthetic_embeddings is off");
}

ModelConfig RunConfig::model_config(const Vocabulary& augmented) const {
  ModelConfig m;
  m.num_entities = augmented.num_entities();
  m.num_relations = augmented.num_relations();
  m.dim = dim;
  m.llm_dim = llm_dim;
  m.adapter_hidden = adapter_hidden;
  m.channels = channels;
  m.kernel_width = kernel_width;
  m.window = window;
  m.layers = layers;
  m.dropout = static_cast<Real>(dropout);
  m.normalize = normalize;
  m.experts = {experts_historical, experts_non_historical};
  m.ablation = ablation;
  m.seed = seed;
  return m;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.stage0_epochs = stage0_epochs;
  t.stage1_epochs = stage1_epochs;
  t.learning_rate = static_cast<Real>(learning_rate);
  t.omega = static_cast<Real>(omega);
  t.loss_mode = loss_mode;
  t.batch_size = batch_size;
  t.seed = seed;
  t.cache_budget_bytes = cache_budget_mb << 20;
  return t;
}

Settings parse_settings(const std::string& text, const std::string& origin) {
  Settings out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(number) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    field(key);  // rejects unknown keys with the key name
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

Settings read_settings_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_settings(text.str(), file.string());
}

Settings environment_settings() {
  Settings out;
  for (const std::string& key : RunConfig::keys()) {
    std::string name = "MESH_" + key;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::toupper(ch); });
    if (const char* v = std::getenv(name.c_str())) out[key] = v;
  }
  return out;
}

RunConfig resolve_config(const Settings& file, const Settings& environment, const Settings& flags) {
  Profile profile = Profile::full;
  for (const Settings* layer : {&file, &environment, &flags})
    if (const auto it = layer->find("profile"); it != layer->end()) profile = parse_profile(it->second);
  RunConfig c = RunConfig::preset(profile);
  for (const Settings* layer : {&file, &environment, &flags})
    for (const auto& [k, v] : *layer) c.set(k, v);
  return c;
}

}  // namespace mesh
