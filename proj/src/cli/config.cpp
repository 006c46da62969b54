#include "elearn/cli/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace elearn::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void syntax(std::size_t line, const std::string& what) {
  throw Error("config line " + std::to_string(line) + ": " + what);
}

// Drops a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && in_string) {
      ++i;
    } else if (s[i] == '"') {
      in_string = !in_string;
    } else if (s[i] == '#' && !in_string) {
      return s.substr(0, i);
    }
  }
  return s;
}

Json parse_scalar(const std::string& raw, std::size_t line) {
  const std::string v = trim(raw);
  if (v.empty()) syntax(line, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') syntax(line, "unterminated string");
    std::string out;
    for (std::size_t i = 1; i + 1 < v.size(); ++i) {
      if (v[i] != '\\') {
        out += v[i];
        continue;
      }
      if (i + 2 >= v.size()) syntax(line, "dangling escape");
      switch (v[++i]) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: syntax(line, "unsupported escape");
      }
    }
    return out;
  }
  if (v == "true") return true;
  if (v == "false") return false;
  std::string digits;
  for (char c : v) {
    if (c != '_') digits += c;
  }
  const bool is_float = digits.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t used = 0;
    if (is_float) {
      const double d = std::stod(digits, &used);
      if (used == digits.size() && std::isfinite(d)) return d;
    } else {
      const long long i = std::stoll(digits, &used);
      if (used == digits.size()) return static_cast<std::int64_t>(i);
    }
  } catch (const std::exception&) {
  }
  syntax(line, "cannot parse value '" + v + "'");
}

Json parse_value(const std::string& raw, std::size_t line) {
  const std::string v = trim(raw);
  if (v.empty() || v.front() != '[') return parse_scalar(v, line);
  if (v.back() != ']') syntax(line, "arrays must close on the same line");
  Json arr = Json::array();
  std::string item;
  bool in_string = false;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const char c = v[i];
    if (c == '"' && (i == 0 || v[i - 1] != '\\')) in_string = !in_string;
    if (c == ',' && !in_string) {
      if (trim(item).empty()) syntax(line, "empty array element");
      arr.push_back(parse_scalar(item, line));
      item.clear();
    } else {
      item += c;
    }
  }
  if (!trim(item).empty()) arr.push_back(parse_scalar(item, line));
  return arr;
}

// Pulls typed keys out of one section and remembers which were used.
class Section {
 public:
  Section(const Json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) obj_ = doc.at(name_);
    if (!obj_.is_object()) obj_ = Json::object();
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!obj_.contains(key)) return;
    used_.insert(key);
    const Json& v = obj_.at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error("expected a boolean");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw Error("expected an integer");
        const auto i = v.get<std::int64_t>();
        if (std::is_unsigned_v<T> && i < 0) throw Error("expected a non-negative integer");
        out = static_cast<T>(i);
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw Error("expected a number");
        out = v.get<double>();
      } else {
        if (!v.is_string()) throw Error("expected a string");
        out = v.get<std::string>();
      }
    } catch (const Error& e) {
      throw Error("config [" + name_ + "] " + key + ": " + e.what());
    }
  }

  template <class T>
  void get_list(const std::string& key, std::vector<T>& out) {
    if (!obj_.contains(key)) return;
    used_.insert(key);
    const Json& v = obj_.at(key);
    if (!v.is_array()) throw Error("config [" + name_ + "] " + key + ": expected an array");
    out.clear();
    for (const Json& x : v) {
      if (!x.is_number() || (std::is_integral_v<T> && !x.is_number_integer())) {
        throw Error("config [" + name_ + "] " + key + ": expected numeric elements");
      }
      if (std::is_unsigned_v<T> && x.get<double>() < 0) {
        throw Error("config [" + name_ + "] " + key + ": expected non-negative elements");
      }
      out.push_back(x.get<T>());
    }
  }

  void finish() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!used_.count(k)) throw Error("config [" + name_ + "]: unknown key '" + k + "'");
    }
  }

 private:
  std::string name_;
  Json obj_;
  std::set<std::string> used_;
};

}  // namespace

Json parse_toml(const std::string& text) {
  Json doc = Json::object();
  std::string section;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') syntax(line, "malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) syntax(line, "empty section name");
      if (!doc.contains(section)) doc[section] = Json::object();
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) syntax(line, "expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) syntax(line, "empty key");
    Json& sec = doc[section];
    if (sec.contains(key)) syntax(line, "duplicate key '" + key + "'");
    sec[key] = parse_value(s.substr(eq + 1), line);
  }
  return doc;
}

Json load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

SystemKind parse_system(const std::string& s) {
  if (s == "prinz") return SystemKind::Prinz;
  if (s == "sswm") return SystemKind::Sswm;
  if (s == "csv") return SystemKind::Csv;
  throw Error("unknown system '" + s + "' (expected prinz, sswm or csv)");
}

std::string to_string(SystemKind s) {
  switch (s) {
    case SystemKind::Prinz: return "prinz";
    case SystemKind::Sswm: return "sswm";
    case SystemKind::Csv: return "csv";
  }
  return "?";
}

std::size_t ExperimentConfig::lag_time() const {
  switch (systems.system) {
    case SystemKind::Prinz: return systems.prinz.lag_time;
    case SystemKind::Sswm: return systems.sswm.lag_time;
    case SystemKind::Csv: return systems.csv_lag;
  }
  return 1;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw Error("config: seeds must not be empty");
  if (lag_time() == 0) throw Error("config: lag time must be positive");
  if (systems.system == SystemKind::Prinz) systems.prinz.validate();
  if (systems.system == SystemKind::Sswm) systems.sswm.validate();
  if (systems.system == SystemKind::Csv && systems.data_dir.empty()) {
    if (systems.train_csv.empty()) throw Error("config: csv system needs train_csv or data_dir");
    if (!std::filesystem::exists(systems.train_csv)) throw Error("config: train_csv not found: " + systems.train_csv);
    if (!systems.test_csv.empty() && !std::filesystem::exists(systems.test_csv)) {
      throw Error("config: test_csv not found: " + systems.test_csv);
    }
  }
  if (systems.csv_truth != "none" && systems.csv_truth != "prinz") {
    throw Error("config: csv_truth must be none or prinz");
  }
  if (!systems.data_dir.empty() && !std::filesystem::is_directory(systems.data_dir)) {
    throw Error("config: data_dir not found: " + systems.data_dir);
  }
  if (!freeze_imports.empty() && !std::filesystem::exists(freeze_imports)) {
    throw Error("config: freeze_imports checkpoint not found: " + freeze_imports);
  }
  if (!(systems.train_fraction > 0.0 && systems.train_fraction < 1.0)) {
    throw Error("config: train_fraction must lie in (0, 1)");
  }
  if (!(systems.data_fraction > 0.0 && systems.data_fraction <= 1.0)) {
    throw Error("config: data_fraction must lie in (0, 1]");
  }
  if (!(systems.observation_noise >= 0.0)) throw Error("config: observation_noise must be non-negative");
  if (codebook.K == 0 || codebook.epochs == 0 || codebook.batch_size == 0 || codebook.stride == 0) {
    throw Error("config: codebook K, epochs, batch_size and stride must be positive");
  }
  if (!(codebook.learning_rate > 0.0) || !(training.learning_rate > 0.0)) {
    throw Error("config: learning rates must be positive");
  }
  if (training.epochs == 0 || training.start_batch == 0) {
    throw Error("config: training epochs and start_batch must be positive");
  }
  if (!(evaluation.grid_lower < evaluation.grid_upper)) throw Error("config: grid_lower must be below grid_upper");
  if (evaluation.grid_bins == 1 || evaluation.rho_f_bins < 2) throw Error("config: grids need at least 2 bins");
  if (evaluation.rollouts == 0) throw Error("config: rollouts must be positive");
}

ExperimentConfig config_from_json(const Json& doc) {
  static const std::set<std::string> kSections{"systems", "codebook", "landscape", "training",
                                               "evaluation", "cli", "sweep"};
  for (const auto& [name, v] : doc.items()) {
    if (!kSections.count(name)) {
      throw Error("config: unknown section [" + name + "]" + (name.empty() ? " (keys before any header)" : ""));
    }
  }
  ExperimentConfig cfg;

  Section sys(doc, "systems");
  std::string s = to_string(cfg.systems.system);
  sys.get("system", s);
  cfg.systems.system = parse_system(s);
  auto& pz = cfg.systems.prinz;
  sys.get("prinz_trajectories", pz.n_trajectories);
  sys.get("prinz_steps", pz.n_steps);
  sys.get("prinz_dt", pz.dt);
  sys.get("prinz_sigma", pz.noise_sigma);
  sys.get("prinz_drift_sign", pz.drift_sign);
  sys.get("prinz_init_low", pz.init_low);
  sys.get("prinz_init_high", pz.init_high);
  sys.get("prinz_lag", pz.lag_time);
  auto& sw = cfg.systems.sswm;
  sys.get("sswm_population", sw.population_size);
  sys.get("sswm_trajectories", sw.n_trajectories);
  sys.get("sswm_steps", sw.n_steps);
  sys.get("sswm_lag", sw.lag_time);
  std::string conv = sswm::to_string(sw.convention);
  sys.get("kimura_sign_convention", conv);
  sw.convention = sswm::parse_sign_convention(conv);
  auto& lo = cfg.systems.landscape;
  sys.get("n_bumps", lo.n_bumps);
  sys.get("amplitude_min", lo.amplitude_min);
  sys.get("amplitude_max", lo.amplitude_max);
  sys.get("width_min", lo.width_min);
  sys.get("width_max", lo.width_max);
  sys.get("train_csv", cfg.systems.train_csv);
  sys.get("test_csv", cfg.systems.test_csv);
  std::string kind = cfg.systems.csv_kind == StateKind::Continuous ? "continuous" : "discrete";
  sys.get("csv_kind", kind);
  if (kind != "continuous" && kind != "discrete") throw Error("config: csv_kind must be continuous or discrete");
  cfg.systems.csv_kind = kind == "continuous" ? StateKind::Continuous : StateKind::Discrete;
  sys.get("csv_lag", cfg.systems.csv_lag);
  sys.get("csv_state_space_size", cfg.systems.csv_state_space_size);
  sys.get("csv_truth", cfg.systems.csv_truth);
  sys.get("data_dir", cfg.systems.data_dir);
  sys.get("train_fraction", cfg.systems.train_fraction);
  sys.get("observation_noise", cfg.systems.observation_noise);
  sys.get("data_fraction", cfg.systems.data_fraction);
  sys.finish();

  Section cb(doc, "codebook");
  cb.get("K", cfg.codebook.K);
  cb.get("epochs", cfg.codebook.epochs);
  cb.get("batch_size", cfg.codebook.batch_size);
  cb.get("learning_rate", cfg.codebook.learning_rate);
  cb.get("lr_decay", cfg.codebook.lr_decay);
  cb.get("beta_commit", cfg.codebook.beta_commit);
  cb.get("stride", cfg.codebook.stride);
  std::string init = codebook::to_string(cfg.codebook.init);
  cb.get("init", init);
  cfg.codebook.init = codebook::parse_codebook_init(init);
  cb.finish();

  Section ls(doc, "landscape");
  auto& f = cfg.training.fpe;
  ls.get("n_int", f.n_int);
  ls.get("horizon", f.horizon);
  ls.get("sigmoid_scale", f.sigmoid_scale);
  ls.get("smoothing", f.smoothing);
  ls.get("serial_kernels", f.serial_kernels);
  ls.finish();

  Section tr(doc, "training");
  auto& t = cfg.training;
  tr.get("epochs", t.epochs);
  tr.get("start_batch", t.start_batch);
  tr.get("learning_rate", t.learning_rate);
  tr.get("lr_decay", t.lr_decay);
  tr.get("laplace_alpha", t.laplace_alpha);
  tr.get("kT", t.kT);
  tr.get("disable_phy", t.ablation.disable_phy);
  tr.get("disable_latent", t.ablation.disable_latent);
  tr.get("bypass_phi_psi", t.ablation.bypass_phi_psi);
  tr.get("weight_latent", t.weights.latent);
  tr.get("weight_code", t.weights.code);
  tr.get("weight_phy", t.weights.phy);
  tr.get("freeze_imports", cfg.freeze_imports);
  tr.finish();

  Section ev(doc, "evaluation");
  auto& e = cfg.evaluation;
  ev.get("grid_bins", e.grid_bins);
  ev.get("grid_lower", e.grid_lower);
  ev.get("grid_upper", e.grid_upper);
  ev.get("rho_f_bins", e.rho_f_bins);
  ev.get("rollouts", e.rollouts);
  ev.get("ransac_iterations", e.ransac_iterations);
  ev.get("ape_hidden", e.ape.hidden);
  ev.get("ape_epochs", e.ape.epochs);
  ev.get("ape_batch_size", e.ape.batch_size);
  ev.get("ape_learning_rate", e.ape.learning_rate);
  ev.get("ape_noise", e.ape.noise);
  ev.get("ape_stride", e.ape.stride);
  ev.finish();

  Section cl(doc, "cli");
  cl.get("output_dir", cfg.output_dir);
  cl.get_list("seeds", cfg.seeds);
  cl.finish();

  Section sweep(doc, "sweep");
  sweep.get("axis", cfg.sweep.axis);
  sweep.get_list("values", cfg.sweep.values);
  sweep.finish();

  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return config_from_json(load_toml(path)); }

Json config_to_json(const ExperimentConfig& cfg) {
  const auto& sy = cfg.systems;
  Json j;
  j["systems"] = {
      {"system", to_string(sy.system)},
      {"prinz_trajectories", sy.prinz.n_trajectories},
      {"prinz_steps", sy.prinz.n_steps},
      {"prinz_dt", sy.prinz.dt},
      {"prinz_sigma", sy.prinz.noise_sigma},
      {"prinz_drift_sign", sy.prinz.drift_sign},
      {"prinz_init_low", sy.prinz.init_low},
      {"prinz_init_high", sy.prinz.init_high},
      {"prinz_lag", sy.prinz.lag_time},
      {"sswm_population", sy.sswm.population_size},
      {"sswm_trajectories", sy.sswm.n_trajectories},
      {"sswm_steps", sy.sswm.n_steps},
      {"sswm_lag", sy.sswm.lag_time},
      {"kimura_sign_convention", sswm::to_string(sy.sswm.convention)},
      {"n_bumps", sy.landscape.n_bumps},
      {"amplitude_min", sy.landscape.amplitude_min},
      {"amplitude_max", sy.landscape.amplitude_max},
      {"width_min", sy.landscape.width_min},
      {"width_max", sy.landscape.width_max},
      {"train_csv", sy.train_csv},
      {"test_csv", sy.test_csv},
      {"csv_kind", sy.csv_kind == StateKind::Continuous ? "continuous" : "discrete"},
      {"csv_lag", sy.csv_lag},
      {"csv_state_space_size", sy.csv_state_space_size},
      {"csv_truth", sy.csv_truth},
      {"data_dir", sy.data_dir},
      {"train_fraction", sy.train_fraction},
      {"observation_noise", sy.observation_noise},
      {"data_fraction", sy.data_fraction},
  };
  const auto& c = cfg.codebook;
  j["codebook"] = {{"K", c.K},
                   {"epochs", c.epochs},
                   {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate},
                   {"lr_decay", c.lr_decay},
                   {"beta_commit", c.beta_commit},
                   {"stride", c.stride},
                   {"init", codebook::to_string(c.init)}};
  const auto& f = cfg.training.fpe;
  j["landscape"] = {{"n_int", f.n_int},
                    {"horizon", f.horizon},
                    {"sigmoid_scale", f.sigmoid_scale},
                    {"smoothing", f.smoothing},
                    {"serial_kernels", f.serial_kernels}};
  const auto& t = cfg.training;
  j["training"] = {{"epochs", t.epochs},
                   {"start_batch", t.start_batch},
                   {"learning_rate", t.learning_rate},
                   {"lr_decay", t.lr_decay},
                   {"laplace_alpha", t.laplace_alpha},
                   {"kT", t.kT},
                   {"disable_phy", t.ablation.disable_phy},
                   {"disable_latent", t.ablation.disable_latent},
                   {"bypass_phi_psi", t.ablation.bypass_phi_psi},
                   {"weight_latent", t.weights.latent},
                   {"weight_code", t.weights.code},
                   {"weight_phy", t.weights.phy},
                   {"freeze_imports", cfg.freeze_imports}};
  const auto& e = cfg.evaluation;
  j["evaluation"] = {{"grid_bins", e.grid_bins},
                     {"grid_lower", e.grid_lower},
                     {"grid_upper", e.grid_upper},
                     {"rho_f_bins", e.rho_f_bins},
                     {"rollouts", e.rollouts},
                     {"ransac_iterations", e.ransac_iterations},
                     {"ape_hidden", e.ape.hidden},
                     {"ape_epochs", e.ape.epochs},
                     {"ape_batch_size", e.ape.batch_size},
                     {"ape_learning_rate", e.ape.learning_rate},
                     {"ape_noise", e.ape.noise},
                     {"ape_stride", e.ape.stride}};
  j["cli"] = {{"output_dir", cfg.output_dir}, {"seeds", cfg.seeds}};
  j["sweep"] = {{"axis", cfg.sweep.axis}, {"values", cfg.sweep.values}};
  return j;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  // Output location and seed list do not change any single run's numbers.
  Json j = config_to_json(cfg);
  j["cli"].erase("output_dir");
  j["cli"].erase("seeds");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace elearn::cli
