#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include "byzsim/harness.hpp"

namespace byzsim {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool is_auto(const std::string& v) { return lower(v) == "auto"; }

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ArgumentError("option '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  return parse_number<double>(key, value);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return parse_number<std::size_t>(key, value);
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = lower(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ArgumentError("option '" + key + "': expected a boolean, got '" + value + "'");
}

std::string real_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

template <class T>
std::string opt_text(const std::optional<T>& v) {
  if (!v) return "auto";
  if constexpr (std::is_floating_point_v<T>) {
    return real_text(*v);
  } else {
    return std::to_string(*v);
  }
}

std::string attack_name(const AttackKind& a) {
  struct V {
    std::string operator()(const NoAttack&) const { return "none"; }
    std::string operator()(const BitFlip&) const { return "bf"; }
    std::string operator()(const LabelFlip&) const { return "lf"; }
    std::string operator()(const InnerProductManipulation&) const { return "ipm"; }
    std::string operator()(const ALittleIsEnough&) const { return "alie"; }
  };
  return std::visit(V{}, a);
}

std::optional<double> attack_strength(const AttackKind& a) {
  if (const auto* ipm = std::get_if<InnerProductManipulation>(&a)) return ipm->z;
  if (const auto* alie = std::get_if<ALittleIsEnough>(&a)) return alie->z;
  return std::nullopt;
}

using Setter = std::function<void(ExperimentConfig&, const std::string& key, const std::string& value)>;

const std::unordered_map<std::string, Setter>& setters() {
  static const std::unordered_map<std::string, Setter> table = {
      {"data",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const std::string s = lower(v);
         if (s == "phishing-synthetic") c.source = DataSource::PhishingSynthetic;
         else if (s == "libsvm") c.source = DataSource::LibSVM;
         else if (s == "quadratic") c.source = DataSource::Quadratic;
         else throw ArgumentError("option '" + k + "': unknown data source '" + v + "'");
       }},
      {"data_path",
       [](ExperimentConfig& c, const std::string&, const std::string& v) {
         c.data_path = v;
         c.source = DataSource::LibSVM;
       }},
      {"samples", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.samples = parse_size(k, v); }},
      {"dim",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.dim = is_auto(v) ? std::nullopt : std::optional(parse_size(k, v));
       }},
      {"data_seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.data_seed = parse_number<std::uint64_t>(k, v); }},
      {"n", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n = parse_size(k, v); }},
      {"n_byz", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.n_byz = parse_size(k, v); }},
      {"partition",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const std::string s = lower(v);
         if (s == "homogeneous") c.partition = Partition::Homogeneous;
         else if (s == "heterogeneous") c.partition = Partition::HeterogeneousContiguous;
         else throw ArgumentError("option '" + k + "': expected homogeneous or heterogeneous");
       }},
      {"regularizer",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const std::string s = lower(v);
         if (s == "nonconvex") c.reg.kind = RegularizerKind::NonConvex;
         else if (s == "ridge") c.reg.kind = RegularizerKind::Ridge;
         else throw ArgumentError("option '" + k + "': expected nonconvex or ridge");
       }},
      {"lambda", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.reg.lambda = parse_real(k, v); }},
      {"algo", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.method = parse_method(lower(v)); }},
      {"compressor", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.compressor = lower(v); }},
      {"k",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.k = is_auto(v) ? std::nullopt : std::optional(parse_size(k, v));
       }},
      {"downlink", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.downlink = lower(v); }},
      {"downlink_k",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.downlink_k = is_auto(v) ? std::nullopt : std::optional(parse_size(k, v));
       }},
      {"agg", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.aggregator = lower(v); }},
      {"bucket_s",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.bucket_s = is_auto(v) ? std::nullopt : std::optional(parse_size(k, v));
       }},
      {"agg_c",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.agg_c = is_auto(v) ? std::nullopt : std::optional(parse_real(k, v));
       }},
      {"heterogeneity_b", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.heterogeneity_B = parse_real(k, v); }},
      {"batch",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.batch = is_auto(v) ? std::nullopt : std::optional(parse_size(k, v));
       }},
      {"batch_fraction", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.batch_fraction = parse_real(k, v); }},
      {"p",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.p = is_auto(v) ? std::nullopt : std::optional(parse_real(k, v));
       }},
      {"a",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.a = is_auto(v) ? std::nullopt : std::optional(parse_real(k, v));
       }},
      {"stepsize",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         const std::string s = lower(v);
         if (s == "theory") c.stepsize_mode = StepsizeMode::Theoretical;
         else if (s == "explicit") c.stepsize_mode = StepsizeMode::Explicit;
         else throw ArgumentError("option '" + k + "': expected theory or explicit");
       }},
      {"gamma",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.gamma = parse_real(k, v);
         c.stepsize_mode = StepsizeMode::Explicit;
       }},
      {"gamma_mult", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.gamma_mult = parse_real(k, v); }},
      {"pl_stepsize", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.pl_stepsize = parse_bool(k, v); }},
      {"attack", [](ExperimentConfig& c, const std::string&, const std::string& v) { c.attack = parse_attack(lower(v)); }},
      {"attack_z",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.attack_z = is_auto(v) ? std::nullopt : std::optional(parse_real(k, v));
       }},
      {"rounds", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.rounds = parse_size(k, v); }},
      {"metrics_every", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.metrics_every = parse_size(k, v); }},
      {"f_star",
       [](ExperimentConfig& c, const std::string& k, const std::string& v) {
         c.f_star = is_auto(v) ? std::nullopt : std::optional(parse_real(k, v));
       }},
      {"estimate_f_star", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.estimate_f_star = parse_bool(k, v); }},
      {"f_star_tol", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.f_star_tol = parse_real(k, v); }},
      {"seed", [](ExperimentConfig& c, const std::string& k, const std::string& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
  };
  return table;
}

}  // namespace

AttackKind parse_attack(const std::string& name, std::optional<double> z) {
  if (name == "none") return NoAttack{};
  if (name == "bf") return BitFlip{};
  if (name == "lf") return LabelFlip{};
  if (name == "ipm") return InnerProductManipulation{z.value_or(InnerProductManipulation{}.z)};
  if (name == "alie") return ALittleIsEnough{z.value_or(ALittleIsEnough{}.z)};
  throw ArgumentError("unknown attack '" + name + "'");
}

AttackKind effective_attack(const ExperimentConfig& cfg) {
  if (!cfg.attack_z) return cfg.attack;
  return parse_attack(attack_name(cfg.attack), cfg.attack_z);
}

void apply_option(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(lower(key));
  if (it == table.end()) throw ArgumentError("unknown option '" + key + "'");
  it->second(cfg, key, value);
}

void apply_config_text(ExperimentConfig& cfg, std::istream& in) {
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", line_no);
    try {
      apply_option(cfg, key, value);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config '" + path + "'");
  ExperimentConfig cfg;
  apply_config_text(cfg, in);
  return cfg;
}

std::string to_config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  switch (cfg.source) {
    case DataSource::PhishingSynthetic: os << "data = phishing-synthetic\n"; break;
    case DataSource::LibSVM: os << "data = libsvm\ndata_path = " << cfg.data_path << "\n"; break;
    case DataSource::Quadratic: os << "data = quadratic\n"; break;
  }
  os << "samples = " << cfg.samples << "\n";
  os << "dim = " << opt_text(cfg.dim) << "\n";
  os << "data_seed = " << cfg.data_seed << "\n";
  os << "n = " << cfg.n << "\n";
  os << "n_byz = " << cfg.n_byz << "\n";
  os << "partition = "
     << (cfg.partition == Partition::Homogeneous ? "homogeneous" : "heterogeneous") << "\n";
  os << "regularizer = " << (cfg.reg.kind == RegularizerKind::Ridge ? "ridge" : "nonconvex") << "\n";
  os << "lambda = " << real_text(cfg.reg.lambda) << "\n";
  os << "algo = " << to_string(cfg.method) << "\n";
  os << "compressor = " << cfg.compressor << "\n";
  os << "k = " << opt_text(cfg.k) << "\n";
  os << "downlink = " << cfg.downlink << "\n";
  os << "downlink_k = " << opt_text(cfg.downlink_k) << "\n";
  os << "agg = " << cfg.aggregator << "\n";
  os << "bucket_s = " << opt_text(cfg.bucket_s) << "\n";
  os << "agg_c = " << opt_text(cfg.agg_c) << "\n";
  os << "heterogeneity_B = " << real_text(cfg.heterogeneity_B) << "\n";
  os << "batch = " << opt_text(cfg.batch) << "\n";
  os << "batch_fraction = " << real_text(cfg.batch_fraction) << "\n";
  os << "p = " << opt_text(cfg.p) << "\n";
  os << "a = " << opt_text(cfg.a) << "\n";
  os << "gamma_mult = " << real_text(cfg.gamma_mult) << "\n";
  if (cfg.stepsize_mode == StepsizeMode::Explicit) {
    os << "gamma = " << real_text(cfg.gamma) << "\n";
  } else {
    os << "stepsize = theory\n";
  }
  os << "pl_stepsize = " << (cfg.pl_stepsize ? "true" : "false") << "\n";
  os << "attack = " << attack_name(cfg.attack) << "\n";
  const auto z = cfg.attack_z ? cfg.attack_z : attack_strength(cfg.attack);
  os << "attack_z = " << opt_text(z) << "\n";
  os << "rounds = " << cfg.rounds << "\n";
  os << "metrics_every = " << cfg.metrics_every << "\n";
  os << "f_star = " << opt_text(cfg.f_star) << "\n";
  os << "estimate_f_star = " << (cfg.estimate_f_star ? "true" : "false") << "\n";
  os << "f_star_tol = " << real_text(cfg.f_star_tol) << "\n";
  os << "seed = " << cfg.seed << "\n";
  return os.str();
}

}  // namespace byzsim
