#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "stmala/csv.hpp"
#include "stmala/datagen.hpp"
#include "stmala/operators.hpp"
#include "stmala/proposal.hpp"
#include "stmala/types.hpp"

namespace stmala {

// Configuration problems (bad file, unknown key, missing key, bad value) are
// reported distinctly from numerical failures so the CLI can map them to
// exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}
}  // namespace detail

// Raw parse of the flat key = value format with [section] headers.  Lines
// starting with '#' are comments.  Duplicate keys are rejected.
using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

inline RawConfig parse_config_stream(std::istream& is, const std::string& what = "<stream>") {
  RawConfig raw;
  std::string line, section;
  long line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(what + ":" + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(what + ":" + std::to_string(line_no) + ": empty section name");
      raw.try_emplace(section);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(what + ":" + std::to_string(line_no) + ": expected key = value");
    if (section.empty()) throw ConfigError(what + ":" + std::to_string(line_no) + ": key outside any section");
    const std::string key = detail::trim(t.substr(0, eq));
    const std::string value = detail::trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(what + ":" + std::to_string(line_no) + ": empty key");
    if (!raw[section].try_emplace(key, value).second)
      throw ConfigError(what + ":" + std::to_string(line_no) + ": duplicate key '" + section + "." + key + "'");
  }
  return raw;
}

inline RawConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  return parse_config_stream(is, path);
}

enum class ModelKind { ToyL21, SpikeSlab, Ridged, ExternalCsv };
enum class SamplerKind { Stmala, BlockStmala, Rjmcmc };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::ToyL21: return "toy_l21";
    case ModelKind::SpikeSlab: return "spike_slab";
    case ModelKind::Ridged: return "ridged";
    case ModelKind::ExternalCsv: return "external_csv";
  }
  throw std::invalid_argument("unknown ModelKind");
}

inline std::string to_string(SamplerKind k) {
  switch (k) {
    case SamplerKind::Stmala: return "stmala";
    case SamplerKind::BlockStmala: return "block_stmala";
    case SamplerKind::Rjmcmc: return "rjmcmc";
  }
  throw std::invalid_argument("unknown SamplerKind");
}

struct ExperimentConfig {
  // [model]
  ModelKind model = ModelKind::ToyL21;
  Index n = 0, p = 0, t = 1;
  double tau = 1.0, lambda = 0.0, omega = 0.1;          // L21 family
  double theta = 1.0, a = 2.0, k = 0.08, omega_star = 0.1;  // spike-and-slab
  double ridge_v = 0.0;                                  // ridged only
  // [design]
  DesignKind design = DesignKind::IidGaussian;
  double rho = 0.0;
  // [truth]
  TruthKind truth = TruthKind::StepSignal;
  Index truth_s = 0;
  std::optional<double> noise_var;  // default: tau (L21 family) or 1/theta
  // [data] (external_csv)
  std::string g_path, y_path, x_path, g_test_path, y_test_path;
  // [sampler]
  SamplerKind sampler = SamplerKind::BlockStmala;
  Index eta = 0;  // 0 = full update
  double sigma_rj = 0.1;
  // [proposal]
  ProposalParams proposal;
  bool sigma_auto = true;  // sigma = sqrt(2 / L_g)
  // [chain]
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
  std::uint64_t seed = 0;
  // [experiment]
  int replicates = 1;
  std::string output_dir = "out";
  long mc_samples = 4096;
  Index n_test = 0;

  static ExperimentConfig from_raw(const RawConfig& raw);
  static ExperimentConfig from_file(const std::string& path) {
    return from_raw(parse_config_file(path));
  }
  RawConfig to_raw() const;  // resolved values, for the run manifest
};

namespace detail {

class SectionReader {
 public:
  SectionReader(const RawConfig& raw, std::string section) : section_(std::move(section)) {
    const auto it = raw.find(section_);
    if (it != raw.end()) kv_ = &it->second;
  }

  bool present() const { return kv_ != nullptr; }

  std::optional<std::string> get(const std::string& key) {
    consumed_.insert(key);
    if (!kv_) return std::nullopt;
    const auto it = kv_->find(key);
    if (it == kv_->end()) return std::nullopt;
    return it->second;
  }

  std::string require(const std::string& key) {
    auto v = get(key);
    if (!v) throw ConfigError("missing required key '" + section_ + "." + key + "'");
    return *v;
  }

  double get_double(const std::string& key, double fallback) {
    const auto v = get(key);
    return v ? parse_double(key, *v) : fallback;
  }

  std::optional<double> get_double_opt(const std::string& key) {
    const auto v = get(key);
    if (!v) return std::nullopt;
    return parse_double(key, *v);
  }

  double require_double(const std::string& key) { return parse_double(key, require(key)); }

  long get_long(const std::string& key, long fallback) {
    const auto v = get(key);
    return v ? parse_long(key, *v) : fallback;
  }

  long require_long(const std::string& key) { return parse_long(key, require(key)); }

  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
    const auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t pos = 0;
      const std::uint64_t r = std::stoull(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return r;
    } catch (const std::exception&) {
      throw ConfigError("bad unsigned integer for '" + section_ + "." + key + "': " + *v);
    }
  }

  // Every key of the section must have been consumed by a get/require call.
  void finish() const {
    if (!kv_) return;
    for (const auto& [key, value] : *kv_)
      if (!consumed_.count(key))
        throw ConfigError("unknown key '" + section_ + "." + key + "'");
  }

 private:
  double parse_double(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return r;
    } catch (const std::exception&) {
      throw ConfigError("bad number for '" + section_ + "." + key + "': " + v);
    }
  }
  long parse_long(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const long r = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("");
      return r;
    } catch (const std::exception&) {
      throw ConfigError("bad integer for '" + section_ + "." + key + "': " + v);
    }
  }

  std::string section_;
  const std::map<std::string, std::string>* kv_ = nullptr;
  std::set<std::string> consumed_;
};

}  // namespace detail

inline ExperimentConfig ExperimentConfig::from_raw(const RawConfig& raw) {
  static const std::set<std::string> known_sections = {"model",    "design", "truth",
                                                       "data",     "sampler", "proposal",
                                                       "chain",    "experiment"};
  for (const auto& [name, kv] : raw)
    if (!known_sections.count(name)) throw ConfigError("unknown section '[" + name + "]'");

  ExperimentConfig cfg;

  detail::SectionReader model(raw, "model");
  if (!model.present()) throw ConfigError("missing [model] section");
  {
    const std::string kind = model.require("kind");
    if (kind == "toy_l21") cfg.model = ModelKind::ToyL21;
    else if (kind == "spike_slab") cfg.model = ModelKind::SpikeSlab;
    else if (kind == "ridged") cfg.model = ModelKind::Ridged;
    else if (kind == "external_csv") cfg.model = ModelKind::ExternalCsv;
    else throw ConfigError("unknown model.kind '" + kind + "'");
  }
  const bool external = cfg.model == ModelKind::ExternalCsv;
  const bool spike = cfg.model == ModelKind::SpikeSlab;
  if (!external) {
    cfg.n = model.require_long("n");
    cfg.p = model.require_long("p");
  }
  if (spike) {
    cfg.t = 1;
    cfg.theta = model.require_double("theta");
    cfg.a = model.require_double("a");
    cfg.k = model.require_double("k");
    cfg.omega_star = model.require_double("omega_star");
  } else {
    cfg.t = external ? 0 : model.get_long("t", 1);  // external: inferred from Y
    cfg.tau = model.require_double("tau");
    cfg.lambda = model.require_double("lambda");
    cfg.omega = model.require_double("omega");
    if (cfg.model == ModelKind::Ridged) cfg.ridge_v = model.require_double("v");
  }
  model.finish();

  detail::SectionReader design(raw, "design");
  if (external) {
    if (design.present()) throw ConfigError("[design] not allowed with model.kind = external_csv");
  } else {
    if (!design.present()) throw ConfigError("missing [design] section");
    const std::string kind = design.require("kind");
    if (kind == "iid_gaussian") {
      cfg.design = DesignKind::IidGaussian;
    } else if (kind == "correlated") {
      cfg.design = DesignKind::Correlated;
      cfg.rho = design.require_double("rho");
    } else {
      throw ConfigError("unknown design.kind '" + kind + "'");
    }
  }
  design.finish();

  detail::SectionReader truth(raw, "truth");
  if (external) {
    if (truth.present()) throw ConfigError("[truth] not allowed with model.kind = external_csv");
  } else {
    if (!truth.present()) throw ConfigError("missing [truth] section");
    const std::string kind = truth.require("kind");
    if (kind == "step_signal") {
      cfg.truth = TruthKind::StepSignal;
      cfg.truth_s = truth.require_long("s");
    } else if (kind == "breiman") {
      cfg.truth = TruthKind::Breiman;
    } else {
      throw ConfigError("unknown truth.kind '" + kind + "'");
    }
    cfg.noise_var = truth.get_double_opt("noise_var");
  }
  truth.finish();

  detail::SectionReader data(raw, "data");
  if (external) {
    if (!data.present()) throw ConfigError("missing [data] section for external_csv");
    cfg.g_path = data.require("g_path");
    cfg.y_path = data.require("y_path");
    cfg.x_path = data.get("x_path").value_or("");
    cfg.g_test_path = data.get("g_test_path").value_or("");
    cfg.y_test_path = data.get("y_test_path").value_or("");
    if (cfg.g_test_path.empty() != cfg.y_test_path.empty())
      throw ConfigError("g_test_path and y_test_path must be given together");
  } else if (data.present()) {
    throw ConfigError("[data] only allowed with model.kind = external_csv");
  }
  data.finish();

  detail::SectionReader sampler(raw, "sampler");
  if (!sampler.present()) throw ConfigError("missing [sampler] section");
  {
    const std::string kind = sampler.require("kind");
    if (kind == "stmala") cfg.sampler = SamplerKind::Stmala;
    else if (kind == "block_stmala") cfg.sampler = SamplerKind::BlockStmala;
    else if (kind == "rjmcmc") cfg.sampler = SamplerKind::Rjmcmc;
    else throw ConfigError("unknown sampler.kind '" + kind + "'");
    if (cfg.sampler == SamplerKind::BlockStmala) cfg.eta = sampler.require_long("eta");
    else cfg.eta = sampler.get_long("eta", 0);
    cfg.sigma_rj = sampler.get_double("sigma_rj", 0.1);
  }
  sampler.finish();

  detail::SectionReader proposal(raw, "proposal");
  if (!proposal.present()) throw ConfigError("missing [proposal] section");
  {
    cfg.proposal.kind = operator_kind_from_string(proposal.get("operator").value_or("stvs"));
    cfg.proposal.gamma = proposal.require_double("gamma");
    const std::string sigma = proposal.require("sigma");
    if (sigma == "auto") {
      cfg.sigma_auto = true;
    } else {
      cfg.sigma_auto = false;
      cfg.proposal.sigma = [&] {
        try {
          std::size_t pos = 0;
          const double r = std::stod(sigma, &pos);
          if (pos != sigma.size()) throw std::invalid_argument("");
          return r;
        } catch (const std::exception&) {
          throw ConfigError("bad number for 'proposal.sigma': " + sigma);
        }
      }();
    }
    const std::string trunc = proposal.get("truncation").value_or("none");
    if (trunc == "none") {
      cfg.proposal.truncation.reset();
    } else {
      try {
        std::size_t pos = 0;
        const double d = std::stod(trunc, &pos);
        if (pos != trunc.size()) throw std::invalid_argument("");
        cfg.proposal.truncation = d;
      } catch (const std::exception&) {
        throw ConfigError("bad number for 'proposal.truncation': " + trunc);
      }
    }
    cfg.proposal.atom_method = atom_method_from_string(proposal.get("atom_method").value_or("exact"));
  }
  proposal.finish();

  detail::SectionReader chain(raw, "chain");
  if (!chain.present()) throw ConfigError("missing [chain] section");
  cfg.iterations = chain.require_long("iterations");
  cfg.burn_in = chain.get_long("burn_in", 0);
  cfg.thin = chain.get_long("thin", 1);
  cfg.seed = chain.get_u64("seed", 0);
  chain.finish();

  detail::SectionReader experiment(raw, "experiment");
  cfg.replicates = static_cast<int>(experiment.get_long("replicates", 1));
  cfg.output_dir = experiment.get("output_dir").value_or("out");
  cfg.mc_samples = experiment.get_long("mc_samples", 4096);
  cfg.n_test = experiment.get_long("n_test", 0);
  experiment.finish();

  // Cross-field validation (values; shapes are checked when data is built).
  if (!external && (cfg.n < 1 || cfg.p < 1 || cfg.t < 1))
    throw ConfigError("model.n, model.p, model.t must be >= 1");
  if (cfg.iterations < 1) throw ConfigError("chain.iterations must be >= 1");
  if (cfg.burn_in < 0 || cfg.burn_in >= cfg.iterations)
    throw ConfigError("chain.burn_in must be in [0, iterations)");
  if (cfg.thin < 1) throw ConfigError("chain.thin must be >= 1");
  if (cfg.replicates < 1) throw ConfigError("experiment.replicates must be >= 1");
  if (cfg.mc_samples < 1) throw ConfigError("experiment.mc_samples must be >= 1");
  if (cfg.n_test < 0) throw ConfigError("experiment.n_test must be >= 0");
  if (!(cfg.sigma_rj > 0.0)) throw ConfigError("sampler.sigma_rj must be > 0");
  if (!external && cfg.sampler == SamplerKind::BlockStmala && (cfg.eta < 1 || cfg.eta > cfg.p))
    throw ConfigError("sampler.eta must be in [1, model.p]");
  try {
    if (!cfg.sigma_auto) cfg.proposal.validate();
    else if (!(cfg.proposal.gamma > 0.0)) throw std::invalid_argument("gamma must be > 0");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("bad proposal parameters: ") + e.what());
  }
  return cfg;
}

inline RawConfig ExperimentConfig::to_raw() const {
  RawConfig raw;
  auto& m = raw["model"];
  m["kind"] = to_string(model);
  if (model != ModelKind::ExternalCsv) {
    m["n"] = std::to_string(n);
    m["p"] = std::to_string(p);
  }
  if (model == ModelKind::SpikeSlab) {
    m["theta"] = format_double(theta);
    m["a"] = format_double(a);
    m["k"] = format_double(k);
    m["omega_star"] = format_double(omega_star);
  } else {
    if (model != ModelKind::ExternalCsv) m["t"] = std::to_string(t);
    m["tau"] = format_double(tau);
    m["lambda"] = format_double(lambda);
    m["omega"] = format_double(omega);
    if (model == ModelKind::Ridged) m["v"] = format_double(ridge_v);
  }
  if (model == ModelKind::ExternalCsv) {
    auto& d = raw["data"];
    d["g_path"] = g_path;
    d["y_path"] = y_path;
    if (!x_path.empty()) d["x_path"] = x_path;
    if (!g_test_path.empty()) {
      d["g_test_path"] = g_test_path;
      d["y_test_path"] = y_test_path;
    }
  } else {
    auto& d = raw["design"];
    d["kind"] = design == DesignKind::IidGaussian ? "iid_gaussian" : "correlated";
    if (design == DesignKind::Correlated) d["rho"] = format_double(rho);
    auto& tr = raw["truth"];
    if (truth == TruthKind::StepSignal) {
      tr["kind"] = "step_signal";
      tr["s"] = std::to_string(truth_s);
    } else {
      tr["kind"] = "breiman";
    }
    if (noise_var) tr["noise_var"] = format_double(*noise_var);
  }
  auto& s = raw["sampler"];
  s["kind"] = to_string(sampler);
  if (eta > 0) s["eta"] = std::to_string(eta);
  s["sigma_rj"] = format_double(sigma_rj);
  auto& pr = raw["proposal"];
  pr["operator"] = to_string(proposal.kind);
  pr["gamma"] = format_double(proposal.gamma);
  pr["sigma"] = sigma_auto ? "auto" : format_double(proposal.sigma);
  pr["truncation"] = proposal.truncation ? format_double(*proposal.truncation) : "none";
  pr["atom_method"] = to_string(proposal.atom_method);
  auto& c = raw["chain"];
  c["iterations"] = std::to_string(iterations);
  c["burn_in"] = std::to_string(burn_in);
  c["thin"] = std::to_string(thin);
  c["seed"] = std::to_string(seed);
  auto& e = raw["experiment"];
  e["replicates"] = std::to_string(replicates);
  e["output_dir"] = output_dir;
  e["mc_samples"] = std::to_string(mc_samples);
  e["n_test"] = std::to_string(n_test);
  return raw;
}

}  // namespace stmala
