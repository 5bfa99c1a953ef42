#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "ltlrl/ddpg.hpp"

namespace ltlrl {

/// Flat `key = value` run description. Relative paths resolve against the
/// directory of the file they were read from.
struct RunConfig {
  std::string world;
  std::optional<std::string> formula;
  std::optional<std::string> ldba;
  std::string out = "out";
  std::size_t eval_episodes = 200;
  ddpg::TrainingConfig training;

  void validate() const {
    if (world.empty()) throw ValidationError("config: 'world' is required");
    if (formula.has_value() == ldba.has_value()) throw ValidationError("config: give exactly one of 'formula' or 'ldba'");
    if (!std::filesystem::exists(world)) throw ValidationError("config: world file '" + world + "' not found");
    if (ldba && !std::filesystem::exists(*ldba)) throw ValidationError("config: ldba file '" + *ldba + "' not found");
    training.validate();
  }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <class T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config: bad value '" + v + "' for '" + key + "'");
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: bad boolean '" + v + "' for '" + key + "'");
}

}  // namespace detail

/// Applies one key to the training block. Returns false for unknown keys.
inline bool set_training_key(ddpg::TrainingConfig& t, const std::string& k, const std::string& v) {
  using detail::parse_number;
  if (k == "episodes") t.episodes = parse_number<std::size_t>(k, v);
  else if (k == "max_steps") t.max_steps = parse_number<std::size_t>(k, v);
  else if (k == "batch") t.batch = parse_number<std::size_t>(k, v);
  else if (k == "capacity") t.capacity = parse_number<std::size_t>(k, v);
  else if (k == "warmup") t.warmup = parse_number<std::size_t>(k, v);
  else if (k == "tau") t.tau = parse_number<double>(k, v);
  else if (k == "actor_lr") t.actor_lr = parse_number<double>(k, v);
  else if (k == "critic_lr") t.critic_lr = parse_number<double>(k, v);
  else if (k == "adam_eps") t.adam_eps = parse_number<double>(k, v);
  else if (k == "noise_init") t.noise_init = parse_number<double>(k, v);
  else if (k == "noise_decay") t.noise_decay = parse_number<double>(k, v);
  else if (k == "noise_min") t.noise_min = parse_number<double>(k, v);
  else if (k == "noise_theta") t.noise_theta = parse_number<double>(k, v);
  else if (k == "success_ratio") t.success_ratio = parse_number<double>(k, v);
  else if (k == "swa") t.swa = detail::parse_bool(k, v);
  else if (k == "swa_threshold") t.swa_threshold = parse_number<std::size_t>(k, v);
  else if (k == "swa_every") t.swa_every = parse_number<std::size_t>(k, v);
  else if (k == "r_p") t.reward.r_p = parse_number<double>(k, v);
  else if (k == "r_n") t.reward.r_n = parse_number<double>(k, v);
  else if (k == "gamma") t.reward.gamma = parse_number<double>(k, v);
  else if (k == "seed") t.seed = parse_number<std::uint64_t>(k, v);
  else if (k == "modular") t.modular = detail::parse_bool(k, v);
  else if (k == "hidden") {
    t.hidden.clear();
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) t.hidden.push_back(parse_number<std::size_t>(k, std::string(detail::trim(item))));
    if (t.hidden.empty()) throw ValidationError("config: 'hidden' needs at least one size");
  } else {
    return false;
  }
  return true;
}

/// Parses `key = value` lines; `#` starts a comment line.
inline std::map<std::string, std::string> parse_key_values(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("config line " + std::to_string(lineno) + ": expected key = value", lineno);
    std::string key(detail::trim(body.substr(0, eq)));
    std::string value(detail::trim(body.substr(eq + 1)));
    if (key.empty()) throw ParseError("config line " + std::to_string(lineno) + ": empty key", lineno);
    if (!kv.emplace(key, value).second)
      throw ParseError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'", lineno);
  }
  return kv;
}

inline RunConfig parse_run_config(std::string_view text, const std::filesystem::path& base = {}) {
  RunConfig c;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return (path.is_absolute() || base.empty() ? path : base / path).lexically_normal().string();
  };
  for (const auto& [k, v] : parse_key_values(text)) {
    if (k == "world") c.world = resolve(v);
    else if (k == "formula") c.formula = v;
    else if (k == "ldba") c.ldba = resolve(v);
    else if (k == "out") c.out = resolve(v);
    else if (k == "eval_episodes") c.eval_episodes = detail::parse_number<std::size_t>(k, v);
    else if (!set_training_key(c.training, k, v)) throw ValidationError("config: unknown key '" + k + "'");
  }
  return c;
}

/// Every training field, one `key = value` per line, in a fixed order.
inline std::string echo_training(const ddpg::TrainingConfig& t) {
  using detail::fmt;
  std::ostringstream o;
  std::string hidden;
  for (std::size_t i = 0; i < t.hidden.size(); ++i) hidden += (i ? "," : "") + std::to_string(t.hidden[i]);
  o << "episodes = " << t.episodes << "\nmax_steps = " << t.max_steps << "\nbatch = " << t.batch
    << "\ncapacity = " << t.capacity << "\nwarmup = " << t.warmup << "\ntau = " << fmt(t.tau)
    << "\nactor_lr = " << fmt(t.actor_lr) << "\ncritic_lr = " << fmt(t.critic_lr) << "\nadam_eps = " << fmt(t.adam_eps)
    << "\nnoise_init = " << fmt(t.noise_init) << "\nnoise_decay = " << fmt(t.noise_decay)
    << "\nnoise_min = " << fmt(t.noise_min) << "\nnoise_theta = " << fmt(t.noise_theta)
    << "\nsuccess_ratio = " << fmt(t.success_ratio)
    << "\nswa = " << (t.swa ? "true" : "false") << "\nswa_threshold = " << t.swa_threshold
    << "\nswa_every = " << t.swa_every << "\nhidden = " << hidden << "\nr_p = " << fmt(t.reward.r_p)
    << "\nr_n = " << fmt(t.reward.r_n) << "\ngamma = " << fmt(t.reward.gamma) << "\nseed = " << t.seed
    << "\nmodular = " << (t.modular ? "true" : "false") << '\n';
  return o.str();
}

inline ddpg::TrainingConfig parse_training_echo(std::string_view text) {
  ddpg::TrainingConfig t;
  for (const auto& [k, v] : parse_key_values(text))
    if (!set_training_key(t, k, v)) throw ValidationError("checkpoint config: unknown key '" + k + "'");
  return t;
}

// ---------------------------------------------------------------------------
// Checkpoint bundle: config echo followed by the agent.

inline void save_bundle(std::ostream& out, const ddpg::Agent& agent) {
  out << "config\n" << echo_training(agent.config()) << "end config\n";
  ddpg::save_agent(out, agent);
}

inline ddpg::Agent load_bundle(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "config") throw ParseError("checkpoint must start with a config block", 1);
  std::string echo;
  while (std::getline(in, line) && line != "end config") echo += line + '\n';
  if (line != "end config") throw ParseError("checkpoint config block is not terminated", 0);
  return ddpg::load_agent(in, parse_training_echo(echo));
}

}  // namespace ltlrl
