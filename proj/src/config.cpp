#include "mfpg/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#ifndef MFPG_VERSION
#define MFPG_VERSION "0.0.0"
#endif

namespace mfpg {

using nlohmann::json;

ConfigError::ConfigError(std::string key_path, const std::string& why)
    : InvalidArgument(key_path + ": " + why), key_path_(std::move(key_path)) {}

namespace {

// Reads one JSON object, remembering which keys were consumed so leftovers can be rejected.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k) && !j_.at(k).is_null(); }

  double number(const std::string& k, double def) {
    if (!take(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number()) throw ConfigError(key(k), "expected a number");
    return v.get<double>();
  }
  std::int64_t integer(const std::string& k, std::int64_t def) {
    if (!take(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) throw ConfigError(key(k), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::size_t count(const std::string& k, std::size_t def) {
    const std::int64_t v = integer(k, std::int64_t(def));
    if (v < 0) throw ConfigError(key(k), "must be non-negative");
    return std::size_t(v);
  }
  std::uint64_t u64(const std::string& k, std::uint64_t def) {
    if (!take(k)) return def;
    const json& v = j_.at(k);
    // Integers built in code are signed even when non-negative.
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError(key(k), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!take(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_boolean()) throw ConfigError(key(k), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!take(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_string()) throw ConfigError(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::string required_string(const std::string& k) {
    if (!has(k)) throw ConfigError(key(k), "required field missing");
    return string(k, "");
  }
  std::optional<Eigen::VectorXd> vector(const std::string& k) {
    if (!take(k)) return std::nullopt;
    const json& v = j_.at(k);
    if (!v.is_array()) throw ConfigError(key(k), "expected an array of numbers");
    Eigen::VectorXd out(Eigen::Index(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) throw ConfigError(key(k) + "[" + std::to_string(i) + "]", "expected a number");
      out[Eigen::Index(i)] = v[i].get<double>();
    }
    return out;
  }
  std::optional<Reader> object(const std::string& k) {
    if (!take(k)) return std::nullopt;
    return Reader(j_.at(k), key(k));
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
  }

 private:
  bool take(const std::string& k) {
    seen_.insert(k);
    return has(k);
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& path, const std::string& why) {
  if (!ok) throw ConfigError(path, why);
}

EnvConfig parse_env(Reader r) {
  EnvConfig e;
  e.name = r.required_string("name");
  if (e.name == "two_state") {
    auto& p = e.two_state;
    p.lambda0 = r.number("lambda0", p.lambda0);
    p.lambda1 = r.number("lambda1", p.lambda1);
    p.lam = r.number("lam", p.lam);
    p.p = r.number("p", p.p);
    p.T = int(r.integer("T", p.T));
    check(p.T >= 0, r.key("T"), "must be non-negative");
  } else if (e.name == "cyber") {
    auto& p = e.cyber;
    p.beta_UU = r.number("beta_UU", p.beta_UU);
    p.beta_UD = r.number("beta_UD", p.beta_UD);
    p.beta_DU = r.number("beta_DU", p.beta_DU);
    p.beta_DD = r.number("beta_DD", p.beta_DD);
    p.q_rec_D = r.number("q_rec_D", p.q_rec_D);
    p.q_rec_U = r.number("q_rec_U", p.q_rec_U);
    p.q_inf_D = r.number("q_inf_D", p.q_inf_D);
    p.q_inf_U = r.number("q_inf_U", p.q_inf_U);
    p.v_H = r.number("v_H", p.v_H);
    p.lambda_rate = r.number("lambda_rate", p.lambda_rate);
    p.k_D = r.number("k_D", p.k_D);
    p.k_I = r.number("k_I", p.k_I);
    p.dt = r.number("dt", p.dt);
    p.gamma = r.number("gamma", p.gamma);
    p.T_train = int(r.integer("T_train", p.T_train));
    p.T_val = int(r.integer("T_val", p.T_val));
  } else if (e.name == "plan") {
    auto& p = e.plan;
    p.n_states = r.count("n_states", p.n_states);
    p.move_cost = r.number("move_cost", p.move_cost);
    if (auto t = r.vector("target")) {
      p.target = *t;
    } else if (p.n_states != std::size_t(p.target.size())) {
      p.target = Eigen::VectorXd::Constant(Eigen::Index(p.n_states), 1.0 / double(p.n_states));
    }
    p.T = int(r.integer("T", p.T));
    check(std::size_t(p.target.size()) == p.n_states, r.key("target"),
          "length must equal n_states");
  } else {
    throw ConfigError(r.key("name"), "unknown env '" + e.name + "' (expected two_state|cyber|plan)");
  }
  r.finish();
  try {
    e.make();
  } catch (const InvalidArgument& err) {
    throw ConfigError(r.key("name"), err.what());
  } catch (const DomainError& err) {
    throw ConfigError(r.key("target"), err.what());
  }
  return e;
}

PolicySpec parse_policy(Reader r, const EnvConfig& env) {
  PolicySpec s;
  const std::string kind = r.required_string("kind");
  try {
    s.kind = policy_kind_from_string(kind);
  } catch (const InvalidArgument&) {
    throw ConfigError(r.key("kind"), "unknown policy kind '" + kind + "' (expected tabular|mlp)");
  }
  s.hidden = r.count("hidden", s.hidden);
  s.include_t = r.boolean("include_t", s.include_t);
  s.include_mu = r.boolean("include_mu", s.include_mu);
  if (s.kind == PolicyKind::mlp) check(s.hidden >= 1, r.key("hidden"), "must be >= 1");
  r.finish();
  s.num_states = env.num_states();
  s.num_actions = env.num_actions();
  s.time_horizon = std::max(1, env.horizon());
  return s;
}

const char* init_kind_name(InitSampler::Kind k) {
  return k == InitSampler::Kind::uniform_state1 ? "uniform_state1" : "dirichlet";
}

TrainConfig parse_train(std::optional<Reader> maybe, const EnvConfig& env) {
  TrainConfig c;
  c.init.kind = env.name == "two_state" ? InitSampler::Kind::uniform_state1
                                        : InitSampler::Kind::dirichlet;
  if (env.name == "cyber") c.val_horizon = env.cyber.T_val;
  if (!maybe) return c;
  Reader& r = *maybe;
  c.episodes = r.count("episodes", c.episodes);
  c.N = r.count("N", c.N);
  c.n = r.count("n", c.n);
  c.eps = r.number("eps", c.eps);
  c.lr = r.number("lr", c.lr);
  c.val_every = r.count("val_every", c.val_every);
  const std::string mode = r.string("mode", to_string(c.mode));
  try {
    c.mode = estimator_mode_from_string(mode);
  } catch (const InvalidArgument& err) {
    throw ConfigError(r.key("mode"), err.what());
  }
  const std::string baseline = r.string("baseline", to_string(c.baseline));
  try {
    c.baseline = baseline_from_string(baseline);
  } catch (const InvalidArgument& err) {
    throw ConfigError(r.key("baseline"), err.what());
  }
  c.threads = int(r.integer("threads", c.threads));
  check(c.threads >= 0, r.key("threads"), "must be non-negative (0 = all cores)");
  if (auto init = r.object("init")) {
    const std::string kind = init->string("kind", init_kind_name(c.init.kind));
    if (kind == "uniform_state1") {
      c.init.kind = InitSampler::Kind::uniform_state1;
    } else if (kind == "dirichlet") {
      c.init.kind = InitSampler::Kind::dirichlet;
    } else {
      throw ConfigError(init->key("kind"), "expected uniform_state1|dirichlet");
    }
    c.init.low = init->number("low", c.init.low);
    c.init.high = init->number("high", c.init.high);
    c.init.min_mass = init->number("min_mass", c.init.min_mass);
    init->finish();
  }
  if (auto mu = r.vector("val_mu0")) {
    check(std::size_t(mu->size()) == env.num_states(), r.key("val_mu0"),
          "length must equal the number of states");
    try {
      c.val_mu0 = StateDist(*mu);
    } catch (const std::exception& err) {
      throw ConfigError(r.key("val_mu0"), err.what());
    }
  }
  if (r.has("val_horizon")) c.val_horizon = int(r.integer("val_horizon", 0));
  else r.integer("val_horizon", 0);
  c.checkpoint_every = r.count("checkpoint_every", c.checkpoint_every);
  c.sampled_validation = r.boolean("sampled_validation", c.sampled_validation);
  c.val_samples = r.count("val_samples", c.val_samples);
  c.record_wall_time = r.boolean("record_wall_time", c.record_wall_time);
  c.max_abort_fraction = r.number("max_abort_fraction", c.max_abort_fraction);
  r.finish();
  try {
    c.validate();
  } catch (const InvalidArgument& err) {
    const std::string msg = err.what();
    const auto colon = msg.find(':');
    throw ConfigError(colon == std::string::npos ? "train" : msg.substr(0, colon),
                      colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return c;
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

}  // namespace

std::unique_ptr<MeanFieldEnv> EnvConfig::make() const {
  if (name == "two_state") return two_state_env(two_state);
  if (name == "cyber") return cyber_env(cyber);
  if (name == "plan") return plan_env(plan);
  throw InvalidArgument("unknown env '" + name + "'");
}

int EnvConfig::horizon() const {
  if (name == "cyber") return cyber.T_train;
  if (name == "plan") return plan.T;
  return two_state.T;
}

std::size_t EnvConfig::num_states() const {
  if (name == "cyber") return 4;
  if (name == "plan") return plan.n_states;
  return 2;
}

std::size_t EnvConfig::num_actions() const { return name == "plan" ? 3 : 2; }

RunConfig parse_run_config(const json& doc) {
  Reader root(doc, "");
  RunConfig cfg;
  auto env = root.object("env");
  if (!env) throw ConfigError("env", "required field missing");
  cfg.env = parse_env(*env);
  auto pol = root.object("policy");
  if (!pol) throw ConfigError("policy", "required field missing");
  cfg.policy = parse_policy(*pol, cfg.env);
  cfg.train = parse_train(root.object("train"), cfg.env);
  cfg.out = root.string("out", cfg.out);
  cfg.seed = root.u64("seed", cfg.seed);
  cfg.train.seed = cfg.seed;
  root.finish();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& err) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + err.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& cfg) {
  json env;
  env["name"] = cfg.env.name;
  if (cfg.env.name == "two_state") {
    const auto& p = cfg.env.two_state;
    env["lambda0"] = p.lambda0;
    env["lambda1"] = p.lambda1;
    env["lam"] = p.lam;
    env["p"] = p.p;
    env["T"] = p.T;
  } else if (cfg.env.name == "cyber") {
    const auto& p = cfg.env.cyber;
    env["beta_UU"] = p.beta_UU;
    env["beta_UD"] = p.beta_UD;
    env["beta_DU"] = p.beta_DU;
    env["beta_DD"] = p.beta_DD;
    env["q_rec_D"] = p.q_rec_D;
    env["q_rec_U"] = p.q_rec_U;
    env["q_inf_D"] = p.q_inf_D;
    env["q_inf_U"] = p.q_inf_U;
    env["v_H"] = p.v_H;
    env["lambda_rate"] = p.lambda_rate;
    env["k_D"] = p.k_D;
    env["k_I"] = p.k_I;
    env["dt"] = p.dt;
    env["gamma"] = p.gamma;
    env["T_train"] = p.T_train;
    env["T_val"] = p.T_val;
  } else {
    const auto& p = cfg.env.plan;
    env["n_states"] = p.n_states;
    env["move_cost"] = p.move_cost;
    env["target"] = vec_json(p.target);
    env["T"] = p.T;
  }

  json policy;
  policy["kind"] = to_string(cfg.policy.kind);
  policy["hidden"] = cfg.policy.hidden;
  policy["include_t"] = cfg.policy.include_t;
  policy["include_mu"] = cfg.policy.include_mu;

  const TrainConfig& t = cfg.train;
  json train;
  train["episodes"] = t.episodes;
  train["N"] = t.N;
  train["n"] = t.n;
  train["eps"] = t.eps;
  train["lr"] = t.lr;
  train["val_every"] = t.val_every;
  train["mode"] = to_string(t.mode);
  train["baseline"] = to_string(t.baseline);
  train["threads"] = t.threads;
  train["init"] = {{"kind", init_kind_name(t.init.kind)},
                   {"low", t.init.low},
                   {"high", t.init.high},
                   {"min_mass", t.init.min_mass}};
  train["val_mu0"] = t.val_mu0 ? vec_json(t.val_mu0->probs()) : json(nullptr);
  train["val_horizon"] = t.val_horizon ? json(*t.val_horizon) : json(nullptr);
  train["checkpoint_every"] = t.checkpoint_every;
  train["sampled_validation"] = t.sampled_validation;
  train["val_samples"] = t.val_samples;
  train["record_wall_time"] = t.record_wall_time;
  train["max_abort_fraction"] = t.max_abort_fraction;

  return json{{"env", env}, {"policy", policy}, {"train", train}, {"out", cfg.out}, {"seed", cfg.seed}};
}

std::string config_hash(const RunConfig& cfg) {
  const std::string s = to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string software_version() { return MFPG_VERSION; }

json make_manifest(const RunConfig& cfg, const std::string& command, int threads) {
  return json{{"command", command},
              {"config", to_json(cfg)},
              {"config_hash", config_hash(cfg)},
              {"seed", cfg.seed},
              {"mode", to_string(cfg.train.mode)},
              {"baseline", to_string(cfg.train.baseline)},
              {"threads", threads},
              {"version", software_version()}};
}

}  // namespace mfpg
