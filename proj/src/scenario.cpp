#include "storage_dr/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "storage_dr/error.hpp"

namespace storage_dr {

using nlohmann::json;

namespace {

constexpr double kProbTol = 1e-12;

template <std::size_t N>
std::array<double, N> rescale(const std::array<double, N>& w, double mean) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::array<double, N> out{};
  if (total <= 0.0) return out;
  for (std::size_t i = 0; i < N; ++i) out[i] = w[i] * mean * static_cast<double>(N) / total;
  return out;
}

std::size_t draw_index(const std::vector<double>& probs, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return i;
  }
  // Rounding left a sliver at the top; give it to the last positive entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

}  // namespace

std::array<double, 24> ProfileTable::scaled_price() const { return rescale(price, price_mean); }
std::array<double, 24> ProfileTable::scaled_wind() const { return rescale(wind, wind_mean); }

bool ScenarioConfig::has_exogenous_load() const {
  if (const auto* iid = std::get_if<IIDScenario>(&process)) {
    return !iid->outcomes.empty() && std::all_of(iid->outcomes.begin(), iid->outcomes.end(),
                                                 [](const Outcome& o) { return o.sample.exo_load.has_value(); });
  }
  const auto& mk = std::get<MarkovScenario>(process);
  return !mk.emissions.empty() && std::all_of(mk.emissions.begin(), mk.emissions.end(),
                                               [](const ExogenousSample& s) { return s.exo_load.has_value(); });
}

std::size_t ScenarioConfig::outcome_count() const {
  if (const auto* iid = std::get_if<IIDScenario>(&process)) return iid->outcomes.size();
  return std::get<MarkovScenario>(process).emissions.size();
}

double ScenarioConfig::transition_probability(std::size_t from, std::size_t to) const {
  if (const auto* iid = std::get_if<IIDScenario>(&process)) return iid->outcomes.at(to).probability;
  return std::get<MarkovScenario>(process).transition.at(from).at(to);
}

const ExogenousSample& ScenarioConfig::outcome_sample(std::size_t i) const {
  if (const auto* iid = std::get_if<IIDScenario>(&process)) return iid->outcomes.at(i).sample;
  return std::get<MarkovScenario>(process).emissions.at(i);
}

ExogenousSample sample_iid(const IIDScenario& s, Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (const auto& o : s.outcomes) {
    acc += o.probability;
    if (u < acc) return o.sample;
  }
  for (auto it = s.outcomes.rbegin(); it != s.outcomes.rend(); ++it) {
    if (it->probability > 0.0) return it->sample;
  }
  return s.outcomes.back().sample;
}

MarkovStep step_markov(const MarkovScenario& s, std::size_t current, Rng& rng) {
  const std::size_t next = draw_index(s.transition.at(current), rng);
  return {next, s.emissions[next]};
}

std::string check_markov_structure(const std::vector<std::vector<double>>& p) {
  const std::size_t n = p.size();
  if (n == 0) return "empty chain";
  auto reach = [&](bool reverse) {
    std::vector<int> seen(n, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < n; ++v) {
        const double w = reverse ? p[v][u] : p[u][v];
        if (w > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s != 0; });
  };
  if (!reach(false) || !reach(true)) return "not irreducible";

  // Period = gcd over edges (u, v) of level(u) + 1 - level(v) for BFS levels.
  std::vector<long> level(n, -1);
  std::vector<std::size_t> queue{0};
  level[0] = 0;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const std::size_t u = queue[head];
    for (std::size_t v = 0; v < n; ++v) {
      if (p[u][v] > 0.0 && level[v] < 0) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  long period = 0;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v)
      if (p[u][v] > 0.0) period = std::gcd(period, std::labs(level[u] + 1 - level[v]));
  if (period != 1) return "periodic (period " + std::to_string(period) + ")";
  return {};
}

void validate_scenario(const ScenarioConfig& cfg) {
  auto fail = [](const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  };
  for (const auto& v : validate_params(cfg.params)) fail("params." + v.field, v.detail);
  for (const auto& v : validate_disutility(cfg.disutility, cfg.params)) fail(v.field, v.detail);

  const std::size_t n_states = cfg.disutility.states.size();
  auto check_sample = [&](const ExogenousSample& s, const std::string& where) {
    for (const auto& v : validate_sample(s, cfg.params, n_states)) fail(where + "." + v.field, v.detail);
  };

  if (const auto* iid = std::get_if<IIDScenario>(&cfg.process)) {
    if (iid->outcomes.empty()) fail("outcomes", "at least one outcome required");
    double total = 0.0;
    for (std::size_t i = 0; i < iid->outcomes.size(); ++i) {
      const auto& o = iid->outcomes[i];
      const std::string where = "outcomes[" + std::to_string(i) + "]";
      if (!(o.probability >= 0.0)) fail(where + ".prob", "must be >= 0");
      check_sample(o.sample, where);
      total += o.probability;
    }
    if (std::abs(total - 1.0) > kProbTol) {
      std::ostringstream msg;
      msg.precision(17);
      msg << "probabilities sum to " << total << ", expected 1";
      fail("outcomes", msg.str());
    }
  } else {
    const auto& mk = std::get<MarkovScenario>(cfg.process);
    const std::size_t n = mk.emissions.size();
    if (n == 0) fail("chain.states", "at least one state required");
    if (mk.transition.size() != n) fail("chain.transition", "must be square with one row per state");
    for (std::size_t i = 0; i < n; ++i) {
      check_sample(mk.emissions[i], "chain.states[" + std::to_string(i) + "]");
      const auto& row = mk.transition[i];
      const std::string where = "chain.transition[" + std::to_string(i) + "]";
      if (row.size() != n) fail(where, "row length must equal the number of states");
      double total = 0.0;
      for (double v : row) {
        if (!(v >= 0.0)) fail(where, "entries must be >= 0");
        total += v;
      }
      if (std::abs(total - 1.0) > kProbTol) fail(where, "row must sum to 1");
    }
    const std::string structure = check_markov_structure(mk.transition);
    if (!structure.empty()) fail("chain.transition", structure);
  }

  if (cfg.profiles) {
    const auto price = cfg.profiles->scaled_price();
    const auto wind = cfg.profiles->scaled_wind();
    for (std::size_t h = 0; h < 24; ++h) {
      if (cfg.profiles->price[h] < 0.0 || cfg.profiles->wind[h] < 0.0) {
        fail("profiles", "weights must be nonnegative");
      }
      if (price[h] > cfg.params.p_max) fail("profiles.price", "scaled price exceeds p_max");
      if (wind[h] > cfg.profiles->wind_capacity || wind[h] > cfg.params.r_max) {
        fail("profiles.wind", "scaled wind exceeds capacity");
      }
    }
  }
}

ProfileTable default_profiles() {
  ProfileTable t;
  t.price = {0.873, 0.834, 0.811, 0.795, 0.795, 0.818, 0.888, 0.958, 0.996, 1.02,  1.043, 1.066,
             1.089, 1.113, 1.136, 1.159, 1.182, 1.19,  1.167, 1.128, 1.074, 1.012, 0.95,  0.904};
  t.wind = {1.06, 1.05, 1.03, 1.01, 0.98, 0.95, 0.92, 0.89, 0.87, 0.86, 0.87, 0.90,
            0.94, 0.98, 1.02, 1.06, 1.09, 1.11, 1.12, 1.12, 1.11, 1.10, 1.08, 1.07};
  return t;
}

namespace {

[[noreturn]] void field_error(const std::string& pointer, const std::string& what) {
  throw ConfigError("field " + pointer + ": " + what);
}

double number_at(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) field_error(path + "/" + key, "missing");
  const auto& v = j.at(key);
  if (!v.is_number()) field_error(path + "/" + key, "expected a number");
  return v.get<double>();
}

std::optional<double> optional_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return std::nullopt;
  return number_at(j, key, path);
}

template <std::size_t N>
std::array<double, N> fixed_array(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N) field_error(path, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) field_error(path + "/" + std::to_string(i), "expected a number");
    out[i] = j[i].get<double>();
  }
  return out;
}

ProfileTable profiles_from_json(const json& j, const std::string& path) {
  ProfileTable t;
  if (!j.is_object()) field_error(path, "expected an object");
  if (!j.contains("price")) field_error(path + "/price", "missing");
  if (!j.contains("wind")) field_error(path + "/wind", "missing");
  t.price = fixed_array<24>(j.at("price"), path + "/price");
  t.wind = fixed_array<24>(j.at("wind"), path + "/wind");
  t.price_mean = optional_number(j, "price_mean", path).value_or(t.price_mean);
  t.wind_mean = optional_number(j, "wind_mean", path).value_or(t.wind_mean);
  t.wind_capacity = optional_number(j, "wind_capacity", path).value_or(t.wind_capacity);
  return t;
}

json profiles_to_json(const ProfileTable& t) {
  return json{{"price", t.price},
              {"wind", t.wind},
              {"price_mean", t.price_mean},
              {"wind_mean", t.wind_mean},
              {"wind_capacity", t.wind_capacity}};
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(e.what());
  }
}

std::vector<Outcome> outcomes_from_profiles(const ProfileTable& t, std::size_t n_states) {
  const auto price = t.scaled_price();
  const auto wind = t.scaled_wind();
  const double prob = 1.0 / (24.0 * 24.0 * static_cast<double>(n_states));
  std::vector<Outcome> out;
  out.reserve(24 * 24 * n_states);
  for (std::size_t hp = 0; hp < 24; ++hp)
    for (std::size_t hw = 0; hw < 24; ++hw)
      for (StateId s = 0; s < n_states; ++s) {
        ExogenousSample x;
        x.p = price[hp];
        x.q = price[hp];
        x.r = wind[hw];
        x.s = s;
        out.push_back({x, prob});
      }
  return out;
}

}  // namespace

ProfileTable load_profile_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return profiles_from_json(parse_text(buf.str()), "");
}

ScenarioConfig build_reference_scenario(const ReferenceOverrides& overrides) {
  ScenarioConfig cfg;
  cfg.params = overrides.params.value_or(SystemParams{});
  cfg.disutility.states = {{"H", 1.0, 12.0}, {"L", 1.0, 8.0}};
  cfg.profiles = overrides.profile_file ? load_profile_table(*overrides.profile_file) : default_profiles();
  cfg.process = IIDScenario{outcomes_from_profiles(*cfg.profiles, cfg.disutility.states.size())};
  validate_scenario(cfg);
  return cfg;
}

namespace {

ExogenousSample sample_from_json(const json& j, const std::string& path, const DisutilitySpec& d) {
  if (!j.is_object()) field_error(path, "expected an object");
  ExogenousSample x;
  x.p = number_at(j, "p", path);
  x.q = number_at(j, "q", path);
  x.r = number_at(j, "r", path);
  if (!j.contains("s") || !j.at("s").is_string()) field_error(path + "/s", "expected a state name");
  const auto name = j.at("s").get<std::string>();
  const auto id = d.find(name);
  if (!id) field_error(path + "/s", "unknown state '" + name + "'");
  x.s = *id;
  x.exo_load = optional_number(j, "load", path);
  return x;
}

json sample_to_json(const ExogenousSample& x, const DisutilitySpec& d) {
  json j{{"p", x.p}, {"q", x.q}, {"r", x.r}, {"s", d.at(x.s).name}};
  if (x.exo_load) j["load"] = *x.exo_load;
  return j;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& text) {
  const json root = parse_text(text);
  if (!root.is_object()) field_error("/", "expected an object");
  ScenarioConfig cfg;

  if (!root.contains("mode") || !root.at("mode").is_string()) field_error("/mode", "expected \"iid\" or \"markov\"");
  const auto mode = root.at("mode").get<std::string>();
  if (mode != "iid" && mode != "markov") field_error("/mode", "expected \"iid\" or \"markov\"");

  if (!root.contains("params")) field_error("/params", "missing");
  const json& p = root.at("params");
  cfg.params.eta_e = number_at(p, "eta_e", "/params");
  cfg.params.eta_i = number_at(p, "eta_i", "/params");
  cfg.params.c_grid = number_at(p, "c_grid", "/params");
  cfg.params.c_char = number_at(p, "c_char", "/params");
  cfg.params.c_dis = number_at(p, "c_dis", "/params");
  cfg.params.l_max = number_at(p, "l_max", "/params");
  cfg.params.r_max = number_at(p, "r_max", "/params");
  cfg.params.p_max = number_at(p, "p_max", "/params");
  cfg.params.q_max = number_at(p, "q_max", "/params");

  if (!root.contains("disutility") || !root.at("disutility").contains("states") ||
      !root.at("disutility").at("states").is_array()) {
    field_error("/disutility/states", "expected an array");
  }
  const json& states = root.at("disutility").at("states");
  for (std::size_t i = 0; i < states.size(); ++i) {
    const std::string path = "/disutility/states/" + std::to_string(i);
    const json& s = states[i];
    if (!s.is_object() || !s.contains("name") || !s.at("name").is_string()) field_error(path + "/name", "expected a string");
    cfg.disutility.states.push_back(
        {s.at("name").get<std::string>(), number_at(s, "beta", path), number_at(s, "target", path)});
  }

  if (root.contains("profiles")) cfg.profiles = profiles_from_json(root.at("profiles"), "/profiles");

  if (mode == "iid") {
    IIDScenario iid;
    if (root.contains("outcomes")) {
      const json& outs = root.at("outcomes");
      if (!outs.is_array()) field_error("/outcomes", "expected an array");
      for (std::size_t i = 0; i < outs.size(); ++i) {
        const std::string path = "/outcomes/" + std::to_string(i);
        iid.outcomes.push_back({sample_from_json(outs[i], path, cfg.disutility), number_at(outs[i], "prob", path)});
      }
    } else if (cfg.profiles) {
      if (cfg.disutility.states.empty()) field_error("/disutility/states", "at least one state required");
      iid.outcomes = outcomes_from_profiles(*cfg.profiles, cfg.disutility.states.size());
    } else {
      field_error("/outcomes", "missing (or give /profiles)");
    }
    cfg.process = std::move(iid);
  } else {
    if (!root.contains("chain")) field_error("/chain", "missing");
    const json& chain = root.at("chain");
    if (!chain.contains("states") || !chain.at("states").is_array()) field_error("/chain/states", "expected an array");
    if (!chain.contains("transition") || !chain.at("transition").is_array()) field_error("/chain/transition", "expected an array");
    MarkovScenario mk;
    const json& cs = chain.at("states");
    for (std::size_t i = 0; i < cs.size(); ++i) {
      mk.emissions.push_back(sample_from_json(cs[i], "/chain/states/" + std::to_string(i), cfg.disutility));
    }
    const json& tr = chain.at("transition");
    for (std::size_t i = 0; i < tr.size(); ++i) {
      const std::string path = "/chain/transition/" + std::to_string(i);
      if (!tr[i].is_array()) field_error(path, "expected an array");
      std::vector<double> row;
      for (std::size_t k = 0; k < tr[i].size(); ++k) {
        if (!tr[i][k].is_number()) field_error(path + "/" + std::to_string(k), "expected a number");
        row.push_back(tr[i][k].get<double>());
      }
      mk.transition.push_back(std::move(row));
    }
    cfg.process = std::move(mk);
  }

  validate_scenario(cfg);
  return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario_config(buf.str());
}

std::string dump_scenario_config(const ScenarioConfig& cfg) {
  const auto& p = cfg.params;
  json root;
  root["mode"] = cfg.is_markov() ? "markov" : "iid";
  root["params"] = {{"eta_e", p.eta_e}, {"eta_i", p.eta_i}, {"c_grid", p.c_grid},
                    {"c_char", p.c_char}, {"c_dis", p.c_dis}, {"l_max", p.l_max},
                    {"r_max", p.r_max}, {"p_max", p.p_max}, {"q_max", p.q_max}};
  json states = json::array();
  for (const auto& s : cfg.disutility.states) {
    states.push_back({{"name", s.name}, {"beta", s.beta}, {"target", s.target}});
  }
  root["disutility"] = {{"states", states}};
  if (cfg.profiles) root["profiles"] = profiles_to_json(*cfg.profiles);
  if (const auto* iid = std::get_if<IIDScenario>(&cfg.process)) {
    json outs = json::array();
    for (const auto& o : iid->outcomes) {
      json j = sample_to_json(o.sample, cfg.disutility);
      j["prob"] = o.probability;
      outs.push_back(std::move(j));
    }
    root["outcomes"] = std::move(outs);
  } else {
    const auto& mk = std::get<MarkovScenario>(cfg.process);
    json cs = json::array();
    for (const auto& x : mk.emissions) cs.push_back(sample_to_json(x, cfg.disutility));
    root["chain"] = {{"states", cs}, {"transition", mk.transition}};
  }
  return root.dump(2);
}

void save_scenario_config(const ScenarioConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  out << dump_scenario_config(cfg) << '\n';
  if (!out) throw ConfigError("write failed for " + path.string());
}

namespace {

class IidSource : public ExogenousSource {
 public:
  IidSource(IIDScenario s, Rng rng) : s_(std::move(s)), rng_(rng) {}
  ExogenousSample next(std::size_t, double) override { return sample_iid(s_, rng_); }

 private:
  IIDScenario s_;
  Rng rng_;
};

class MarkovSource : public ExogenousSource {
 public:
  MarkovSource(MarkovScenario s, Rng rng) : s_(std::move(s)), rng_(rng) {}

  ExogenousSample next(std::size_t t, double) override {
    if (t == 0 || !started_) {
      state_ = static_cast<std::size_t>(rng_.below(s_.emissions.size()));
      started_ = true;
      return s_.emissions[state_];
    }
    auto step = step_markov(s_, state_, rng_);
    state_ = step.state;
    return step.sample;
  }

 private:
  MarkovScenario s_;
  Rng rng_;
  std::size_t state_ = 0;
  bool started_ = false;
};

class AdversarialSource : public ExogenousSource {
 public:
  AdversarialSource(const SystemParams& params, std::size_t num_states, AdversarialOptions opts,
                    bool with_load, Rng rng)
      : params_(params), num_states_(num_states), opts_(opts), with_load_(with_load), rng_(rng) {}

  ExogenousSample next(std::size_t t, double e) override {
    const std::size_t period = std::max<std::size_t>(1, opts_.flip_period);
    const bool phase = (t / period) % 2 == 1;
    ExogenousSample x;
    x.s = static_cast<StateId>(t % num_states_);
    x.r = (t % 2 == 0) ? 0.0 : params_.r_max;
    if (e > opts_.theta) {
      // Cheap energy and free renewable to tempt overfilling.
      x.p = 0.0;
      x.q = 0.0;
      x.r = params_.r_max;
    } else if (e < opts_.low_energy) {
      // Top selling price and expensive grid to tempt overdrawing.
      x.p = params_.p_max;
      x.q = params_.q_max;
      x.r = 0.0;
    } else {
      x.p = phase ? params_.p_max : 0.0;
      x.q = phase ? 0.0 : params_.q_max;
      // Occasional random flip so the pattern is not purely periodic.
      if (rng_.uniform() < 0.1) std::swap(x.p, x.q);
      x.p = std::min(x.p, params_.p_max);
      x.q = std::min(x.q, params_.q_max);
    }
    if (with_load_) x.exo_load = (e < opts_.low_energy || t % 2 == 0) ? params_.l_max : 0.0;
    return x;
  }

 private:
  SystemParams params_;
  std::size_t num_states_;
  AdversarialOptions opts_;
  bool with_load_;
  Rng rng_;
};

}  // namespace

std::unique_ptr<ExogenousSource> make_source(const ScenarioConfig& cfg, Rng rng) {
  if (const auto* iid = std::get_if<IIDScenario>(&cfg.process)) return std::make_unique<IidSource>(*iid, rng);
  return std::make_unique<MarkovSource>(std::get<MarkovScenario>(cfg.process), rng);
}

std::unique_ptr<ExogenousSource> make_adversarial_source(const SystemParams& params,
                                                         std::size_t num_states,
                                                         AdversarialOptions opts, bool with_load,
                                                         Rng rng) {
  return std::make_unique<AdversarialSource>(params, std::max<std::size_t>(1, num_states), opts,
                                             with_load, rng);
}

}  // namespace storage_dr
