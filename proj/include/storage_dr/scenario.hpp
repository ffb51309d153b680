#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "storage_dr/model.hpp"
#include "storage_dr/rng.hpp"

namespace storage_dr {

struct Outcome {
  ExogenousSample sample;
  double probability = 0.0;

  bool operator==(const Outcome&) const = default;
};

/// Joint i.i.d. law over whole (p, q, r, S[, load]) tuples.
struct IIDScenario {
  std::vector<Outcome> outcomes;

  bool operator==(const IIDScenario&) const = default;
};

/// Finite Markov chain with one emitted sample per chain state.
struct MarkovScenario {
  std::vector<ExogenousSample> emissions;
  std::vector<std::vector<double>> transition;  // row-stochastic

  bool operator==(const MarkovScenario&) const = default;
};

/// Hour-of-day shapes for price and wind, with the scaling targets.
struct ProfileTable {
  std::array<double, 24> price{};  // relative weights
  std::array<double, 24> wind{};   // relative weights
  double price_mean = 12.0;
  double wind_mean = 8.0;
  double wind_capacity = 9.0;

  /// Weights rescaled to hit the stated means.
  std::array<double, 24> scaled_price() const;
  std::array<double, 24> scaled_wind() const;

  bool operator==(const ProfileTable&) const = default;
};

/// Parameters, disutility and exogenous law as read from one config file.
struct ScenarioConfig {
  SystemParams params;
  DisutilitySpec disutility;
  std::variant<IIDScenario, MarkovScenario> process;
  std::optional<ProfileTable> profiles;  // provenance for profile-built scenarios

  bool is_markov() const { return std::holds_alternative<MarkovScenario>(process); }
  bool has_exogenous_load() const;
  /// Number of distinct exogenous outcomes / chain states.
  std::size_t outcome_count() const;
  /// Probability of moving from outcome `from` to `to`; i.i.d. rows are the
  /// marginal law.
  double transition_probability(std::size_t from, std::size_t to) const;
  const ExogenousSample& outcome_sample(std::size_t i) const;
};

ExogenousSample sample_iid(const IIDScenario& s, Rng& rng);

struct MarkovStep {
  std::size_t state;
  ExogenousSample sample;
};

MarkovStep step_markov(const MarkovScenario& s, std::size_t current, Rng& rng);

/// Irreducibility (single communicating class) and aperiodicity (period 1).
/// Returns an empty string when both hold, otherwise the failing property.
std::string check_markov_structure(const std::vector<std::vector<double>>& transition);

/// Throws ConfigError naming the first violated constraint.
void validate_scenario(const ScenarioConfig& cfg);

/// Bundled 24-point price and wind shapes. These are an approximation of the
/// published hourly profiles, not the original data.
ProfileTable default_profiles();

ProfileTable load_profile_table(const std::filesystem::path& path);

struct ReferenceOverrides {
  std::optional<std::filesystem::path> profile_file;
  std::optional<SystemParams> params;
};

/// The reference demand-response setup: hour uniform over the day, price and
/// wind drawn independently from their hourly profiles, q = p, S uniform over
/// {H, L} with quadratic disutility.
ScenarioConfig build_reference_scenario(const ReferenceOverrides& overrides = {});

ScenarioConfig load_scenario_config(const std::filesystem::path& path);
ScenarioConfig parse_scenario_config(const std::string& json_text);
std::string dump_scenario_config(const ScenarioConfig& cfg);
void save_scenario_config(const ScenarioConfig& cfg, const std::filesystem::path& path);

/// Stateful sample source used by simulations. `e` is the storage level at
/// the start of the slot, which adversarial sources may react to.
class ExogenousSource {
 public:
  virtual ~ExogenousSource() = default;
  virtual ExogenousSample next(std::size_t t, double e) = 0;
};

std::unique_ptr<ExogenousSource> make_source(const ScenarioConfig& cfg, Rng rng);

struct AdversarialOptions {
  double theta = 0.0;        // react to the controller's offset
  double low_energy = 0.0;   // eta_e * min(L_max, c_dis)
  std::size_t flip_period = 1;
};

/// Worst-case style driver: prices flip between 0 and their maxima, renewable
/// alternates 0 / r_max, and near the storage bounds the prices are chosen to
/// tempt the controller across them. Exogenous load, when requested,
/// alternates 0 / L_max.
std::unique_ptr<ExogenousSource> make_adversarial_source(const SystemParams& params,
                                                         std::size_t num_states,
                                                         AdversarialOptions opts,
                                                         bool with_load, Rng rng);

}  // namespace storage_dr
