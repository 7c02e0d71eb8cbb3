#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "twincheck/hypothesis.hpp"
#include "twincheck/schema.hpp"
#include "twincheck/trajectory.hpp"

namespace twincheck {

/// Conditioning history for one conditional-table row: confounder index,
/// observation indices so far (x0 first), action indices so far.
struct HistoryKey {
  int u = 0;
  std::vector<int> xs;
  std::vector<int> as;

  auto operator<=>(const HistoryKey&) const = default;
};

/// Fully enumerable potential-outcomes model with an explicit confounder.
/// Policy rows are keyed by (u, x_{0:s-1}, a_{1:s-1}) and give P(A_s | .);
/// dynamics rows are keyed by (u, x_{0:s-1}, a_{1:s}) and give the
/// interventional law P(X_s(a_{1:s}) | .).
struct DiscreteWorld {
  int horizon = 1;
  std::vector<double> confounder_probs;
  std::vector<double> x0_values;
  std::vector<std::vector<double>> x0_given_u;  // [u][x0 index]
  std::vector<int> action_cards;                // per step, size horizon
  std::vector<std::vector<double>> x_values;    // per step s=1..horizon
  std::map<HistoryKey, std::vector<double>> policy;
  std::map<HistoryKey, std::vector<double>> dynamics;
  std::string name;

  void validate() const;  // row sums, sizes, enumeration cap
};

struct WorldAtom {
  int u = 0;
  int x0 = 0;
  std::vector<int> a;  // size horizon
  std::vector<int> x;  // size horizon
  double prob = 0.0;
};

struct InterventionalAtom {
  int u = 0;
  int x0 = 0;
  std::vector<int> x;  // size t
  double prob = 0.0;
};

std::vector<WorldAtom> enumerate_observational(const DiscreteWorld& w);
std::vector<InterventionalAtom> enumerate_interventional(const DiscreteWorld& w,
                                                         std::span<const int> actions);

/// Observable joint law (x0, a_{1:T}, x_{1:T}) -> prob, confounder summed out.
std::map<std::vector<int>, double> observational_table(const DiscreteWorld& w);

FeatureSchema world_schema(const DiscreteWorld& w);

struct OracleBounds {
  double q = 0.0;     // E[Y(a) | X_{0:t}(a) in B]
  double q_lo = 0.0;  // E[Y_lo | qualifying]
  double q_up = 0.0;
  double var_lo = 0.0;  // conditional variances of Y_lo / Y_up
  double var_up = 0.0;
  double qualifying_prob = 0.0;
  double propensity = 0.0;  // P(A_{1:t} = a_{1:t} | qualifying)
};

/// Exhaustive enumeration of the joint law; throws StageError if the
/// interventional conditioning event has zero probability.
OracleBounds exact_bounds_oracle(const DiscreteWorld& w, const HypothesisSpec& spec);

/// Two worlds with the observational law of w but interventional Q equal to
/// w's Q_lo and Q_up under the spec. Throws ValidationError when the policy
/// always plays the spec's actions.
std::pair<DiscreteWorld, DiscreteWorld> nonidentifiability_pair(const DiscreteWorld& w,
                                                                const HypothesisSpec& spec);

TrajectoryDataset sample_observational(const DiscreteWorld& w, long n, std::uint64_t seed);

/// Confounded braking scenario: U = pad age, actions {gentle, aggressive},
/// binary stopping outcome. E[Y(aggressive)] = 0.5, naive mean 0.9,
/// bounds [0.45, 0.95].
DiscreteWorld brake_pad_world();

/// Same interventional behaviour under a more aggressive behavioural policy
/// (P(agg|new)=0.99, P(agg|old)=0.9), which tightens Q_up to 0.55.
DiscreteWorld brake_pad_high_propensity_world();

/// Two-step world with a confounder driving both actions and observations.
DiscreteWorld confounded_chain_world();

/// Two-step world with deterministic dynamics (hence unconfounded outcomes)
/// under a confounded policy.
DiscreteWorld deterministic_chain_world();

/// Seeded world with Dirichlet(1,...,1) conditional rows.
DiscreteWorld random_world(std::uint64_t seed, int max_horizon = 3);

/// Seeded spec with positive interventional support on w; y_lo/y_up chosen
/// inside the reachable outcome range so the sharpness construction attains
/// the bounds.
HypothesisSpec random_supported_spec(const DiscreteWorld& w, std::uint64_t seed);

nlohmann::json world_to_json(const DiscreteWorld& w);
DiscreteWorld world_from_json(const nlohmann::json& j);
DiscreteWorld load_world(const std::string& path);
void save_world(const DiscreteWorld& w, const std::string& path);

}  // namespace twincheck
