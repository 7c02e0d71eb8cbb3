#include "twincheck/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "twincheck/errors.hpp"
#include "twincheck/region.hpp"
#include "twincheck/stats.hpp"

namespace twincheck {

namespace {

constexpr double kRowTol = 1e-9;
constexpr long kAtomCap = 2'000'000;

void check_row(const std::vector<double>& row, std::size_t want, const char* what) {
  if (row.size() != want) throw ValidationError(std::string(what) + " row has wrong length");
  double s = 0.0;
  for (double p : row) {
    if (p < 0.0) throw ValidationError(std::string(what) + " row has a negative entry");
    s += p;
  }
  if (std::abs(s - 1.0) > kRowTol)
    throw ValidationError(std::string(what) + " row does not sum to 1");
}

const std::vector<double>& lookup_row(const std::map<HistoryKey, std::vector<double>>& table,
                                      const HistoryKey& key, const char* what) {
  auto it = table.find(key);
  if (it == table.end())
    throw StageError(std::string("missing ") + what + " row for a reachable history at step " +
                     std::to_string(key.xs.size()) + " (world incompletely specified)");
  return it->second;
}

bool prefix_equal(const std::vector<int>& a, const std::vector<int>& b, int upto) {
  for (int s = 0; s < upto; ++s)
    if (a[static_cast<std::size_t>(s)] != b[static_cast<std::size_t>(s)]) return false;
  return true;
}

std::vector<std::vector<double>> atom_step_vectors(const DiscreteWorld& w,
                                                   const std::vector<int>& x) {
  std::vector<std::vector<double>> steps;
  steps.reserve(x.size());
  for (std::size_t s = 0; s < x.size(); ++s)
    steps.push_back({w.x_values[s][static_cast<std::size_t>(x[s])]});
  return steps;
}

}  // namespace

void DiscreteWorld::validate() const {
  if (horizon < 1) throw ValidationError("world horizon must be at least 1");
  if (confounder_probs.empty()) throw ValidationError("world needs at least one confounder value");
  check_row(confounder_probs, confounder_probs.size(), "confounder");
  if (x0_values.empty()) throw ValidationError("world needs at least one x0 value");
  if (x0_given_u.size() != confounder_probs.size())
    throw ValidationError("x0_given_u needs one row per confounder value");
  for (const auto& row : x0_given_u) check_row(row, x0_values.size(), "x0");
  if (static_cast<int>(action_cards.size()) != horizon)
    throw ValidationError("action_cards must have one entry per step");
  if (static_cast<int>(x_values.size()) != horizon)
    throw ValidationError("x_values must have one entry per step");
  long atoms = static_cast<long>(confounder_probs.size()) * static_cast<long>(x0_values.size());
  for (int s = 0; s < horizon; ++s) {
    if (action_cards[static_cast<std::size_t>(s)] < 1)
      throw ValidationError("action cardinality must be positive");
    if (x_values[static_cast<std::size_t>(s)].empty())
      throw ValidationError("each step needs at least one observation value");
    atoms *= action_cards[static_cast<std::size_t>(s)];
    atoms *= static_cast<long>(x_values[static_cast<std::size_t>(s)].size());
    if (atoms > kAtomCap) throw ValidationError("world exceeds the enumeration cap");
  }
  for (const auto& [key, row] : policy) {
    if (key.xs.size() != key.as.size() + 1)
      throw ValidationError("policy key has mismatched history lengths");
    check_row(row, static_cast<std::size_t>(action_cards[key.as.size()]), "policy");
  }
  for (const auto& [key, row] : dynamics) {
    if (key.xs.size() != key.as.size() || key.as.empty())
      throw ValidationError("dynamics key has mismatched history lengths");
    check_row(row, x_values[key.as.size() - 1].size(), "dynamics");
  }
}

std::vector<WorldAtom> enumerate_observational(const DiscreteWorld& w) {
  std::vector<WorldAtom> out;
  std::vector<int> xs, as;
  const int T = w.horizon;

  auto recurse = [&](auto&& self, int u, double prob) -> void {
    const int s = static_cast<int>(as.size()) + 1;
    if (s > T) {
      WorldAtom atom;
      atom.u = u;
      atom.x0 = xs.front();
      atom.a = as;
      atom.x.assign(xs.begin() + 1, xs.end());
      atom.prob = prob;
      out.push_back(std::move(atom));
      return;
    }
    const auto& policy_row = lookup_row(w.policy, {u, xs, as}, "policy");
    for (int a = 0; a < w.action_cards[static_cast<std::size_t>(s - 1)]; ++a) {
      const double pa = policy_row[static_cast<std::size_t>(a)];
      if (pa <= 0.0) continue;
      as.push_back(a);
      const auto& dyn_row = lookup_row(w.dynamics, {u, xs, as}, "dynamics");
      for (std::size_t xi = 0; xi < dyn_row.size(); ++xi) {
        const double px = dyn_row[xi];
        if (px <= 0.0) continue;
        xs.push_back(static_cast<int>(xi));
        self(self, u, prob * pa * px);
        xs.pop_back();
      }
      as.pop_back();
    }
  };

  for (std::size_t u = 0; u < w.confounder_probs.size(); ++u) {
    const double pu = w.confounder_probs[u];
    if (pu <= 0.0) continue;
    for (std::size_t x0i = 0; x0i < w.x0_values.size(); ++x0i) {
      const double p0 = w.x0_given_u[u][x0i];
      if (p0 <= 0.0) continue;
      xs.assign(1, static_cast<int>(x0i));
      as.clear();
      recurse(recurse, static_cast<int>(u), pu * p0);
    }
  }
  return out;
}

std::vector<InterventionalAtom> enumerate_interventional(const DiscreteWorld& w,
                                                         std::span<const int> actions) {
  const int t = static_cast<int>(actions.size());
  if (t < 1 || t > w.horizon) throw ValidationError("action sequence length outside [1, T]");
  std::vector<InterventionalAtom> out;
  std::vector<int> xs, as;

  auto recurse = [&](auto&& self, int u, double prob) -> void {
    const int s = static_cast<int>(as.size()) + 1;
    if (s > t) {
      InterventionalAtom atom;
      atom.u = u;
      atom.x0 = xs.front();
      atom.x.assign(xs.begin() + 1, xs.end());
      atom.prob = prob;
      out.push_back(std::move(atom));
      return;
    }
    as.push_back(actions[static_cast<std::size_t>(s - 1)]);
    const auto& dyn_row = lookup_row(w.dynamics, {u, xs, as}, "dynamics");
    for (std::size_t xi = 0; xi < dyn_row.size(); ++xi) {
      const double px = dyn_row[xi];
      if (px <= 0.0) continue;
      xs.push_back(static_cast<int>(xi));
      self(self, u, prob * px);
      xs.pop_back();
    }
    as.pop_back();
  };

  for (std::size_t u = 0; u < w.confounder_probs.size(); ++u) {
    const double pu = w.confounder_probs[u];
    if (pu <= 0.0) continue;
    for (std::size_t x0i = 0; x0i < w.x0_values.size(); ++x0i) {
      const double p0 = w.x0_given_u[u][x0i];
      if (p0 <= 0.0) continue;
      xs.assign(1, static_cast<int>(x0i));
      as.clear();
      recurse(recurse, static_cast<int>(u), pu * p0);
    }
  }
  return out;
}

std::map<std::vector<int>, double> observational_table(const DiscreteWorld& w) {
  std::map<std::vector<int>, double> table;
  for (const auto& atom : enumerate_observational(w)) {
    std::vector<int> key;
    key.reserve(1 + atom.a.size() + atom.x.size());
    key.push_back(atom.x0);
    key.insert(key.end(), atom.a.begin(), atom.a.end());
    key.insert(key.end(), atom.x.begin(), atom.x.end());
    table[key] += atom.prob;
  }
  return table;
}

FeatureSchema world_schema(const DiscreteWorld& w) {
  FeatureSchema s;
  s.horizon = w.horizon;
  s.x0_features = {{"x0", FeatureKind::Continuous, 0}};
  s.step_features = {{"x", FeatureKind::Continuous, 0}};
  s.action_cardinalities = w.action_cards;
  return s;
}

OracleBounds exact_bounds_oracle(const DiscreteWorld& w, const HypothesisSpec& spec) {
  const auto schema = world_schema(w);
  spec.validate(schema);
  const int t = spec.t;
  OracleBounds r;

  double i_mass = 0.0, i_sum = 0.0;
  for (const auto& atom : enumerate_interventional(w, spec.actions)) {
    const std::vector<double> x0v{w.x0_values[static_cast<std::size_t>(atom.x0)]};
    const auto steps = atom_step_vectors(w, atom.x);
    if (!region_contains_prefix(spec.region, schema, x0v, steps, t)) continue;
    i_mass += atom.prob;
    i_sum += atom.prob * spec.outcome.clipped_value(schema, steps);
  }
  if (i_mass <= 0.0)
    throw StageError("interventional conditioning event has zero probability");
  r.q = i_sum / i_mass;

  double q_mass = 0.0, agree_mass = 0.0;
  double s_lo = 0.0, s_lo2 = 0.0, s_up = 0.0, s_up2 = 0.0;
  for (const auto& atom : enumerate_observational(w)) {
    const int agree = [&] {
      int n = 0;
      while (n < t && atom.a[static_cast<std::size_t>(n)] ==
                          spec.actions[static_cast<std::size_t>(n)])
        ++n;
      return n;
    }();
    const std::vector<double> x0v{w.x0_values[static_cast<std::size_t>(atom.x0)]};
    const auto steps = atom_step_vectors(w, atom.x);
    if (!region_contains_prefix(spec.region, schema, x0v, steps, agree)) continue;
    double yl, yu;
    if (agree == t) {
      yl = yu = spec.outcome.clipped_value(schema, steps);
      agree_mass += atom.prob;
    } else {
      yl = spec.outcome.y_lo;
      yu = spec.outcome.y_up;
    }
    q_mass += atom.prob;
    s_lo += atom.prob * yl;
    s_lo2 += atom.prob * yl * yl;
    s_up += atom.prob * yu;
    s_up2 += atom.prob * yu * yu;
  }
  if (q_mass <= 0.0) throw StageError("qualifying event has zero probability");
  r.q_lo = s_lo / q_mass;
  r.q_up = s_up / q_mass;
  r.var_lo = std::max(0.0, s_lo2 / q_mass - r.q_lo * r.q_lo);
  r.var_up = std::max(0.0, s_up2 / q_mass - r.q_up * r.q_up);
  r.qualifying_prob = q_mass;
  r.propensity = agree_mass / q_mass;
  return r;
}

std::pair<DiscreteWorld, DiscreteWorld> nonidentifiability_pair(const DiscreteWorld& w,
                                                                const HypothesisSpec& spec) {
  const auto schema = world_schema(w);
  spec.validate(schema);
  const int T = w.horizon;
  const int t = spec.t;
  const auto atoms = enumerate_observational(w);

  double disagree_mass = 0.0;
  for (const auto& atom : atoms)
    if (!prefix_equal(atom.a, spec.actions, t)) disagree_mass += atom.prob;
  if (disagree_mass <= 0.0)
    throw ValidationError("policy always plays the target actions; bounds already coincide");

  // Off-path fill values: any in-region value before the outcome step, and the
  // clip-extremal in-region value at the outcome step.
  auto in_region = [&](int s, double v) {
    const std::vector<double> xv{v};
    return region_contains_at(spec.region, schema, xv, s);
  };
  std::vector<int> fill_lo(static_cast<std::size_t>(t)), fill_up(static_cast<std::size_t>(t));
  for (int s = 1; s <= t; ++s) {
    const auto& vals = w.x_values[static_cast<std::size_t>(s - 1)];
    int best_lo = -1, best_up = -1;
    for (std::size_t j = 0; j < vals.size(); ++j) {
      if (!in_region(s, vals[j])) continue;
      if (best_lo < 0) {
        best_lo = best_up = static_cast<int>(j);
        continue;
      }
      if (s == t) {
        const double f = clip(vals[j], spec.outcome.y_lo, spec.outcome.y_up);
        if (f < clip(vals[static_cast<std::size_t>(best_lo)], spec.outcome.y_lo, spec.outcome.y_up))
          best_lo = static_cast<int>(j);
        if (f > clip(vals[static_cast<std::size_t>(best_up)], spec.outcome.y_lo, spec.outcome.y_up))
          best_up = static_cast<int>(j);
      }
    }
    if (best_lo < 0)
      throw StageError("region excludes every observation value at step " + std::to_string(s));
    fill_lo[static_cast<std::size_t>(s - 1)] = best_lo;
    fill_up[static_cast<std::size_t>(s - 1)] = best_up;
  }

  // Scaffold shared by both variants: the confounder is the full observational
  // atom, and actions/observations replay the recorded path.
  DiscreteWorld base;
  base.horizon = T;
  base.x0_values = w.x0_values;
  base.action_cards = w.action_cards;
  base.x_values = w.x_values;
  base.confounder_probs.reserve(atoms.size());
  base.x0_given_u.reserve(atoms.size());
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    base.confounder_probs.push_back(atoms[i].prob);
    std::vector<double> row(w.x0_values.size(), 0.0);
    row[static_cast<std::size_t>(atoms[i].x0)] = 1.0;
    base.x0_given_u.push_back(std::move(row));
    for (int s = 1; s <= T; ++s) {
      std::vector<int> xs{atoms[i].x0};
      xs.insert(xs.end(), atoms[i].x.begin(), atoms[i].x.begin() + (s - 1));
      std::vector<int> as(atoms[i].a.begin(), atoms[i].a.begin() + (s - 1));
      std::vector<double> prow(
          static_cast<std::size_t>(base.action_cards[static_cast<std::size_t>(s - 1)]), 0.0);
      prow[static_cast<std::size_t>(atoms[i].a[static_cast<std::size_t>(s - 1)])] = 1.0;
      base.policy[{static_cast<int>(i), xs, as}] = std::move(prow);
      as.push_back(atoms[i].a[static_cast<std::size_t>(s - 1)]);
      std::vector<double> drow(base.x_values[static_cast<std::size_t>(s - 1)].size(), 0.0);
      drow[static_cast<std::size_t>(atoms[i].x[static_cast<std::size_t>(s - 1)])] = 1.0;
      base.dynamics[{static_cast<int>(i), xs, as}] = std::move(drow);
    }
  }

  auto with_fill = [&](const std::vector<int>& fill, const std::string& tag) {
    DiscreteWorld v = base;
    v.name = w.name + tag;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      std::vector<int> cur{atoms[i].x0};
      for (int s = 1; s <= t; ++s) {
        std::vector<int> as(spec.actions.begin(), spec.actions.begin() + s);
        const bool on_path = prefix_equal(atoms[i].a, spec.actions, s);
        const int xi = on_path ? atoms[i].x[static_cast<std::size_t>(s - 1)]
                               : fill[static_cast<std::size_t>(s - 1)];
        std::vector<double> drow(v.x_values[static_cast<std::size_t>(s - 1)].size(), 0.0);
        drow[static_cast<std::size_t>(xi)] = 1.0;
        v.dynamics[{static_cast<int>(i), cur, as}] = std::move(drow);
        cur.push_back(xi);
      }
    }
    return v;
  };

  return {with_fill(fill_lo, "#lo"), with_fill(fill_up, "#up")};
}

TrajectoryDataset sample_observational(const DiscreteWorld& w, long n, std::uint64_t seed) {
  if (n < 0) throw ValidationError("cannot sample a negative number of trajectories");
  const auto atoms = enumerate_observational(w);
  if (atoms.empty()) throw StageError("world has no observational support");
  std::vector<double> probs;
  probs.reserve(atoms.size());
  for (const auto& atom : atoms) probs.push_back(atom.prob);
  std::discrete_distribution<std::size_t> pick(probs.begin(), probs.end());
  std::mt19937_64 rng(seed);

  TrajectoryDataset d;
  d.schema = world_schema(w);
  d.provenance = w.name;
  d.records.reserve(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    const auto& atom = atoms[pick(rng)];
    ObservationalTrajectory traj;
    traj.x0 = {w.x0_values[static_cast<std::size_t>(atom.x0)]};
    traj.steps.reserve(static_cast<std::size_t>(w.horizon));
    for (int s = 0; s < w.horizon; ++s) {
      TrajectoryStep step;
      step.action = atom.a[static_cast<std::size_t>(s)];
      step.x = {w.x_values[static_cast<std::size_t>(s)]
                          [static_cast<std::size_t>(atom.x[static_cast<std::size_t>(s)])]};
      traj.steps.push_back(std::move(step));
    }
    d.records.push_back(std::move(traj));
  }
  return d;
}

namespace {

DiscreteWorld brake_pad_with_policy(double p_agg_new, double p_agg_old, std::string name) {
  // U: 0 = new pads, 1 = old pads. Action 1 = aggressive braking.
  // X1: 1 = vehicle stopped in time. Aggressive braking stops new pads with
  // certainty and old pads never, so E[X1(aggressive)] = 0.5.
  DiscreteWorld w;
  w.name = std::move(name);
  w.horizon = 1;
  w.confounder_probs = {0.5, 0.5};
  w.x0_values = {0.0};
  w.x0_given_u = {{1.0}, {1.0}};
  w.action_cards = {2};
  w.x_values = {{0.0, 1.0}};
  w.policy[{0, {0}, {}}] = {1.0 - p_agg_new, p_agg_new};
  w.policy[{1, {0}, {}}] = {1.0 - p_agg_old, p_agg_old};
  w.dynamics[{0, {0}, {0}}] = {0.5, 0.5};  // gentle, new pads
  w.dynamics[{0, {0}, {1}}] = {0.0, 1.0};  // aggressive, new pads
  w.dynamics[{1, {0}, {0}}] = {0.5, 0.5};  // gentle, old pads
  w.dynamics[{1, {0}, {1}}] = {1.0, 0.0};  // aggressive, old pads
  return w;
}

}  // namespace

DiscreteWorld brake_pad_world() { return brake_pad_with_policy(0.9, 0.1, "brake-pad"); }

DiscreteWorld brake_pad_high_propensity_world() {
  return brake_pad_with_policy(0.99, 0.9, "brake-pad-high-propensity");
}

DiscreteWorld confounded_chain_world() {
  DiscreteWorld w;
  w.name = "confounded-chain";
  w.horizon = 2;
  w.confounder_probs = {0.5, 0.5};
  w.x0_values = {0.0};
  w.x0_given_u = {{1.0}, {1.0}};
  w.action_cards = {2, 2};
  w.x_values = {{0.0, 1.0}, {0.0, 1.0}};
  for (int u = 0; u < 2; ++u) {
    const double pa1 = u == 1 ? 0.8 : 0.2;
    w.policy[{u, {0}, {}}] = {1.0 - pa1, pa1};
    for (int a1 = 0; a1 < 2; ++a1) {
      const double px1 = a1 == 1 ? 0.2 + 0.6 * u : 0.5;
      w.dynamics[{u, {0}, {a1}}] = {1.0 - px1, px1};
      for (int x1 = 0; x1 < 2; ++x1) {
        const double pa2 = u == 1 ? 0.7 : 0.3;
        w.policy[{u, {0, x1}, {a1}}] = {1.0 - pa2, pa2};
        for (int a2 = 0; a2 < 2; ++a2) {
          const double px2 = a2 == 1 ? 0.1 + 0.7 * u + 0.1 * x1 : 0.4 + 0.1 * x1;
          w.dynamics[{u, {0, x1}, {a1, a2}}] = {1.0 - px2, px2};
        }
      }
    }
  }
  return w;
}

DiscreteWorld deterministic_chain_world() {
  // Dynamics depend only on the observed history and actions, so the
  // confounded policy cannot bias interventional quantities.
  DiscreteWorld w;
  w.name = "deterministic-chain";
  w.horizon = 2;
  w.confounder_probs = {0.5, 0.5};
  w.x0_values = {0.0};
  w.x0_given_u = {{1.0}, {1.0}};
  w.action_cards = {2, 2};
  w.x_values = {{0.0, 1.0}, {0.0, 1.0}};
  for (int u = 0; u < 2; ++u) {
    const double pa1 = u == 1 ? 0.7 : 0.3;
    w.policy[{u, {0}, {}}] = {1.0 - pa1, pa1};
    for (int a1 = 0; a1 < 2; ++a1) {
      std::vector<double> d1(2, 0.0);
      d1[static_cast<std::size_t>(a1)] = 1.0;  // X1 = A1
      w.dynamics[{u, {0}, {a1}}] = d1;
      for (int x1 = 0; x1 < 2; ++x1) {
        const double pa2 = u == 1 ? 0.6 : 0.4;
        w.policy[{u, {0, x1}, {a1}}] = {1.0 - pa2, pa2};
        for (int a2 = 0; a2 < 2; ++a2) {
          std::vector<double> d2(2, 0.0);
          d2[static_cast<std::size_t>(x1 ^ a2)] = 1.0;  // X2 = X1 xor A2
          w.dynamics[{u, {0, x1}, {a1, a2}}] = d2;
        }
      }
    }
  }
  return w;
}

namespace {

std::vector<double> dirichlet_row(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> unif(1e-12, 1.0);
  std::vector<double> row(k);
  double s = 0.0;
  for (double& p : row) {
    p = -std::log(unif(rng));
    s += p;
  }
  for (double& p : row) p /= s;
  return row;
}

}  // namespace

DiscreteWorld random_world(std::uint64_t seed, int max_horizon) {
  if (max_horizon < 1) throw ValidationError("max_horizon must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> horizon_pick(1, max_horizon);
  std::uniform_int_distribution<int> size_pick(2, 3);

  DiscreteWorld w;
  w.name = "random-" + std::to_string(seed);
  w.horizon = horizon_pick(rng);
  const int nu = size_pick(rng);
  const int nx0 = size_pick(rng);
  w.confounder_probs = dirichlet_row(rng, static_cast<std::size_t>(nu));
  for (int j = 0; j < nx0; ++j) w.x0_values.push_back(static_cast<double>(j));
  for (int u = 0; u < nu; ++u)
    w.x0_given_u.push_back(dirichlet_row(rng, static_cast<std::size_t>(nx0)));
  for (int s = 0; s < w.horizon; ++s) {
    w.action_cards.push_back(2);
    const int nx = size_pick(rng);
    std::vector<double> vals;
    for (int j = 0; j < nx; ++j) vals.push_back(static_cast<double>(j));
    w.x_values.push_back(std::move(vals));
  }

  // Every history gets a row; reachability pruning happens at enumeration time.
  std::vector<int> xs, as;
  auto fill = [&](auto&& self, int u) -> void {
    const int s = static_cast<int>(as.size()) + 1;
    if (s > w.horizon) return;
    w.policy[{u, xs, as}] =
        dirichlet_row(rng, static_cast<std::size_t>(w.action_cards[static_cast<std::size_t>(s - 1)]));
    for (int a = 0; a < w.action_cards[static_cast<std::size_t>(s - 1)]; ++a) {
      as.push_back(a);
      const auto& vals = w.x_values[static_cast<std::size_t>(s - 1)];
      w.dynamics[{u, xs, as}] = dirichlet_row(rng, vals.size());
      for (std::size_t xi = 0; xi < vals.size(); ++xi) {
        xs.push_back(static_cast<int>(xi));
        self(self, u);
        xs.pop_back();
      }
      as.pop_back();
    }
  };
  for (int u = 0; u < nu; ++u)
    for (int x0i = 0; x0i < nx0; ++x0i) {
      xs.assign(1, x0i);
      as.clear();
      fill(fill, u);
    }
  w.validate();
  return w;
}

HypothesisSpec random_supported_spec(const DiscreteWorld& w, std::uint64_t seed) {
  const auto schema = world_schema(w);
  std::mt19937_64 rng(mix_seed(seed, 0x9e3779b9));
  std::uniform_int_distribution<int> t_pick(1, w.horizon);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  const int t = t_pick(rng);
  HypothesisSpec spec;
  spec.t = t;
  spec.label = "random";
  spec.id = "rand-" + std::to_string(seed);
  for (int s = 0; s < t; ++s) {
    std::uniform_int_distribution<int> a_pick(0, w.action_cards[static_cast<std::size_t>(s)] - 1);
    spec.actions.push_back(a_pick(rng));
  }

  for (int attempt = 0; attempt < 100; ++attempt) {
    RegionPredicate region;
    region.per_step.resize(static_cast<std::size_t>(t) + 1);
    for (int s = 0; s <= t; ++s) {
      if (unif(rng) < 0.5) continue;  // whole space at this step
      const auto& vals = s == 0 ? w.x0_values : w.x_values[static_cast<std::size_t>(s - 1)];
      std::uniform_int_distribution<int> v_pick(0, static_cast<int>(vals.size()) - 1);
      int i = v_pick(rng), j = v_pick(rng);
      if (i > j) std::swap(i, j);
      if (s == t && i == j) {
        // Keep at least two reachable outcome values so bounds stay informative.
        if (j + 1 < static_cast<int>(vals.size())) ++j;
        else --i;
      }
      IntervalConstraint c;
      c.feature = s == 0 ? "x0" : "x";
      c.lo = vals[static_cast<std::size_t>(i)];
      c.hi = vals[static_cast<std::size_t>(j)];
      c.closed_right = true;
      region.per_step[static_cast<std::size_t>(s)].push_back(c);
    }

    // Outcome bounds within the reachable in-region value range at step t, so
    // the worst-case fill values attain them exactly.
    const auto& tvals = w.x_values[static_cast<std::size_t>(t - 1)];
    double vmin = 0.0, vmax = 0.0;
    bool any = false;
    for (double v : tvals) {
      const std::vector<double> xv{v};
      if (!region_contains_at(region, schema, xv, t)) continue;
      if (!any) {
        vmin = vmax = v;
        any = true;
      } else {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
      }
    }
    if (!any || vmax <= vmin) continue;

    spec.region = region;
    spec.outcome.t = t;
    spec.outcome.feature = "x";
    if (unif(rng) < 0.5) {
      spec.outcome.y_lo = vmin;
      spec.outcome.y_up = vmax;
    } else {
      spec.outcome.y_lo = vmin + 0.25 * (vmax - vmin);
      spec.outcome.y_up = vmin + 0.75 * (vmax - vmin);
    }

    double mass = 0.0;
    for (const auto& atom : enumerate_interventional(w, spec.actions)) {
      const std::vector<double> x0v{w.x0_values[static_cast<std::size_t>(atom.x0)]};
      const auto steps = atom_step_vectors(w, atom.x);
      if (region_contains_prefix(spec.region, schema, x0v, steps, t)) mass += atom.prob;
    }
    if (mass > 0.0) return spec;
  }

  // Whole-space fallback always has interventional mass 1.
  spec.region.per_step.assign(static_cast<std::size_t>(t) + 1, {});
  const auto& tvals = w.x_values[static_cast<std::size_t>(t - 1)];
  spec.outcome.t = t;
  spec.outcome.feature = "x";
  spec.outcome.y_lo = *std::min_element(tvals.begin(), tvals.end());
  spec.outcome.y_up = *std::max_element(tvals.begin(), tvals.end());
  return spec;
}

namespace {

nlohmann::json table_to_json(const std::map<HistoryKey, std::vector<double>>& table) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, row] : table)
    arr.push_back({{"u", key.u}, {"xs", key.xs}, {"as", key.as}, {"p", row}});
  return arr;
}

std::map<HistoryKey, std::vector<double>> table_from_json(const nlohmann::json& arr) {
  std::map<HistoryKey, std::vector<double>> table;
  for (const auto& e : arr) {
    HistoryKey key;
    key.u = e.at("u").get<int>();
    key.xs = e.at("xs").get<std::vector<int>>();
    key.as = e.at("as").get<std::vector<int>>();
    table[key] = e.at("p").get<std::vector<double>>();
  }
  return table;
}

}  // namespace

nlohmann::json world_to_json(const DiscreteWorld& w) {
  return {{"name", w.name},
          {"T", w.horizon},
          {"confounder_probs", w.confounder_probs},
          {"x0_values", w.x0_values},
          {"x0_given_u", w.x0_given_u},
          {"action_cards", w.action_cards},
          {"x_values", w.x_values},
          {"policy", table_to_json(w.policy)},
          {"dynamics", table_to_json(w.dynamics)}};
}

DiscreteWorld world_from_json(const nlohmann::json& j) {
  DiscreteWorld w;
  w.name = j.value("name", std::string{});
  w.horizon = j.at("T").get<int>();
  w.confounder_probs = j.at("confounder_probs").get<std::vector<double>>();
  w.x0_values = j.at("x0_values").get<std::vector<double>>();
  w.x0_given_u = j.at("x0_given_u").get<std::vector<std::vector<double>>>();
  w.action_cards = j.at("action_cards").get<std::vector<int>>();
  w.x_values = j.at("x_values").get<std::vector<std::vector<double>>>();
  w.policy = table_from_json(j.at("policy"));
  w.dynamics = table_from_json(j.at("dynamics"));
  w.validate();
  return w;
}

DiscreteWorld load_world(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open world file: " + path);
  nlohmann::json j;
  in >> j;
  return world_from_json(j);
}

void save_world(const DiscreteWorld& w, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write world file: " + path);
  out << world_to_json(w).dump(2) << "\n";
}

}  // namespace twincheck
