#include "twincheck/builtin_twins.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "twincheck/errors.hpp"

namespace twincheck {

namespace {

constexpr double kValueTol = 1e-9;

int find_value_index(const std::vector<double>& values, double v, const char* what) {
  for (std::size_t j = 0; j < values.size(); ++j)
    if (std::abs(values[j] - v) <= kValueTol) return static_cast<int>(j);
  throw StageError(std::string(what) + " value not in the world's value set");
}

class WorldTwinSession : public TwinSession {
 public:
  WorldTwinSession(std::shared_ptr<const void> keepalive, const DiscreteWorld& world, TwinMode mode,
                   double delta, const std::vector<WorldAtom>* atoms, std::atomic<long>* clamped,
                   std::uint64_t seed)
      : keepalive_(std::move(keepalive)),
        world_(world),
        mode_(mode),
        delta_(delta),
        atoms_(atoms),
        clamped_(clamped),
        rng_(seed) {}

  void init(std::span<const double> x0) override {
    if (x0.size() != 1) throw ValidationError("world twin expects a single x0 feature");
    reset();
    const int x0i = find_value_index(world_.x0_values, x0[0], "x0");
    xs_.push_back(x0i);
    if (mode_ != TwinMode::PropensityBlind) sample_confounder(x0i);
    initialized_ = true;
  }

  std::vector<double> step(int action, std::span<const double>) override {
    if (!initialized_) throw StageError("twin session stepped before init");
    const int s = static_cast<int>(as_.size()) + 1;
    if (s > world_.horizon) throw StageError("twin session stepped past the horizon");
    if (action < 0 || action >= world_.action_cards[static_cast<std::size_t>(s - 1)])
      throw ValidationError("action index out of range at step " + std::to_string(s));
    as_.push_back(action);

    int xi;
    if (mode_ == TwinMode::PropensityBlind) {
      xi = sample_blind(s);
    } else {
      const auto it = world_.dynamics.find({u_, xs_, as_});
      if (it == world_.dynamics.end())
        throw StageError("missing dynamics row at step " + std::to_string(s));
      std::discrete_distribution<std::size_t> pick(it->second.begin(), it->second.end());
      xi = static_cast<int>(pick(rng_));
    }
    xs_.push_back(xi);

    const auto& vals = world_.x_values[static_cast<std::size_t>(s - 1)];
    double v = vals[static_cast<std::size_t>(xi)];
    if (mode_ == TwinMode::Shifted) {
      const double lo = *std::min_element(vals.begin(), vals.end());
      const double hi = *std::max_element(vals.begin(), vals.end());
      const double shifted = std::clamp(v + delta_, lo, hi);
      if (shifted != v + delta_) clamped_->fetch_add(1);
      v = shifted;
    }
    return {v};
  }

  void reset() override {
    xs_.clear();
    as_.clear();
    initialized_ = false;
    u_ = 0;
  }

 private:
  void sample_confounder(int x0i) {
    std::vector<double> post(world_.confounder_probs.size());
    double total = 0.0;
    for (std::size_t u = 0; u < post.size(); ++u) {
      post[u] = world_.confounder_probs[u] * world_.x0_given_u[u][static_cast<std::size_t>(x0i)];
      total += post[u];
    }
    if (total <= 0.0) throw StageError("x0 value has zero probability under the world");
    std::discrete_distribution<std::size_t> pick(post.begin(), post.end());
    u_ = static_cast<int>(pick(rng_));
  }

  int sample_blind(int s) {
    // Stepwise observational conditional given the emitted history and the
    // requested action prefix; the confounder is marginalized out.
    std::vector<double> weights(world_.x_values[static_cast<std::size_t>(s - 1)].size(), 0.0);
    double total = 0.0;
    for (const auto& atom : *atoms_) {
      if (atom.x0 != xs_.front()) continue;
      bool match = true;
      for (int k = 0; k < s && match; ++k) {
        if (atom.a[static_cast<std::size_t>(k)] != as_[static_cast<std::size_t>(k)]) match = false;
        if (k < s - 1 && atom.x[static_cast<std::size_t>(k)] != xs_[static_cast<std::size_t>(k) + 1])
          match = false;
      }
      if (!match) continue;
      weights[static_cast<std::size_t>(atom.x[static_cast<std::size_t>(s - 1)])] += atom.prob;
      total += atom.prob;
    }
    if (total <= 0.0)
      throw StageError("history has zero probability under the frozen observational law");
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    return static_cast<int>(pick(rng_));
  }

  std::shared_ptr<const void> keepalive_;
  const DiscreteWorld& world_;
  TwinMode mode_;
  double delta_;
  const std::vector<WorldAtom>* atoms_;
  std::atomic<long>* clamped_;
  std::mt19937_64 rng_;
  std::vector<int> xs_;
  std::vector<int> as_;
  bool initialized_ = false;
  int u_ = 0;
};

}  // namespace

std::string to_string(TwinMode m) {
  switch (m) {
    case TwinMode::Correct: return "correct";
    case TwinMode::Shifted: return "shifted";
    case TwinMode::PropensityBlind: return "blind";
  }
  return "correct";
}

WorldTwinFactory::WorldTwinFactory(DiscreteWorld world, TwinMode mode, double delta)
    : state_(std::make_shared<Shared>()) {
  world.validate();
  state_->world = std::move(world);
  state_->mode = mode;
  state_->delta = delta;
  if (mode == TwinMode::PropensityBlind) state_->atoms = enumerate_observational(state_->world);
}

std::unique_ptr<TwinSession> WorldTwinFactory::make_session(std::uint64_t seed) {
  return std::make_unique<WorldTwinSession>(state_, state_->world, state_->mode, state_->delta,
                                            &state_->atoms, &state_->clamped, seed);
}

std::string WorldTwinFactory::id() const {
  std::string s = "world:" + state_->world.name + ":" + to_string(state_->mode);
  if (state_->mode == TwinMode::Shifted) s += ":" + std::to_string(state_->delta);
  return s;
}

}  // namespace twincheck
