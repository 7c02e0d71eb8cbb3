#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "twincheck/twin.hpp"
#include "twincheck/world.hpp"

namespace twincheck {

/// Correct: samples the world's own interventional dynamics, confounder drawn
/// from P(U | X0).
/// Shifted: Correct plus a constant offset on every emitted observation,
/// clamped to the step's value range.
/// PropensityBlind: samples the stepwise observational conditionals
/// P(X_s | X_{0:s-1}, A_{1:s}) of the frozen world, ignoring the confounder.
enum class TwinMode { Correct, Shifted, PropensityBlind };

std::string to_string(TwinMode m);

class WorldTwinFactory : public TwinFactory {
 public:
  WorldTwinFactory(DiscreteWorld world, TwinMode mode, double delta = 0.0);

  std::unique_ptr<TwinSession> make_session(std::uint64_t seed) override;
  std::string id() const override;

  /// Number of shifted emissions that hit the value-range clamp.
  long clamped_emissions() const { return state_->clamped.load(); }

 private:
  struct Shared {
    DiscreteWorld world;
    TwinMode mode;
    double delta;
    std::vector<WorldAtom> atoms;  // PropensityBlind only
    std::atomic<long> clamped{0};
  };
  std::shared_ptr<Shared> state_;
};

}  // namespace twincheck
