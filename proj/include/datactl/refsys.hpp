// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "datactl/trace.hpp"

namespace datactl {

// Predator-prey population dynamics, classic two-species form.
struct LotkaVolterraParams {
  double prey_birth_rate = 1.0;
  double predation_rate = 0.5;
  double predator_death_rate = 0.8;
  double predator_birth_rate = 0.4;
  double prey0 = 3.0;
  double predators0 = 2.0;
  double dt = 1e-3;
};

struct LvSample {
  double t;
  double prey;
  double predators;
};

// Fixed-step 4th-order integration on a regular dt grid. A step that would
// drive a population to or below zero is retried at half size (up to 20
// halvings) before giving up as a stiff configuration.
std::vector<LvSample> lv_simulate(const LotkaVolterraParams& params, double t_end);

// Toy models with closed-form behavior, one per system class.
struct StaticModelParams {
  std::vector<double> weights{1.0};
  double noise_sd = 0.1;
};

// Memoryless but context-conditioned: effective weight per dimension is
// weights[d] + ctx_gain * ctx.
struct ContextModelParams {
  std::vector<double> weights{1.0};
  double ctx_gain = 0.5;
  double noise_sd = 0.3;
};

// Linear-Gaussian recurrent state: h' = contraction*h + input_gain*sum(x);
// y = state_gain*h' + feedthrough*sum(x) + noise. The state updates before
// the output is emitted.
struct DynamicModelParams {
  double contraction = 0.9;  // |contraction| < 1 for the stable variant
  double input_gain = 1.0;
  double state_gain = 1.0;
  double feedthrough = 0.0;
  double noise_sd = 0.1;
};

// Cause-first observation model: the output (cause) is drawn from a prior and
// the input observes it through noise. Shifting cause_mean moves the output
// marginal while leaving the observation mechanism alone.
struct AnticausalModelParams {
  double cause_mean = 0.0;
  double cause_sd = 1.0;
  double observation_sd = 1.0;
};

using ModelParams = std::variant<StaticModelParams, ContextModelParams,
                                 DynamicModelParams, AnticausalModelParams>;

// Resettable callable interface used by active probing.
class System {
 public:
  virtual ~System() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t output_dim() const = 0;
  virtual bool reset() = 0;  // false when the system refuses to reset
  virtual std::vector<double> step(std::span<const double> x) = 0;
  virtual bool has_context() const { return false; }
  virtual void set_context(double) {}
};

std::unique_ptr<System> make_system(const ModelParams& params, std::size_t input_dim,
                                    std::uint64_t seed);

// Timed generation knobs. Interventions and context are observable (events /
// circ annotations); the drift walk and confounder stay hidden.
struct Intervention {
  enum class Kind { ScaleWeights, StateKick };
  std::int64_t at_index = 0;
  Kind kind = Kind::ScaleWeights;
  double amount = 2.0;
};

struct ContextSignal {
  enum class Kind { None, Levels, Sine, Walk };
  Kind kind = Kind::None;
  std::vector<double> levels;  // equal consecutive blocks over the trace
  double period = 1000.0;
  double walk_sd = 0.01;
};

struct CircumstanceFactor {
  enum class Effect { Inert, ScaleNoise, ScaleWeightsAbove };
  std::string name = "factor";
  Effect effect = Effect::Inert;
  double low = 0.0;
  double high = 1.0;      // value drawn uniformly per record
  double threshold = 0.0; // ScaleWeightsAbove: applies when value > threshold
  double factor = 1.0;
};

struct GeneratorKnobs {
  std::vector<Intervention> interventions;  // sorted by at_index
  ContextSignal context;
  std::vector<CircumstanceFactor> factors;
  double latent_drift_sd = 0.0;      // hidden additive weight walk per step
  double confounder_coupling = 0.0;  // hidden shared noise on x[0] and y
  std::string environment_tag = "refsys";
};

struct InputSpec {
  std::size_t dim = 1;
  double mean = 0.0;
  double sd = 1.0;
};

struct GeneratorConfig {
  ModelParams model = StaticModelParams{};
  GeneratorKnobs knobs;
  InputSpec input;
};

// Pure function of (config, n, seed); context values land in circ["ctx"],
// factor values in circ[name], interventions mark "circumstance_change".
Trace generate_trace(const GeneratorConfig& config, std::size_t n,
                     std::uint64_t seed);

}  // namespace datactl
