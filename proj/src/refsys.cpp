// SPDX-License-Identifier: Apache-2.0
#include "datactl/refsys.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "datactl/error.hpp"

namespace datactl {

namespace {

struct LvState {
  double prey;
  double predators;
};

LvState lv_deriv(const LotkaVolterraParams& p, const LvState& s) {
  return {s.prey * (p.prey_birth_rate - p.predation_rate * s.predators),
          -s.predators * (p.predator_death_rate - p.predator_birth_rate * s.prey)};
}

LvState rk4_step(const LotkaVolterraParams& p, const LvState& s, double h) {
  const LvState k1 = lv_deriv(p, s);
  const LvState s2{s.prey + 0.5 * h * k1.prey, s.predators + 0.5 * h * k1.predators};
  const LvState k2 = lv_deriv(p, s2);
  const LvState s3{s.prey + 0.5 * h * k2.prey, s.predators + 0.5 * h * k2.predators};
  const LvState k3 = lv_deriv(p, s3);
  const LvState s4{s.prey + h * k3.prey, s.predators + h * k3.predators};
  const LvState k4 = lv_deriv(p, s4);
  return {s.prey + h / 6.0 * (k1.prey + 2.0 * k2.prey + 2.0 * k3.prey + k4.prey),
          s.predators + h / 6.0 * (k1.predators + 2.0 * k2.predators +
                                   2.0 * k3.predators + k4.predators)};
}

// Advances by h, splitting the step whenever a population would cross zero.
LvState advance(const LotkaVolterraParams& p, const LvState& s, double h, int depth) {
  const LvState next = rk4_step(p, s, h);
  if (next.prey > 0.0 && next.predators > 0.0) return next;
  if (depth >= 20) throw Error("stiff configuration: population crossed zero");
  const LvState half = advance(p, s, h / 2.0, depth + 1);
  return advance(p, half, h / 2.0, depth + 1);
}

void validate_lv(const LotkaVolterraParams& p) {
  if (p.prey_birth_rate < 0 || p.predation_rate < 0 || p.predator_death_rate < 0 ||
      p.predator_birth_rate < 0) {
    throw Error("rates must be >= 0");
  }
  if (p.prey0 <= 0 || p.predators0 <= 0) throw Error("populations must be > 0");
  if (p.dt <= 0) throw Error("dt must be > 0");
}

double sum_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

class StaticSystem final : public System {
 public:
  StaticSystem(StaticModelParams p, std::size_t dim, std::uint64_t seed)
      : p_(std::move(p)), dim_(dim), rng_(seed) {
    if (p_.weights.size() < dim_) p_.weights.resize(dim_, p_.weights.back());
    if (p_.noise_sd <= 0) throw Error("noise_sd must be > 0");
  }
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return 1; }
  bool reset() override { return true; }
  std::vector<double> step(std::span<const double> x) override {
    double m = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) m += p_.weights[d] * x[d];
    return {m + p_.noise_sd * gauss_(rng_)};
  }

 private:
  StaticModelParams p_;
  std::size_t dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

class ContextSystem final : public System {
 public:
  ContextSystem(ContextModelParams p, std::size_t dim, std::uint64_t seed)
      : p_(std::move(p)), dim_(dim), rng_(seed) {
    if (p_.weights.size() < dim_) p_.weights.resize(dim_, p_.weights.back());
    if (p_.noise_sd <= 0) throw Error("noise_sd must be > 0");
  }
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return 1; }
  bool reset() override { return true; }
  bool has_context() const override { return true; }
  void set_context(double c) override { ctx_ = c; }
  std::vector<double> step(std::span<const double> x) override {
    double m = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
      m += (p_.weights[d] + p_.ctx_gain * ctx_) * x[d];
    }
    return {m + p_.noise_sd * gauss_(rng_)};
  }

 private:
  ContextModelParams p_;
  std::size_t dim_;
  double ctx_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

class DynamicSystem final : public System {
 public:
  DynamicSystem(DynamicModelParams p, std::size_t dim, std::uint64_t seed)
      : p_(p), dim_(dim), rng_(seed) {
    if (std::abs(p_.contraction) >= 1.0) throw Error("|contraction| must be < 1");
    if (p_.noise_sd <= 0) throw Error("noise_sd must be > 0");
  }
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return 1; }
  bool reset() override {
    h_ = 0.0;
    return true;
  }
  std::vector<double> step(std::span<const double> x) override {
    const double u = sum_of(x);
    h_ = p_.contraction * h_ + p_.input_gain * u;
    return {p_.state_gain * h_ + p_.feedthrough * u + p_.noise_sd * gauss_(rng_)};
  }

 private:
  DynamicModelParams p_;
  std::size_t dim_;
  double h_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

class AnticausalSystem final : public System {
 public:
  AnticausalSystem(AnticausalModelParams p, std::size_t dim, std::uint64_t seed)
      : p_(p), dim_(dim), rng_(seed) {}
  std::size_t input_dim() const override { return dim_; }
  std::size_t output_dim() const override { return 1; }
  bool reset() override { return true; }
  std::vector<double> step(std::span<const double>) override {
    return {p_.cause_mean + p_.cause_sd * gauss_(rng_)};
  }

 private:
  AnticausalModelParams p_;
  std::size_t dim_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_;
};

}  // namespace

std::vector<LvSample> lv_simulate(const LotkaVolterraParams& params, double t_end) {
  validate_lv(params);
  if (t_end < 0) throw Error("t_end must be >= 0");
  const auto steps = static_cast<std::size_t>(std::llround(t_end / params.dt));
  std::vector<LvSample> out;
  out.reserve(steps + 1);
  LvState s{params.prey0, params.predators0};
  out.push_back({0.0, s.prey, s.predators});
  for (std::size_t i = 1; i <= steps; ++i) {
    s = advance(params, s, params.dt, 0);
    out.push_back({static_cast<double>(i) * params.dt, s.prey, s.predators});
  }
  return out;
}

std::unique_ptr<System> make_system(const ModelParams& params, std::size_t input_dim,
                                    std::uint64_t seed) {
  return std::visit(
      [&](const auto& p) -> std::unique_ptr<System> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StaticModelParams>) {
          return std::make_unique<StaticSystem>(p, input_dim, seed);
        } else if constexpr (std::is_same_v<T, ContextModelParams>) {
          return std::make_unique<ContextSystem>(p, input_dim, seed);
        } else if constexpr (std::is_same_v<T, DynamicModelParams>) {
          return std::make_unique<DynamicSystem>(p, input_dim, seed);
        } else {
          return std::make_unique<AnticausalSystem>(p, input_dim, seed);
        }
      },
      params);
}

namespace {

void validate_generator(const GeneratorConfig& config) {
  if (config.input.dim < 1) throw Error("input dimension must be >= 1");
  if (config.input.sd < 0) throw Error("input sd must be >= 0");
  std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, StaticModelParams> ||
                      std::is_same_v<T, ContextModelParams>) {
          if (p.noise_sd <= 0) throw Error("noise_sd must be > 0");
          if (p.weights.empty()) throw Error("weights must be non-empty");
        } else if constexpr (std::is_same_v<T, DynamicModelParams>) {
          if (p.noise_sd <= 0) throw Error("noise_sd must be > 0");
          if (std::abs(p.contraction) >= 1.0) throw Error("|contraction| must be < 1");
        } else {
          if (p.cause_sd <= 0) throw Error("cause_sd must be > 0");
          if (p.observation_sd <= 0) throw Error("observation_sd must be > 0");
        }
      },
      config.model);
  for (std::size_t i = 1; i < config.knobs.interventions.size(); ++i) {
    if (config.knobs.interventions[i].at_index <
        config.knobs.interventions[i - 1].at_index) {
      throw Error("interventions must be sorted by time");
    }
  }
  for (const auto& f : config.knobs.factors) {
    if (!(f.low < f.high)) throw Error("factor range must satisfy low < high");
  }
  if (config.knobs.context.kind == ContextSignal::Kind::Levels &&
      config.knobs.context.levels.empty()) {
    throw Error("context levels must be non-empty");
  }
}

}  // namespace

Trace generate_trace(const GeneratorConfig& config, std::size_t n,
                     std::uint64_t seed) {
  if (n < 1) throw Error("n must be >= 1");
  validate_generator(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Trace trace;
  trace.meta.x_dim = config.input.dim;
  trace.meta.y_dim = 1;
  trace.meta.source = config.knobs.environment_tag;
  trace.records.reserve(n);

  // Mutable copies the knobs act on.
  ModelParams model = config.model;
  double weight_scale = 1.0;
  double drift = 0.0;
  double ctx_walk = 0.0;
  double dyn_state = 0.0;

  const auto& knobs = config.knobs;
  std::size_t next_intervention = 0;

  const std::size_t ctx_levels = knobs.context.levels.size();
  const std::size_t block =
      ctx_levels > 0 ? std::max<std::size_t>(1, n / ctx_levels) : 0;

  for (std::size_t i = 0; i < n; ++i) {
    TraceRecord rec;
    rec.t = static_cast<std::int64_t>(i);

    double kick = 0.0;
    while (next_intervention < knobs.interventions.size() &&
           knobs.interventions[next_intervention].at_index ==
               static_cast<std::int64_t>(i)) {
      const auto& iv = knobs.interventions[next_intervention];
      if (iv.kind == Intervention::Kind::ScaleWeights) {
        weight_scale *= iv.amount;
      } else {
        kick += iv.amount;
      }
      rec.events.insert("circumstance_change");
      ++next_intervention;
    }

    double ctx = 0.0;
    bool has_ctx = false;
    switch (knobs.context.kind) {
      case ContextSignal::Kind::None:
        break;
      case ContextSignal::Kind::Levels: {
        const std::size_t idx = std::min(i / block, ctx_levels - 1);
        ctx = knobs.context.levels[idx];
        has_ctx = true;
        break;
      }
      case ContextSignal::Kind::Sine:
        ctx = std::sin(2.0 * M_PI * static_cast<double>(i) / knobs.context.period);
        has_ctx = true;
        break;
      case ContextSignal::Kind::Walk:
        ctx_walk += knobs.context.walk_sd * gauss(rng);
        ctx = ctx_walk;
        has_ctx = true;
        break;
    }
    if (has_ctx) rec.circ["ctx"] = ctx;

    if (knobs.latent_drift_sd > 0.0) drift += knobs.latent_drift_sd * gauss(rng);

    double noise_scale = 1.0;
    double factor_weight_scale = 1.0;
    for (const auto& f : knobs.factors) {
      const double value = f.low + (f.high - f.low) * unit(rng);
      rec.circ[f.name] = value;
      switch (f.effect) {
        case CircumstanceFactor::Effect::Inert:
          break;
        case CircumstanceFactor::Effect::ScaleNoise:
          noise_scale *= 1.0 + f.factor * value;
          break;
        case CircumstanceFactor::Effect::ScaleWeightsAbove:
          if (value > f.threshold) factor_weight_scale *= f.factor;
          break;
      }
    }

    const double confound =
        knobs.confounder_coupling > 0.0 ? gauss(rng) : 0.0;

    rec.x.resize(config.input.dim);
    for (std::size_t d = 0; d < config.input.dim; ++d) {
      rec.x[d] = config.input.mean + config.input.sd * gauss(rng);
    }
    if (knobs.confounder_coupling > 0.0) {
      rec.x[0] += knobs.confounder_coupling * confound;
    }

    double y = 0.0;
    if (const auto* sp = std::get_if<StaticModelParams>(&model)) {
      double m = 0.0;
      for (std::size_t d = 0; d < config.input.dim; ++d) {
        const double w =
            (d < sp->weights.size() ? sp->weights[d] : sp->weights.back());
        m += (w * weight_scale * factor_weight_scale + drift) * rec.x[d];
      }
      y = m + sp->noise_sd * noise_scale * gauss(rng);
    } else if (const auto* cp = std::get_if<ContextModelParams>(&model)) {
      double m = 0.0;
      for (std::size_t d = 0; d < config.input.dim; ++d) {
        const double w =
            (d < cp->weights.size() ? cp->weights[d] : cp->weights.back());
        m += ((w + cp->ctx_gain * ctx) * weight_scale * factor_weight_scale + drift) *
             rec.x[d];
      }
      y = m + cp->noise_sd * noise_scale * gauss(rng);
    } else if (const auto* dp = std::get_if<DynamicModelParams>(&model)) {
      const double u = sum_of(rec.x);
      dyn_state = dp->contraction * dyn_state + dp->input_gain * u + kick;
      y = (dp->state_gain * weight_scale * factor_weight_scale + drift) * dyn_state +
          dp->feedthrough * u + dp->noise_sd * noise_scale * gauss(rng);
    } else {
      const auto& ap = std::get<AnticausalModelParams>(model);
      y = ap.cause_mean + ap.cause_sd * gauss(rng) + drift;
      for (std::size_t d = 0; d < config.input.dim; ++d) {
        rec.x[d] = y + ap.observation_sd * gauss(rng);
      }
    }
    if (knobs.confounder_coupling > 0.0) y += knobs.confounder_coupling * confound;

    rec.y = {y};
    for (const auto& [k, v] : rec.circ) trace.meta.circ_vocabulary.insert(k);
    trace.records.push_back(std::move(rec));
  }
  return trace;
}

}  // namespace datactl
