#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bsrl/common.hpp"
#include "bsrl/env.hpp"

namespace bsrl {

enum class Activation { Identity, ReLU, LeakyReLU, PReLU };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::PReLU: return "prelu";
  }
  return "?";
}

inline Activation parse_activation(const std::string& s) {
  if (s == "identity" || s == "none") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "leaky_relu") return Activation::LeakyReLU;
  if (s == "prelu") return Activation::PReLU;
  throw ConfigError("unknown activation '" + s + "'");
}

struct NetworkSpec {
  int input_dim = 0;
  std::vector<int> hidden_layers{1024, 512};
  int output_dim = 0;
  Activation hidden_activation = Activation::ReLU;
  Activation output_activation = Activation::Identity;
};

// Dense MLP parameters. Weight matrices are flattened row-major
// (output index major), one vector per layer; the PReLU slope is a single
// learnable scalar shared by every PReLU activation in the network.
struct NetworkParams {
  NetworkSpec spec;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  double prelu_slope = 0.25;
  std::int64_t step = 0;
};

namespace detail {

inline std::vector<int> layer_dims(const NetworkSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1)
    throw ConfigError("network needs positive input and output dims");
  if (spec.hidden_layers.empty())
    throw ConfigError("network needs at least one hidden layer");
  std::vector<int> dims;
  dims.push_back(spec.input_dim);
  for (int w : spec.hidden_layers) {
    if (w < 1) throw ConfigError("hidden layer width must be >= 1");
    dims.push_back(w);
  }
  dims.push_back(spec.output_dim);
  return dims;
}

inline double leaky_slope() { return 0.01; }

}  // namespace detail

inline NetworkParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  const auto dims = detail::layer_dims(spec);
  NetworkParams params;
  params.spec = spec;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Rng rng(substream(seed, "weights", static_cast<std::uint64_t>(l)));
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::vector<double> w(static_cast<std::size_t>(dims[l + 1]) * dims[l]);
    std::vector<double> b(dims[l + 1]);
    for (auto& x : w) x = rng.uniform(-bound, bound);
    for (auto& x : b) x = rng.uniform(-bound, bound);
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  return params;
}

namespace detail {

struct ForwardCache {
  std::vector<std::vector<double>> act;  // act[0] is the input
  std::vector<std::vector<double>> pre;  // pre-activation per layer
};

inline void forward_into(const NetworkParams& params,
                         const std::vector<double>& input,
                         ForwardCache& cache) {
  const auto dims = layer_dims(params.spec);
  if (static_cast<int>(input.size()) != params.spec.input_dim)
    throw ConfigError("input size " + std::to_string(input.size()) +
                      " does not match network input dim " +
                      std::to_string(params.spec.input_dim));
  const std::size_t layers = params.weights.size();
  cache.act.assign(layers + 1, {});
  cache.pre.assign(layers, {});
  cache.act[0] = input;
  for (std::size_t l = 0; l < layers; ++l) {
    const int rows = dims[l + 1], cols = dims[l];
    cache.pre[l].assign(rows, 0.0);
    const std::vector<double>& in = cache.act[l];
    const std::vector<double>& w = params.weights[l];
    for (int r = 0; r < rows; ++r) {
      double sum = params.biases[l][r];
      const double* row = w.data() + static_cast<std::size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) sum += row[c] * in[c];
      cache.pre[l][r] = sum;
    }
    const bool last = l + 1 == layers;
    const Activation act = last ? params.spec.output_activation
                                : params.spec.hidden_activation;
    cache.act[l + 1].assign(rows, 0.0);
    for (int r = 0; r < rows; ++r) {
      const double x = cache.pre[l][r];
      double y = x;
      switch (act) {
        case Activation::Identity: y = x; break;
        case Activation::ReLU: y = x >= 0.0 ? x : 0.0; break;
        case Activation::LeakyReLU: y = x >= 0.0 ? x : leaky_slope() * x; break;
        case Activation::PReLU: y = x >= 0.0 ? x : params.prelu_slope * x; break;
      }
      cache.act[l + 1][r] = y;
    }
  }
}

inline double activation_derivative(Activation act, double pre, double slope) {
  switch (act) {
    case Activation::Identity: return 1.0;
    case Activation::ReLU: return pre >= 0.0 ? 1.0 : 0.0;
    case Activation::LeakyReLU: return pre >= 0.0 ? 1.0 : leaky_slope();
    case Activation::PReLU: return pre >= 0.0 ? 1.0 : slope;
  }
  return 1.0;
}

}  // namespace detail

inline std::vector<double> forward(const NetworkParams& params,
                                   const std::vector<double>& input) {
  detail::ForwardCache cache;
  detail::forward_into(params, input, cache);
  return cache.act.back();
}

struct TrainBatch {
  std::vector<std::vector<double>> states;
  std::vector<int> actions;
  std::vector<double> targets;
};

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;
  double prelu_slope = 0.0;
};

struct UpdateStats {
  double loss = 0.0;
  double mean_q = 0.0;
};

// Mean squared error between Q(s, a) and the fixed targets, with gradients
// flowing only through the predictions.
inline std::pair<UpdateStats, Gradients> loss_and_gradients(
    const NetworkParams& params, const TrainBatch& batch) {
  if (batch.states.empty()) throw ConfigError("empty batch");
  if (batch.actions.size() != batch.states.size() ||
      batch.targets.size() != batch.states.size())
    throw ConfigError("batch columns disagree in length");
  const auto dims = detail::layer_dims(params.spec);
  const std::size_t layers = params.weights.size();

  Gradients grad;
  grad.weights.resize(layers);
  grad.biases.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    grad.weights[l].assign(params.weights[l].size(), 0.0);
    grad.biases[l].assign(params.biases[l].size(), 0.0);
  }

  const double scale = 1.0 / batch.states.size();
  UpdateStats stats;
  detail::ForwardCache cache;
  std::vector<double> delta, delta_prev;
  for (std::size_t i = 0; i < batch.states.size(); ++i) {
    detail::forward_into(params, batch.states[i], cache);
    const int a = batch.actions[i];
    if (a < 0 || a >= params.spec.output_dim)
      throw ConfigError("action index out of range in batch");
    const double q = cache.act.back()[a];
    const double err = q - batch.targets[i];
    stats.loss += scale * err * err;
    stats.mean_q += scale * q;

    // seed the output delta on the chosen action only
    delta.assign(dims.back(), 0.0);
    const double upstream = 2.0 * scale * err;
    const double out_pre = cache.pre.back()[a];
    if (params.spec.output_activation == Activation::PReLU && out_pre < 0.0)
      grad.prelu_slope += upstream * out_pre;
    delta[a] = upstream * detail::activation_derivative(
                              params.spec.output_activation, out_pre,
                              params.prelu_slope);

    for (std::size_t l = layers; l-- > 0;) {
      const int rows = dims[l + 1], cols = dims[l];
      const std::vector<double>& in = cache.act[l];
      std::vector<double>& gw = grad.weights[l];
      for (int r = 0; r < rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        double* row = gw.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) row[c] += d * in[c];
        grad.biases[l][r] += d;
      }
      if (l == 0) break;
      delta_prev.assign(cols, 0.0);
      const std::vector<double>& w = params.weights[l];
      for (int r = 0; r < rows; ++r) {
        const double d = delta[r];
        if (d == 0.0) continue;
        const double* row = w.data() + static_cast<std::size_t>(r) * cols;
        for (int c = 0; c < cols; ++c) delta_prev[c] += d * row[c];
      }
      for (int c = 0; c < cols; ++c) {
        const double pre = cache.pre[l - 1][c];
        // delta_prev[c] is still dL/d(activation output) here, which is the
        // upstream for the slope since d(slope * pre)/d(slope) = pre.
        if (params.spec.hidden_activation == Activation::PReLU && pre < 0.0)
          grad.prelu_slope += delta_prev[c] * pre;
        delta_prev[c] *= detail::activation_derivative(
            params.spec.hidden_activation, pre, params.prelu_slope);
      }
      delta.swap(delta_prev);
    }
  }
  return {stats, std::move(grad)};
}

enum class OptimizerKind { SGD, Adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

struct Optimizer {
  OptimizerKind kind = OptimizerKind::SGD;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t t = 0;
  Gradients m, v;

  void apply(NetworkParams& params, const Gradients& grad, double lr) {
    if (kind == OptimizerKind::SGD) {
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        for (std::size_t i = 0; i < params.weights[l].size(); ++i)
          params.weights[l][i] -= lr * grad.weights[l][i];
        for (std::size_t i = 0; i < params.biases[l].size(); ++i)
          params.biases[l][i] -= lr * grad.biases[l][i];
      }
      params.prelu_slope -= lr * grad.prelu_slope;
      return;
    }
    if (m.weights.empty()) {
      m = grad;
      v = grad;
      for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : m.biases) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : v.weights) std::fill(layer.begin(), layer.end(), 0.0);
      for (auto& layer : v.biases) std::fill(layer.begin(), layer.end(), 0.0);
      m.prelu_slope = v.prelu_slope = 0.0;
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    auto update = [&](double& param, double& m1, double& m2, double g) {
      m1 = beta1 * m1 + (1.0 - beta1) * g;
      m2 = beta2 * m2 + (1.0 - beta2) * g * g;
      param -= lr * (m1 / c1) / (std::sqrt(m2 / c2) + eps);
    };
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
      for (std::size_t i = 0; i < params.weights[l].size(); ++i)
        update(params.weights[l][i], m.weights[l][i], v.weights[l][i],
               grad.weights[l][i]);
      for (std::size_t i = 0; i < params.biases[l].size(); ++i)
        update(params.biases[l][i], m.biases[l][i], v.biases[l][i],
               grad.biases[l][i]);
    }
    update(params.prelu_slope, m.prelu_slope, v.prelu_slope, grad.prelu_slope);
  }
};

inline UpdateStats backward_step(NetworkParams& params, const TrainBatch& batch,
                                 double learning_rate,
                                 Optimizer* optimizer = nullptr) {
  auto [stats, grad] = loss_and_gradients(params, batch);
  if (!std::isfinite(stats.loss))
    throw InternalError("TD loss is not finite (step " +
                        std::to_string(params.step) + ", batch of " +
                        std::to_string(batch.states.size()) + ")");
  if (optimizer) {
    optimizer->apply(params, grad, learning_rate);
  } else {
    Optimizer plain;
    plain.apply(params, grad, learning_rate);
  }
  return stats;
}

// y = r for terminal samples, else r + gamma * max over feasible next actions.
inline std::vector<double> td_targets(
    const NetworkParams& target_params,
    const std::vector<const TransitionSample*>& batch, double gamma) {
  std::vector<double> targets;
  targets.reserve(batch.size());
  for (const TransitionSample* sample : batch) {
    if (sample->terminal) {
      targets.push_back(sample->reward);
      continue;
    }
    const auto q = forward(target_params, sample->next_state);
    if (sample->next_feasible.size() != q.size())
      throw ConfigError("next-state feasibility mask size mismatch");
    bool any = false;
    double best = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
      if (!sample->next_feasible[a]) continue;
      if (!any || q[a] > best) best = q[a];
      any = true;
    }
    if (!any)
      throw ConfigError("non-terminal sample with no feasible next action");
    targets.push_back(sample->reward + gamma * best);
  }
  return targets;
}

inline int act_epsilon_greedy(const std::vector<double>& q_values,
                              const std::vector<char>& mask, double epsilon,
                              Rng& rng) {
  if (q_values.size() != mask.size())
    throw ConfigError("mask size does not match q-values");
  int feasible = 0;
  for (char ok : mask) feasible += ok ? 1 : 0;
  if (feasible == 0) throw ConfigError("no feasible action to select");
  if (epsilon > 0.0 && rng.uniform() < epsilon) {
    int pick = static_cast<int>(rng.uniform_index(feasible));
    for (std::size_t a = 0; a < mask.size(); ++a) {
      if (!mask[a]) continue;
      if (pick-- == 0) return static_cast<int>(a);
    }
  }
  int best = -1;
  for (std::size_t a = 0; a < mask.size(); ++a) {
    if (!mask[a]) continue;
    if (best < 0 || q_values[a] > q_values[best]) best = static_cast<int>(a);
  }
  return best;
}

struct TrainConfig {
  std::int64_t total_steps = 3'000'000;
  double learning_rate = 2.5e-4;
  double gamma = 0.99;
  int batch_size = 256;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double exploration_fraction = 0.5;
  std::int64_t target_update_interval = 1000;
  std::int64_t train_frequency = 4;
  std::int64_t learning_starts = 1000;
  OptimizerKind optimizer = OptimizerKind::SGD;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& config) {
  if (config.total_steps < 1) throw ConfigError("total_steps must be >= 1");
  if (!(config.gamma > 0.0 && config.gamma <= 1.0))
    throw ConfigError("gamma must lie in (0, 1]");
  if (!(config.epsilon_end >= 0.0 &&
        config.epsilon_end <= config.epsilon_start &&
        config.epsilon_start <= 1.0))
    throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
  if (config.exploration_fraction <= 0.0 || config.exploration_fraction > 1.0)
    throw ConfigError("exploration_fraction must lie in (0, 1]");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.learning_rate <= 0.0)
    throw ConfigError("learning_rate must be > 0");
}

inline double epsilon_schedule(std::int64_t step, const TrainConfig& config) {
  if (step < 0) throw ConfigError("step must be >= 0");
  const double decay_steps =
      config.exploration_fraction * static_cast<double>(config.total_steps);
  if (static_cast<double>(step) >= decay_steps) return config.epsilon_end;
  const double progress = static_cast<double>(step) / decay_steps;
  return config.epsilon_start +
         (config.epsilon_end - config.epsilon_start) * progress;
}

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw ConfigError("replay capacity must be >= 1");
  }

  void push(TransitionSample sample) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(sample));
    } else {
      data_[head_] = std::move(sample);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  // i = 0 is the oldest retained sample.
  const TransitionSample& operator[](std::size_t i) const {
    return data_[(head_ + i) % data_.size()];
  }

  std::vector<const TransitionSample*> sample(int batch_size, Rng& rng) const {
    if (data_.empty()) throw ConfigError("sampling from an empty buffer");
    std::vector<const TransitionSample*> out;
    out.reserve(batch_size);
    for (int i = 0; i < batch_size; ++i)
      out.push_back(&(*this)[rng.uniform_index(data_.size())]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<TransitionSample> data_;
};

// ---- Checkpoints (schema version 1) ----

inline void to_json(nlohmann::json& j, const NetworkSpec& spec) {
  j = nlohmann::json{{"input_dim", spec.input_dim},
                     {"hidden_layers", spec.hidden_layers},
                     {"output_dim", spec.output_dim},
                     {"hidden_activation", to_string(spec.hidden_activation)},
                     {"output_activation", to_string(spec.output_activation)}};
}

inline void from_json(const nlohmann::json& j, NetworkSpec& spec) {
  j.at("input_dim").get_to(spec.input_dim);
  j.at("hidden_layers").get_to(spec.hidden_layers);
  j.at("output_dim").get_to(spec.output_dim);
  spec.hidden_activation =
      parse_activation(j.at("hidden_activation").get<std::string>());
  spec.output_activation =
      parse_activation(j.at("output_activation").get<std::string>());
}

inline void save_checkpoint(const NetworkParams& params,
                            const std::string& path) {
  nlohmann::json j{{"schema_version", 1},
                   {"spec", params.spec},
                   {"weights", params.weights},
                   {"biases", params.biases},
                   {"prelu_slope", params.prelu_slope},
                   {"step", params.step}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump() << '\n';
}

inline NetworkParams load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint '" + path + "': " + e.what());
  }
  if (!j.contains("schema_version") || j["schema_version"] != 1)
    throw DataError("unsupported checkpoint schema in '" + path + "'");
  NetworkParams params;
  try {
    j.at("spec").get_to(params.spec);
    j.at("weights").get_to(params.weights);
    j.at("biases").get_to(params.biases);
    j.at("prelu_slope").get_to(params.prelu_slope);
    j.at("step").get_to(params.step);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad checkpoint '" + path + "': " + e.what());
  }
  const auto dims = detail::layer_dims(params.spec);
  if (params.weights.size() != dims.size() - 1 ||
      params.biases.size() != dims.size() - 1)
    throw DataError("checkpoint layer count does not match its spec");
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    if (params.weights[l].size() !=
            static_cast<std::size_t>(dims[l + 1]) * dims[l] ||
        params.biases[l].size() != static_cast<std::size_t>(dims[l + 1]))
      throw DataError("checkpoint layer " + std::to_string(l) +
                      " shape does not match its spec");
  }
  return params;
}

}  // namespace bsrl
