#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "forge/neural.hpp"
#include "forge/table.hpp"

namespace forge {

/// Reward magnitudes per true class: fatal earns fatal_reward, serious r1 and
/// slight r2; the sign is + on a correct prediction and - otherwise.
struct RewardScheme {
  double r1 = 1.0;
  double r2 = 1.0;
  double fatal_reward = 1.0;

  double magnitude(std::int32_t label) const {
    switch (label) {
      case 2: return fatal_reward;
      case 1: return r1;
      default: return r2;
    }
  }

  double reward(std::int32_t label, std::int32_t action) const {
    return action == label ? magnitude(label) : -magnitude(label);
  }
};

inline RewardScheme compute_reward_scheme(const ClassCounts& counts, double fatal_reward = 1.0) {
  if (counts[0] == 0) throw Error(ErrorKind::ZeroMajority, "no slight samples to form reward ratios");
  const double slight = static_cast<double>(counts[0]);
  return {static_cast<double>(counts[1]) / slight, static_cast<double>(counts[2]) / slight, fatal_reward};
}

struct Transition {
  Vector state;
  std::int32_t action = 0;
  double reward = 0;
  Vector next_state;
  bool done = false;

  bool operator==(const Transition& o) const {
    return state == o.state && action == o.action && reward == o.reward && next_state == o.next_state && done == o.done;
  }
};

/// Fixed-capacity ring buffer; the oldest transition is evicted on overflow.
class ReplayMemory {
 public:
  explicit ReplayMemory(std::size_t capacity = 1'000'000) : capacity_(capacity) {
    if (capacity == 0) throw Error(ErrorKind::InvalidArgument, "memory capacity must be positive");
  }

  void push(Transition t) {
    if (buf_.size() < capacity_) {
      buf_.push_back(std::move(t));
    } else {
      buf_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const { return buf_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i-th transition counting from the oldest.
  const Transition& at(std::size_t i) const { return buf_[(head_ + i) % buf_.size()]; }

  /// Uniform sampling with replacement.
  std::vector<const Transition*> sample(std::size_t batch, std::mt19937_64& rng) const {
    if (buf_.size() < batch || batch == 0) {
      throw Error(ErrorKind::InsufficientMemory,
                  "memory holds " + std::to_string(buf_.size()) + " transitions, batch needs " + std::to_string(batch));
    }
    std::uniform_int_distribution<std::size_t> pick(0, buf_.size() - 1);
    std::vector<const Transition*> out(batch);
    for (auto& p : out) p = &buf_[pick(rng)];
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> buf_;
};

struct StepResult {
  Vector observation;
  double reward = 0;
  bool done = false;
};

/// Walks a shuffled copy of the training rows one sample per step.
class Environment {
 public:
  Environment(Matrix observations, std::vector<std::int32_t> labels, RewardScheme scheme, std::uint64_t seed = 0)
      : x_(std::move(observations)), y_(std::move(labels)), scheme_(scheme), rng_(seed) {
    if (static_cast<std::size_t>(x_.rows()) != y_.size()) throw Error(ErrorKind::ShapeMismatch, "observations/labels length");
    order_.resize(y_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  Vector reset(std::uint64_t seed) {
    if (y_.empty()) throw Error(ErrorKind::EmptyData, "environment has no samples");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(seed);
    std::shuffle(order_.begin(), order_.end(), shuffle_rng);
    step_ = 0;
    return observation();
  }

  /// Classifies the current sample. On done the environment resets itself
  /// and the returned observation is the first sample of the new order.
  StepResult step(std::int32_t action) {
    if (action < 0 || action >= static_cast<std::int32_t>(kNumClasses)) {
      throw Error(ErrorKind::InvalidAction, "action " + std::to_string(action));
    }
    if (y_.empty()) throw Error(ErrorKind::EmptyData, "environment has no samples");
    const auto label = y_[order_[step_]];
    StepResult r;
    r.reward = scheme_.reward(label, action);
    ++step_;
    const bool minority_miss = label != static_cast<std::int32_t>(ClassLabel::Slight) && action != label;
    r.done = minority_miss || step_ == y_.size();
    r.observation = r.done ? reset(rng_()) : observation();
    return r;
  }

  std::size_t step_counter() const { return step_; }
  std::size_t n_rows() const { return y_.size(); }
  std::size_t observation_dim() const { return static_cast<std::size_t>(x_.cols()); }
  std::size_t current_row() const { return order_[step_]; }
  std::int32_t current_label() const { return y_[order_[step_]]; }
  const RewardScheme& scheme() const { return scheme_; }

 private:
  Vector observation() const { return x_.row(static_cast<Eigen::Index>(order_[step_])).transpose(); }

  Matrix x_;
  std::vector<std::int32_t> y_;
  RewardScheme scheme_;
  std::vector<std::size_t> order_;
  std::size_t step_ = 0;
  std::mt19937_64 rng_;
};

struct AgentHyperparameters {
  double epsilon_start = 1.0;
  double epsilon_end = 0.01;
  std::size_t epsilon_decay_steps = 0;  // 0: ten times the training-set size
  double gamma = 0.1;
  std::size_t batch_size = 32;
  std::size_t target_update_every = 5;  // episodes
  double learning_rate = 1e-3;
  std::size_t memory_capacity = 1'000'000;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  InitScheme init = InitScheme::HeUniform;
  double fatal_reward = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(0 <= epsilon_end && epsilon_end <= epsilon_start && epsilon_start <= 1)) {
      throw Error(ErrorKind::InvalidArgument, "need 0 <= epsilon_end <= epsilon_start <= 1");
    }
    if (!(0 <= gamma && gamma < 1)) throw Error(ErrorKind::InvalidArgument, "gamma must be in [0, 1)");
    if (batch_size == 0 || target_update_every == 0) throw Error(ErrorKind::InvalidArgument, "batch size and N must be >= 1");
  }
};

/// Linear decay from epsilon_start to epsilon_end over decay_steps, then flat.
inline double epsilon_at(const AgentHyperparameters& h, std::size_t step, std::size_t decay_steps) {
  if (decay_steps == 0 || step >= decay_steps) return h.epsilon_end;
  const double t = static_cast<double>(step) / static_cast<double>(decay_steps);
  return h.epsilon_start + (h.epsilon_end - h.epsilon_start) * t;
}

inline std::int32_t greedy_action(const MLPModel& q, const Vector& obs) {
  Matrix row = obs.transpose();
  Matrix out = forward(q, row);
  return neural_detail::argmax_row(out, 0);
}

/// DQN agent: an evaluation network trained every step and a target network
/// that supplies bootstrap values and is refreshed by sync_target.
class Agent {
 public:
  Agent(std::size_t obs_dim, const std::vector<std::size_t>& hidden, AgentHyperparameters hyper)
      : hyper_(hyper),
        eval_(make_net(obs_dim, hidden, hyper)),
        target_(eval_),
        opt_(hyper.optimizer, hyper.learning_rate, eval_) {
    hyper_.validate();
  }

  Agent(MLPModel eval, MLPModel target, AgentHyperparameters hyper)
      : hyper_(hyper), eval_(std::move(eval)), target_(std::move(target)), opt_(hyper.optimizer, hyper.learning_rate, eval_) {
    hyper_.validate();
  }

  std::int32_t select_action(const Vector& obs, double epsilon, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    if (epsilon > 0 && unit(rng) < epsilon) {
      std::uniform_int_distribution<std::int32_t> any(0, static_cast<std::int32_t>(kNumClasses) - 1);
      return any(rng);
    }
    return greedy_action(eval_, obs);
  }

  /// One gradient step on the batch; returns the mean squared Q error before it.
  double learn_step(std::span<const Transition* const> batch) {
    if (batch.empty()) throw Error(ErrorKind::InsufficientMemory, "empty batch");
    const auto n = static_cast<Eigen::Index>(batch.size());
    const auto d = batch.front()->state.size();
    Matrix s(n, d), s_next(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      s.row(i) = batch[static_cast<std::size_t>(i)]->state.transpose();
      s_next.row(i) = batch[static_cast<std::size_t>(i)]->next_state.transpose();
    }
    Matrix q_next = forward(target_, s_next);
    std::vector<std::int32_t> actions(batch.size());
    std::vector<double> targets(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto& t = *batch[i];
      actions[i] = t.action;
      targets[i] = t.done ? t.reward : t.reward + hyper_.gamma * q_next.row(static_cast<Eigen::Index>(i)).maxCoeff();
    }
    auto lg = backward_q(eval_, s, actions, targets);
    opt_.step(eval_, lg.grads);
    return lg.loss;
  }

  double learn_from(const ReplayMemory& memory, std::mt19937_64& rng) {
    auto batch = memory.sample(hyper_.batch_size, rng);
    return learn_step(batch);
  }

  void sync_target() { target_ = eval_; }

  const MLPModel& eval_network() const { return eval_; }
  const MLPModel& target_network() const { return target_; }
  MLPModel& mutable_eval_network() { return eval_; }
  const AgentHyperparameters& hyper() const { return hyper_; }

 private:
  static MLPModel make_net(std::size_t obs_dim, const std::vector<std::size_t>& hidden, const AgentHyperparameters& h) {
    std::vector<std::size_t> sizes{obs_dim};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(kNumClasses);
    return MLPModel::create(sizes, OutputMode::Linear, h.init, h.seed);
  }

  AgentHyperparameters hyper_;
  MLPModel eval_;
  MLPModel target_;
  Optimizer opt_;
};

struct EpisodeRecord {
  std::size_t episode = 0;  // 1-based
  double episode_return = 0;
  std::size_t length = 0;
  double epsilon = 0;  // at the episode's last step
  double mean_loss = 0;
};

struct RLLog {
  std::vector<EpisodeRecord> episodes;
  std::size_t total_steps = 0;
  std::size_t target_syncs = 0;
};

inline std::string format_rl_log(const RLLog& log) {
  std::string out = "episode,return,length,epsilon,mean_loss\n";
  for (const auto& e : log.episodes) {
    out += std::to_string(e.episode) + "," + format_number(e.episode_return) + "," + std::to_string(e.length) + "," +
           format_number(e.epsilon) + "," + format_number(e.mean_loss) + "\n";
  }
  return out;
}

/// Plays one episode with a fixed policy, without learning.
inline EpisodeRecord run_episode(Environment& env, std::uint64_t seed,
                                 const std::function<std::int32_t(const Vector&, std::size_t row)>& policy) {
  EpisodeRecord rec;
  Vector obs = env.reset(seed);
  while (true) {
    auto r = env.step(policy(obs, env.current_row()));
    rec.episode_return += r.reward;
    ++rec.length;
    if (r.done) break;
    obs = std::move(r.observation);
  }
  return rec;
}

struct RLResult {
  FeatureEncoder encoder;
  Agent agent;
  RLLog log;
};

/// Core loop on encoded observations: reset, act epsilon-greedily, store the
/// transition, learn from a sampled batch once memory holds a batch, sync the
/// target every N episodes.
inline RLLog train_agent(Agent& agent, Environment& env, ReplayMemory& memory, std::size_t episodes,
                         std::size_t decay_steps) {
  const auto& h = agent.hyper();
  std::mt19937_64 rng(h.seed ^ 0xd1b54a32d192ed03ull);
  RLLog log;
  for (std::size_t ep = 1; ep <= episodes; ++ep) {
    EpisodeRecord rec;
    rec.episode = ep;
    Vector obs = env.reset(rng());
    double loss_sum = 0;
    std::size_t learns = 0;
    while (true) {
      const double eps = epsilon_at(h, log.total_steps, decay_steps);
      rec.epsilon = eps;
      const auto action = agent.select_action(obs, eps, rng);
      auto r = env.step(action);
      ++log.total_steps;
      ++rec.length;
      rec.episode_return += r.reward;
      memory.push({obs, action, r.reward, r.observation, r.done});
      if (memory.size() >= h.batch_size) {
        loss_sum += agent.learn_from(memory, rng);
        ++learns;
      }
      if (r.done) break;
      obs = std::move(r.observation);
    }
    rec.mean_loss = learns ? loss_sum / static_cast<double>(learns) : 0.0;
    log.episodes.push_back(rec);
    if (ep % h.target_update_every == 0) {
      agent.sync_target();
      ++log.target_syncs;
    }
  }
  return log;
}

inline RLResult train_rl(const DataTable& train, const std::vector<std::size_t>& hidden, const AgentHyperparameters& hyper,
                         std::size_t episodes, NominalEncoding nominal = NominalEncoding::Integer) {
  hyper.validate();
  auto encoder = FeatureEncoder::fit(train, nominal);
  Matrix x = encoder.encode(train);
  auto y = target_labels(train);
  if (y.empty()) throw Error(ErrorKind::EmptyData, "training table has no rows");
  auto scheme = compute_reward_scheme(class_counts(train), hyper.fatal_reward);
  Environment env(std::move(x), std::move(y), scheme, hyper.seed);
  Agent agent(env.observation_dim(), hidden, hyper);
  ReplayMemory memory(hyper.memory_capacity);
  const std::size_t decay = hyper.epsilon_decay_steps ? hyper.epsilon_decay_steps : 10 * train.n_rows();
  auto log = train_agent(agent, env, memory, episodes, decay);
  return {std::move(encoder), std::move(agent), std::move(log)};
}

/// Softmax over Q-values, then argmax with ties toward the lower code.
inline std::vector<std::int32_t> rl_predict(const MLPModel& target, const Matrix& rows) {
  Matrix q = forward(target, rows);
  neural_detail::softmax_rows(q);
  std::vector<std::int32_t> out(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index r = 0; r < q.rows(); ++r) out[static_cast<std::size_t>(r)] = neural_detail::argmax_row(q, r);
  return out;
}

// ---- persistence ----
//
// Memory stream: u64 record count, then per record a u64 byte length followed
// by: u64 dim, f64 state[dim], i32 action, f64 reward, f64 next_state[dim], u8 done.

inline std::string serialize_memory(const ReplayMemory& m) {
  using neural_detail::put;
  std::string out;
  put<std::uint64_t>(out, m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto& t = m.at(i);
    std::string rec;
    put<std::uint64_t>(rec, static_cast<std::uint64_t>(t.state.size()));
    for (Eigen::Index j = 0; j < t.state.size(); ++j) put<double>(rec, t.state(j));
    put<std::int32_t>(rec, t.action);
    put<double>(rec, t.reward);
    for (Eigen::Index j = 0; j < t.next_state.size(); ++j) put<double>(rec, t.next_state(j));
    put<std::uint8_t>(rec, t.done ? 1 : 0);
    put<std::uint64_t>(out, rec.size());
    out += rec;
  }
  return out;
}

inline ReplayMemory deserialize_memory(std::string_view in, std::size_t capacity) {
  using neural_detail::get;
  std::size_t pos = 0;
  const auto count = get<std::uint64_t>(in, pos);
  ReplayMemory m(capacity);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = get<std::uint64_t>(in, pos);
    const std::size_t end = pos + len;
    Transition t;
    const auto dim = static_cast<Eigen::Index>(get<std::uint64_t>(in, pos));
    t.state.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j) t.state(j) = get<double>(in, pos);
    t.action = get<std::int32_t>(in, pos);
    t.reward = get<double>(in, pos);
    t.next_state.resize(dim);
    for (Eigen::Index j = 0; j < dim; ++j) t.next_state(j) = get<double>(in, pos);
    t.done = get<std::uint8_t>(in, pos) != 0;
    if (pos != end) throw Error(ErrorKind::Io, "memory record length mismatch");
    m.push(std::move(t));
  }
  if (pos != in.size()) throw Error(ErrorKind::Io, "trailing bytes in memory file");
  return m;
}

struct AgentState {
  double epsilon = 1.0;
  std::size_t total_steps = 0;
  std::size_t episodes = 0;
};

/// Writes eval.ckpt, target.ckpt, state.txt and, when given, memory.bin.
inline void save_agent(const std::filesystem::path& dir, const Agent& agent, const AgentState& state,
                       const ReplayMemory* memory = nullptr) {
  save_model(dir / "eval.ckpt", agent.eval_network());
  save_model(dir / "target.ckpt", agent.target_network());
  write_file(dir / "state.txt", "epsilon=" + format_number(state.epsilon) + "\ntotal_steps=" +
                                    std::to_string(state.total_steps) + "\nepisodes=" + std::to_string(state.episodes) + "\n");
  if (memory) write_file(dir / "memory.bin", serialize_memory(*memory));
}

inline AgentState load_agent_state(const std::filesystem::path& dir) {
  AgentState s;
  std::istringstream in(read_file(dir / "state.txt"));
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto key = line.substr(0, eq);
    auto val = line.substr(eq + 1);
    if (key == "epsilon") s.epsilon = std::stod(val);
    else if (key == "total_steps") s.total_steps = std::stoull(val);
    else if (key == "episodes") s.episodes = std::stoull(val);
  }
  return s;
}

inline Agent load_agent(const std::filesystem::path& dir, const AgentHyperparameters& hyper) {
  return Agent(load_model(dir / "eval.ckpt"), load_model(dir / "target.ckpt"), hyper);
}

}  // namespace forge
