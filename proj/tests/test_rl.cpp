#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "forge/fixture.hpp"
#include "forge/rl.hpp"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace forge;
using namespace forge::test;

namespace {

Environment make_env(std::vector<std::int32_t> labels, RewardScheme scheme, std::uint64_t seed = 0) {
  Matrix x(static_cast<Eigen::Index>(labels.size()), 2);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    x(r, 0) = static_cast<double>(r);
    x(r, 1) = labels[static_cast<std::size_t>(r)];
  }
  return Environment(std::move(x), std::move(labels), scheme, seed);
}

Transition transition(Vector s, std::int32_t a, double r, Vector next, bool done) {
  return Transition{std::move(s), a, r, std::move(next), done};
}

}  // namespace

TEST(RewardScheme, Ratios) {
  auto t1 = compute_reward_scheme({2539715, 345997, 30171});
  EXPECT_NEAR(t1.r1, 345997.0 / 2539715.0, 1e-15);
  EXPECT_NEAR(t1.r1, 0.13623, 1e-5);
  EXPECT_NEAR(t1.r2, 0.011880, 1e-6);
  auto bal = compute_reward_scheme({7, 7, 7});
  EXPECT_EQ(bal.r1, 1.0);
  EXPECT_EQ(bal.r2, 1.0);
  auto s = compute_reward_scheme({100, 10, 1});
  EXPECT_DOUBLE_EQ(s.r1, 0.1);
  EXPECT_DOUBLE_EQ(s.r2, 0.01);
  try {
    compute_reward_scheme({0, 3, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ZeroMajority);
  }
}

TEST(Environment, ResetIsDeterministic) {
  auto env = make_env({0, 1, 2, 0, 0, 1, 0, 2, 0, 0}, {0.5, 0.1, 1.0});
  auto a = env.reset(42);
  EXPECT_EQ(env.step_counter(), 0u);
  env.step(0);
  auto b = env.reset(42);
  EXPECT_EQ(a, b);
  EXPECT_EQ(env.step_counter(), 0u);
  Environment empty(Matrix(0, 2), {}, {});
  try {
    empty.reset(1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyData);
  }
}

TEST(Environment, CorrectStepsVisitEveryRowOnce) {
  std::vector<std::int32_t> labels(20);
  for (std::size_t i = 0; i < 20; ++i) labels[i] = static_cast<std::int32_t>(i % 3);
  auto env = make_env(labels, {0.5, 0.1, 1.0});
  auto obs = env.reset(7);
  std::multiset<double> seen;
  for (std::size_t i = 0; i < 20; ++i) {
    seen.insert(obs[0]);
    auto r = env.step(static_cast<std::int32_t>(obs[1]));
    EXPECT_EQ(r.done, i == 19);
    obs = r.observation;
  }
  std::multiset<double> all;
  for (int i = 0; i < 20; ++i) all.insert(i);
  EXPECT_EQ(seen, all);
  // The environment reset itself after the last sample.
  EXPECT_EQ(env.step_counter(), 0u);
}

TEST(Environment, RewardAndDoneTable) {
  const RewardScheme scheme{0.25, 0.125, 1.0};
  const double magnitude[3] = {0.125, 0.25, 1.0};
  for (std::int32_t label = 0; label < 3; ++label) {
    for (std::int32_t action = 0; action < 3; ++action) {
      auto env = make_env({label, label, label}, scheme);
      env.reset(1);
      auto r = env.step(action);
      const double expected = (label == action ? 1 : -1) * magnitude[label];
      EXPECT_EQ(r.reward, expected) << label << "/" << action;
      EXPECT_EQ(r.done, label != 0 && label != action) << label << "/" << action;
    }
  }
  auto env = make_env({2}, scheme);
  env.reset(0);
  auto r = env.step(2);
  EXPECT_EQ(r.reward, 1.0);
  EXPECT_TRUE(r.done);
  EXPECT_THROW(env.step(3), Error);
  EXPECT_THROW(env.step(-1), Error);
}

TEST(Agent, GreedyAndTies) {
  AgentHyperparameters h;
  auto q = MLPModel::create({3, 3}, OutputMode::Linear, InitScheme::HeUniform, 0);
  q.weights[0].setZero();
  q.biases[0] << 0.1, 0.9, 0.2;
  Agent agent(q, q, h);
  std::mt19937_64 rng(1);
  Vector obs = Vector::Zero(3);
  EXPECT_EQ(agent.select_action(obs, 0.0, rng), 1);
  q.biases[0] << 0.5, 0.5, 0.1;
  Agent tie(q, q, h);
  EXPECT_EQ(tie.select_action(obs, 0.0, rng), 0);

  std::array<int, 3> freq{};
  for (int i = 0; i < 10000; ++i) freq[static_cast<std::size_t>(agent.select_action(obs, 1.0, rng))]++;
  const double expect = 10000.0 / 3, sigma = std::sqrt(10000.0 * (1.0 / 3) * (2.0 / 3));
  for (int f : freq) EXPECT_LT(std::fabs(f - expect), 3 * sigma);
}

TEST(Agent, LearnStepTargets) {
  AgentHyperparameters h;
  h.gamma = 0.1;
  h.learning_rate = 0.0;
  auto eval = MLPModel::create({2, 3}, OutputMode::Linear, InitScheme::HeUniform, 0);
  eval.weights[0].setZero();
  eval.biases[0].setZero();
  auto target = eval;
  target.biases[0] << 2.0, -1.0, 0.5;
  Agent agent(eval, target, h);
  Vector s = Vector::Zero(2);
  auto terminal = transition(s, 1, 1.0, s, true);
  std::vector<const Transition*> b1{&terminal};
  EXPECT_DOUBLE_EQ(agent.learn_step(b1), 1.0);
  auto boot = transition(s, 0, 0.0, s, false);
  std::vector<const Transition*> b2{&boot};
  // target 0 + 0.1 * 2 = 0.2; Q = 0; squared error 0.04
  EXPECT_NEAR(agent.learn_step(b2), 0.04, 1e-15);
}

TEST(Agent, QLossGradientCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) EXPECT_LT(check_q_case({4, 8, 3}, 16, seed).max_rel_error, 1e-5);
}

TEST(Agent, SyncCopiesAndStartsIdentical) {
  AgentHyperparameters h;
  h.seed = 3;
  h.learning_rate = 0.05;
  h.batch_size = 4;
  Agent agent(4, {8}, h);
  EXPECT_EQ(serialize_model(agent.eval_network()), serialize_model(agent.target_network()));
  ReplayMemory mem(100);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0, 1);
  for (int i = 0; i < 20; ++i) {
    Vector s(4), n(4);
    for (int j = 0; j < 4; ++j) {
      s[j] = nd(rng);
      n[j] = nd(rng);
    }
    mem.push(transition(s, i % 3, nd(rng), n, i % 4 == 0));
  }
  for (int i = 0; i < 5; ++i) agent.learn_from(mem, rng);
  EXPECT_NE(serialize_model(agent.eval_network()), serialize_model(agent.target_network()));
  const auto eval_bytes = serialize_model(agent.eval_network());
  agent.sync_target();
  EXPECT_EQ(serialize_model(agent.eval_network()), eval_bytes);
  Matrix states(100, 4);
  for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] = nd(rng);
  EXPECT_EQ(forward(agent.eval_network(), states), forward(agent.target_network(), states));
}

TEST(Memory, RingEviction) {
  ReplayMemory mem(5);
  for (int i = 0; i < 8; ++i) mem.push(transition(Vector::Constant(1, i), 0, i, Vector::Zero(1), false));
  EXPECT_EQ(mem.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(mem.at(i).reward, static_cast<double>(i + 3));
  std::mt19937_64 rng(1);
  EXPECT_THROW(mem.sample(6, rng), Error);
  EXPECT_EQ(mem.sample(5, rng).size(), 5u);

  auto back = deserialize_memory(serialize_memory(mem), 5);
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(back.at(i), mem.at(i));
}

TEST(Epsilon, LinearThenFlat) {
  AgentHyperparameters h;
  EXPECT_EQ(epsilon_at(h, 0, 100), 1.0);
  EXPECT_NEAR(epsilon_at(h, 50, 100), 0.505, 1e-12);
  EXPECT_EQ(epsilon_at(h, 100, 100), 0.01);
  EXPECT_EQ(epsilon_at(h, 5000, 100), 0.01);
  h.gamma = 1.0;
  EXPECT_THROW(h.validate(), Error);
}

TEST(Episode, OracleOnOneRow) {
  for (std::int32_t label = 0; label < 3; ++label) {
    const RewardScheme scheme{0.3, 0.05, 1.0};
    auto env = make_env({label}, scheme);
    for (std::uint64_t ep = 0; ep < 3; ++ep) {
      auto rec = run_episode(env, ep, [&](const Vector& obs, std::size_t) { return static_cast<std::int32_t>(obs[1]); });
      EXPECT_EQ(rec.length, 1u);
      EXPECT_EQ(rec.episode_return, scheme.magnitude(label));
    }
  }
}

TEST(TrainRL, ScheduleDeterminismAndRewards) {
  BlobSpec spec;
  spec.proportions = {0.8, 0.15, 0.05};
  spec.n = 300;
  spec.seed = 2;
  auto table = make_blobs(spec);
  AgentHyperparameters h;
  h.seed = 9;
  h.target_update_every = 1;
  h.batch_size = 16;
  h.epsilon_decay_steps = 200;
  auto a = train_rl(table, {8}, h, 30);
  auto b = train_rl(table, {8}, h, 30);
  EXPECT_EQ(format_rl_log(a.log), format_rl_log(b.log));
  EXPECT_EQ(a.log.target_syncs, 30u);
  EXPECT_EQ(serialize_model(a.agent.eval_network()), serialize_model(a.agent.target_network()));
  std::size_t steps = 0;
  for (const auto& e : a.log.episodes) steps += e.length;
  EXPECT_EQ(steps, a.log.total_steps);
  if (a.log.total_steps > 200) EXPECT_EQ(a.log.episodes.back().epsilon, 0.01);
  // Every reward magnitude comes from the scheme.
  auto scheme = compute_reward_scheme(class_counts(table));
  auto x = a.encoder.encode(table);
  Environment env(x, target_labels(table), scheme, 1);
  std::mt19937_64 rng(4);
  env.reset(3);
  for (int i = 0; i < 200; ++i) {
    auto r = env.step(static_cast<std::int32_t>(rng() % 3));
    const double m = std::fabs(r.reward);
    EXPECT_TRUE(m == scheme.r1 || m == scheme.r2 || m == scheme.fatal_reward);
  }
}

TEST(TrainRL, EveryOtherEpisodeSync) {
  BlobSpec spec;
  spec.n = 150;
  spec.seed = 1;
  auto table = make_blobs(spec);
  AgentHyperparameters h;
  h.seed = 2;
  h.target_update_every = 2;
  h.batch_size = 8;
  auto r = train_rl(table, {6}, h, 7);
  EXPECT_EQ(r.log.target_syncs, 3u);
}

TEST(RLPredict, ArgmaxAndBatch) {
  auto q = MLPModel::create({2, 3}, OutputMode::Linear, InitScheme::HeUniform, 0);
  q.weights[0].setZero();
  q.biases[0] << 1, 3, 2;
  Matrix x = Matrix::Zero(1, 2);
  EXPECT_EQ(rl_predict(q, x)[0], 1);
  q.biases[0] << 2, 2, 1;
  EXPECT_EQ(rl_predict(q, x)[0], 0);
  auto net = MLPModel::create({2, 5, 3}, OutputMode::Linear, InitScheme::HeUniform, 7);
  Matrix many = Matrix::Random(30, 2);
  auto batch = rl_predict(net, many);
  for (Eigen::Index r = 0; r < many.rows(); ++r) {
    Matrix one = many.row(r);
    EXPECT_EQ(rl_predict(net, one)[0], batch[static_cast<std::size_t>(r)]);
  }
}

TEST(AgentPersistence, RoundTrip) {
  AgentHyperparameters h;
  h.seed = 4;
  Agent agent(3, {5}, h);
  ReplayMemory mem(10);
  mem.push(transition(Vector::Ones(3), 2, -0.5, Vector::Zero(3), true));
  auto dir = temp_dir("agent");
  save_agent(dir, agent, {0.25, 1234, 17}, &mem);
  auto state = load_agent_state(dir);
  EXPECT_EQ(state.epsilon, 0.25);
  EXPECT_EQ(state.total_steps, 1234u);
  EXPECT_EQ(state.episodes, 17u);
  auto back = load_agent(dir, h);
  EXPECT_EQ(serialize_model(back.eval_network()), serialize_model(agent.eval_network()));
  auto m2 = deserialize_memory(read_file(dir / "memory.bin"), 10);
  EXPECT_EQ(m2.at(0), mem.at(0));
}
