#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "irleed/rollout.hpp"
#include "irleed/softrl.hpp"
#include "support.hpp"

using namespace irleed;
using namespace testsupport;

namespace {

std::string dump(const MixedDataset& d) {
  std::ostringstream os;
  write_dataset_jsonl(os, d);
  return os.str();
}

MixedDataset sample_dataset(std::uint64_t seed) {
  Rng rng(seed);
  const auto mdp = random_mdp(rng, 5, 3, 1);
  const Mat policy = Mat::Constant(5, 3, 1.0 / 3.0);
  MixedDataset d;
  for (int id = 1; id <= 3; ++id) {
    Rng demo = Rng::derive(seed, 0, id, "demo");
    DemonstrationSet set{id, {}};
    for (int j = 0; j < 4; ++j) set.trajectories.push_back(sample_trajectory(mdp, policy, demo));
    d.sets.push_back(set);
  }
  return d;
}

}  // namespace

TEST_SUITE("rollout") {
  TEST_CASE("Rng streams are reproducible and distinct per input") {
    CHECK(Rng::derive_seed(1, 2, 3, "x") == Rng::derive_seed(1, 2, 3, "x"));
    CHECK(Rng::derive_seed(1, 2, 3, "x") != Rng::derive_seed(1, 2, 3, "y"));
    CHECK(Rng::derive_seed(1, 2, 3, "x") != Rng::derive_seed(1, 3, 2, "x"));
    CHECK(Rng::derive_seed(1, 2, 3, "x") != Rng::derive_seed(2, 2, 3, "x"));
    Rng a(9);
    Rng b(9);
    for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
    Rng parent(10);
    const auto before = parent.child("demo", 2).seed();
    parent.uniform();
    CHECK(parent.child("demo", 2).seed() == before);
    CHECK(parent.child("demo", 1).seed() != before);
    for (int i = 0; i < 1000; ++i) {
      const double u = a.uniform();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
  }

  TEST_CASE("categorical never returns a zero-probability index") {
    Rng rng(4);
    Vec p(4);
    p << 0.0, 0.5, 0.0, 0.5;
    for (int i = 0; i < 2000; ++i) {
      const int k = rng.categorical(p);
      CHECK((k == 1 || k == 3));
    }
  }

  TEST_CASE("deterministic MDP and policy give the unique trajectory") {
    const auto chain = advance_or_stay_chain(4);
    Mat policy = Mat::Zero(4, 2);
    policy.col(0).setOnes();
    Rng rng(1);
    const auto first = sample_trajectory(chain, policy, rng);
    CHECK(first.states == std::vector<int>{0, 1, 2, 3});
    CHECK(first.actions == std::vector<int>{0, 0, 0, 0});
    for (int i = 0; i < 20; ++i) CHECK(sample_trajectory(chain, policy, rng) == first);
  }

  TEST_CASE("trajectories stop at terminals or the horizon") {
    auto world = build_gridworld(GridworldSpec{2, 2}, 0.9, 7);
    Rng rng(2);
    const Mat uniform_policy = Mat::Constant(4, 4, 0.25);
    int truncated = 0;
    for (int i = 0; i < 500; ++i) {
      const auto traj = sample_trajectory(world.mdp, uniform_policy, rng);
      CHECK(traj.size() >= 1);
      CHECK(traj.size() <= 7);
      CHECK(traj.states.front() == 2);
      for (std::size_t t = 0; t + 1 < traj.size(); ++t) {
        CHECK_FALSE(world.mdp.is_terminal(traj.states[t]));
        CHECK(world.mdp.prob(traj.states[t], traj.actions[t], traj.states[t + 1]) > 0.0);
      }
      if (!world.mdp.is_terminal(traj.states.back())) {
        CHECK(traj.size() == 7);
        ++truncated;
      }
    }
    CHECK(truncated > 0);
  }

  TEST_CASE("next-state frequencies match the transition matrix within 3 sigma") {
    TabularMdp mdp;
    mdp.n_states = 2;
    mdp.n_actions = 2;
    mdp.max_horizon = 2;
    mdp.transition = {(Mat(2, 2) << 0.7, 0.3, 0.2, 0.8).finished(), (Mat(2, 2) << 0.1, 0.9, 0.6, 0.4).finished()};
    mdp.p0 = (Vec(2) << 1.0, 0.0).finished();
    const Mat policy = Mat::Constant(2, 2, 0.5);
    Rng rng(3);
    const int n = 10000;
    int count[2][2] = {{0, 0}, {0, 0}};
    int to_one[2] = {0, 0};
    for (int i = 0; i < n; ++i) {
      const auto traj = sample_trajectory(mdp, policy, rng);
      REQUIRE(traj.size() == 2);
      ++count[0][traj.actions[0]];
      if (traj.states[1] == 1) ++to_one[traj.actions[0]];
    }
    for (int a = 0; a < 2; ++a) {
      const double p = mdp.prob(0, a, 1);
      const double m = count[0][a];
      CHECK(std::abs(to_one[a] - m * p) <= 3.0 * std::sqrt(m * p * (1 - p)));
    }
    CHECK(std::abs(count[0][0] - n * 0.5) <= 3.0 * std::sqrt(n * 0.25));
  }

  TEST_CASE("empirical feature expectation by direct sum") {
    const auto features = FeatureMap::one_hot_states(4, 2);
    Trajectory traj{{0, 1}, {1, 0}};
    const Vec f = empirical_feature_expectation({traj}, features, 0.9);
    CHECK(f(0) == 1.0);
    CHECK(f(1) == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(f(2) == 0.0);
    CHECK(f(3) == 0.0);
    CHECK(empirical_feature_expectation({traj, traj}, features, 0.9) == f);
    CHECK_THROWS_AS(empirical_feature_expectation({}, features, 0.9), std::invalid_argument);
  }

  TEST_CASE("100k trajectories match the exact feature expectation within 3 standard errors") {
    Rng rng(21);
    auto mdp = random_mdp(rng, 4, 2, 1);
    mdp.max_horizon = 400;
    const auto features = FeatureMap::one_hot_states(4, 2);
    const Mat policy = soft_value_iteration(mdp, features, random_vec(rng, 4)).policy;
    const Vec exact = exact_feature_expectation(mdp, features, policy);
    Rng sampler(22);
    std::vector<Trajectory> trajs;
    for (int i = 0; i < 100000; ++i) trajs.push_back(sample_trajectory(mdp, policy, sampler));
    const Vec mean = empirical_feature_expectation(trajs, features, mdp.gamma);
    Vec var = Vec::Zero(4);
    for (const auto& t : trajs) var += (discounted_feature_sum(t, features, mdp.gamma) - mean).cwiseAbs2();
    var /= static_cast<double>(trajs.size() - 1);
    for (int j = 0; j < 4; ++j) CHECK(std::abs(mean(j) - exact(j)) <= 3.0 * std::sqrt(var(j) / trajs.size()));
  }

  TEST_CASE("Monte-Carlo feature expectation") {
    const auto chain = advance_or_stay_chain(4);
    const auto features = FeatureMap::one_hot_states(4, 2);
    Mat policy = Mat::Zero(4, 2);
    policy.col(0).setOnes();
    Rng rng(5);
    const Vec mc = mc_feature_expectation(chain, features, policy, 50, rng);
    CHECK((mc - exact_feature_expectation(chain, features, policy)).cwiseAbs().maxCoeff() <= 1e-14);

    Rng one_a(6);
    Rng one_b(6);
    const Mat uniform_policy = Mat::Constant(4, 2, 0.5);
    const Vec single = mc_feature_expectation(chain, features, uniform_policy, 1, one_a);
    CHECK(single == discounted_feature_sum(sample_trajectory(chain, uniform_policy, one_b), features, 0.9));
    CHECK_THROWS_AS(mc_feature_expectation(chain, features, policy, 0, rng), std::invalid_argument);
  }

  TEST_CASE("mc_return closed cases") {
    TabularMdp instant;
    instant.n_states = 1;
    instant.n_actions = 2;
    instant.terminal = {0};
    instant.transition = {Mat::Ones(1, 1), Mat::Ones(1, 1)};
    instant.p0 = Vec::Ones(1);
    Rng rng(7);
    const Mat policy = Mat::Constant(1, 2, 0.5);
    CHECK(mc_return(instant, policy, Vec::Ones(1), 10, rng) == 1.0);
    const auto stats = mc_return_stats(instant, policy, Vec::Ones(1), 10, rng);
    CHECK(stats.std_error == 0.0);
    CHECK(stats.n_episodes == 10);

    auto world = build_gridworld(GridworldSpec{}, 0.9, 100);
    CHECK(mc_return(world.mdp, Mat::Constant(25, 4, 0.25), Vec::Zero(25), 20, rng) == 0.0);
    CHECK_THROWS_AS(mc_return(world.mdp, Mat::Constant(25, 4, 0.25), Vec::Zero(3), 20, rng), std::invalid_argument);
  }

  TEST_CASE("mc_return agrees with theta^T f-bar within 3 sigma") {
    auto world = build_gridworld(GridworldSpec{4, 4}, 0.9, 200);
    const auto sol = soft_value_iteration(world.mdp, world.features, 2.0 * world.true_theta);
    const double exact = world.true_theta.dot(exact_feature_expectation(world.mdp, world.features, sol.policy));
    Rng rng(8);
    const auto stats = mc_return_stats(world.mdp, sol.policy, world.true_theta, 20000, rng);
    CHECK(std::abs(stats.mean - exact) <= 3.0 * stats.std_error);
    CHECK(stats.std_error > 0.0);
  }

  TEST_CASE("mc_return equals theta . mc_feature_expectation on the same episodes") {
    auto world = build_gridworld(GridworldSpec{}, 0.9, 100);
    Rng tmp(9);
    const Vec theta = random_vec(tmp, 25);
    const Mat policy = soft_value_iteration(world.mdp, world.features, world.true_theta).policy;
    for (int n : {1, 7, 100}) {
      Rng a(40 + n);
      Rng b(40 + n);
      const double r = mc_return(world.mdp, policy, theta, n, a);
      const double f = theta.dot(mc_feature_expectation(world.mdp, world.features, policy, n, b));
      CHECK(std::abs(r - f) <= 1e-12 * std::max(1.0, std::abs(r)));
    }
  }

  TEST_CASE("dataset bookkeeping") {
    const auto d = sample_dataset(1);
    CHECK(d.n_demonstrators() == 3);
    CHECK(d.n_trajectories() == 12);
    CHECK(d.pooled().size() == 12);
    CHECK(d.pooled()[4] == d.sets[1].trajectories[0]);
    CHECK_NOTHROW(d.validate());
    auto bad_ids = d;
    bad_ids.sets[1].id = 5;
    CHECK_THROWS_AS(bad_ids.validate(), std::invalid_argument);
    auto empty_set = d;
    empty_set.sets[2].trajectories.clear();
    CHECK_THROWS_WITH_AS(empty_set.validate(), "demonstrator 3 has no trajectories", std::invalid_argument);
    CHECK_THROWS_AS(MixedDataset{}.validate(), std::invalid_argument);
  }

  TEST_CASE("datasets are byte-identical under the same seed") {
    CHECK(dump(sample_dataset(11)) == dump(sample_dataset(11)));
    CHECK(dump(sample_dataset(11)) != dump(sample_dataset(12)));
  }

  TEST_CASE("JSONL round trip and errors") {
    const auto d = sample_dataset(13);
    const std::string text = dump(d);
    CHECK(text.find("{\"actions\":[") == 0);
    std::istringstream in(text);
    const auto back = read_dataset_jsonl(in);
    CHECK(dump(back) == text);

    const auto dir = std::filesystem::path(IRLEED_TEST_TMP) / "rollout";
    std::filesystem::remove_all(dir);
    save_dataset(dir / "nested" / "d.jsonl", d);
    CHECK(dump(load_dataset(dir / "nested" / "d.jsonl")) == text);
    CHECK_THROWS_AS(load_dataset(dir / "missing.jsonl"), std::runtime_error);

    std::istringstream garbage("{\"demonstrator\": 1, \"states\": [0], \"actions\": [0]}\nnot json\n");
    CHECK_THROWS_WITH_AS(read_dataset_jsonl(garbage), doctest::Contains("dataset line 2"), std::invalid_argument);
    std::istringstream mismatch("{\"demonstrator\": 1, \"states\": [0, 1], \"actions\": [0]}\n");
    CHECK_THROWS_AS(read_dataset_jsonl(mismatch), std::invalid_argument);
    std::istringstream gap("{\"demonstrator\": 2, \"states\": [0], \"actions\": [0]}\n");
    CHECK_THROWS_AS(read_dataset_jsonl(gap), std::invalid_argument);
  }
}
