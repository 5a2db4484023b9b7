#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qedgix/error.hpp"
#include "qedgix/mixer/mixer.hpp"
#include "qedgix/nn/gradcheck.hpp"

using namespace qedgix;
using namespace qedgix::mixer;

namespace {

Tensor random_row(std::size_t n, nn::Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({1, n});
  for (double& v : t.values()) v = u(rng);
  return t;
}

MixerConfig small() { return MixerConfig{6, 8}; }

}  // namespace

TEST_CASE("inner map is shared and monotone") {
  nn::Rng rng(1);
  MixerNetwork mixer(small(), 3, 5, 2);
  const Tensor s = random_row(5, rng, 0.0, 1.0);
  Tape tape(false);
  Tensor states({2, 5});
  std::copy(s.data(), s.data() + 5, states.data());
  std::copy(s.data(), s.data() + 5, states.data() + 5);
  const Tensor same = mixer.inner_map(tape, tape.constant(Tensor::matrix(2, 1, {0.3, 0.3})), tape.constant(states))
                          .value();
  for (std::size_t k = 0; k < 6; ++k) CHECK(same(0, k) == same(1, k));

  for (int trial = 0; trial < 200; ++trial) {
    const Tensor st = random_row(5, rng, 0.0, 1.0);
    std::uniform_real_distribution<double> q(-3, 3), d(0.0, 1.0);
    const double q0 = q(rng);
    const double q1 = q0 + d(rng);
    const Tensor a = mixer.inner_map(tape, tape.constant(Tensor::matrix(1, 1, {q0})), tape.constant(st)).value();
    const Tensor b = mixer.inner_map(tape, tape.constant(Tensor::matrix(1, 1, {q1})), tape.constant(st)).value();
    for (std::size_t k = 0; k < 6; ++k) CHECK(b[k] >= a[k]);
  }
}

TEST_CASE("inner map at q = 0 is relu of the generated bias") {
  nn::Rng rng(2);
  MixerNetwork mixer(small(), 2, 4, 3);
  const Tensor st = random_row(4, rng);
  Tape tape(false);
  const Tensor out = mixer.inner_map(tape, tape.constant(Tensor::matrix(1, 1, {0.0})), tape.constant(st)).value();
  // the bias half of the inner hypernetwork output
  nn::ParameterList params = mixer.parameters();
  nn::Mlp2 probe;
  probe.first.weight = *params[0];
  probe.first.bias = *params[1];
  probe.second.weight = *params[2];
  probe.second.bias = *params[3];
  const Tensor hyper = probe.forward(tape, tape.constant(st)).value();
  for (std::size_t k = 0; k < 6; ++k) CHECK(out[k] == std::max(0.0, hyper[6 + k]));
}

TEST_CASE("mix is invariant to agent order") {
  nn::Rng rng(3);
  MixerNetwork mixer(small(), 4, 7, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor st = random_row(7, rng, 0.0, 1.0);
    Tensor q = random_row(4, rng, -2, 2);
    const double base = mixer.mix_value(q, st);
    std::vector<double> v(q.values().begin(), q.values().end());
    std::sort(v.begin(), v.end());
    do {
      CHECK(std::abs(mixer.mix_value(Tensor({1, 4}, v), st) - base) <= 1e-9);
    } while (std::next_permutation(v.begin(), v.end()));
  }
}

TEST_CASE("mix is monotone in each agent value") {
  nn::Rng rng(4);
  std::uniform_real_distribution<double> delta(1e-6, 2.0);
  for (int net = 0; net < 20; ++net) {
    MixerNetwork mixer(small(), 3, 5, 100 + net);
    for (int trial = 0; trial < 50; ++trial) {
      const Tensor st = random_row(5, rng, 0.0, 1.0);
      const Tensor q = random_row(3, rng, -3, 3);
      Tensor bumped = q;
      bumped[rng() % 3] += delta(rng);
      CHECK(mixer.mix_value(bumped, st) >= mixer.mix_value(q, st));
    }
  }
}

TEST_CASE("zeroed generated weights leave the outer bias") {
  nn::Rng rng(5);
  MixerNetwork mixer(small(), 2, 3, 6);
  nn::ParameterList params = mixer.parameters();
  // second layers of both hypernetworks: zero the weight columns of W only
  for (std::size_t col = 0; col < 6; ++col) {
    for (std::size_t r = 0; r < 8; ++r) {
      params[2]->value(r, col) = 0.0;
      params[6]->value(r, col) = 0.0;
    }
    params[3]->value[col] = 0.0;
    params[7]->value[col] = 0.0;
  }
  const Tensor st = random_row(3, rng);
  Tape tape(false);
  nn::Mlp2 outer;
  outer.first.weight = *params[4];
  outer.first.bias = *params[5];
  outer.second.weight = *params[6];
  outer.second.bias = *params[7];
  const double b_out = outer.forward(tape, tape.constant(st)).value()[6];
  CHECK(mixer.mix_value(Tensor::matrix(1, 2, {3.0, -1.0}), st) == doctest::Approx(b_out).epsilon(1e-14));
}

TEST_CASE("mix rejects a wrong agent count") {
  MixerNetwork mixer(small(), 3, 4, 7);
  Tape tape(false);
  CHECK_THROWS_AS(mixer.mix(tape, tape.constant(Tensor({1, 2})), tape.constant(Tensor({1, 4}))), ContractViolation);
}

TEST_CASE("mixer gradients: non-negative in q and matching finite differences") {
  nn::Rng rng(8);
  MixerNetwork mixer(small(), 3, 5, 9);
  for (int trial = 0; trial < 10; ++trial) {
    nn::Parameter q("q", Tensor({4, 3}));
    for (double& v : q.value.values()) v = std::uniform_real_distribution<double>(-2, 2)(rng);
    Tensor states({4, 5});
    for (double& v : states.values()) v = std::uniform_real_distribution<double>(0, 1)(rng);
    nn::ParameterList params{&q};
    for (nn::Parameter* p : mixer.parameters()) params.push_back(p);
    const auto report = nn::check_gradients(
        [&](Tape& t) { return nn::sum(mixer.mix(t, t.parameter(q), t.constant(states))); }, params);
    CHECK(report.max_relative_error < 1e-5);
    nn::zero_grads(params);
    Tape tape;
    tape.backward(nn::sum(mixer.mix(tape, tape.parameter(q), tape.constant(states))));
    for (double g : q.grad.values()) CHECK(g >= 0.0);
    nn::zero_grads(params);
  }
}

TEST_CASE("argmax consistency by enumeration") {
  nn::Rng rng(10);
  for (std::size_t m : {1u, 2u}) {
    for (int trial = 0; trial < 30; ++trial) {
      MixerNetwork mixer(small(), m, 4, 200 + trial);
      Tensor q({m, 8});
      for (double& v : q.values()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
      const auto r = argmax_consistency_check(q, mixer, random_row(4, rng, 0, 1));
      CHECK(r.unique_greedy);
      CHECK(r.consistent);
    }
  }
}

TEST_CASE("argmax consistency with a tied row") {
  nn::Rng rng(11);
  MixerNetwork mixer(small(), 2, 4, 12);
  Tensor q({2, 8});
  for (double& v : q.values()) v = std::uniform_real_distribution<double>(-1, 0)(rng);
  q(0, 2) = q(0, 6) = 0.5;  // agent 0 has two maximisers
  const Tensor st = random_row(4, rng, 0, 1);
  const auto r = argmax_consistency_check(q, mixer, st);
  CHECK(!r.unique_greedy);
  CHECK(r.consistent);
  std::size_t b1 = 0;
  for (std::size_t a = 1; a < 8; ++a)
    if (q(1, a) > q(1, b1)) b1 = a;
  const double v2 = mixer.mix_value(Tensor::matrix(1, 2, {q(0, 2), q(1, b1)}), st);
  const double v6 = mixer.mix_value(Tensor::matrix(1, 2, {q(0, 6), q(1, b1)}), st);
  CHECK(v2 == v6);
  CHECK(v2 == doctest::Approx(r.best_value));
}
