#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qedgix/encoder/policy.hpp"
#include "qedgix/error.hpp"
#include "qedgix/nn/gradcheck.hpp"

using namespace qedgix;
using namespace qedgix::encoder;
using nn::NeighborList;

namespace {

Tensor random_tensor(nn::Shape shape, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

NeighborList make_graph(const std::vector<std::vector<std::uint32_t>>& adj) {
  NeighborList g;
  for (const auto& row : adj) g.add_node(row);
  return g;
}

EncoderConfig small(GraphVariant v) {
  EncoderConfig c;
  c.feature_width = c.recurrent_width = 8;
  c.edge_hidden_width = 8;
  c.variant = v;
  return c;
}

env::WorldState scattered_state(const env::WorldConfig& c, std::uint64_t seed, double spread = 0.3) {
  env::WorldState s = env::reset(c, seed);
  nn::Rng rng(seed + 1000);
  std::uniform_real_distribution<double> off(-spread, spread);
  for (auto& p : s.uav_positions) p = {0.5 + off(rng), 0.5 + off(rng)};
  for (auto& a : s.aoi) a = static_cast<std::uint32_t>(rng() % 40);
  s.slot = 40;
  return s;
}

}  // namespace

TEST_CASE("variant tags") {
  CHECK(parse_variant("edgeconv") == GraphVariant::EdgeConv);
  CHECK(parse_variant("agg-baseline") == GraphVariant::Aggregation);
  CHECK(parse_variant("none-baseline") == GraphVariant::None);
  CHECK(to_string(GraphVariant::Aggregation) == "agg-baseline");
  CHECK_THROWS_AS(parse_variant("rgcn"), ContractViolation);
}

TEST_CASE("uav encoder with zero parameters, inputs and hidden gives zero features") {
  PolicyNetwork p(small(GraphVariant::EdgeConv), 2, 3, {}, 1);
  for (nn::Parameter* q : p.parameters()) q->value.fill(0.0);
  Tape tape(false);
  const Var z = p.encode_uav_nodes(tape, tape.constant(Tensor({2, p.input_width()})),
                                   tape.constant(p.initial_hidden()));
  for (double v : z.value().values()) CHECK(v == 0.0);
  CHECK_THROWS_AS(p.encode_uav_nodes(tape, tape.constant(Tensor({2, 3})), tape.constant(p.initial_hidden())),
                  ContractViolation);
}

TEST_CASE("identical observations and hiddens give identical node features") {
  env::WorldConfig c;
  const env::WorldState s = env::reset(c, 5);  // all UAVs co-located
  const env::ObservationSet obs = env::build_observations(s, c);
  PolicyNetwork p(small(GraphVariant::EdgeConv), 3, 6, scaling_for(c), 2);
  const PolicyBatch batch = PolicyBatch::build(obs, p.scaling());
  Tape tape(false);
  const Tensor z = p.encode_uav_nodes(tape, tape.constant(batch.uav_inputs), tape.constant(p.initial_hidden()))
                       .value();
  for (std::size_t c2 = 0; c2 < z.cols(); ++c2) {
    CHECK(z(0, c2) == z(1, c2));
    CHECK(z(1, c2) == z(2, c2));
  }
  const QResult q = p.q_values(obs, p.initial_hidden());
  for (std::size_t a = 0; a < 8; ++a) CHECK(q.q(0, a) == q.q(2, a));
}

TEST_CASE("user encoder shape, sharing and zero map") {
  PolicyNetwork p(small(GraphVariant::EdgeConv), 2, 3, {}, 3);
  nn::Rng rng(4);
  Tensor rows = random_tensor({3, p.input_width()}, rng);
  std::copy(rows.data(), rows.data() + p.input_width(), rows.data() + p.input_width());  // row 1 = row 0
  Tape tape(false);
  const Tensor z = p.encode_user_nodes(tape, tape.constant(rows)).value();
  CHECK(z.rows() == 3);
  CHECK(z.cols() == 8);
  for (std::size_t c = 0; c < 8; ++c) CHECK(z(0, c) == z(1, c));
  for (nn::Parameter* q : p.parameters())
    if (q->id.find("bias") != std::string::npos) q->value.fill(0.0);
  const Tensor zero = p.encode_user_nodes(tape, tape.constant(Tensor({1, p.input_width()}))).value();
  for (double v : zero.values()) CHECK(v == 0.0);
}

TEST_CASE("edgeconv layer examples") {
  nn::Rng rng(7);
  EdgeConvLayer layer("ec", 4, 6, rng);
  const Tensor x = random_tensor({4, 4}, rng);
  Tape tape(false);
  // node 3 isolated; nodes 1 and 2 hold identical features and are neighbours
  Tensor same = x;
  std::copy(same.data() + 4, same.data() + 8, same.data() + 8);
  const NeighborList g = make_graph({{1, 2}, {0, 2}, {0, 1}, {}});
  const Tensor out = layer.forward(tape, tape.constant(same), g).value();
  for (std::size_t c = 0; c < 4; ++c) CHECK(out(3, c) == 0.0);

  const NeighborList pair = make_graph({{1}, {0}, {}, {}});
  Tensor two = x;
  std::copy(two.data(), two.data() + 4, two.data() + 4);  // node 1 = node 0
  const Tensor o2 = layer.forward(tape, tape.constant(two), pair).value();
  Tensor cat({1, 8});
  for (std::size_t c = 0; c < 4; ++c) cat[c] = two(0, c);  // X_i || 0
  const Tensor expected = layer.f.forward(tape, tape.constant(cat)).value();
  for (std::size_t c = 0; c < 4; ++c) CHECK(o2(0, c) == doctest::Approx(expected[c]).epsilon(1e-12));
}

TEST_CASE("edgeconv matches the direct per-edge definition") {
  nn::Rng rng(8);
  EdgeConvLayer layer("ec", 3, 5, rng);
  const Tensor x = random_tensor({5, 3}, rng);
  const NeighborList g = make_graph({{1, 2, 4}, {0}, {0, 3}, {2}, {0}});
  Tape tape(false);
  const Tensor out = layer.forward(tape, tape.constant(x), g).value();
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> acc(3, 0.0);
    for (auto j : g.of(i)) {
      Tensor cat({1, 6});
      for (std::size_t c = 0; c < 3; ++c) {
        cat[c] = x(i, c);
        cat[3 + c] = x(j, c) - x(i, c);
      }
      const Tensor f = layer.f.forward(tape, tape.constant(cat)).value();
      for (std::size_t c = 0; c < 3; ++c) acc[c] += f[c];
    }
    for (std::size_t c = 0; c < 3; ++c) CHECK(out(i, c) == doctest::Approx(acc[c]).epsilon(1e-12));
  }
}

TEST_CASE("graph layers are invariant to neighbour order") {
  nn::Rng rng(9);
  EdgeConvLayer ec("ec", 4, 6, rng);
  AggregationLayer agg("agg", 4, 6, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({6, 4}, rng);
    std::vector<std::vector<std::uint32_t>> adj(6);
    for (std::uint32_t i = 0; i < 6; ++i)
      for (std::uint32_t j = i + 1; j < 6; ++j)
        if (rng() % 2) {
          adj[i].push_back(j);
          adj[j].push_back(i);
        }
    auto shuffled = adj;
    for (auto& row : shuffled) std::shuffle(row.begin(), row.end(), rng);
    Tape tape(false);
    const Tensor a = ec.forward(tape, tape.constant(x), make_graph(adj)).value();
    const Tensor b = ec.forward(tape, tape.constant(x), make_graph(shuffled)).value();
    const Tensor c = agg.forward(tape, tape.constant(x), make_graph(adj)).value();
    const Tensor d = agg.forward(tape, tape.constant(x), make_graph(shuffled)).value();
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) <= 1e-9);
      CHECK(std::abs(c[i] - d[i]) <= 1e-9);
    }
  }
}

TEST_CASE("aggregation layer examples") {
  nn::Rng rng(10);
  AggregationLayer layer("agg", 3, 5, rng);
  const Tensor x = random_tensor({3, 3}, rng);
  Tape tape(false);
  const NeighborList g = make_graph({{1, 2}, {0}, {}});
  const Tensor out = layer.forward(tape, tape.constant(x), g).value();
  Tensor cat({1, 6});
  for (std::size_t c = 0; c < 3; ++c) cat[c] = x(2, c);
  const Tensor iso = layer.g.forward(tape, tape.constant(cat)).value();
  for (std::size_t c = 0; c < 3; ++c) CHECK(out(2, c) == doctest::Approx(iso[c]).epsilon(1e-12));

  // the node's own features matter, not just the neighbour sum
  Tensor mean_field({1, 6});
  for (std::size_t c = 0; c < 3; ++c) {
    mean_field[c] = (x(1, c) + x(2, c)) / 2.0;
    mean_field[3 + c] = x(1, c) + x(2, c);
  }
  const Tensor mf = layer.g.forward(tape, tape.constant(mean_field)).value();
  double diff = 0.0;
  for (std::size_t c = 0; c < 3; ++c) diff += std::abs(out(0, c) - mf[c]);
  CHECK(diff > 1e-6);
}

TEST_CASE("graph layer gradients match finite differences") {
  nn::Rng rng(12);
  EdgeConvLayer ec("ec", 3, 4, rng);
  AggregationLayer agg("agg", 3, 4, rng);
  nn::Parameter x("x", random_tensor({5, 3}, rng));
  const NeighborList g = make_graph({{1, 2}, {0, 3}, {0}, {1, 4}, {3}});
  nn::ParameterList params{&x};
  ec.collect(params);
  CHECK(nn::check_gradients([&](Tape& t) { return nn::sum(nn::square(ec.forward(t, t.parameter(x), g))); }, params)
            .max_relative_error < 1e-5);
  nn::ParameterList ap{&x};
  agg.collect(ap);
  CHECK(nn::check_gradients([&](Tape& t) { return nn::sum(nn::square(agg.forward(t, t.parameter(x), g))); }, ap)
            .max_relative_error < 1e-5);
}

TEST_CASE("q_values shape for every variant") {
  for (GraphVariant v : {GraphVariant::EdgeConv, GraphVariant::Aggregation, GraphVariant::None}) {
    env::WorldConfig c;
    c.num_uavs = 2;
    c.num_users = 4;
    PolicyNetwork p(small(v), 2, 4, scaling_for(c), 5);
    const QResult r = p.q_values(env::build_observations(scattered_state(c, 1), c), p.initial_hidden());
    CHECK(r.q.rows() == 2);
    CHECK(r.q.cols() == 8);
    CHECK(r.hidden.rows() == 2);
    CHECK(r.hidden.cols() == 8);
  }
}

TEST_CASE("policy rejects observations of another size") {
  env::WorldConfig c;
  PolicyNetwork p(small(GraphVariant::EdgeConv), 2, 4, scaling_for(c), 5);
  CHECK_THROWS_AS(p.q_values(env::build_observations(env::reset(c, 0), c), Tensor({3, 8})), ContractViolation);
}

TEST_CASE("q_values are equivariant under UAV relabeling") {
  for (GraphVariant v : {GraphVariant::EdgeConv, GraphVariant::Aggregation, GraphVariant::None}) {
    env::WorldConfig c;
    c.num_uavs = 3;
    PolicyNetwork p(small(v), 3, 6, scaling_for(c), 21);
    nn::Rng rng(22);
    for (int trial = 0; trial < 10; ++trial) {
      const env::WorldState s = scattered_state(c, trial, 0.1);
      const Tensor h = random_tensor({3, 8}, rng);
      std::vector<std::size_t> perm{0, 1, 2};
      std::shuffle(perm.begin(), perm.end(), rng);
      env::WorldState ps = s;
      Tensor ph({3, 8});
      for (std::size_t j = 0; j < 3; ++j) {
        ps.uav_positions[perm[j]] = s.uav_positions[j];
        for (std::size_t k = 0; k < 8; ++k) ph(perm[j], k) = h(j, k);
      }
      const QResult a = p.q_values(env::build_observations(s, c), h);
      const QResult b = p.q_values(env::build_observations(ps, c), ph);
      for (std::size_t j = 0; j < 3; ++j)
        for (std::size_t k = 0; k < 8; ++k) CHECK(std::abs(a.q(j, k) - b.q(perm[j], k)) <= 1e-9);
    }
  }
}

TEST_CASE("none-baseline with one UAV is the recurrent encoder followed by the head") {
  env::WorldConfig c;
  c.num_uavs = 1;
  c.num_users = 3;
  PolicyNetwork p(small(GraphVariant::None), 1, 3, scaling_for(c), 8);
  const env::ObservationSet obs = env::build_observations(scattered_state(c, 3), c);
  const QResult r = p.q_values(obs, p.initial_hidden());
  const nn::Parameter* w = nullptr;
  const nn::Parameter* b = nullptr;
  for (nn::Parameter* q : p.parameters()) {
    if (q->id == "q_head/weight") w = q;
    if (q->id == "q_head/bias") b = q;
  }
  REQUIRE(w);
  REQUIRE(b);
  for (std::size_t a = 0; a < 8; ++a) {
    double expected = b->value[a];
    for (std::size_t k = 0; k < 8; ++k) expected += r.hidden(0, k) * w->value(k, a);
    CHECK(r.q(0, a) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("Q row of a UAV depends only on its L-hop neighbourhood") {
  env::WorldConfig c;
  c.num_uavs = 3;
  c.num_users = 6;
  PolicyNetwork p(small(GraphVariant::EdgeConv), 3, 6, scaling_for(c), 30);
  nn::Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const env::WorldState s = scattered_state(c, 100 + trial, 0.45);
    const env::ObservationSet obs = env::build_observations(s, c);
    const Tensor h = random_tensor({3, 8}, rng);
    const QResult base = p.q_values(obs, h);
    for (std::size_t i = 0; i < 3; ++i) {
      // breadth-first hop distances from UAV i
      const std::size_t nodes = obs.num_nodes();
      std::vector<int> hops(nodes, -1);
      hops[i] = 0;
      std::vector<std::size_t> frontier{i};
      for (int depth = 1; depth <= 2; ++depth) {
        std::vector<std::size_t> next;
        for (auto u : frontier)
          for (std::size_t w = 0; w < nodes; ++w)
            if (obs.adjacent(u, w) && hops[w] < 0) {
              hops[w] = depth;
              next.push_back(w);
            }
        frontier = next;
      }
      env::ObservationSet cut = obs;
      Tensor cut_h = h;
      for (std::size_t k = 0; k < nodes; ++k) {
        if (hops[k] >= 0) continue;
        cut.positions[k] = {0.0, 0.0};
        std::fill(cut.uav_obs.data() + k * 3 * 2, cut.uav_obs.data() + (k + 1) * 3 * 2, 0.0);
        std::fill(cut.user_obs.data() + k * 6 * 3, cut.user_obs.data() + (k + 1) * 6 * 3, 0.0);
        if (k < 3)
          for (std::size_t col = 0; col < 8; ++col) cut_h(k, col) = 0.0;
      }
      const QResult other = p.q_values(cut, cut_h);
      for (std::size_t a = 0; a < 8; ++a) CHECK(other.q(i, a) == base.q(i, a));
    }
  }
}

TEST_CASE("outputs at slot k do not depend on later observations") {
  env::WorldConfig c;
  PolicyNetwork p(small(GraphVariant::EdgeConv), 3, 6, scaling_for(c), 40);
  const auto run = [&](std::uint64_t late_seed) {
    std::vector<Tensor> qs;
    Tensor h = p.initial_hidden();
    for (int k = 0; k < 6; ++k) {
      const env::WorldState s = scattered_state(c, k < 4 ? 50 + k : late_seed + k);
      QResult r = p.q_values(env::build_observations(s, c), h);
      qs.push_back(r.q);
      h = r.hidden;
    }
    return qs;
  };
  const auto a = run(1000), b = run(2000);
  for (int k = 0; k < 4; ++k) CHECK(a[k] == b[k]);
  CHECK(a[5] != b[5]);
}

TEST_CASE("observation rows do not depend on entity numbering") {
  env::WorldConfig c;
  const env::WorldState s = scattered_state(c, 77, 0.1);
  env::WorldState t = s;
  std::reverse(t.user_positions.begin(), t.user_positions.end());
  std::reverse(t.aoi.begin(), t.aoi.end());
  const InputScaling sc = scaling_for(c);
  const env::ObservationSet a = env::build_observations(s, c), b = env::build_observations(t, c);
  std::vector<double> ra(input_row_width(3, 6)), rb(ra.size());
  for (std::size_t i = 0; i < 3; ++i) {
    encode_observation_row(a, i, sc, ra.data());
    encode_observation_row(b, i, sc, rb.data());
    CHECK(ra == rb);
  }
}

TEST_CASE("select_actions") {
  nn::Rng rng(1);
  Tensor q({2, 8});
  q(0, 5) = 9.0;
  const env::JointAction a = select_actions(q, 0.0, rng);
  CHECK(a.directions[0] == 5);
  CHECK(a.directions[1] == 0);  // all-equal row: lowest index
  CHECK_THROWS_AS(select_actions(q, 1.5, rng), ContractViolation);

  Tensor one({1, 8});
  std::vector<int> counts(8, 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[select_actions(one, 1.0, rng).directions[0]];
  const double p = 1.0 / 8.0, mean = draws * p, sd = std::sqrt(draws * p * (1 - p));
  for (int cnt : counts) CHECK(std::abs(cnt - mean) <= 3 * sd);
}
