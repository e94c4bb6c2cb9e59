#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "stencil_tune/tuner.hpp"

using namespace stune;

namespace {

TuneOptions model_opts(ProblemSize size, std::int64_t iterations = 5) {
  TuneOptions o;
  o.iterations = iterations;
  o.ctx.size = size;
  o.ctx.mode = ExecMode::model;
  return o;
}

TimingSample sample(BlockSize b, double t, std::int64_t order, int node = 0, int core = 0) {
  return {b, node, core, order, t, 1};
}

CoreChoice core(int id, double t, BlockSize b) { return {0, id, b, t, 0}; }

// 1 node x 2 cores on an 8 MiB cache. OB deals X and Z to core 0 and Y twice
// to core 1; X is timed next to the tiny Y, but verification pairs it with
// itself and overflows the cache.
struct DefectFixture {
  static constexpr BlockSize X{64, 64, 64};
  static constexpr BlockSize Y{1, 1, 1};
  static constexpr BlockSize Z{16, 16, 64};
  Topology topology{1, 2, {}, 8ull << 20};
  CandidateSet candidates = explicit_candidates({64, 64, 64}, {X, Y, Z, Y});
  TuneOptions opts = model_opts({64, 64, 64}, 1);
};

}  // namespace

TEST_CASE("quality metric against the published pairs", "[tuner]") {
  REQUIRE(quality_pct(14.67, 33.27) == Catch::Approx(126.8).margin(0.1));
  REQUIRE(quality_pct(12.65, 16.20) == Catch::Approx(28.1).margin(0.1));
  REQUIRE(quality_pct(13.60, 13.57) == Catch::Approx(-0.2).margin(0.1));
  REQUIRE(quality_pct(12.91, 15.90) == Catch::Approx(23.2).margin(0.1));
  for (double t : {1e-9, 0.5, 3.0, 1e6}) REQUIRE(quality_pct(t, t) == 0.0);
  REQUIRE_THROWS_AS(quality_pct(0.0, 1.0), ContractViolation);
}

TEST_CASE("stage 1 picks each worker's fastest sample", "[tuner]") {
  const BlockSize a{1, 1, 1}, b{2, 2, 2}, c{3, 3, 3};
  SECTION("single sample") {
    const auto out = stage1_core_minima({{sample(a, 4.0, 0)}});
    REQUIRE(out.size() == 1);
    REQUIRE(out[0].block == a);
  }
  SECTION("minimum") {
    const auto out = stage1_core_minima({{sample(a, 4.0, 0), sample(b, 2.5, 1), sample(c, 3.1, 2)}});
    REQUIRE(out[0].block == b);
    REQUIRE(out[0].time == 2.5);
  }
  SECTION("tie goes to the earlier evaluation") {
    const auto out = stage1_core_minima({{sample(c, 2.5, 1), sample(a, 2.5, 0)}});
    REQUIRE(out[0].block == a);
  }
  SECTION("empty group") { REQUIRE_THROWS_AS(stage1_core_minima({{}}), ContractViolation); }
}

TEST_CASE("stage 2 node rules", "[tuner]") {
  const BlockSize a{1, 1, 1}, b{2, 2, 2}, c{3, 3, 3};
  const std::vector<CoreChoice> three{core(0, 4.0, a), core(1, 5.0, b), core(2, 4.5, c)};
  REQUIRE(stage2_node_choice(three, NodeMode::min).block == a);
  REQUIRE(stage2_node_choice(three, NodeMode::max).block == b);
  REQUIRE(stage2_node_choice(three, NodeMode::avg).block == c);
  REQUIRE(stage2_node_choice(three, NodeMode::max).associated_time == 5.0);

  const std::vector<CoreChoice> one{core(0, 2.0, b)};
  for (auto m : {NodeMode::min, NodeMode::max, NodeMode::avg}) REQUIRE(stage2_node_choice(one, m).block == b);

  // mean 5.0: |3-5| = 2 for cores 0 and 1, |9-5| = 4; tie goes to core 0.
  const std::vector<CoreChoice> tie{core(0, 3.0, a), core(1, 3.0, b), core(2, 9.0, c)};
  const auto avg = stage2_node_choice(tie, NodeMode::avg);
  REQUIRE(avg.block == a);
  REQUIRE(avg.core_id == 0);

  REQUIRE_THROWS_AS(stage2_node_choice({}, NodeMode::min), ContractViolation);
}

TEST_CASE("stage 3 global minimum", "[tuner]") {
  const BlockSize a{1, 1, 1}, b{2, 2, 2}, c{3, 3, 3};
  REQUIRE(stage3_global(std::vector<NodeChoice>{{0, 0, a, 7.1, NodeMode::max}}).block == a);
  const std::vector<NodeChoice> three{{0, 0, a, 7.1, NodeMode::max}, {1, 0, b, 6.8, NodeMode::max},
                                      {2, 0, c, 9.0, NodeMode::max}};
  const auto sel = stage3_global(three);
  REQUIRE(sel.block == b);
  REQUIRE(sel.min_time == 6.8);
  const std::vector<NodeChoice> equal{{1, 0, b, 3.0, NodeMode::max}, {0, 0, a, 3.0, NodeMode::max}};
  REQUIRE(stage3_global(equal).block == a);
  REQUIRE_THROWS_AS(stage3_global({}), ContractViolation);
}

TEST_CASE("verify takes the slowest worker", "[tuner]") {
  const auto opts = model_opts({32, 32, 32});
  const Topology one{1, 1, {}, 4ull << 20};
  const auto single = verify({8, 8, 32}, one, opts);
  REQUIRE(single.samples.size() == 1);
  REQUIRE(single.actual_time == single.samples[0].elapsed);

  const Topology many{3, 4, {}, 1ull << 20};
  const auto v = verify({8, 8, 32}, many, opts);
  REQUIRE(v.samples.size() == 12);
  for (const auto& s : v.samples) REQUIRE(s.elapsed == v.actual_time);
  REQUIRE_THROWS_AS(verify({0, 8, 8}, many, opts), ContractViolation);
}

TEST_CASE("OB on one worker is a sequential minimum", "[tuner][ob]") {
  const ProblemSize s{32, 32, 32};
  const auto cands = generate(s, 3);
  const Topology one{1, 1, {}, 4ull << 20};
  auto opts = model_opts(s);
  const auto ob = select_ob(cands, one, opts);
  REQUIRE(ob.samples.size() == cands.size());
  const auto best = std::min_element(ob.samples.begin(), ob.samples.end(),
                                     [](const auto& x, const auto& y) { return x.elapsed < y.elapsed; });
  REQUIRE(ob.selection.block == best->block);
  REQUIRE(ob.selection.min_time == best->elapsed);

  opts.shuffle_seed = 99;
  REQUIRE(select_ob(cands, one, opts).selection.block == best->block);
}

TEST_CASE("OB with identical candidates", "[tuner][ob]") {
  const ProblemSize s{16, 16, 16};
  const auto cands = explicit_candidates(s, std::vector<BlockSize>(6, BlockSize{4, 4, 16}));
  const auto r = tune(cands, {1, 3, {}, 4ull << 20}, Strategy::ob, model_opts(s));
  REQUIRE(r.b_best == BlockSize{4, 4, 16});
}

TEST_CASE("OB rejects fewer candidates than workers", "[tuner][ob]") {
  const ProblemSize s{16, 16, 16};
  REQUIRE_THROWS_AS(select_ob(generate(s, 2), {2, 8, {}, 1ull << 20}, model_opts(s)), ContractViolation);
}

TEST_CASE("round-robin partitioning and seeded shuffling", "[tuner][ob]") {
  const ProblemSize s{16, 16, 16};
  const auto cands = generate(s, 2);  // 8 candidates
  const Topology t{1, 3, {}, 1ull << 30};
  const auto ob = select_ob(cands, t, model_opts(s));
  // worker 0 gets candidates 0, 3, 6; worker 1 gets 1, 4, 7; worker 2 gets 2, 5
  for (const auto& smp : ob.samples)
    REQUIRE(smp.block == cands.combinations[static_cast<std::size_t>(smp.order * 3 + smp.core_id)]);

  std::vector<BlockSize> a = cands.combinations, b = cands.combinations;
  seeded_shuffle(a, 42);
  seeded_shuffle(b, 42);
  REQUIRE(a == b);
  REQUIRE(std::is_permutation(a.begin(), a.end(), cands.combinations.begin()));
  seeded_shuffle(b, 43);
  REQUIRE(a != b);
}

TEST_CASE("OB defect: selection undershoots verification", "[tuner][ob][oracle]") {
  DefectFixture f;
  const auto ob = tune(f.candidates, f.topology, Strategy::ob, f.opts);
  const auto mwmb = tune(f.candidates, f.topology, Strategy::mwmb, f.opts);

  // Independent schedule simulation of the staggered OB round.
  oracle::Params q;
  q.cache_bytes = 8.0 * 1024 * 1024;
  const auto times = oracle::simulate_node({{{64, 64, 64}, {16, 16, 64}}, {{1, 1, 1}, {1, 1, 1}}}, 64, 64, 64, 1, q);
  const double x_selected = times[0][0];
  const double x_verified =
      oracle::cost({64, 64, 64}, 64, 64, 64, 1, 2 * oracle::working_set({64, 64, 64}), q);

  REQUIRE(ob.b_best == DefectFixture::X);
  REQUIRE(ob.min_time == Catch::Approx(x_selected).epsilon(1e-12));
  REQUIRE(ob.actual_time == Catch::Approx(x_verified).epsilon(1e-12));
  REQUIRE(ob.min_time < ob.actual_time);
  REQUIRE(ob.quality_pct >= 10.0);

  REQUIRE(mwmb.b_best == DefectFixture::Z);
  REQUIRE(mwmb.quality_pct == 0.0);
  REQUIRE(mwmb.actual_time < ob.actual_time);
}

TEST_CASE("three-stage strategies: lockstep identity", "[tuner][property]") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const ProblemSize s{8 + static_cast<std::int64_t>(rng() % 40), 8 + static_cast<std::int64_t>(rng() % 40),
                        8 + static_cast<std::int64_t>(rng() % 40)};
    const Topology t{1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 8), {},
                     (256ull << 10) * (1 + rng() % 16)};
    const auto cands = generate(s, {2 + static_cast<std::int64_t>(rng() % 3), 2 + static_cast<std::int64_t>(rng() % 3),
                                    2 + static_cast<std::int64_t>(rng() % 3)});
    for (auto strategy : {Strategy::mmmb, Strategy::mwmb, Strategy::mamb}) {
      const auto r = tune(cands, t, strategy, model_opts(s, 3));
      REQUIRE(r.min_time == r.actual_time);
      REQUIRE(r.quality_pct == 0.0);
      REQUIRE(std::find(cands.combinations.begin(), cands.combinations.end(), r.b_best) != cands.combinations.end());
      for (const auto& n : r.node_choices) {
        std::vector<CoreChoice> mine;
        for (const auto& c : r.core_choices)
          if (c.node_id == n.node_id) mine.push_back(c);
        for (auto m : {NodeMode::min, NodeMode::max, NodeMode::avg})
          REQUIRE(stage2_node_choice(mine, m).block == n.block);
      }
    }
  }
}

TEST_CASE("node split is contiguous with a short tail", "[tuner]") {
  std::vector<BlockSize> blocks;
  for (int n = 1; n <= 7; ++n) blocks.push_back({n, 1, 1});
  const auto lists = split_by_node(blocks, 3);
  REQUIRE(lists[0].size() == 3);
  REQUIRE(lists[1].size() == 3);
  REQUIRE(lists[2].size() == 1);
  REQUIRE(lists[2][0] == BlockSize{7, 1, 1});
  const auto sparse = split_by_node({{1, 1, 1}, {2, 1, 1}}, 3);
  REQUIRE(sparse[2].empty());
}

TEST_CASE("more nodes than candidates leaves idle nodes out", "[tuner]") {
  const ProblemSize s{16, 16, 16};
  const auto cands = explicit_candidates(s, {{4, 4, 16}, {16, 16, 16}});
  const auto r = tune(cands, {3, 2, {}, 1ull << 20}, Strategy::mwmb, model_opts(s));
  REQUIRE(r.node_choices.size() == 2);
  REQUIRE(r.core_choices.size() == 4);
  REQUIRE(r.quality_pct == 0.0);
}

TEST_CASE("tune on one worker returns the model argmin", "[tuner][oracle]") {
  const ProblemSize s{24, 24, 24};
  const auto cands = generate(s, 2);
  const Topology t{1, 1, {}, 1ull << 20};
  oracle::Params q;
  q.cache_bytes = static_cast<double>(t.shared_cache_bytes);
  BlockSize best{};
  double best_time = 1e300;
  for (const auto& b : cands.combinations) {
    const double time = oracle::cost({b.i, b.j, b.k}, 24, 24, 24, 5, oracle::working_set({b.i, b.j, b.k}), q);
    if (time < best_time) {
      best_time = time;
      best = b;
    }
  }
  for (auto strategy : {Strategy::ob, Strategy::mmmb, Strategy::mwmb, Strategy::mamb}) {
    const auto r = tune(cands, t, strategy, model_opts(s));
    REQUIRE(r.b_best == best);
    REQUIRE(r.min_time == Catch::Approx(best_time).epsilon(1e-12));
  }
}

TEST_CASE("exhaustive ranking matches brute-force evaluation", "[tuner][oracle]") {
  const ProblemSize s{64, 64, 64};
  const Topology t{1, 8, {}, 4ull << 20};
  const auto lattice = exhaustive_grid(s, {16, 16, 16}, 8);
  const auto ranked = exhaustive_search(lattice, t, model_opts(s));
  REQUIRE(ranked.size() == lattice.size());

  oracle::Params q;
  std::vector<std::pair<double, BlockSize>> brute;
  for (const auto& b : lattice.combinations)
    brute.push_back({oracle::cost({b.i, b.j, b.k}, 64, 64, 64, 5, 8 * oracle::working_set({b.i, b.j, b.k}), q), b});
  std::stable_sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t n = 0; n < ranked.size(); ++n) {
    REQUIRE(ranked[n].actual_time == Catch::Approx(brute[n].first).epsilon(1e-12));
    if (n + 1 < ranked.size()) REQUIRE(ranked[n].actual_time <= ranked[n + 1].actual_time);
  }
  REQUIRE(ranked[0].block == brute[0].second);
  std::vector<BlockSize> ranked_blocks;
  for (const auto& r : ranked) ranked_blocks.push_back(r.block);
  REQUIRE(std::is_permutation(lattice.combinations.begin(), lattice.combinations.end(), ranked_blocks.begin(),
                              ranked_blocks.end()));

  const auto single = exhaustive_search(explicit_candidates(s, {{8, 8, 8}}), t, model_opts(s));
  REQUIRE(single.size() == 1);
}

TEST_CASE("MWMB lands near the exhaustive optimum on the regression fixture", "[tuner][property]") {
  const ProblemSize s{64, 64, 64};
  const Topology t{1, 8, {}, 4ull << 20};
  const auto lattice = generate(s, 5);
  const auto r = tune(lattice, t, Strategy::mwmb, model_opts(s));
  const auto ranked = exhaustive_search(lattice, t, model_opts(s));
  REQUIRE(r.actual_time <= 1.05 * ranked.front().actual_time);
}

TEST_CASE("strategy names round-trip", "[tuner]") {
  for (auto s : {Strategy::ob, Strategy::mmmb, Strategy::mwmb, Strategy::mamb}) REQUIRE(parse_strategy(to_string(s)) == s);
  REQUIRE_THROWS_AS(parse_strategy("fast"), ContractViolation);
  REQUIRE_THROWS_AS(node_mode(Strategy::ob), ContractViolation);
  REQUIRE(node_mode(Strategy::mwmb) == NodeMode::max);
}
