#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "traitor/shaping.hpp"

using namespace traitor;

namespace {

StateRef ref(std::uint64_t id) { return StateRef{id, Vec::Zero(2)}; }

TraitorTransition synthetic(int t, double r_traitor, bool done) {
  TraitorTransition tr;
  tr.t = t;
  tr.r_traitor = r_traitor;
  tr.r_victim = -r_traitor;
  tr.done = done;
  return tr;
}

// Direct sum over the shaped rewards, written independently of shaped_return.
double discounted(const std::vector<double>& rewards, double gamma) {
  double total = 0.0;
  for (std::size_t t = 0; t < rewards.size(); ++t) total += std::pow(gamma, static_cast<double>(t)) * rewards[t];
  return total;
}

}  // namespace

TEST(Potential, ConstantAndTable) {
  const PotentialHandle c = PotentialHandle::constant(2.5);
  EXPECT_EQ(c(ref(7)), 2.5);
  EXPECT_EQ(c(ref(7), 3), 2.5);
  const PotentialHandle t = PotentialHandle::tabular({{1, 0.5}, {2, -1.0}});
  EXPECT_EQ(t(ref(2)), -1.0);
  EXPECT_THROW(t(ref(3)), std::invalid_argument);
  EXPECT_THROW(t(ref(1), 0), std::invalid_argument);
  EXPECT_FALSE(t.time_indexed());
}

TEST(StaticShaping, Formula) {
  const PotentialHandle phi = PotentialHandle::tabular({{1, 3.0}, {2, 5.0}});
  EXPECT_DOUBLE_EQ(static_pbrs(phi, ref(1), ref(2), 0.9), 0.9 * 5.0 - 3.0);
  EXPECT_THROW(static_pbrs(PotentialHandle::constant(1.0, true), ref(1), ref(2), 0.9), std::invalid_argument);
}

TEST(StaticShaping, ConstantPotentialOnlyShiftsByGammaMinusOne) {
  const PotentialHandle phi = PotentialHandle::constant(4.0);
  EXPECT_DOUBLE_EQ(static_pbrs(phi, ref(1), ref(2), 0.5), -2.0);
}

TEST(AdviceShaping, LooksAtTheNextAction) {
  const PotentialHandle phi = PotentialHandle::state_action({{{1, 0}, 1.0}, {{1, 1}, 2.0}, {{2, 3}, 4.0}});
  EXPECT_TRUE(phi.over_actions());
  EXPECT_DOUBLE_EQ(advice_pbrs(phi, ref(1), 1, ref(2), 3, 0.5), 0.5 * 4.0 - 2.0);
  EXPECT_THROW(advice_pbrs(phi, ref(1), 2, ref(2), 3, 0.5), std::invalid_argument);
  EXPECT_THROW(phi(ref(1)), std::invalid_argument);
  EXPECT_THROW(PotentialHandle::state_action({}), std::invalid_argument);
}

TEST(DynamicShaping, TerminalZero) {
  const PotentialHandle phi = PotentialHandle::constant(3.0, true);
  const DynamicShaping mid = dynamic_pbrs(phi, ref(1), 4, ref(2), 5, 0.9, false);
  EXPECT_DOUBLE_EQ(mid.F, 0.9 * 3.0 - 3.0);
  const DynamicShaping end = dynamic_pbrs(phi, ref(1), 4, ref(2), 5, 0.9, true);
  EXPECT_EQ(end.phi_s_next, 0.0);
  EXPECT_DOUBLE_EQ(end.F, -3.0);
  EXPECT_THROW(dynamic_pbrs(phi, ref(1), 4, ref(2), 6, 0.9, false), std::invalid_argument);
  EXPECT_THROW(dynamic_pbrs(PotentialHandle::constant(1.0), ref(1), 0, ref(2), 1, 0.9, false), std::invalid_argument);
}

TEST(DynamicShaping, RndPotentialTracksTheModule) {
  RndModule m = RndModule::create(2, 3);
  const PotentialHandle phi = PotentialHandle::rnd(m, 2.0);
  EXPECT_TRUE(phi.time_indexed());
  const StateRef s{0, (Vec(2) << 0.2, 0.7).finished()};
  EXPECT_DOUBLE_EQ(phi(s), 2.0 * novelty(m, s.features));
  const double before = phi(s);
  rnd_update(m, s.features);
  EXPECT_LT(phi(s), before);
}

TEST(ShapeWithPotentials, ForcesZeroOnTerminal) {
  const ShapedTransition st = shape_with_potentials(synthetic(3, -1.0, true), 2.0, 7.0, 0.9);
  EXPECT_EQ(st.phi_s_next, 0.0);
  EXPECT_DOUBLE_EQ(st.F, -2.0);
  EXPECT_DOUBLE_EQ(st.r_shaped, -3.0);
  const ShapedTransition mid = shape_with_potentials(synthetic(3, -1.0, false), 2.0, 7.0, 0.9);
  EXPECT_DOUBLE_EQ(mid.r_shaped, -1.0 + 0.9 * 7.0 - 2.0);
}

TEST(ShapedReturn, TelescopesWithDriftingPotentials) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const double gamma = rng.uniform(0.5, 0.999);
    const int length = 1 + rng.below(60);
    std::vector<ShapedTransition> episode;
    std::vector<double> shaped;
    double carried = rng.uniform(-5.0, 5.0);
    const double phi0 = carried;
    double unshaped = 0.0;
    for (int t = 0; t < length; ++t) {
      const double r = rng.uniform(-1.0, 1.0);
      const double phi_next = rng.uniform(-5.0, 5.0);
      unshaped += std::pow(gamma, t) * r;
      episode.push_back(shape_with_potentials(synthetic(t, r, t + 1 == length), carried, phi_next, gamma));
      shaped.push_back(episode.back().r_shaped);
      carried = phi_next;
    }
    const ShapedReturn ret = shaped_return(episode, gamma);
    EXPECT_NEAR(ret.U, unshaped, 1e-12);
    EXPECT_NEAR(ret.U_F, discounted(shaped, gamma), 1e-12);
    EXPECT_LT(std::abs(ret.U_F - (unshaped - phi0)), 1e-9);
    EXPECT_LT(std::abs(ret.residual), 1e-9);
  }
}

TEST(ShapedReturn, WithoutTerminalZeroTheResidualIsTheLastPotential) {
  // Bypass the terminal rule by hand: the leftover term is gamma^T * phi(s_T).
  const double gamma = 0.9;
  std::vector<ShapedTransition> episode;
  episode.push_back(shape_with_potentials(synthetic(0, 1.0, false), 1.0, 2.0, gamma));
  ShapedTransition last = shape_with_potentials(synthetic(1, 1.0, true), 2.0, 0.0, gamma);
  last.phi_s_next = 10.0;
  last.F = gamma * 10.0 - 2.0;
  last.r_shaped = 1.0 + last.F;
  episode.push_back(last);
  EXPECT_NEAR(shaped_return(episode, gamma).residual, gamma * gamma * 10.0, 1e-12);
}

TEST(ShapedReturn, RejectsBadEpisodes) {
  EXPECT_THROW(shaped_return({}, 0.9), std::invalid_argument);
  std::vector<ShapedTransition> open{shape_with_potentials(synthetic(0, 0.0, false), 0.0, 0.0, 0.9)};
  EXPECT_THROW(shaped_return(open, 0.9), std::invalid_argument);
  std::vector<ShapedTransition> gap{shape_with_potentials(synthetic(0, 0.0, false), 0.0, 0.0, 0.9),
                                    shape_with_potentials(synthetic(2, 0.0, true), 0.0, 0.0, 0.9)};
  EXPECT_THROW(shaped_return(gap, 0.9), std::invalid_argument);
}

TEST(Shape, EvaluatesRndOnTrimmedStates) {
  ScenarioConfig c;
  c.num_traitors = 2;
  auto policy = std::make_shared<VictimPolicy>(VictimPolicy::uniform());
  const TmdpSpec spec = TmdpSpec::create(c, policy, 0.99);
  const RndModule m = RndModule::create(trimmed_width(c), 8);
  const PotentialHandle phi = PotentialHandle::rnd(m, 0.5);
  Rng rng(1);
  const WorldState s = reset(c, 3);
  const std::vector<int> stay(2, 0);
  TraitorTransition tr = tmdp_step(spec, s, stay, rng);
  const ShapedTransition st = shape(tr, c, phi, 0.99);
  EXPECT_DOUBLE_EQ(st.phi_s, 0.5 * novelty(m, trim_state(c, s)));
  EXPECT_DOUBLE_EQ(st.phi_s_next, tr.done ? 0.0 : 0.5 * novelty(m, trim_state(c, tr.next_state)));
  EXPECT_DOUBLE_EQ(st.r_shaped, tr.r_traitor + 0.99 * st.phi_s_next - st.phi_s);
}

TEST(ShapedCsv, Format) {
  std::vector<ShapedTransition> rows{shape_with_potentials(synthetic(0, -1.0, true), 0.5, 0.0, 0.9)};
  std::ostringstream out;
  write_shaped_csv(out, rows);
  EXPECT_EQ(out.str(), "t,r_V,r_T,phi_s,phi_s_next,F,r_shaped\n0,1,-1,0.5,0,-0.5,-1.5\n");
}
