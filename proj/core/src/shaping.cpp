#include "traitor/shaping.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "traitor/text_io.hpp"

namespace traitor {

StateRef make_state_ref(const ScenarioConfig& config, const WorldState& state, bool include_traitors) {
  return StateRef{state_id(state), trim_state(config, state, include_traitors)};
}

PotentialHandle PotentialHandle::constant(double value, bool time_indexed) {
  PotentialHandle h;
  h.kind_ = Kind::constant;
  h.value_ = value;
  h.time_indexed_ = time_indexed;
  return h;
}

PotentialHandle PotentialHandle::tabular(std::unordered_map<std::uint64_t, double> values, bool time_indexed) {
  PotentialHandle h;
  h.kind_ = Kind::tabular;
  h.table_ = std::move(values);
  h.time_indexed_ = time_indexed;
  return h;
}

PotentialHandle PotentialHandle::state_action(std::map<std::pair<std::uint64_t, int>, double> values) {
  if (values.empty()) throw std::invalid_argument("PotentialHandle: empty state-action table");
  PotentialHandle h;
  h.kind_ = Kind::tabular;
  h.state_action_ = std::move(values);
  return h;
}

PotentialHandle PotentialHandle::rnd(const RndModule& module, double scale) {
  PotentialHandle h;
  h.kind_ = Kind::rnd;
  h.module_ = &module;
  h.scale_ = scale;
  h.time_indexed_ = true;
  return h;
}

double PotentialHandle::operator()(const StateRef& state) const {
  switch (kind_) {
    case Kind::constant: return value_;
    case Kind::rnd: return scale_ * novelty(*module_, state.features);
    case Kind::tabular: {
      if (over_actions()) throw std::invalid_argument("potential is keyed by state-action pairs");
      const auto it = table_.find(state.id);
      if (it == table_.end()) throw std::invalid_argument("potential: state not in table");
      return it->second;
    }
  }
  return 0.0;
}

double PotentialHandle::operator()(const StateRef& state, int action) const {
  if (!over_actions()) {
    if (kind_ == Kind::constant) return value_;
    throw std::invalid_argument("potential is not keyed by state-action pairs");
  }
  const auto it = state_action_.find({state.id, action});
  if (it == state_action_.end()) throw std::invalid_argument("potential: state-action pair not in table");
  return it->second;
}

double static_pbrs(const PotentialHandle& phi, const StateRef& s, const StateRef& s_next, double gamma) {
  if (phi.time_indexed()) throw std::invalid_argument("static_pbrs: potential is time-indexed");
  return gamma * phi(s_next) - phi(s);
}

double advice_pbrs(const PotentialHandle& phi, const StateRef& s, int a, const StateRef& s_next, int a_next,
                   double gamma) {
  return gamma * phi(s_next, a_next) - phi(s, a);
}

DynamicShaping dynamic_pbrs(const PotentialHandle& phi, const StateRef& s, int t, const StateRef& s_next, int t_next,
                            double gamma, bool s_next_terminal) {
  if (!phi.time_indexed()) throw std::invalid_argument("dynamic_pbrs: potential is not time-indexed");
  if (t_next != t + 1) throw std::invalid_argument("dynamic_pbrs: t_next must equal t + 1");
  DynamicShaping d;
  d.phi_s = phi(s);
  d.phi_s_next = s_next_terminal ? 0.0 : phi(s_next);
  d.F = gamma * d.phi_s_next - d.phi_s;
  return d;
}

ShapedTransition shape_with_potentials(TraitorTransition transition, double phi_s, double phi_s_next, double gamma) {
  ShapedTransition st;
  st.phi_s = phi_s;
  st.phi_s_next = transition.done ? 0.0 : phi_s_next;
  st.F = gamma * st.phi_s_next - st.phi_s;
  st.r_shaped = transition.r_traitor + st.F;
  st.base = std::move(transition);
  return st;
}

ShapedTransition shape(TraitorTransition transition, const ScenarioConfig& config, const PotentialHandle& phi,
                       double gamma, bool include_traitors) {
  const StateRef s = make_state_ref(config, transition.state, include_traitors);
  const StateRef s_next = make_state_ref(config, transition.next_state, include_traitors);
  const DynamicShaping d = phi.time_indexed()
                               ? dynamic_pbrs(phi, s, transition.t, s_next, transition.t + 1, gamma, transition.done)
                               : DynamicShaping{0.0, phi(s), transition.done ? 0.0 : phi(s_next)};
  return shape_with_potentials(std::move(transition), d.phi_s, d.phi_s_next, gamma);
}

ShapedReturn shaped_return(std::span<const ShapedTransition> episode, double gamma) {
  if (episode.empty()) throw std::invalid_argument("shaped_return: empty episode");
  for (std::size_t j = 1; j < episode.size(); ++j) {
    if (episode[j].base.t != episode[j - 1].base.t + 1) {
      throw std::invalid_argument("shaped_return: timesteps are not contiguous");
    }
  }
  if (!episode.back().base.done) throw std::invalid_argument("shaped_return: episode does not end in a terminal step");
  ShapedReturn r;
  double discount = 1.0;
  for (const ShapedTransition& st : episode) {
    r.U += discount * st.base.r_traitor;
    r.U_F += discount * st.r_shaped;
    discount *= gamma;
  }
  r.residual = r.U_F - (r.U - episode.front().phi_s);
  return r;
}

void write_shaped_csv(std::ostream& out, std::span<const ShapedTransition> transitions) {
  out << "t,r_V,r_T,phi_s,phi_s_next,F,r_shaped\n";
  for (const ShapedTransition& st : transitions) {
    out << st.base.t << ',' << format_double(st.base.r_victim) << ',' << format_double(st.base.r_traitor) << ','
        << format_double(st.phi_s) << ',' << format_double(st.phi_s_next) << ',' << format_double(st.F) << ','
        << format_double(st.r_shaped) << '\n';
  }
}

}  // namespace traitor
