#pragma once

#include <span>
#include <string>

#include "lie_mpc/common.hpp"
#include "lie_mpc/hydro.hpp"
#include "lie_mpc/reference.hpp"

namespace lie_mpc {

enum class ControllerKind { Proposed, Nmpc, NmpcSimple };

inline std::string to_string(ControllerKind kind)
{
  switch (kind) {
    case ControllerKind::Proposed: return "proposed";
    case ControllerKind::Nmpc: return "nmpc";
    case ControllerKind::NmpcSimple: return "nmpc-simple";
  }
  return "?";
}

inline ControllerKind controller_from_string(const std::string& s)
{
  if (s == "proposed") return ControllerKind::Proposed;
  if (s == "nmpc") return ControllerKind::Nmpc;
  if (s == "nmpc-simple") return ControllerKind::NmpcSimple;
  throw ConfigError("unknown controller kind '" + s + "' (expected proposed | nmpc | nmpc-simple)");
}

struct ControlOutput
{
  Vec2 u = Vec2::Zero();  // thruster forces (port, starboard), N
  double solve_ms = 0.0;  // problem construction + optimisation
  int iterations = 0;
  bool converged = true;
};

// Receding-horizon controller driven by the simulation harness. Not safe for
// concurrent calls on one instance.
class Controller
{
public:
  virtual ~Controller() = default;

  // state: measured plant state; window: reference samples starting at the
  // current control tick (at least horizon() + 1 entries).
  virtual ControlOutput control(const FossenState& state, std::span<const ReferenceSample> window) = 0;

  virtual int horizon() const = 0;
  virtual void reset() {}
};

}  // namespace lie_mpc
