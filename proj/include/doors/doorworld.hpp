#pragma once

#include <cstdint>
#include <vector>

#include "doors/image.hpp"
#include "doors/rng.hpp"

// Analytic stand-in for the physics engine: parametric door sampling, a
// deterministic pinhole renderer, and a kinematic door-opening oracle.
//
// World frame: camera at the origin looking along +Z. The backboard is the
// plane Z = kBoardDist spanning x, y in [-1/2, 1/2] m; the focal scale is
// chosen so the backboard exactly fills the frame and the principal point is
// the exact image center, which makes horizontal mirroring bit-exact.
namespace doors::world {

inline constexpr double kBoardDist = 1.0;
inline constexpr double kBoardHalf = 0.5;
inline constexpr double kHandleHalfSide = 0.01;  // 0.02 m square knob

inline constexpr float kBoardColor[3] = {0.55f, 0.35f, 0.20f};
inline constexpr float kDoorColor[3] = {0.80f, 0.10f, 0.10f};
inline constexpr float kHandleColor[3] = {0.15f, 0.15f, 0.15f};

struct DoorSpec {
  double origin_x = 0;       // horizontal center of the closed door
  double origin_y = 0;       // vertical center
  double width = 0.25;
  double height = 0.3;
  double handle_offset = 0;  // distance from the bisecting plane toward the free edge
  bool flipped = false;      // false: hinge on the left edge; true: on the right

  // +1 when the panel extends toward +x from the hinge
  double open_sign() const { return flipped ? -1.0 : 1.0; }
  double hinge_x() const { return origin_x - open_sign() * width / 2.0; }
  double handle_radius() const { return width / 2.0 + handle_offset; }
};

struct DoorInstance {
  DoorSpec door;
  double angle_deg = 0;  // [0, 180]
};

struct DoorSet {
  DoorSpec door;
  std::vector<double> angles;
  std::vector<Image> images;
  int size() const { return static_cast<int>(images.size()); }
};

struct Action {
  double axis_x = 0;    // x of the planned vertical rotation axis
  double radius = 0.1;  // planned rotation radius
  double goal_deg = 90; // planned goal configuration, (0, 180]
};

struct InteractionRecord {
  int door_id = 0;
  Action action;
  double reward = 0;  // distance opened, meters
};

bool door_valid(const DoorSpec& d);
DoorSpec sample_door(Rng& rng);
DoorSpec mirror_door(const DoorSpec& d);
Action sample_action(Rng& rng);

Image render(const DoorInstance& inst, int size = 64);

// Pinhole projection helpers (pixel units, u along columns).
double project_u(double x, double z, int size);
// image u of the panel point at distance r from the hinge, angle in radians
double panel_point_u(const DoorSpec& d, double theta_rad, double r, int size);
// horizontal extent of the panel measured on the backboard (world meters)
double panel_extent_world(const DoorSpec& d, double theta_rad);

struct ExecParams {
  double step_deg = 1.0;   // planned-trajectory sweep resolution
  double slip_dist = 0.02; // grasp tolerance before the handle slips
  double rate_cap = 5.0;   // max door-angle advance per 1 deg of sweep
};

// Opens the door from the closed state along the planned arc; returns the
// chord distance 2 * r_true * sin(theta_stop / 2).
double execute_action(const DoorSpec& door, const Action& action, const ExecParams& p = {});

// ---------------------------------------------------------------------------
// Dataset planning (cheap, no rendering) and materialization.

struct DoorSetPlan {
  DoorSpec door;
  std::vector<double> angles;
};

enum class Imagery { kClosed, kOpen };

struct InteractionPlan {
  DoorSetPlan set;
  std::vector<Action> actions;
  std::vector<double> rewards;
};

std::vector<DoorSetPlan> plan_pretrain_dataset(int n_doors, int samples_per_door, uint64_t seed);
std::vector<InteractionPlan> plan_interaction_dataset(int n_doors, int n_actions, uint64_t seed,
                                                      Imagery imagery, int samples_per_door = 5);

DoorSet materialize(const DoorSetPlan& plan, int size = 64);

}  // namespace doors::world
