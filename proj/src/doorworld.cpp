#include "doors/doorworld.hpp"

#include <cmath>
#include <stdexcept>

namespace doors::world {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMargin = 0.05;  // sampler keeps doors this far inside the board

double deg2rad(double d) { return d * (kPi / 180.0); }

}  // namespace

bool door_valid(const DoorSpec& d) {
  if (!(d.width > 0) || !(d.height > 0)) return false;
  if (!(d.handle_offset >= 0) || !(d.handle_offset < d.width / 2)) return false;
  const bool inside = std::abs(d.origin_x) + d.width / 2 < kBoardHalf &&
                      std::abs(d.origin_y) + d.height / 2 < kBoardHalf;
  return inside;
}

DoorSpec sample_door(Rng& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    DoorSpec d;
    d.width = rng.uniform(0.15, 0.35);
    d.height = rng.uniform(0.20, 0.45);
    d.handle_offset = rng.uniform(0.02, 0.45 * d.width);
    const double hx = kBoardHalf - kMargin - d.width / 2;
    const double hy = kBoardHalf - kMargin - d.height / 2;
    d.origin_x = rng.uniform(-hx, hx);
    d.origin_y = rng.uniform(-hy, hy);
    d.flipped = rng.coin();
    if (door_valid(d)) return d;
  }
  throw std::runtime_error("sample_door: 1000 rejections; sampling ranges are misconfigured");
}

DoorSpec mirror_door(const DoorSpec& d) {
  DoorSpec m = d;
  m.origin_x = -d.origin_x;
  m.flipped = !d.flipped;
  return m;
}

Action sample_action(Rng& rng) {
  Action a;
  a.axis_x = rng.uniform(-0.5, 0.5);
  a.radius = rng.uniform(0.05, 0.45);
  a.goal_deg = 180.0 - rng.uniform(0.0, 180.0);  // (0, 180]
  return a;
}

double project_u(double x, double z, int size) {
  return size / 2.0 + size * (x / z);
}

double panel_point_u(const DoorSpec& d, double theta_rad, double r, int size) {
  const double sg = d.open_sign();
  const double x = d.hinge_x() + sg * r * std::cos(theta_rad);
  const double z = kBoardDist - r * std::sin(theta_rad);
  return project_u(x, z, size);
}

double panel_extent_world(const DoorSpec& d, double theta_rad) {
  return d.width * std::abs(std::cos(theta_rad));
}

Image render(const DoorInstance& inst, int size) {
  if (size < 8) throw std::invalid_argument("render: size must be >= 8");
  if (!(inst.angle_deg >= 0.0 && inst.angle_deg <= 180.0))
    throw std::invalid_argument("render: angle outside [0, 180]");
  const DoorSpec& d = inst.door;
  const double sg = d.open_sign();
  const double hinge = d.hinge_x();
  const double th = deg2rad(inst.angle_deg);
  const double st = std::sin(th), ct = std::cos(th);
  const double plane_off = st * hinge + sg * ct * kBoardDist;  // n . P0
  const double r_handle = d.handle_radius();
  const double half_h = d.height / 2.0;
  const double n = size;

  Image im(size, size);
  for (int i = 0; i < size; ++i) {
    // Every per-pixel quantity below is either even or odd under horizontal
    // mirroring plus mirror_door, so mirrored renders are bit-exact flips.
    const double dy = (n / 2.0 - (i + 0.5)) / n;
    for (int j = 0; j < size; ++j) {
      const double dx = ((j + 0.5) - n / 2.0) / n;
      const float* color = kBoardColor;
      const double denom = st * dx + sg * ct;
      if (denom != 0.0) {
        const double t = plane_off / denom;
        if (t > 0.0) {
          const double x = t * dx, y = t * dy, z = t;
          const double r = sg * (x - hinge) * ct + (kBoardDist - z) * st;
          if (r >= 0.0 && r <= d.width && std::abs(y - d.origin_y) <= half_h) {
            const bool on_handle = std::abs(r - r_handle) <= kHandleHalfSide &&
                                   std::abs(y - d.origin_y) <= kHandleHalfSide;
            color = on_handle ? kHandleColor : kDoorColor;
          }
        }
      }
      im.at(0, i, j) = color[0];
      im.at(1, i, j) = color[1];
      im.at(2, i, j) = color[2];
    }
  }
  return im;
}

double execute_action(const DoorSpec& door, const Action& action, const ExecParams& p) {
  const double sg = door.open_sign();
  const double hinge = door.hinge_x();
  const double r_true = door.handle_radius();
  const double handle0_x = hinge + sg * r_true;  // closed-door handle position
  const double side = handle0_x >= action.axis_x ? 1.0 : -1.0;
  const double cap = deg2rad(p.rate_cap * p.step_deg);
  const double goal = deg2rad(action.goal_deg);
  const double step = deg2rad(p.step_deg);

  double theta = 0.0;
  const long nsteps = static_cast<long>(std::ceil(goal / step - 1e-12));
  for (long k = 0; k <= nsteps; ++k) {
    const double phi = std::min(goal, k * step);
    const double px = action.axis_x + side * action.radius * std::cos(phi);
    const double pz = kBoardDist - action.radius * std::sin(phi);
    // The feasible handle lies on the circle of radius r_true about the hinge;
    // project the planned point onto it, clamped to a monotone, rate-limited
    // advance. qz <= 0 always, so the projection angle lands in [0, pi].
    const double qx = px - hinge;
    const double qz = pz - kBoardDist;
    double tstar = std::atan2(-qz, sg * qx);
    const double hi = std::min(theta + (k == 0 ? 0.0 : cap), kPi);
    const double th_new = std::min(hi, std::max(theta, tstar));
    const double hx = hinge + sg * r_true * std::cos(th_new);
    const double hz = kBoardDist - r_true * std::sin(th_new);
    const double dist = std::hypot(px - hx, pz - hz);
    if (dist > p.slip_dist) break;  // grip slips; the door stays at theta
    theta = th_new;
  }
  return 2.0 * r_true * std::sin(theta / 2.0);
}

std::vector<DoorSetPlan> plan_pretrain_dataset(int n_doors, int samples_per_door, uint64_t seed) {
  if (n_doors < 1 || samples_per_door < 1)
    throw std::invalid_argument("plan_pretrain_dataset: counts must be >= 1");
  std::vector<DoorSetPlan> out;
  out.reserve(n_doors);
  for (int i = 0; i < n_doors; ++i) {
    DoorSetPlan p;
    Rng door_rng(derive_seed(seed, "door", i));
    p.door = sample_door(door_rng);
    Rng angle_rng(derive_seed(seed, "angles", i));
    p.angles.resize(samples_per_door);
    for (auto& a : p.angles) a = angle_rng.uniform(0.0, 180.0);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<InteractionPlan> plan_interaction_dataset(int n_doors, int n_actions, uint64_t seed,
                                                      Imagery imagery, int samples_per_door) {
  if (n_doors < 1 || n_actions < 1)
    throw std::invalid_argument("plan_interaction_dataset: counts must be >= 1");
  std::vector<InteractionPlan> out;
  out.reserve(n_doors);
  for (int i = 0; i < n_doors; ++i) {
    InteractionPlan p;
    Rng door_rng(derive_seed(seed, "door", i));
    p.set.door = sample_door(door_rng);
    p.set.angles.assign(samples_per_door, 0.0);
    if (imagery == Imagery::kOpen) {
      Rng angle_rng(derive_seed(seed, "angles", i));
      for (auto& a : p.set.angles) a = angle_rng.uniform(0.0, 180.0);
    }
    // Regenerate the action set if no action opens the door at all; regret is
    // undefined when the per-door oracle reward is zero.
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100)
        throw std::runtime_error("plan_interaction_dataset: door keeps drawing all-zero rewards");
      Rng action_rng(derive_seed(seed, "actions", static_cast<uint64_t>(i) * 997 + attempt));
      p.actions.clear();
      p.rewards.clear();
      double best = 0;
      for (int a = 0; a < n_actions; ++a) {
        Action act = sample_action(action_rng);
        double r = execute_action(p.set.door, act);
        p.actions.push_back(act);
        p.rewards.push_back(r);
        best = std::max(best, r);
      }
      if (best >= 1e-6) break;
    }
    out.push_back(std::move(p));
  }
  return out;
}

DoorSet materialize(const DoorSetPlan& plan, int size) {
  DoorSet set;
  set.door = plan.door;
  set.angles = plan.angles;
  set.images.reserve(plan.angles.size());
  for (double a : plan.angles) set.images.push_back(render({plan.door, a}, size));
  return set;
}

}  // namespace doors::world
