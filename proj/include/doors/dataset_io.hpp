#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "doors/doorworld.hpp"

// On-disk dataset layout: <dir>/manifest.json, <dir>/images/*.png and, for
// interaction datasets, <dir>/interactions.csv with columns
// door_id,axis_x,radius,goal_deg,reward.
namespace doors::data {

struct DoorEntry {
  int id = 0;
  world::DoorSpec spec;
  std::vector<double> angles;
  std::vector<std::string> images;  // paths relative to the dataset dir
};

struct Manifest {
  int schema_version = 1;
  std::string kind;  // "pretrain" | "interaction"
  uint64_t seed = 0;
  int image_size = 64;
  int samples_per_door = 5;
  std::string imagery;  // "closed" | "open" for interaction datasets
  std::vector<DoorEntry> doors;
};

Manifest generate_pretrain(const std::filesystem::path& dir, int n_doors, int samples_per_door,
                           uint64_t seed, int image_size = 64);

Manifest generate_interaction(const std::filesystem::path& dir, int n_doors, int n_actions,
                              uint64_t seed, world::Imagery imagery, int image_size = 64,
                              int samples_per_door = 5);

Manifest load_manifest(const std::filesystem::path& dir);

std::vector<world::DoorSet> load_door_sets(const std::filesystem::path& dir, const Manifest& m);

struct InteractionRow {
  int door_id;
  world::Action action;
  double reward;
};

std::vector<InteractionRow> load_interactions(const std::filesystem::path& dir);

}  // namespace doors::data
