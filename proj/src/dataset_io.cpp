#include "doors/dataset_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "doors/errors.hpp"
#include "doors/strfmt.hpp"
#include "json.hpp"

namespace doors::data {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json door_to_json(const DoorEntry& e) {
  return json{{"id", e.id},
              {"origin_x", e.spec.origin_x},
              {"origin_y", e.spec.origin_y},
              {"width", e.spec.width},
              {"height", e.spec.height},
              {"handle_offset", e.spec.handle_offset},
              {"flipped", e.spec.flipped},
              {"angles", e.spec.flipped && false ? json::array() : json(e.angles)},
              {"images", e.images}};
}

DoorEntry door_from_json(const json& j) {
  DoorEntry e;
  e.id = j.at("id").get<int>();
  e.spec.origin_x = j.at("origin_x").get<double>();
  e.spec.origin_y = j.at("origin_y").get<double>();
  e.spec.width = j.at("width").get<double>();
  e.spec.height = j.at("height").get<double>();
  e.spec.handle_offset = j.at("handle_offset").get<double>();
  e.spec.flipped = j.at("flipped").get<bool>();
  e.angles = j.at("angles").get<std::vector<double>>();
  e.images = j.at("images").get<std::vector<std::string>>();
  return e;
}

void write_manifest(const fs::path& dir, const Manifest& m) {
  json j{{"schema_version", m.schema_version},
         {"kind", m.kind},
         {"seed", m.seed},
         {"image_size", m.image_size},
         {"samples_per_door", m.samples_per_door}};
  if (!m.imagery.empty()) j["imagery"] = m.imagery;
  json doors = json::array();
  for (const auto& d : m.doors) doors.push_back(door_to_json(d));
  j["doors"] = std::move(doors);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed: " + (dir / "manifest.json").string());
}

std::string image_rel_path(int door_id, int sample) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "images/door%05d_s%d.png", door_id, sample);
  return buf;
}

Manifest write_door_sets(const fs::path& dir, const std::vector<world::DoorSetPlan>& plans,
                         const std::string& kind, const std::string& imagery, uint64_t seed,
                         int image_size, int samples_per_door) {
  std::error_code ec;
  fs::create_directories(dir / "images", ec);
  if (ec) throw IoError("cannot create dataset dir " + dir.string() + ": " + ec.message());

  Manifest m;
  m.kind = kind;
  m.seed = seed;
  m.image_size = image_size;
  m.samples_per_door = samples_per_door;
  m.imagery = imagery;
  for (size_t i = 0; i < plans.size(); ++i) {
    DoorEntry e;
    e.id = static_cast<int>(i);
    e.spec = plans[i].door;
    e.angles = plans[i].angles;
    world::DoorSet set = world::materialize(plans[i], image_size);
    for (int s = 0; s < set.size(); ++s) {
      const std::string rel = image_rel_path(e.id, s);
      write_png(dir / rel, set.images[s]);
      e.images.push_back(rel);
    }
    m.doors.push_back(std::move(e));
  }
  write_manifest(dir, m);
  return m;
}

}  // namespace

Manifest generate_pretrain(const fs::path& dir, int n_doors, int samples_per_door, uint64_t seed,
                           int image_size) {
  auto plans = world::plan_pretrain_dataset(n_doors, samples_per_door, seed);
  return write_door_sets(dir, plans, "pretrain", "", seed, image_size, samples_per_door);
}

Manifest generate_interaction(const fs::path& dir, int n_doors, int n_actions, uint64_t seed,
                              world::Imagery imagery, int image_size, int samples_per_door) {
  auto plans = world::plan_interaction_dataset(n_doors, n_actions, seed, imagery, samples_per_door);
  std::vector<world::DoorSetPlan> set_plans;
  set_plans.reserve(plans.size());
  for (const auto& p : plans) set_plans.push_back(p.set);
  Manifest m = write_door_sets(dir, set_plans, "interaction",
                               imagery == world::Imagery::kClosed ? "closed" : "open", seed,
                               image_size, samples_per_door);

  std::ofstream csv(dir / "interactions.csv", std::ios::binary);
  if (!csv) throw IoError("cannot write " + (dir / "interactions.csv").string());
  csv << "door_id,axis_x,radius,goal_deg,reward\n";
  for (size_t i = 0; i < plans.size(); ++i) {
    for (size_t a = 0; a < plans[i].actions.size(); ++a) {
      const auto& act = plans[i].actions[a];
      csv << i << ',' << fmt_double(act.axis_x) << ',' << fmt_double(act.radius) << ','
          << fmt_double(act.goal_deg) << ',' << fmt_double(plans[i].rewards[a]) << "\n";
    }
  }
  if (!csv) throw IoError("write failed: " + (dir / "interactions.csv").string());
  return m;
}

Manifest load_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw IoError("cannot read " + (dir / "manifest.json").string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IoError("bad manifest " + (dir / "manifest.json").string() + ": " + e.what());
  }
  Manifest m;
  m.schema_version = j.at("schema_version").get<int>();
  if (m.schema_version != 1)
    throw IoError("unsupported dataset schema_version in " + dir.string());
  m.kind = j.at("kind").get<std::string>();
  m.seed = j.at("seed").get<uint64_t>();
  m.image_size = j.at("image_size").get<int>();
  m.samples_per_door = j.at("samples_per_door").get<int>();
  if (j.contains("imagery")) m.imagery = j.at("imagery").get<std::string>();
  for (const auto& dj : j.at("doors")) m.doors.push_back(door_from_json(dj));
  return m;
}

std::vector<world::DoorSet> load_door_sets(const fs::path& dir, const Manifest& m) {
  std::vector<world::DoorSet> sets;
  sets.reserve(m.doors.size());
  for (const auto& e : m.doors) {
    world::DoorSet s;
    s.door = e.spec;
    s.angles = e.angles;
    for (const auto& rel : e.images) s.images.push_back(read_png(dir / rel));
    sets.push_back(std::move(s));
  }
  return sets;
}

std::vector<InteractionRow> load_interactions(const fs::path& dir) {
  std::ifstream in(dir / "interactions.csv", std::ios::binary);
  if (!in) throw IoError("cannot read " + (dir / "interactions.csv").string());
  std::vector<InteractionRow> rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    InteractionRow r;
    std::istringstream ss(line);
    std::string tok;
    std::getline(ss, tok, ',');
    r.door_id = std::stoi(tok);
    std::getline(ss, tok, ',');
    r.action.axis_x = std::stod(tok);
    std::getline(ss, tok, ',');
    r.action.radius = std::stod(tok);
    std::getline(ss, tok, ',');
    r.action.goal_deg = std::stod(tok);
    std::getline(ss, tok, ',');
    r.reward = std::stod(tok);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace doors::data
