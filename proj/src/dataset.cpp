#include "contactservo/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "contactservo/jsonio.hpp"
#include "contactservo/rng.hpp"

namespace contactservo {

namespace {

using nlohmann::json;

enum CollectTag : uint64_t {
  kTagResetPose = 11,
  kTagPolicy = 12,
  kTagDownsample = 13,
};

std::string twist_json(const TwistDelta& d) {
  const Vec6 v = d.to_vector();
  std::string s = "[";
  for (int i = 0; i < 6; ++i) s += (i ? "," : "") + fmt_g9(v[i]);
  return s + "]";
}

TwistDelta twist_from(const json& j) {
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j.at(i).get<double>();
  return TwistDelta::from_vector(v);
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DatasetError("unknown split name: " + name);
}

PointCloud farthest_point_downsample(const PointCloud& points, int n,
                                     uint64_t seed) {
  PointCloud out;
  if (n <= 0) return out;
  const int m = static_cast<int>(points.size());
  if (m == 0) return out;
  out.reserve(n);
  if (m <= n) {  // pad by cycling
    for (int i = 0; i < n; ++i) out.push_back(points[i % m]);
    return out;
  }
  RngStream rng = RngStream::of(seed, kTagDownsample);
  std::vector<double> dist(m, std::numeric_limits<double>::infinity());
  int cur = static_cast<int>(rng.integer(m));
  out.push_back(points[cur]);
  for (int k = 1; k < n; ++k) {
    int best = 0;
    double best_d = -1.0;
    for (int i = 0; i < m; ++i) {
      const double d = (points[i] - points[cur]).squaredNorm();
      if (d < dist[i]) dist[i] = d;
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    cur = best;
    out.push_back(points[cur]);
  }
  return out;
}

EpisodeRecord collect_episode(const SceneSpec& scene, const ToolSpec& tool,
                              const ImpedanceSpec& imp,
                              const CollectParams& params, uint64_t seed) {
  if (params.length < 2) throw DatasetError("collect_episode: length < 2");

  RngStream reset_rng = RngStream::of(seed, kTagResetPose);
  const ToolFrame frame = tool_frame(tool);
  SimState s;
  bool placed = false;
  for (int attempt = 0; attempt < 50 && !placed; ++attempt) {
    Pose start;
    const double clearance = reset_rng.uniform(params.min_tip_clearance,
                                               params.max_tip_clearance);
    start.translation =
        Vec3(reset_rng.uniform(-0.01, 0.01), reset_rng.uniform(-0.01, 0.01),
             clearance + tool.handle_length +
                 tool.blade_length * std::sin(frame.pitch));
    start.rotation = Rotation::from_axis_angle(
        Vec3(reset_rng.uniform(-0.05, 0.05), reset_rng.uniform(-0.03, 0.03),
             reset_rng.uniform(-0.3, 0.3)));
    try {
      s = reset(scene, tool, imp, start, seed);
      placed = true;
    } catch (const SimError&) {
    }
  }
  if (!placed) throw DatasetError("collect_episode: could not place the tool");

  EpisodeRecord ep;
  ep.tool_name = tool.name;
  ep.seed = seed;

  std::optional<TwistDelta> pending_offset;
  for (int t = 0; t < params.length; ++t) {
    TransitionRecord rec;
    rec.t = t;
    rec.t_we = s.realized_ee;
    rec.delta_a = pending_offset;

    const PointCloud cloud = render_pointcloud(s, params.render);
    const PointCloud clipped =
        clip_to_ee_frame(cloud, s.realized_ee, params.clip_box);
    rec.v_ee = farthest_point_downsample(clipped, params.point_count,
                                         stream_key(seed, 17, t));
    rec.h = measure_wrench(s, 4);

    LabeledContact lab =
        label_contact_line(render_scan(s), s.realized_ee, params.label,
                           params.clip_box);
    lab = label_binary(lab, rec.h, params.force_threshold);
    rec.c_b = lab.c_b;
    if (lab.source == LabelSource::kLineFound) {
      const Pose t_ew = inverse(s.realized_ee);
      rec.c_l_ee = ContactLine{apply(t_ew, lab.c_l_world->a),
                               apply(t_ew, lab.c_l_world->b)};
    }
    rec.c_w = rec.h.colwise().mean().transpose();

    if (t + 1 < params.length) {
      RngStream act = RngStream::of(seed, kTagPolicy, t);
      TwistDelta a;
      for (int i = 0; i < 3; ++i) {
        a.translation[i] = act.uniform(-params.bounds.max_translation,
                                       params.bounds.max_translation);
        a.rotation[i] =
            act.uniform(-params.bounds.max_rotation, params.bounds.max_rotation);
      }
      if (s.contact.c_b == 0) {  // encourage contact
        a.translation.z() = -std::abs(a.translation.z());
        a.rotation *= 0.5;
      }
      rec.a = a;
      ep.transitions.push_back(rec);
      s = step(s, a);  // simulator errors abort the episode
      pending_offset = realized_offset(s, a);
    } else {
      ep.transitions.push_back(rec);
    }
  }
  return ep;
}

DatasetManifest split_dataset(const DatasetManifest& manifest,
                              const std::array<double, 3>& ratios,
                              uint64_t seed) {
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9)
    throw DatasetError("split_dataset: ratios must sum to 1");
  const int n = static_cast<int>(manifest.episodes.size());
  int required = 0;
  for (double r : ratios)
    if (r > 0) ++required;
  if (n < required)
    throw DatasetError("split_dataset: fewer episodes than splits");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(stream_key(seed, 23));
  std::shuffle(order.begin(), order.end(), rng);

  const int n_val = static_cast<int>(std::floor(n * ratios[1]));
  const int n_test = static_cast<int>(std::floor(n * ratios[2]));
  const int n_train = n - n_val - n_test;

  DatasetManifest out = manifest;
  out.seed = seed;
  for (int k = 0; k < n; ++k) {
    Split s = Split::kTrain;
    if (k >= n_train && k < n_train + n_val) s = Split::kVal;
    if (k >= n_train + n_val) s = Split::kTest;
    out.episodes[order[k]].split = s;
  }
  return out;
}

std::vector<TrainingWindow> make_training_windows(const EpisodeRecord& episode,
                                                  int horizon) {
  if (horizon < 1) throw DatasetError("make_training_windows: horizon < 1");
  std::vector<TrainingWindow> out;
  const int n = static_cast<int>(episode.transitions.size());
  for (int start = 0; start + horizon < n; ++start) {
    if (episode.transitions[start].v_ee.empty()) continue;
    out.push_back({&episode, start, horizon});
  }
  return out;
}

void write_episode(const EpisodeRecord& episode, const std::string& path,
                   const std::string& config_hash) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("write_episode: cannot open " + path);
  f << "{\"schema\":1,\"tool\":" << json(episode.tool_name).dump()
    << ",\"seed\":" << episode.seed << ",\"scene\":"
    << json(episode.scene_id).dump() << ",\"config_hash\":"
    << json(config_hash).dump() << "}\n";
  for (const auto& r : episode.transitions) {
    std::string line = "{\"t\":" + std::to_string(r.t) + ",\"v\":[";
    for (std::size_t i = 0; i < r.v_ee.size(); ++i) {
      const Vec3& p = r.v_ee[i];
      line += (i ? ",[" : "[") + fmt_g9(p.x()) + "," + fmt_g9(p.y()) + "," +
              fmt_g9(p.z()) + "]";
    }
    line += "],\"h\":[";
    for (int i = 0; i < r.h.rows(); ++i) {
      line += i ? ",[" : "[";
      for (int k = 0; k < 6; ++k) line += (k ? "," : "") + fmt_g9(r.h(i, k));
      line += "]";
    }
    line += "],\"a\":";
    line += r.a ? twist_json(*r.a) : "null";
    line += ",\"da\":";
    line += r.delta_a ? twist_json(*r.delta_a) : "null";
    line += ",\"cb\":" + std::to_string(r.c_b);
    line += ",\"cl\":";
    if (r.c_l_ee) {
      line += "[[" + fmt_g9(r.c_l_ee->a.x()) + "," + fmt_g9(r.c_l_ee->a.y()) +
              "," + fmt_g9(r.c_l_ee->a.z()) + "],[" + fmt_g9(r.c_l_ee->b.x()) +
              "," + fmt_g9(r.c_l_ee->b.y()) + "," + fmt_g9(r.c_l_ee->b.z()) +
              "]]";
    } else {
      line += "null";
    }
    line += ",\"cw\":[";
    for (int k = 0; k < 6; ++k) line += (k ? "," : "") + fmt_g9(r.c_w[k]);
    line += "],\"Twe\":[";
    const auto tw = pose_to_array(r.t_we);
    for (int k = 0; k < 7; ++k) line += (k ? "," : "") + fmt_g9(tw[k]);
    line += "]}";
    f << line << "\n";
  }
  if (!f) throw DatasetError("write_episode: write failed for " + path);
}

EpisodeRecord read_episode(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("read_episode: cannot open " + path);
  std::string line;
  if (!std::getline(f, line))
    throw DatasetError("read_episode: empty file " + path);

  EpisodeRecord ep;
  int line_no = 1;
  try {
    const json header = json::parse(line);
    if (header.at("schema").get<int>() != 1)
      throw DatasetError("read_episode: unsupported schema in " + path);
    ep.tool_name = header.at("tool").get<std::string>();
    ep.seed = header.at("seed").get<uint64_t>();
    ep.scene_id = header.value("scene", "");
  } catch (const json::exception& e) {
    throw DatasetError("read_episode: bad header in " + path + ": " + e.what());
  }

  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      TransitionRecord r;
      r.t = j.at("t").get<int>();
      for (const auto& p : j.at("v"))
        r.v_ee.push_back(
            Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>()));
      const auto& h = j.at("h");
      r.h.resize(static_cast<int>(h.size()), 6);
      for (int i = 0; i < r.h.rows(); ++i)
        for (int k = 0; k < 6; ++k) r.h(i, k) = h.at(i).at(k).get<double>();
      if (!j.at("a").is_null()) r.a = twist_from(j.at("a"));
      if (!j.at("da").is_null()) r.delta_a = twist_from(j.at("da"));
      r.c_b = j.at("cb").get<int>();
      if (!j.at("cl").is_null()) {
        const auto& cl = j.at("cl");
        r.c_l_ee = ContactLine{Vec3(cl.at(0).at(0).get<double>(),
                                    cl.at(0).at(1).get<double>(),
                                    cl.at(0).at(2).get<double>()),
                               Vec3(cl.at(1).at(0).get<double>(),
                                    cl.at(1).at(1).get<double>(),
                                    cl.at(1).at(2).get<double>())};
      }
      for (int k = 0; k < 6; ++k) r.c_w[k] = j.at("cw").at(k).get<double>();
      std::array<double, 7> tw;
      for (int k = 0; k < 7; ++k) tw[k] = j.at("Twe").at(k).get<double>();
      r.t_we = pose_from_array(tw);
      ep.transitions.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DatasetError("read_episode: corrupt line " + std::to_string(line_no) +
                         " in " + path + ": " + e.what());
    }
  }
  return ep;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  json j;
  j["schema"] = 1;
  j["seed"] = manifest.seed;
  j["config_hash"] = manifest.config_hash;
  j["episodes"] = json::array();
  for (const auto& e : manifest.episodes)
    j["episodes"].push_back({{"path", e.path},
                             {"tool", e.tool},
                             {"seed", e.seed},
                             {"split", split_name(e.split)}});
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DatasetError("write_manifest: cannot open " + path);
  f << j.dump(2) << "\n";
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DatasetError("read_manifest: cannot open " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw DatasetError("read_manifest: parse error in " + path + ": " + e.what());
  }
  if (j.value("schema", 0) != 1)
    throw DatasetError("read_manifest: unsupported schema in " + path);
  DatasetManifest m;
  m.seed = j.value("seed", 0ull);
  m.config_hash = j.value("config_hash", "");
  for (const auto& e : j.at("episodes"))
    m.episodes.push_back({e.at("path").get<std::string>(),
                          e.at("tool").get<std::string>(),
                          e.at("seed").get<uint64_t>(),
                          split_from_name(e.at("split").get<std::string>())});
  return m;
}

std::vector<EpisodeRecord> load_split(const DatasetManifest& manifest,
                                      const std::string& manifest_path,
                                      Split split) {
  namespace fs = std::filesystem;
  const fs::path base = fs::path(manifest_path).parent_path();
  std::vector<EpisodeRecord> out;
  for (const auto& e : manifest.episodes) {
    if (e.split != split) continue;
    fs::path p(e.path);
    if (p.is_relative()) p = base / p;
    out.push_back(read_episode(p.string()));
  }
  return out;
}

}  // namespace contactservo
