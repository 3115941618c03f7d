#pragma once

#include <optional>
#include <string>
#include <vector>

#include "contactservo/contact.hpp"
#include "contactservo/perception.hpp"
#include "contactservo/sim.hpp"

namespace contactservo {

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One labeled step of an episode: observation, action taken at t (absent at
/// the final step), realized action offset (absent at t = 0), contact labels
/// and the realized EE pose for bookkeeping.
struct TransitionRecord {
  int t = 0;
  PointCloud v_ee;          // clipped, downsampled EE-frame cloud
  WrenchHistory h;          // 4 x 6 wrench history
  std::optional<TwistDelta> a;
  std::optional<TwistDelta> delta_a;
  int c_b = 0;
  std::optional<ContactLine> c_l_ee;
  Vec6 c_w{Vec6::Zero()};
  Pose t_we;
};

struct EpisodeRecord {
  std::string tool_name;
  std::string scene_id;
  uint64_t seed = 0;
  std::vector<TransitionRecord> transitions;
};

enum class Split { kTrain, kVal, kTest };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct DatasetManifest {
  struct Entry {
    std::string path;
    std::string tool;
    uint64_t seed = 0;
    Split split = Split::kTrain;
  };
  std::vector<Entry> episodes;
  std::string config_hash;
  uint64_t seed = 0;
};

struct CollectParams {
  int length = 50;
  int point_count = 1024;
  RenderParams render;
  LabelParams label;
  ClipBox clip_box;
  ActionBounds bounds;
  double force_threshold = 0.5;  // N, binary label fallback
  double min_tip_clearance = 0.004;
  double max_tip_clearance = 0.014;
};

/// Deterministic farthest-point downsampling to exactly n points (cycling
/// through the input when it has fewer).
PointCloud farthest_point_downsample(const PointCloud& points, int n,
                                     uint64_t seed);

/// Runs the contact-encouraging random policy for `length` steps and records
/// labeled transitions. Observations: clipped EE-frame cloud + 4-sample
/// wrench history; labels from the dense scan pipeline with force fallback.
EpisodeRecord collect_episode(const SceneSpec& scene, const ToolSpec& tool,
                              const ImpedanceSpec& imp,
                              const CollectParams& params, uint64_t seed);

/// Episode-level shuffled split assignment; ratios must sum to 1.
DatasetManifest split_dataset(const DatasetManifest& manifest,
                              const std::array<double, 3>& ratios,
                              uint64_t seed);

/// Contiguous windows of horizon+1 transitions (observations at t..t+horizon,
/// actions at t..t+horizon-1). Windows whose first transition lacks a cloud
/// are skipped.
struct TrainingWindow {
  const EpisodeRecord* episode = nullptr;
  int start = 0;
  int horizon = 0;

  const TransitionRecord& at(int k) const {
    return episode->transitions[start + k];
  }
};
std::vector<TrainingWindow> make_training_windows(const EpisodeRecord& episode,
                                                  int horizon);

void write_episode(const EpisodeRecord& episode, const std::string& path,
                   const std::string& config_hash = "");
EpisodeRecord read_episode(const std::string& path);

void write_manifest(const DatasetManifest& manifest, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

/// Loads every episode of a manifest split (paths relative to the manifest's
/// directory unless absolute).
std::vector<EpisodeRecord> load_split(const DatasetManifest& manifest,
                                      const std::string& manifest_path,
                                      Split split);

}  // namespace contactservo
