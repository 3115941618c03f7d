#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "contactservo/baseline.hpp"
#include "contactservo/contact.hpp"
#include "contactservo/controller.hpp"
#include "contactservo/model.hpp"
#include "contactservo/sim.hpp"

namespace contactservo {

struct EvaluationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Per-rollout-step prediction quality over a test set.
struct PredictionReport {
  std::string label;
  std::vector<double> binary_accuracy;  // per step t = 0..T
  std::vector<double> line_rms;         // m, over in-contact labeled steps
  std::vector<double> force_rms;        // N (vector RMS), NaN for baselines
  std::vector<double> torque_rms;       // N*m
  std::vector<int> line_counts;         // labeled in-contact steps per t
  double mean_in_contact_force = 0.0;   // N, label statistics
  /// Mean translation error of the propagated EE frame per step (m).
  std::vector<double> pose_error;
};

/// Rollout provider: maps a packed window to T+1 predictions.
using WindowPredictor =
    std::function<std::vector<PredictedContact>(const WindowData&)>;

PredictionReport prediction_metrics(const WindowPredictor& predictor,
                                    const std::vector<WindowData>& windows,
                                    const std::string& label);

/// Predictors for the learned model and the rigid baseline.
WindowPredictor model_predictor(const ModelParams& params);
WindowPredictor baseline_predictor(const RigidToolModel& tool);

/// Propagated-pose error (Full model offset head quality): mean translation
/// error of T_we_hat vs the recorded realized poses, per step.
std::vector<double> pose_propagation_error(const ModelParams& params,
                                           const std::vector<WindowData>& windows);

/// Boolean raster over a table region, 1 mm default cell.
struct AreaMask {
  Eigen::Vector2d origin{0.0, 0.0};
  double cell = 1e-3;
  Eigen::Matrix<uint8_t, Eigen::Dynamic, Eigen::Dynamic> cells;

  int count() const { return static_cast<int>(cells.cast<int>().sum()); }
  double area() const { return count() * cell * cell; }
};

struct RasterFrame {
  Eigen::Vector2d origin{0.0, 0.0};
  double cell = 1e-3;
  int nx = 0, ny = 0;

  static RasterFrame covering(const std::vector<ContactLine>& lines,
                              double margin = 0.02, double cell = 1e-3);
  static RasterFrame merge(const RasterFrame& a, const RasterFrame& b);
};

/// Union of the quadrilaterals between consecutive in-contact lines
/// (xy projection, non-self-intersecting vertex order).
AreaMask swept_area(const std::vector<ContactLine>& lines,
                    const std::vector<char>& contact_flags,
                    const RasterFrame& frame);

double iou(const AreaMask& a, const AreaMask& b);

/// (mass removed fraction, footprint removed fraction); the footprint
/// threshold is 1% of the largest initial cell mass.
std::pair<double, double> scrape_metrics(const MaterialGrid& before,
                                         const MaterialGrid& after);

/// CSV emission: header row then %.9g-formatted rows; byte-deterministic.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header = nullptr);

void write_prediction_report_csv(const std::vector<PredictionReport>& reports,
                                 const std::string& path);

/// Standalone SVG bar chart; one bar per (label, value).
void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values);

/// Line chart over steps, one polyline per report series.
void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<std::string>& series_labels,
                          const std::vector<std::vector<double>>& series);

}  // namespace contactservo
