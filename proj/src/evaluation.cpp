#include "contactservo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "contactservo/controller.hpp"
#include "contactservo/jsonio.hpp"

namespace contactservo {

namespace {

double safe_rms(double sum_sq, long n) {
  return n > 0 ? std::sqrt(sum_sq / static_cast<double>(n))
               : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

WindowPredictor model_predictor(const ModelParams& params) {
  return [params](const WindowData& w) {
    PointCloud pts;
    pts.reserve(w.clouds[0].cols());
    for (int i = 0; i < w.clouds[0].cols(); ++i) pts.push_back(w.clouds[0].col(i));
    WrenchHistory h(4, 6);
    for (int s = 0; s < 4; ++s)
      h.row(s) = w.wrench_flat[0].segment<6>(6 * s).transpose();
    std::vector<TwistDelta> actions;
    for (const auto& a : w.actions) actions.push_back(TwistDelta::from_vector(a));
    const auto steps = rollout(params, pts, h, w.t_we[0], actions);
    std::vector<PredictedContact> out;
    for (const auto& s : steps)
      out.push_back({s.c_b_prob, s.line_world, s.wrench});
    return out;
  };
}

WindowPredictor baseline_predictor(const RigidToolModel& tool) {
  return [tool](const WindowData& w) {
    std::vector<TwistDelta> actions;
    for (const auto& a : w.actions) actions.push_back(TwistDelta::from_vector(a));
    const auto preds = rigid_rollout(tool, w.t_we[0], actions);
    std::vector<PredictedContact> out;
    for (const auto& p : preds) {
      PredictedContact pc;
      pc.c_b_prob = p.c_b;
      if (p.line_world) pc.line_world = *p.line_world;
      else pc.line_world = {Vec3(0, 0, 1e6), Vec3(0, 0, 1e6)};  // no prediction
      pc.wrench.setConstant(std::numeric_limits<double>::quiet_NaN());
      out.push_back(pc);
    }
    return out;
  };
}

PredictionReport prediction_metrics(const WindowPredictor& predictor,
                                    const std::vector<WindowData>& windows,
                                    const std::string& label) {
  if (windows.empty())
    throw EvaluationError("prediction_metrics: empty test set");
  const int T = windows[0].horizon;
  PredictionReport rep;
  rep.label = label;
  std::vector<long> n_binary(T + 1, 0), n_correct(T + 1, 0), n_line(T + 1, 0),
      n_wrench(T + 1, 0);
  std::vector<double> line_sq(T + 1, 0.0), force_sq(T + 1, 0.0),
      torque_sq(T + 1, 0.0);
  double force_mag_sum = 0.0;
  long force_mag_n = 0;

  for (const auto& w : windows) {
    const auto preds = predictor(w);
    for (int t = 0; t <= T; ++t) {
      const int label_cb = w.c_b[t];
      const int pred_cb = preds[t].c_b_prob >= 0.5 ? 1 : 0;
      ++n_binary[t];
      n_correct[t] += pred_cb == label_cb ? 1 : 0;

      if (label_cb == 1 && w.line_ee[t].has_value() &&
          preds[t].line_world.a.z() < 1e5) {
        ContactLine lab;
        lab.a = apply(w.t_we[t], w.line_ee[t]->head<3>());
        lab.b = apply(w.t_we[t], w.line_ee[t]->tail<3>());
        const double d = line_distance(preds[t].line_world, lab);
        line_sq[t] += d * d;
        ++n_line[t];
      }
      if (preds[t].wrench.allFinite()) {
        force_sq[t] += (preds[t].wrench.head<3>() - w.c_w[t].head<3>()).squaredNorm();
        torque_sq[t] += (preds[t].wrench.tail<3>() - w.c_w[t].tail<3>()).squaredNorm();
        ++n_wrench[t];
      }
      if (label_cb == 1) {
        force_mag_sum += w.c_w[t].head<3>().norm();
        ++force_mag_n;
      }
    }
  }

  for (int t = 0; t <= T; ++t) {
    rep.binary_accuracy.push_back(
        n_binary[t] ? static_cast<double>(n_correct[t]) / n_binary[t] : 0.0);
    rep.line_rms.push_back(safe_rms(line_sq[t], n_line[t]));
    rep.force_rms.push_back(safe_rms(force_sq[t], n_wrench[t]));
    rep.torque_rms.push_back(safe_rms(torque_sq[t], n_wrench[t]));
    rep.line_counts.push_back(static_cast<int>(n_line[t]));
  }
  rep.mean_in_contact_force =
      force_mag_n ? force_mag_sum / static_cast<double>(force_mag_n) : 0.0;
  return rep;
}

std::vector<double> pose_propagation_error(const ModelParams& params,
                                           const std::vector<WindowData>& windows) {
  if (windows.empty())
    throw EvaluationError("pose_propagation_error: empty set");
  const int T = windows[0].horizon;
  std::vector<double> err(T + 1, 0.0);
  long n = 0;
  for (const auto& w : windows) {
    PointCloud pts;
    for (int i = 0; i < w.clouds[0].cols(); ++i) pts.push_back(w.clouds[0].col(i));
    WrenchHistory h(4, 6);
    for (int s = 0; s < 4; ++s)
      h.row(s) = w.wrench_flat[0].segment<6>(6 * s).transpose();
    std::vector<TwistDelta> actions;
    for (const auto& a : w.actions) actions.push_back(TwistDelta::from_vector(a));
    const auto steps = rollout(params, pts, h, w.t_we[0], actions);
    for (int t = 0; t <= T; ++t)
      err[t] += (steps[t].t_we_hat.translation - w.t_we[t].translation).norm();
    ++n;
  }
  for (auto& e : err) e /= static_cast<double>(n);
  return err;
}

RasterFrame RasterFrame::covering(const std::vector<ContactLine>& lines,
                                  double margin, double cell) {
  if (lines.empty()) throw EvaluationError("RasterFrame: no lines");
  Eigen::Vector2d lo(1e9, 1e9), hi(-1e9, -1e9);
  for (const auto& l : lines)
    for (const Vec3& p : {l.a, l.b}) {
      lo = lo.cwiseMin(Eigen::Vector2d(p.x(), p.y()));
      hi = hi.cwiseMax(Eigen::Vector2d(p.x(), p.y()));
    }
  RasterFrame f;
  f.cell = cell;
  f.origin = lo - Eigen::Vector2d(margin, margin);
  f.nx = static_cast<int>(std::ceil((hi.x() - lo.x() + 2 * margin) / cell));
  f.ny = static_cast<int>(std::ceil((hi.y() - lo.y() + 2 * margin) / cell));
  return f;
}

RasterFrame RasterFrame::merge(const RasterFrame& a, const RasterFrame& b) {
  RasterFrame f;
  f.cell = a.cell;
  f.origin = a.origin.cwiseMin(b.origin);
  const Eigen::Vector2d hi_a = a.origin + a.cell * Eigen::Vector2d(a.nx, a.ny);
  const Eigen::Vector2d hi_b = b.origin + b.cell * Eigen::Vector2d(b.nx, b.ny);
  const Eigen::Vector2d hi = hi_a.cwiseMax(hi_b);
  f.nx = static_cast<int>(std::ceil((hi.x() - f.origin.x()) / f.cell));
  f.ny = static_cast<int>(std::ceil((hi.y() - f.origin.y()) / f.cell));
  return f;
}

AreaMask swept_area(const std::vector<ContactLine>& lines,
                    const std::vector<char>& contact_flags,
                    const RasterFrame& frame) {
  if (lines.size() != contact_flags.size())
    throw EvaluationError("swept_area: lines/flags size mismatch");
  AreaMask mask;
  mask.origin = frame.origin;
  mask.cell = frame.cell;
  mask.cells.setZero(frame.nx, frame.ny);

  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    if (!contact_flags[i] || !contact_flags[i + 1]) continue;
    const ContactLine& p = lines[i];
    ContactLine c = lines[i + 1];
    if ((c.a - p.a).norm() + (c.b - p.b).norm() >
        (c.b - p.a).norm() + (c.a - p.b).norm())
      std::swap(c.a, c.b);
    const std::array<Eigen::Vector2d, 4> quad = {
        Eigen::Vector2d(p.a.x(), p.a.y()), Eigen::Vector2d(p.b.x(), p.b.y()),
        Eigen::Vector2d(c.b.x(), c.b.y()), Eigen::Vector2d(c.a.x(), c.a.y())};

    Eigen::Vector2d lo = quad[0], hi = quad[0];
    for (const auto& q : quad) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    const int i0 = std::max(0, static_cast<int>((lo.x() - frame.origin.x()) / frame.cell) - 1);
    const int j0 = std::max(0, static_cast<int>((lo.y() - frame.origin.y()) / frame.cell) - 1);
    const int i1 = std::min(frame.nx - 1, static_cast<int>((hi.x() - frame.origin.x()) / frame.cell) + 1);
    const int j1 = std::min(frame.ny - 1, static_cast<int>((hi.y() - frame.origin.y()) / frame.cell) + 1);
    for (int ci = i0; ci <= i1; ++ci)
      for (int cj = j0; cj <= j1; ++cj) {
        if (mask.cells(ci, cj)) continue;
        const Eigen::Vector2d center =
            frame.origin + frame.cell * Eigen::Vector2d(ci + 0.5, cj + 0.5);
        bool inside = false;
        for (int k = 0, m = 3; k < 4; m = k++) {
          const auto& a = quad[k];
          const auto& b = quad[m];
          if ((a.y() > center.y()) != (b.y() > center.y()) &&
              center.x() < (b.x() - a.x()) * (center.y() - a.y()) /
                                   (b.y() - a.y()) + a.x())
            inside = !inside;
        }
        if (inside) mask.cells(ci, cj) = 1;
      }
  }
  return mask;
}

double iou(const AreaMask& a, const AreaMask& b) {
  if ((a.origin - b.origin).norm() > 1e-9 || a.cell != b.cell ||
      a.cells.rows() != b.cells.rows() || a.cells.cols() != b.cells.cols())
    throw EvaluationError("iou: masks use different raster frames");
  long inter = 0, uni = 0;
  for (int i = 0; i < a.cells.rows(); ++i)
    for (int j = 0; j < a.cells.cols(); ++j) {
      const bool va = a.cells(i, j) != 0, vb = b.cells(i, j) != 0;
      inter += va && vb;
      uni += va || vb;
    }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<double, double> scrape_metrics(const MaterialGrid& before,
                                         const MaterialGrid& after) {
  if (before.mass.size() == 0)
    throw EvaluationError("scrape_metrics: empty before-grid");
  if (before.mass.rows() != after.mass.rows() ||
      before.mass.cols() != after.mass.cols())
    throw EvaluationError("scrape_metrics: grid geometry mismatch");
  const double total_before = before.mass.sum();
  const double total_after = after.mass.sum();
  const double mass_removed =
      total_before > 0 ? 1.0 - total_after / total_before : 0.0;

  const double threshold = 0.01 * before.mass.maxCoeff();
  long fp_before = 0, fp_after = 0;
  for (int i = 0; i < before.mass.rows(); ++i)
    for (int j = 0; j < before.mass.cols(); ++j) {
      fp_before += before.mass(i, j) > threshold;
      fp_after += after.mass(i, j) > threshold;
    }
  const double footprint_removed =
      fp_before > 0 ? 1.0 - static_cast<double>(fp_after) / fp_before : 0.0;
  return {mass_removed, footprint_removed};
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw EvaluationError("write_csv: cannot open " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    f << (i ? "," : "") << header[i];
  f << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      f << (i ? "," : "") << fmt_g9(row[i]);
    f << "\n";
  }
}

std::vector<std::vector<double>> read_csv(const std::string& path,
                                          std::vector<std::string>* header) {
  std::ifstream f(path);
  if (!f) throw EvaluationError("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw EvaluationError("read_csv: empty " + path);
  if (header) {
    header->clear();
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header->push_back(cell);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_prediction_report_csv(const std::vector<PredictionReport>& reports,
                                 const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw EvaluationError("write_prediction_report_csv: cannot open " + path);
  f << "series,step,binary_accuracy,line_rms_m,force_rms_n,torque_rms_nm,"
       "line_count,mean_in_contact_force_n\n";
  for (const auto& r : reports)
    for (std::size_t t = 0; t < r.binary_accuracy.size(); ++t)
      f << r.label << "," << t << "," << fmt_g9(r.binary_accuracy[t]) << ","
        << fmt_g9(r.line_rms[t]) << "," << fmt_g9(r.force_rms[t]) << ","
        << fmt_g9(r.torque_rms[t]) << "," << r.line_counts[t] << ","
        << fmt_g9(r.mean_in_contact_force) << "\n";
}

namespace {

void svg_header(std::ofstream& f, int w, int h, const std::string& title) {
  f << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w
    << "\" height=\"" << h << "\" viewBox=\"0 0 " << w << " " << h << "\">\n"
    << "<text x=\"12\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">"
    << title << "</text>\n";
}

}  // namespace

void write_bar_chart_svg(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values) {
  if (labels.size() != values.size())
    throw EvaluationError("write_bar_chart_svg: labels/values mismatch");
  const int w = 90 * std::max<int>(1, static_cast<int>(values.size())) + 80;
  const int h = 260;
  double vmax = 1e-12;
  for (double v : values) vmax = std::max(vmax, v);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw EvaluationError("write_bar_chart_svg: cannot open " + path);
  svg_header(f, w, h, title);
  f << "<line x1=\"40\" y1=\"220\" x2=\"" << (w - 20)
    << "\" y2=\"220\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double bh = 180.0 * values[i] / vmax;
    const double x = 50 + 90.0 * i;
    f << "<rect x=\"" << fmt_g9(x) << "\" y=\"" << fmt_g9(220 - bh)
      << "\" width=\"60\" height=\"" << fmt_g9(bh)
      << "\" fill=\"#4878cf\"/>\n";
    f << "<text x=\"" << fmt_g9(x) << "\" y=\"238\" font-family=\"sans-serif\""
      << " font-size=\"11\">" << labels[i] << "</text>\n";
    f << "<text x=\"" << fmt_g9(x) << "\" y=\"" << fmt_g9(212 - bh)
      << "\" font-family=\"sans-serif\" font-size=\"11\">" << fmt_g9(values[i])
      << "</text>\n";
  }
  f << "</svg>\n";
}

void write_line_chart_svg(const std::string& path, const std::string& title,
                          const std::vector<std::string>& series_labels,
                          const std::vector<std::vector<double>>& series) {
  if (series_labels.size() != series.size())
    throw EvaluationError("write_line_chart_svg: labels/series mismatch");
  const int w = 420, h = 280;
  double vmax = 1e-12;
  std::size_t n = 1;
  for (const auto& s : series) {
    n = std::max(n, s.size());
    for (double v : s)
      if (std::isfinite(v)) vmax = std::max(vmax, v);
  }
  const std::array<std::string, 4> colors = {"#4878cf", "#d65f5f", "#6acc65",
                                             "#956cb4"};
  std::ofstream f(path, std::ios::binary);
  if (!f) throw EvaluationError("write_line_chart_svg: cannot open " + path);
  svg_header(f, w, h, title);
  f << "<line x1=\"40\" y1=\"240\" x2=\"400\" y2=\"240\" stroke=\"black\"/>\n";
  f << "<line x1=\"40\" y1=\"40\" x2=\"40\" y2=\"240\" stroke=\"black\"/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    f << "<polyline fill=\"none\" stroke=\"" << colors[s % colors.size()]
      << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[s].size(); ++i) {
      if (!std::isfinite(series[s][i])) continue;
      const double x = 40 + 340.0 * i / std::max<std::size_t>(1, n - 1);
      const double y = 240 - 190.0 * series[s][i] / vmax;
      f << fmt_g9(x) << "," << fmt_g9(y) << " ";
    }
    f << "\"/>\n";
    f << "<text x=\"50\" y=\"" << (56 + 16 * s)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
      << colors[s % colors.size()] << "\">" << series_labels[s] << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace contactservo
