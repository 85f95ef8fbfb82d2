// SPDX-License-Identifier: Apache-2.0
#include "svg.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <sstream>

namespace wogma::cli {
namespace {

constexpr double kWidth = 640.0;
constexpr double kLeft = 50.0;
constexpr double kRight = 20.0;

void open_svg(std::ostringstream& out, double height, const std::string& title) {
  out << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">)",
                     kWidth, height, kWidth, height)
      << '\n'
      << "<title>" << xml_escape(title) << "</title>\n"
      << fmt::format(R"(<rect x="0" y="0" width="{}" height="{}" fill="white"/>)", kWidth, height) << '\n';
}

}  // namespace

std::string xml_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string curve_svg(std::span<const eval::CurvePoint> curve) {
  constexpr double height = 360.0, top = 30.0, bottom = 50.0;
  const double plot_w = kWidth - kLeft - kRight, plot_h = height - top - bottom;
  // Fraction on [0, 1] and AUC on [0, 1] map to the plot rectangle.
  const auto x = [&](double f) { return kLeft + f * plot_w; };
  const auto y = [&](double a) { return top + (1.0 - a) * plot_h; };

  std::ostringstream out;
  open_svg(out, height, "AUC against observed fraction");
  out << fmt::format(R"(<g class="axes" stroke="black" stroke-width="1">)"
                     R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}"/><line x1="{0}" y1="{1}" x2="{0}" y2="{3}"/></g>)",
                     x(0.0), y(0.0), x(1.0), y(1.0))
      << '\n';
  for (int tick = 0; tick <= 10; tick += 2) {
    const double v = tick / 10.0;
    out << fmt::format(R"(<text x="{}" y="{}" font-size="11" text-anchor="middle">{:.1f}</text>)", x(v), y(0.0) + 16,
                       v)
        << fmt::format(R"(<text x="{}" y="{}" font-size="11" text-anchor="end">{:.1f}</text>)", x(0.0) - 6,
                       y(v) + 4, v)
        << '\n';
  }
  out << fmt::format(R"(<text x="{}" y="{}" font-size="12" text-anchor="middle">fraction of video observed</text>)",
                     x(0.5), height - 12)
      << '\n'
      << fmt::format(R"svg(<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">AUC</text>)svg",
                     y(0.5), y(0.5))
      << '\n';

  std::string points;
  std::ostringstream dots;
  for (const eval::CurvePoint& p : curve) {
    if (!p.auc) continue;
    points += fmt::format("{:.2f},{:.2f} ", x(p.fraction), y(*p.auc));
    dots << fmt::format(R"(<circle class="point" cx="{:.2f}" cy="{:.2f}" r="3" fill="steelblue"/>)", x(p.fraction),
                        y(*p.auc))
         << '\n';
  }
  if (!points.empty()) {
    points.pop_back();
    out << fmt::format(R"(<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>)", points) << '\n';
  }
  out << dots.str() << "</svg>\n";
  return out.str();
}

std::string timeline_svg(const eval::VideoTimeline& t) {
  constexpr double height = 200.0, top = 30.0, gt_band = 14.0, inst_band = 14.0, curve_h = 100.0;
  const double plot_w = kWidth - kLeft - kRight;
  const std::size_t clips = t.probs.size();
  // Frames covered by the clips; at least one so an empty timeline still draws.
  std::size_t frames = clips == 0 ? 1 : (clips - 1) * t.stride + t.tau;
  for (const data::Segment& s : t.gt_segments) frames = std::max(frames, s.end_frame);
  const auto x = [&](double frame) { return kLeft + frame / static_cast<double>(frames) * plot_w; };
  const double gt_y = top, inst_y = top + gt_band + 4, curve_top = inst_y + inst_band + 8;
  const auto y = [&](double p) { return curve_top + (1.0 - p) * curve_h; };

  std::ostringstream out;
  open_svg(out, height, "timeline " + t.video_id);
  out << fmt::format(R"(<text x="{}" y="18" font-size="12">{} (label {}, video probability {:.3f})</text>)", kLeft,
                     xml_escape(t.video_id), t.label, t.video_prob)
      << '\n'
      << fmt::format(R"(<text x="{}" y="{}" font-size="10" text-anchor="end">gt</text>)", kLeft - 6, gt_y + 11)
      << fmt::format(R"(<text x="{}" y="{}" font-size="10" text-anchor="end">det</text>)", kLeft - 6, inst_y + 11)
      << fmt::format(R"(<text x="{}" y="{}" font-size="10" text-anchor="end">p</text>)", kLeft - 6, y(0.5) + 4)
      << '\n';
  for (const data::Segment& s : t.gt_segments) {
    out << fmt::format(R"(<rect class="gt" x="{:.2f}" y="{}" width="{:.2f}" height="{}" fill="seagreen"/>)",
                       x(static_cast<double>(s.start_frame - 1)), gt_y,
                       x(static_cast<double>(s.end_frame)) - x(static_cast<double>(s.start_frame - 1)), gt_band)
        << '\n';
  }
  for (const model::DetectionInstance& d : t.instances) {
    out << fmt::format(R"(<rect class="instance" x="{:.2f}" y="{}" width="{:.2f}" height="{}" fill="darkorange"/>)",
                       x(static_cast<double>(d.start_frame - 1)), inst_y,
                       x(static_cast<double>(d.end_frame)) - x(static_cast<double>(d.start_frame - 1)), inst_band)
        << '\n';
  }
  out << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="gray"/>)", kLeft, curve_top,
                     plot_w, curve_h)
      << '\n';
  if (clips > 0) {
    std::string points;
    for (std::size_t i = 0; i < clips; ++i) {
      // Each probability sits at the centre of its clip.
      const double centre = static_cast<double>(i * t.stride) + static_cast<double>(t.tau) / 2.0;
      points += fmt::format("{:.2f},{:.2f} ", x(centre), y(t.probs[i]));
    }
    points.pop_back();
    out << fmt::format(R"(<polyline class="prob" fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>)",
                       points)
        << '\n';
  }
  out << fmt::format(R"(<text x="{}" y="{}" font-size="11" text-anchor="middle">frame (1 to {})</text>)",
                     kLeft + plot_w / 2, height - 10, frames)
      << '\n'
      << "</svg>\n";
  return out.str();
}

}  // namespace wogma::cli
