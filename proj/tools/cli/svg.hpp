// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>

#include "wogma/eval/report.hpp"

namespace wogma::cli {

/// Line chart of AUC against the observed fraction. Points with an undefined
/// AUC are left out; each plotted point is one <circle class="point">.
std::string curve_svg(std::span<const eval::CurvePoint> curve);

/// Strip for one video: ground-truth segments and extracted instances as
/// bands over the frame axis, the online action probability as a polyline.
std::string timeline_svg(const eval::VideoTimeline& timeline);

/// Escapes &, <, >, " and ' for XML text and attribute values.
std::string xml_escape(const std::string& text);

}  // namespace wogma::cli
