// SPDX-License-Identifier: Apache-2.0
#include "wogma/data/sequence.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "wogma/error.hpp"

namespace wogma::data {
namespace {

using nlohmann::json;

ad::Tensor frames_from_json(const json& j, std::size_t joints, std::size_t channels) {
  if (!j.is_array()) throw DataError("frames must be an array");
  const std::size_t t = j.size();
  ad::Tensor frames(ad::Shape{t, joints, channels});
  for (std::size_t f = 0; f < t; ++f) {
    const json& frame = j[f];
    if (!frame.is_array() || frame.size() != joints) {
      throw DataError("frame " + std::to_string(f) + " has " + std::to_string(frame.is_array() ? frame.size() : 0) +
                      " joints, expected " + std::to_string(joints));
    }
    for (std::size_t n = 0; n < joints; ++n) {
      const json& joint = frame[n];
      if (!joint.is_array() || joint.size() != channels) {
        throw DataError("frame " + std::to_string(f) + " joint " + std::to_string(n) + " must have " +
                        std::to_string(channels) + " values");
      }
      for (std::size_t c = 0; c < channels; ++c) {
        if (!joint[c].is_number()) throw DataError("frame " + std::to_string(f) + ": non-numeric coordinate");
        frames[(f * joints + n) * channels + c] = joint[c].get<double>();
      }
    }
  }
  return frames;
}

json frames_to_json(const ad::Tensor& frames) {
  json out = json::array();
  const std::size_t t = frames.dim(0), joints = frames.dim(1), channels = frames.dim(2);
  for (std::size_t f = 0; f < t; ++f) {
    json frame = json::array();
    for (std::size_t n = 0; n < joints; ++n) {
      json joint = json::array();
      for (std::size_t c = 0; c < channels; ++c) joint.push_back(frames[(f * joints + n) * channels + c]);
      frame.push_back(std::move(joint));
    }
    out.push_back(std::move(frame));
  }
  return out;
}

SkeletonSequence from_json(const json& j, std::size_t joints, std::size_t channels) {
  if (!j.is_object()) throw DataError("expected a JSON object");
  SkeletonSequence seq;
  if (!j.contains("video_id") || !j.contains("label") || !j.contains("frames")) {
    throw DataError("missing one of video_id, label, frames");
  }
  const json& id = j.at("video_id");
  seq.video_id = id.is_string() ? id.get<std::string>() : id.dump();
  seq.fps = j.value("fps", 20.0);
  const json& label = j.at("label");
  if (label.is_number()) {
    seq.labels = {label.get<double>()};
  } else if (label.is_array()) {
    for (const json& v : label) seq.labels.push_back(v.get<double>());
  } else {
    throw DataError("label must be a number or an array of numbers");
  }
  for (double y : seq.labels)
    if (y != 0.0 && y != 1.0) throw DataError("labels must be 0 or 1");
  if (j.contains("gt_segments") && !j.at("gt_segments").is_null()) {
    std::vector<Segment> segs;
    for (const json& s : j.at("gt_segments")) {
      if (!s.is_array() || s.size() != 3) throw DataError("gt segment must be [start, end, class]");
      Segment seg{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<int>()};
      if (seg.start_frame < 1 || seg.end_frame < seg.start_frame) throw DataError("gt segment has invalid bounds");
      segs.push_back(seg);
    }
    seq.gt_segments = std::move(segs);
  }
  seq.frames = frames_from_json(j.at("frames"), joints, channels);
  if (seq.gt_segments) {
    for (const Segment& s : *seq.gt_segments)
      if (s.end_frame > seq.frame_count()) throw DataError("gt segment ends after the last frame");
  }
  return seq;
}

json to_json(const SkeletonSequence& seq) {
  json j;
  j["video_id"] = seq.video_id;
  j["fps"] = seq.fps;
  if (seq.labels.size() == 1) {
    j["label"] = static_cast<int>(seq.labels[0]);
  } else {
    json arr = json::array();
    for (double y : seq.labels) arr.push_back(static_cast<int>(y));
    j["label"] = arr;
  }
  if (seq.gt_segments) {
    json segs = json::array();
    for (const Segment& s : *seq.gt_segments) segs.push_back({s.start_frame, s.end_frame, s.action});
    j["gt_segments"] = segs;
  } else {
    j["gt_segments"] = nullptr;
  }
  j["frames"] = frames_to_json(seq.frames);
  return j;
}

}  // namespace

std::string sequence_to_json_line(const SkeletonSequence& seq) { return to_json(seq).dump(); }

SkeletonSequence sequence_from_json_line(const std::string& line, std::size_t joints, std::size_t channels) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  try {
    return from_json(j, joints, channels);
  } catch (const json::exception& e) {
    throw DataError(std::string("bad field type: ") + e.what());
  }
}

ad::Tensor frames_from_json_text(const std::string& text, std::size_t joints, std::size_t channels) {
  try {
    return frames_from_json(json::parse(text), joints, channels);
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
}

Dataset read_sequences(std::istream& in, std::size_t joints, std::size_t channels) {
  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(sequence_from_json_line(line, joints, channels));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_sequences(std::ostream& out, const Dataset& dataset) {
  for (const auto& seq : dataset) out << sequence_to_json_line(seq) << '\n';
}

Dataset load_sequences(const std::filesystem::path& path, std::size_t joints, std::size_t channels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  return read_sequences(in, joints, channels);
}

void save_sequences(const std::filesystem::path& path, const Dataset& dataset) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_sequences(out, dataset);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace wogma::data
