// SPDX-License-Identifier: Apache-2.0
#include "wogma/eval/report.hpp"

#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "wogma/data/preprocess.hpp"
#include "wogma/error.hpp"
#include "wogma/eval/metrics.hpp"

namespace wogma::eval {
namespace {

using nlohmann::json;

constexpr std::size_t kAction = 1;

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional(const json& v) {
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

int video_label(const data::SkeletonSequence& seq) {
  if (seq.labels.empty()) throw DataError("video " + seq.video_id + " has no label");
  return seq.positive(kAction) ? 1 : 0;
}

}  // namespace

void EvalOptions::validate() const {
  if (kappa == 0) throw ConfigError("kappa must be >= 1");
  if (instance_threshold < 0.0 || instance_threshold > 1.0) throw ConfigError("instance threshold must be in [0, 1]");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("observation fractions must lie in (0, 1]");
  }
}

bool VideoTimeline::operator==(const VideoTimeline& o) const {
  auto same_instances = [](const std::vector<model::DetectionInstance>& a,
                           const std::vector<model::DetectionInstance>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].start_frame != b[i].start_frame || a[i].end_frame != b[i].end_frame || a[i].score != b[i].score ||
          a[i].action != b[i].action || a[i].first_clip != b[i].first_clip || a[i].last_clip != b[i].last_clip) {
        return false;
      }
    }
    return true;
  };
  return video_id == o.video_id && label == o.label && video_prob == o.video_prob && tau == o.tau &&
         stride == o.stride && probs == o.probs && gt_segments == o.gt_segments &&
         same_instances(instances, o.instances);
}

bool EvalReport::operator==(const EvalReport& o) const {
  return videos == o.videos && detection_videos == o.detection_videos && accuracy == o.accuracy && f1 == o.f1 &&
         auc == o.auc && map_at == o.map_at && mean_map == o.mean_map && instance_count == o.instance_count &&
         early_curve == o.early_curve && timelines == o.timelines;
}

std::size_t observed_clips(double fraction, std::size_t clips) {
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(clips)));
  return std::clamp<std::size_t>(k, 1, clips);
}

std::vector<ad::Tensor> online_timelines(const model::Model& model, const data::Dataset& dataset,
                                         std::size_t max_frames) {
  std::vector<ad::Tensor> out;
  out.reserve(dataset.size());
  for (const data::SkeletonSequence& seq : dataset) {
    out.push_back(model.online_timeline(model.clips(data::preprocess(seq, max_frames).frames)));
  }
  return out;
}

namespace {

std::vector<CurvePoint> curve_from_timelines(std::span<const ad::Tensor> probs, std::span<const int> labels,
                                             std::span<const double> fractions, std::size_t kappa) {
  std::vector<CurvePoint> curve;
  for (double f : fractions) {
    std::vector<double> scores;
    for (const ad::Tensor& p : probs) {
      scores.push_back(model::prefix_video_prob(p, observed_clips(f, p.dim(0)), kappa, kAction));
    }
    curve.push_back({f, roc_auc(scores, labels)});
  }
  return curve;
}

}  // namespace

std::vector<CurvePoint> early_observation_curve(const model::Model& model, const data::Dataset& dataset,
                                                std::span<const double> fractions, const EvalOptions& options) {
  EvalOptions checked = options;
  checked.fractions.assign(fractions.begin(), fractions.end());
  checked.validate();
  std::vector<int> labels;
  for (const auto& seq : dataset) labels.push_back(video_label(seq));
  const auto probs = online_timelines(model, dataset, options.max_frames);
  return curve_from_timelines(probs, labels, fractions, options.kappa);
}

double detection_ap(std::span<const VideoTimeline> timelines, double iou_threshold) {
  std::vector<ScoredInterval> predictions;
  std::vector<GroundTruth> truth;
  std::size_t video = 0;
  for (const VideoTimeline& t : timelines) {
    if (t.label != 1 || t.gt_segments.empty()) continue;
    for (const data::Segment& s : t.gt_segments) {
      if (s.action == static_cast<int>(kAction)) truth.push_back({{s.start_frame, s.end_frame}, video});
    }
    for (const model::DetectionInstance& inst : t.instances) {
      predictions.push_back({{inst.start_frame, inst.end_frame}, inst.score, video});
    }
    ++video;
  }
  return average_precision(predictions, truth, iou_threshold);
}

EvalReport evaluate(const model::Model& model, const data::Dataset& dataset, const EvalOptions& options) {
  options.validate();
  if (dataset.empty()) throw DataError("evaluation set is empty");
  const auto probs = online_timelines(model, dataset, options.max_frames);

  EvalReport r;
  r.videos = dataset.size();
  std::vector<int> labels;
  std::vector<double> video_probs;
  for (std::size_t v = 0; v < dataset.size(); ++v) {
    const data::SkeletonSequence& seq = dataset[v];
    VideoTimeline t;
    t.video_id = seq.video_id;
    t.label = video_label(seq);
    t.tau = model.config().tau;
    t.stride = model.config().stride;
    t.video_prob = model::prefix_video_prob(probs[v], probs[v].dim(0), options.kappa, kAction);
    for (std::size_t i = 0; i < probs[v].dim(0); ++i) t.probs.push_back(probs[v].at(i, kAction));
    if (seq.gt_segments) {
      for (const data::Segment& s : *seq.gt_segments) {
        if (s.start_frame <= options.max_frames) {
          t.gt_segments.push_back({s.start_frame, std::min(s.end_frame, options.max_frames), s.action});
        }
      }
    }
    t.instances = model::extract_instances(t.probs, options.instance_threshold, model.windowing(),
                                           static_cast<int>(kAction));
    r.instance_count += t.instances.size();
    if (t.label == 1 && !t.gt_segments.empty()) ++r.detection_videos;
    labels.push_back(t.label);
    video_probs.push_back(t.video_prob);
    r.timelines.push_back(std::move(t));
  }

  const ClassificationMetrics cls = classification_metrics(video_probs, labels);
  r.accuracy = cls.accuracy;
  r.f1 = cls.f1;
  r.auc = cls.auc;
  double sum = 0.0;
  for (double thr : kIouThresholds) {
    const double ap = detection_ap(r.timelines, thr);
    r.map_at[thr] = ap;
    sum += ap;
  }
  r.mean_map = sum / static_cast<double>(std::size(kIouThresholds));
  r.early_curve = curve_from_timelines(probs, labels, options.fractions, options.kappa);
  return r;
}

std::string report_to_json(const EvalReport& r) {
  json j;
  j["videos"] = r.videos;
  j["detection_videos"] = r.detection_videos;
  j["accuracy"] = r.accuracy;
  j["f1"] = r.f1;
  j["auc"] = optional_number(r.auc);
  json map_at = json::array();
  for (const auto& [thr, ap] : r.map_at) map_at.push_back({{"iou", thr}, {"ap", ap}});
  j["map_at"] = map_at;
  j["mean_map"] = r.mean_map;
  j["instance_count"] = r.instance_count;
  json curve = json::array();
  for (const CurvePoint& p : r.early_curve) curve.push_back({{"fraction", p.fraction}, {"auc", optional_number(p.auc)}});
  j["early_curve"] = curve;
  json timelines = json::array();
  for (const VideoTimeline& t : r.timelines) {
    json gt = json::array();
    for (const data::Segment& s : t.gt_segments) gt.push_back({s.start_frame, s.end_frame, s.action});
    json inst = json::array();
    for (const model::DetectionInstance& d : t.instances) {
      inst.push_back({{"start_frame", d.start_frame},
                      {"end_frame", d.end_frame},
                      {"score", d.score},
                      {"action", d.action},
                      {"first_clip", d.first_clip},
                      {"last_clip", d.last_clip}});
    }
    timelines.push_back({{"video_id", t.video_id},
                         {"label", t.label},
                         {"video_prob", t.video_prob},
                         {"tau", t.tau},
                         {"stride", t.stride},
                         {"probs", t.probs},
                         {"gt_segments", gt},
                         {"instances", inst}});
  }
  j["timelines"] = timelines;
  return j.dump(2);
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvalReport r;
    r.videos = j.at("videos").get<std::size_t>();
    r.detection_videos = j.at("detection_videos").get<std::size_t>();
    r.accuracy = j.at("accuracy").get<double>();
    r.f1 = j.at("f1").get<double>();
    r.auc = read_optional(j.at("auc"));
    for (const json& e : j.at("map_at")) r.map_at[e.at("iou").get<double>()] = e.at("ap").get<double>();
    r.mean_map = j.at("mean_map").get<double>();
    r.instance_count = j.at("instance_count").get<std::size_t>();
    for (const json& e : j.at("early_curve")) {
      r.early_curve.push_back({e.at("fraction").get<double>(), read_optional(e.at("auc"))});
    }
    for (const json& e : j.value("timelines", json::array())) {
      VideoTimeline t;
      t.video_id = e.at("video_id").get<std::string>();
      t.label = e.at("label").get<int>();
      t.video_prob = e.at("video_prob").get<double>();
      t.tau = e.at("tau").get<std::size_t>();
      t.stride = e.at("stride").get<std::size_t>();
      t.probs = e.at("probs").get<std::vector<double>>();
      for (const json& s : e.at("gt_segments")) {
        t.gt_segments.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(), s.at(2).get<int>()});
      }
      for (const json& d : e.at("instances")) {
        model::DetectionInstance inst;
        inst.start_frame = d.at("start_frame").get<std::size_t>();
        inst.end_frame = d.at("end_frame").get<std::size_t>();
        inst.score = d.at("score").get<double>();
        inst.action = d.at("action").get<int>();
        inst.first_clip = d.at("first_clip").get<std::size_t>();
        inst.last_clip = d.at("last_clip").get<std::size_t>();
        t.instances.push_back(inst);
      }
      r.timelines.push_back(std::move(t));
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed evaluation report: ") + e.what());
  }
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  std::ostringstream text;
  text << std::setprecision(17) << "fraction,auc\n";
  for (const CurvePoint& p : curve) {
    text << p.fraction << ',';
    if (p.auc) text << *p.auc;
    text << '\n';
  }
  out << text.str();
}

void write_timeline_csv(std::ostream& out, std::span<const VideoTimeline> timelines) {
  std::ostringstream text;
  text << std::setprecision(17) << "video_id,clip,start_frame,end_frame,prob,in_gt,in_instance\n";
  for (const VideoTimeline& t : timelines) {
    for (std::size_t i = 0; i < t.probs.size(); ++i) {
      const std::size_t start = i * t.stride + 1, end = i * t.stride + t.tau;
      const std::size_t mid = (start + end) / 2;
      bool in_gt = false, in_inst = false;
      for (const data::Segment& s : t.gt_segments) in_gt = in_gt || (mid >= s.start_frame && mid <= s.end_frame);
      for (const model::DetectionInstance& d : t.instances) in_inst = in_inst || (i >= d.first_clip && i <= d.last_clip);
      text << t.video_id << ',' << i << ',' << start << ',' << end << ',' << t.probs[i] << ',' << in_gt << ','
           << in_inst << '\n';
    }
  }
  out << text.str();
}

}  // namespace wogma::eval
