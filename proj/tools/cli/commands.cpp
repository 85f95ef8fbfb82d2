// SPDX-License-Identifier: Apache-2.0
#include "commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <vector>

#include "run_config.hpp"
#include "svg.hpp"
#include "wogma/data/preprocess.hpp"
#include "wogma/data/synth.hpp"
#include "wogma/error.hpp"
#include "wogma/eval/report.hpp"
#include "wogma/train/checkpoint.hpp"
#include "wogma/train/trainer.hpp"

namespace wogma::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

RunConfig run_config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_run_config(path); }

json instance_json(const model::DetectionInstance& d) {
  return {{"start_frame", d.start_frame}, {"end_frame", d.end_frame}, {"score", d.score},
          {"action", d.action},           {"first_clip", d.first_clip}, {"last_clip", d.last_clip}};
}

model::DetectionInstance instance_from_json(const json& j) {
  model::DetectionInstance d;
  d.start_frame = j.at("start_frame").get<std::size_t>();
  d.end_frame = j.at("end_frame").get<std::size_t>();
  d.score = j.at("score").get<double>();
  d.action = j.at("action").get<int>();
  d.first_clip = j.at("first_clip").get<std::size_t>();
  d.last_clip = j.at("last_clip").get<std::size_t>();
  return d;
}

// One JSON line per clip: frame range (1-indexed, inclusive) and the class
// probabilities with background first.
std::string clip_line(const std::string& video_id, std::size_t clip, const model::ClipWindowing& w,
                      std::span<const double> probs) {
  const json j = {{"video_id", video_id},
                  {"clip", clip},
                  {"start_frame", clip * w.stride + 1},
                  {"end_frame", clip * w.stride + w.tau},
                  {"probs", std::vector<double>(probs.begin(), probs.end())}};
  return j.dump();
}

std::vector<double> action_column(const ad::Tensor& table, std::size_t action = 1) {
  std::vector<double> col(table.dim(0));
  for (std::size_t i = 0; i < col.size(); ++i) col[i] = table.at(i, action);
  return col;
}

// ------------------------------------------------------------ gen-data

struct GenDataArgs {
  std::string out;
  std::optional<std::uint64_t> seed;
  data::SynthParams params;
};

int run_gen_data(const GenDataArgs& a, const Streams& io) {
  data::SynthParams p = a.params;
  p.seed = resolve_seed(a.seed, RunConfig{}, 0);
  const data::Dataset d = data::synthesize(p);
  std::ofstream out = open_output(a.out);
  data::write_sequences(out, d);
  if (!out) throw DataError("failed writing '" + a.out + "'");
  io.out << "wrote " << d.size() << " videos to " << a.out << " (seed " << p.seed << ")\n";
  return kExitOk;
}

// ------------------------------------------------------------ train

struct TrainArgs {
  std::string config;
  std::string data;
  std::string out_dir;
  std::string resume;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, hidden, threads, batch_size, max_frames, kappa;
  std::optional<double> lr, weight_decay;
  bool ablate_pseudo = false, ablate_local = false, ablate_longrange = false, quiet = false;
};

int run_train(const TrainArgs& a, const Streams& io) {
  RunConfig rc = run_config_or_default(a.config);
  train::TrainConfig& c = rc.train;
  c.seed = resolve_seed(a.seed, rc, c.seed);
  if (a.epochs) c.epochs = *a.epochs;
  if (a.hidden) c.model.hidden = *a.hidden;
  if (a.threads) c.threads = *a.threads;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.max_frames) c.max_frames = *a.max_frames;
  if (a.kappa) c.kappa = *a.kappa;
  if (a.lr) c.lr = *a.lr;
  if (a.weight_decay) c.weight_decay = *a.weight_decay;
  c.ablate_pseudo = c.ablate_pseudo || a.ablate_pseudo;
  c.model.ablate_local = c.model.ablate_local || a.ablate_local;
  c.model.ablate_longrange = c.model.ablate_longrange || a.ablate_longrange;
  if (!a.data.empty()) rc.train_data = a.data;
  if (!a.out_dir.empty()) rc.out_dir = a.out_dir;
  if (rc.train_data.empty()) throw ConfigError("no training data: pass --data or set train_data");
  rc.validate();

  const data::Dataset dataset = data::load_sequences(rc.train_data, c.model.joints, c.model.channels);
  std::unique_ptr<train::Trainer> trainer;
  if (!a.resume.empty()) {
    // The architecture comes from the checkpoint; the schedule from this run.
    train::Checkpoint ck = train::load_checkpoint(a.resume);
    ck.config.epochs = c.epochs;
    ck.config.lr = c.lr;
    ck.config.weight_decay = c.weight_decay;
    ck.config.threads = c.threads;
    trainer = train::trainer_from_checkpoint(ck, graph::default_skeleton());
  } else {
    trainer = std::make_unique<train::Trainer>(c, graph::default_skeleton());
  }

  const auto rows = train::train(*trainer, dataset, [&](const train::EpochMetrics& m) {
    if (a.quiet) return;
    io.out << "epoch " << m.epoch << " L_mil_p " << m.l_mil_p << " L_fml " << m.l_fml << " L_mil_o " << m.l_mil_o
           << " train_acc " << m.train_acc << '\n'
           << std::flush;
  });

  const fs::path dir(rc.out_dir);
  std::ofstream csv = open_output(dir / "metrics.csv");
  train::write_metrics_csv(csv, rows);
  train::save_checkpoint(dir / "checkpoint.bin", train::capture(*trainer));
  rc.train = trainer->config();
  std::ofstream cfg = open_output(dir / "config.json");
  cfg << run_config_to_json(rc) << '\n';
  io.out << "wrote " << (dir / "checkpoint.bin").string() << " and " << (dir / "metrics.csv").string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ eval

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string curve_csv;
  std::string timeline_csv;
  std::vector<double> fractions;
  std::optional<double> threshold;
};

int run_eval(const EvalArgs& a, const Streams& io) {
  RunConfig rc = run_config_or_default(a.config);
  if (!a.data.empty()) rc.test_data = a.data;
  if (!a.fractions.empty()) rc.fractions = a.fractions;
  if (a.threshold) rc.instance_threshold = *a.threshold;
  if (rc.test_data.empty()) throw ConfigError("no evaluation data: pass --data or set test_data");

  const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
  const auto model = train::model_from_checkpoint(ck, graph::default_skeleton());
  const eval::EvalOptions options = rc.eval_options(ck.config);
  options.validate();
  const data::Dataset dataset = data::load_sequences(rc.test_data, ck.config.model.joints, ck.config.model.channels);
  const eval::EvalReport report = eval::evaluate(*model, dataset, options);

  const fs::path out = a.out.empty() ? fs::path(rc.out_dir) / "report.json" : fs::path(a.out);
  std::ofstream file = open_output(out);
  file << eval::report_to_json(report) << '\n';
  if (!a.curve_csv.empty()) {
    std::ofstream csv = open_output(a.curve_csv);
    eval::write_curve_csv(csv, report.early_curve);
  }
  if (!a.timeline_csv.empty()) {
    std::ofstream csv = open_output(a.timeline_csv);
    eval::write_timeline_csv(csv, report.timelines);
  }
  io.out << "videos " << report.videos << " accuracy " << report.accuracy << " f1 " << report.f1 << " auc "
         << (report.auc ? std::to_string(*report.auc) : std::string("undefined")) << " mAP@0.1 "
         << report.map_at.at(0.1) << " instances " << report.instance_count << '\n'
         << "wrote " << out.string() << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ detect

struct DetectArgs {
  std::string checkpoint;
  std::string data;
  bool from_stdin = false;
  std::string out = "-";
  std::string instances = "instances.json";
  std::string video_id = "stream";
  std::optional<double> threshold;
};

// Reads frame blocks line by line, normalizes each frame causally, and emits a
// clip's line as soon as its last frame has arrived.
std::vector<double> detect_stream(const model::Model& model, const DetectArgs& a, std::istream& in,
                                  std::ostream& out) {
  const model::ModelConfig& mc = model.config();
  const model::ClipWindowing w = model.windowing();
  const std::size_t frame_size = mc.joints * mc.channels;
  data::StreamNormalizer normalizer;
  model::OnlineState state = model.oamb().initial_state();
  std::vector<double> buffer;  // normalized frames from buffer_start on
  std::size_t buffer_start = 0, received = 0, next_clip = 0;
  std::vector<double> action_probs;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ad::Tensor block;
    try {
      block = data::frames_from_json_text(line, mc.joints, mc.channels);
    } catch (const DataError& e) {
      throw DataError("stdin line " + std::to_string(line_no) + ": " + e.what());
    }
    for (std::size_t t = 0; t < block.dim(0); ++t) {
      ad::Tensor frame(ad::Shape{1, mc.joints, mc.channels});
      std::copy_n(block.data() + t * frame_size, frame_size, frame.data());
      normalizer.normalize(frame);
      buffer.insert(buffer.end(), frame.data(), frame.data() + frame_size);
      ++received;
      while (next_clip * w.stride + w.tau <= received) {
        const std::size_t first = next_clip * w.stride;
        ad::Tensor clip(ad::Shape{1, w.tau, mc.joints, mc.channels});
        std::copy_n(buffer.data() + (first - buffer_start) * frame_size, w.tau * frame_size, clip.data());
        const ad::Tensor feature = model.clip_features(clip);
        const ad::Tensor probs = model.oamb().online_step(state, feature.values());
        out << clip_line(a.video_id, next_clip, w, probs.values()) << '\n' << std::flush;
        action_probs.push_back(probs[1]);
        ++next_clip;
        const std::size_t keep_from = next_clip * w.stride;
        if (keep_from > buffer_start) {
          const std::size_t drop = std::min(keep_from, received) - buffer_start;
          buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(drop * frame_size));
          buffer_start += drop;
        }
      }
    }
  }
  return action_probs;
}

int run_detect(const DetectArgs& a, const Streams& io) {
  if (a.from_stdin == !a.data.empty()) throw ConfigError("pass exactly one of --data and --stdin");
  const train::Checkpoint ck = train::load_checkpoint(a.checkpoint);
  const auto model = train::model_from_checkpoint(ck, graph::default_skeleton());
  const double threshold = a.threshold.value_or(eval::EvalOptions{}.instance_threshold);
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("--threshold must lie in [0, 1]");

  std::ofstream file;
  if (a.out != "-") file = open_output(a.out);
  std::ostream& out = a.out == "-" ? io.out : file;

  json instances = json::array();
  const auto add_instances = [&](const std::string& id, std::span<const double> probs) {
    json list = json::array();
    for (const auto& d : model::extract_instances(probs, threshold, model->windowing())) list.push_back(instance_json(d));
    instances.push_back({{"video_id", id}, {"instances", list}});
  };

  if (a.from_stdin) {
    add_instances(a.video_id, detect_stream(*model, a, io.in, out));
  } else {
    const data::Dataset dataset = data::load_sequences(a.data, ck.config.model.joints, ck.config.model.channels);
    for (const data::SkeletonSequence& s : dataset) {
      const ad::Tensor clips = model->clips(data::preprocess(s, ck.config.max_frames).frames);
      const ad::Tensor table = model->online_timeline(clips);
      const std::size_t width = table.dim(1);
      for (std::size_t i = 0; i < table.dim(0); ++i) {
        out << clip_line(s.video_id, i, model->windowing(), std::span(table.data() + i * width, width)) << '\n';
      }
      out << std::flush;
      add_instances(s.video_id, action_column(table));
    }
  }
  std::ofstream inst = open_output(a.instances);
  inst << instances.dump(2) << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ plot

struct PlotArgs {
  std::string report;
  std::string scores;
  std::string instances;
  std::string out_dir = ".";
  std::vector<std::string> videos;
};

std::string file_stem_for(const std::string& video_id) {
  std::string s = video_id;
  for (char& ch : s)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_') ch = '_';
  return "timeline_" + s + ".svg";
}

// Timelines rebuilt from detect output: per-clip lines plus the instances file.
std::vector<eval::VideoTimeline> timelines_from_detect(const std::string& scores_path, const std::string& inst_path) {
  std::vector<eval::VideoTimeline> out;
  std::map<std::string, std::size_t> index;
  std::istringstream lines(read_file(scores_path));
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const json j = json::parse(line);
      const std::string id = j.at("video_id").get<std::string>();
      auto [it, fresh] = index.try_emplace(id, out.size());
      if (fresh) {
        out.emplace_back();
        out.back().video_id = id;
      }
      eval::VideoTimeline& t = out[it->second];
      const auto start = j.at("start_frame").get<std::size_t>();
      const auto end = j.at("end_frame").get<std::size_t>();
      const auto probs = j.at("probs").get<std::vector<double>>();
      if (probs.size() < 2 || end < start) throw DataError("bad clip record");
      if (t.probs.empty()) t.tau = end - start + 1;
      if (t.probs.size() == 1) t.stride = start - 1;
      t.probs.push_back(probs[1]);
    }
  } catch (const std::exception& e) {
    throw DataError(scores_path + " line " + std::to_string(line_no) + ": " + e.what());
  }
  for (eval::VideoTimeline& t : out) {
    if (t.probs.size() <= 1) t.stride = t.tau;
    t.video_prob = *std::max_element(t.probs.begin(), t.probs.end());
  }
  if (!inst_path.empty()) {
    try {
      for (const json& v : json::parse(read_file(inst_path))) {
        const auto it = index.find(v.at("video_id").get<std::string>());
        if (it == index.end()) continue;
        for (const json& d : v.at("instances")) out[it->second].instances.push_back(instance_from_json(d));
      }
    } catch (const json::exception& e) {
      throw DataError(inst_path + ": " + e.what());
    }
  }
  return out;
}

int run_plot(const PlotArgs& a, const Streams& io) {
  if (a.report.empty() == a.scores.empty()) throw ConfigError("pass exactly one of --report and --scores");
  std::vector<eval::CurvePoint> curve;
  std::vector<eval::VideoTimeline> timelines;
  if (!a.report.empty()) {
    const eval::EvalReport r = eval::report_from_json(read_file(a.report));
    curve = r.early_curve;
    timelines = r.timelines;
  } else {
    timelines = timelines_from_detect(a.scores, a.instances);
  }
  const fs::path dir(a.out_dir);
  std::size_t written = 0;
  if (!a.report.empty()) {
    const bool any = std::any_of(curve.begin(), curve.end(), [](const eval::CurvePoint& p) { return p.auc.has_value(); });
    if (any) {
      std::ofstream f = open_output(dir / "curve.svg");
      f << curve_svg(curve);
      ++written;
    } else {
      io.err << "warning: no defined AUC on the early-observation curve; curve.svg skipped\n";
    }
  }
  for (const eval::VideoTimeline& t : timelines) {
    if (!a.videos.empty() && std::find(a.videos.begin(), a.videos.end(), t.video_id) == a.videos.end()) continue;
    if (t.probs.empty()) {
      io.err << "warning: video " << t.video_id << " has no clips; timeline skipped\n";
      continue;
    }
    std::ofstream f = open_output(dir / file_stem_for(t.video_id));
    f << timeline_svg(t);
    ++written;
  }
  for (const std::string& v : a.videos) {
    const bool found = std::any_of(timelines.begin(), timelines.end(),
                                   [&](const eval::VideoTimeline& t) { return t.video_id == v; });
    if (!found) io.err << "warning: video " << v << " not found; skipped\n";
  }
  io.out << "wrote " << written << " SVG files to " << dir.string() << '\n';
  return kExitOk;
}

}  // namespace

int dispatch(std::span<const std::string> args, const Streams& io) {
  CLI::App app{"Weakly supervised online action detection on skeleton sequences."};
  app.name("wogma");
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic JSONL dataset");
  g->add_option("--out", gen.out, "Output JSONL path")->required();
  g->add_option("--seed", gen.seed, "Generator seed (default: WOGMA_SEED, else 0)");
  g->add_option("--videos", gen.params.n_videos, "Number of videos")->capture_default_str();
  g->add_option("--frames", gen.params.frames, "Frames per video")->capture_default_str();
  g->add_option("--positive-fraction", gen.params.positive_fraction, "Share of positive videos")
      ->capture_default_str();
  g->add_option("--prefix", gen.params.id_prefix, "Video id prefix")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoint.bin and metrics.csv");
  t->add_option("--config", tr.config, "Run configuration JSON");
  t->add_option("--data", tr.data, "Training JSONL (overrides train_data)");
  t->add_option("--out-dir", tr.out_dir, "Output directory (overrides out_dir)");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_option("--seed", tr.seed, "Seed (default: config, then WOGMA_SEED)");
  t->add_option("--epochs", tr.epochs, "Total epochs");
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--weight-decay", tr.weight_decay, "L2 weight decay");
  t->add_option("--hidden", tr.hidden, "Recurrent hidden size");
  t->add_option("--kappa", tr.kappa, "Top-K divisor");
  t->add_option("--max-frames", tr.max_frames, "Frames after truncation or padding");
  t->add_option("--batch-size", tr.batch_size, "Videos per optimizer step");
  t->add_option("--threads", tr.threads, "Worker threads within a batch");
  t->add_flag("--ablate-pseudo", tr.ablate_pseudo, "Disable the frame loss on pseudo labels");
  t->add_flag("--ablate-local", tr.ablate_local, "Replace graph convolution by a linear projection");
  t->add_flag("--ablate-longrange", tr.ablate_longrange, "Remove the temporal convolution stack");
  t->add_flag("--quiet", tr.quiet, "No per-epoch lines");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint and write an EvalReport JSON");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--config", ev.config, "Run configuration JSON");
  e->add_option("--data", ev.data, "Evaluation JSONL (overrides test_data)");
  e->add_option("--out", ev.out, "Report path (default: <out_dir>/report.json)");
  e->add_option("--fractions", ev.fractions, "Observed fractions for the early curve");
  e->add_option("--threshold", ev.threshold, "Instance probability threshold");
  e->add_option("--curve-csv", ev.curve_csv, "Also write the early curve as CSV");
  e->add_option("--timeline-csv", ev.timeline_csv, "Also write per-clip timelines as CSV");

  DetectArgs de;
  auto* d = app.add_subcommand("detect", "Per-clip online scores and detection instances");
  d->add_option("--checkpoint", de.checkpoint, "Checkpoint file")->required();
  d->add_option("--data", de.data, "JSONL dataset to score");
  d->add_flag("--stdin", de.from_stdin, "Read frame blocks, one JSON array per line, from standard input");
  d->add_option("--video-id", de.video_id, "Video id used for the stdin stream")->capture_default_str();
  d->add_option("--out", de.out, "Per-clip JSONL output, - for standard output")->capture_default_str();
  d->add_option("--instances", de.instances, "Instances JSON output")->capture_default_str();
  d->add_option("--threshold", de.threshold, "Instance probability threshold");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "SVG charts from eval or detect output");
  p->add_option("--report", pl.report, "EvalReport JSON from eval");
  p->add_option("--scores", pl.scores, "Per-clip JSONL from detect");
  p->add_option("--instances", pl.instances, "Instances JSON from detect");
  p->add_option("--out-dir", pl.out_dir, "Directory for the SVG files")->capture_default_str();
  p->add_option("--video", pl.videos, "Only these video ids");

  std::vector<const char*> argv{"wogma"};
  for (const std::string& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err, io.out, io.err);
    if (code != 0) io.err << app.help();
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*g) return run_gen_data(gen, io);
    if (*t) return run_train(tr, io);
    if (*e) return run_eval(ev, io);
    if (*d) return run_detect(de, io);
    return run_plot(pl, io);
  } catch (const ConfigError& err) {
    io.err << "config error: " << err.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& err) {
    io.err << "numeric error: " << err.what() << '\n';
    return kExitNumeric;
  } catch (const Error& err) {
    io.err << "data error: " << err.what() << '\n';
    return kExitData;
  } catch (const std::exception& err) {
    io.err << "error: " << err.what() << '\n';
    return kExitData;
  }
}

}  // namespace wogma::cli
