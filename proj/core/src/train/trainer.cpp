// SPDX-License-Identifier: Apache-2.0
#include "wogma/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "wogma/ad/ops.hpp"
#include "wogma/ad/random.hpp"
#include "wogma/data/preprocess.hpp"
#include "wogma/error.hpp"

namespace wogma::train {

using ad::Tensor;
using ad::Var;

LossTerms joint_loss(ad::Tape& tape, const model::Model& model, const Tensor& clips, std::span<const double> labels,
                     const TrainConfig& config, const model::PseudoLabels* frozen_labels) {
  if (labels.size() != model.config().classes) {
    throw DataError("expected " + std::to_string(model.config().classes) + " video labels, got " +
                    std::to_string(labels.size()));
  }
  LossTerms t;
  t.outputs = model.forward(tape, clips, config.kappa);
  t.mil_p = model::mil_loss(t.outputs.video.prob, labels);
  t.mil_o = model::mil_loss_online(t.outputs.online, labels, config.kappa);
  if (config.ablate_pseudo) {
    t.fml = tape.constant(Tensor::scalar(0.0));
    t.total = ad::add(t.mil_p, t.mil_o);
    return t;
  }
  t.pseudo_labels = frozen_labels ? *frozen_labels
                                  : model::generate_pseudo_labels(t.outputs.clip_probs.value(),
                                                                  t.outputs.video.prob.value(), config.theta_class,
                                                                  config.theta_score, labels);
  t.fml = model::frame_loss(t.outputs.online, t.pseudo_labels);
  t.total = ad::add(ad::add(t.mil_p, t.fml), t.mil_o);
  return t;
}

void adam_step(ad::ParameterStore& params, const AdamSettings& s) {
  for (ad::Parameter& p : params) {
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(s.beta1, t);
    const double c2 = 1.0 - std::pow(s.beta2, t);
    double* w = p.value.data();
    double* m = p.adam_m.data();
    double* v = p.adam_v.data();
    const double* g = p.grad.data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double grad = g[i] + s.weight_decay * w[i];
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * grad;
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * grad * grad;
      w[i] -= s.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.epsilon);
    }
  }
}

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> rows) {
  std::ostringstream text;
  text << std::setprecision(17);
  text << "epoch,l_mil_p,l_fml,l_mil_o,train_acc\n";
  for (const EpochMetrics& r : rows) {
    text << r.epoch << ',' << r.l_mil_p << ',' << r.l_fml << ',' << r.l_mil_o << ',' << r.train_acc << '\n';
  }
  out << text.str();
}

Trainer::Trainer(const TrainConfig& config, const graph::SkeletonGraph& skeleton) : config_(config) {
  config_.validate();
  if (skeleton.joints != config_.model.joints) {
    throw ConfigError("skeleton has " + std::to_string(skeleton.joints) + " joints, config expects " +
                      std::to_string(config_.model.joints));
  }
  model_ = std::make_unique<model::Model>(config_.model, skeleton, config_.seed);
}

void Trainer::set_data(const data::Dataset& dataset) {
  if (dataset.empty()) throw DataError("training set is empty");
  clips_.clear();
  labels_.clear();
  ids_.clear();
  for (const data::SkeletonSequence& seq : dataset) {
    if (seq.labels.size() != config_.model.classes) {
      throw DataError("video " + seq.video_id + " has " + std::to_string(seq.labels.size()) +
                      " labels, expected " + std::to_string(config_.model.classes));
    }
    clips_.push_back(model_->clips(data::preprocess(seq, config_.max_frames).frames));
    labels_.push_back(seq.labels);
    ids_.push_back(seq.video_id);
  }
}

Trainer::VideoResult Trainer::process(std::size_t video, ad::GradBuffers* sink) const {
  ad::Tape tape;
  const LossTerms t = joint_loss(tape, *model_, clips_[video], labels_[video], config_);
  VideoResult r;
  r.mil_p = t.mil_p.value()[0];
  r.fml = t.fml.value()[0];
  r.mil_o = t.mil_o.value()[0];
  const double total = t.total.value()[0];
  if (!std::isfinite(total) || !std::isfinite(r.mil_p) || !std::isfinite(r.fml) || !std::isfinite(r.mil_o)) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "non-finite loss at epoch " << epoch_ + 1 << " on video " << ids_[video]
        << ": l_mil_p=" << r.mil_p << " l_fml=" << r.fml << " l_mil_o=" << r.mil_o;
    throw NumericError(msg.str());
  }
  const Tensor& online = t.outputs.online.value();
  r.correct = true;
  for (std::size_t c = 0; c < labels_[video].size(); ++c) {
    const double p = model::prefix_video_prob(online, online.dim(0), config_.kappa, c + 1);
    r.correct = r.correct && ((p > 0.5) == (labels_[video][c] > 0.5));
  }
  tape.backward(t.total, sink);
  return r;
}

void Trainer::step_batch(std::span<const std::size_t> batch, std::vector<VideoResult>& results) {
  model_->params().zero_grad();
  const std::size_t workers = std::min(config_.threads, batch.size());
  if (workers <= 1) {
    for (std::size_t v : batch) results.push_back(process(v, nullptr));
  } else {
    // Each video accumulates into its own buffers; the sum below runs in batch
    // order, so the result does not depend on thread scheduling.
    std::vector<ad::GradBuffers> buffers(batch.size());
    std::vector<VideoResult> local(batch.size());
    std::vector<std::exception_ptr> errors(batch.size());
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          for (std::size_t i = w; i < batch.size(); i += workers) {
            try {
              local[i] = process(batch[i], &buffers[i]);
            } catch (...) {
              errors[i] = std::current_exception();
            }
          }
        });
      }
    }
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (ad::Parameter& p : model_->params()) {
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto it = buffers[i].find(&p);
        if (it == buffers[i].end()) continue;
        for (std::size_t k = 0; k < p.grad.size(); ++k) p.grad[k] += it->second[k];
      }
    }
    results.insert(results.end(), local.begin(), local.end());
  }
  if (batch.size() > 1) {
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (ad::Parameter& p : model_->params()) {
      for (double& g : p.grad.values()) g *= inv;
    }
  }
  adam_step(model_->params(), AdamSettings{config_.lr, config_.weight_decay});
}

EpochMetrics Trainer::run_epoch() {
  if (clips_.empty()) throw DataError("no training data set");
  // The order depends only on the seed and the epoch index, so resuming from a
  // checkpoint reproduces the uninterrupted run.
  ad::Rng rng(config_.seed ^ (0x9E3779B97F4A7C15ULL * (epoch_ + 1)));
  std::vector<std::size_t> order(clips_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.integer(0, static_cast<std::int64_t>(i - 1)))]);
  }

  std::vector<VideoResult> results;
  results.reserve(order.size());
  for (std::size_t begin = 0; begin < order.size(); begin += config_.batch_size) {
    const std::size_t count = std::min(config_.batch_size, order.size() - begin);
    step_batch(std::span<const std::size_t>(order).subspan(begin, count), results);
  }
  ++epoch_;

  EpochMetrics m;
  m.epoch = epoch_;
  std::size_t correct = 0;
  for (const VideoResult& r : results) {
    m.l_mil_p += r.mil_p;
    m.l_fml += r.fml;
    m.l_mil_o += r.mil_o;
    correct += r.correct;
  }
  const auto n = static_cast<double>(results.size());
  m.l_mil_p /= n;
  m.l_fml /= n;
  m.l_mil_o /= n;
  m.train_acc = static_cast<double>(correct) / n;
  return m;
}

std::vector<EpochMetrics> Trainer::fit(const std::function<void(const EpochMetrics&)>& on_epoch) {
  std::vector<EpochMetrics> rows;
  while (epoch_ < config_.epochs) {
    rows.push_back(run_epoch());
    if (on_epoch) on_epoch(rows.back());
  }
  return rows;
}

std::vector<EpochMetrics> train(Trainer& trainer, const data::Dataset& dataset,
                                const std::function<void(const EpochMetrics&)>& on_epoch) {
  trainer.set_data(dataset);
  return trainer.fit(on_epoch);
}

}  // namespace wogma::train
