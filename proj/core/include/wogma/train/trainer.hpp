// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "wogma/ad/tape.hpp"
#include "wogma/data/sequence.hpp"
#include "wogma/graph/skeleton_graph.hpp"
#include "wogma/model/model.hpp"
#include "wogma/train/config.hpp"

namespace wogma::train {

/// The three terms of the joint objective for one video. `total` is
/// (mil_p + fml) + mil_o evaluated in that order, so it equals the sum of the
/// logged components exactly. With pseudo labels ablated fml is the constant 0.
struct LossTerms {
  ad::Var total;
  ad::Var mil_p;
  ad::Var fml;
  ad::Var mil_o;
  model::PseudoLabels pseudo_labels;
  model::Outputs outputs;
};

/// Forward pass of both branches and the joint loss. Pseudo labels are
/// regenerated from the current clip scores unless `frozen_labels` is given;
/// either way they enter the loss as constants.
LossTerms joint_loss(ad::Tape& tape, const model::Model& model, const ad::Tensor& clips,
                     std::span<const double> labels, const TrainConfig& config,
                     const model::PseudoLabels* frozen_labels = nullptr);

struct AdamSettings {
  double lr = 5e-5;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// One bias-corrected Adam update of every parameter from Parameter::grad.
/// Weight decay is added to the gradient (L2) before the moment update.
void adam_step(ad::ParameterStore& params, const AdamSettings& settings);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double l_mil_p = 0.0;   // means over the videos of the epoch
  double l_fml = 0.0;
  double l_mil_o = 0.0;
  double train_acc = 0.0;  // online video probability > 0.5 against the label

  bool operator==(const EpochMetrics&) const = default;
};

/// CSV with header epoch,l_mil_p,l_fml,l_mil_o,train_acc; values printed with
/// 17 significant digits.
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> rows);

/// Owns a model and its optimizer state and runs the training loop.
class Trainer {
 public:
  /// Fresh model initialized from config.seed.
  Trainer(const TrainConfig& config, const graph::SkeletonGraph& skeleton);

  const TrainConfig& config() const { return config_; }
  model::Model& model() { return *model_; }
  const model::Model& model() const { return *model_; }
  /// Number of completed epochs.
  std::size_t epoch() const { return epoch_; }
  void set_epoch(std::size_t epoch) { epoch_ = epoch; }

  /// Preprocesses `dataset` to max_frames and keeps the clips for training.
  /// Throws DataError for an empty dataset or a video without labels.
  void set_data(const data::Dataset& dataset);

  /// One pass over the data in a seeded shuffled order. Throws NumericError
  /// when a loss term is not finite.
  EpochMetrics run_epoch();
  /// Runs epochs until config.epochs are complete; `on_epoch` sees each row.
  std::vector<EpochMetrics> fit(const std::function<void(const EpochMetrics&)>& on_epoch = {});

 private:
  struct VideoResult {
    double mil_p = 0.0;
    double fml = 0.0;
    double mil_o = 0.0;
    bool correct = false;
  };

  VideoResult process(std::size_t video, ad::GradBuffers* sink) const;
  void step_batch(std::span<const std::size_t> batch, std::vector<VideoResult>& results);

  TrainConfig config_;
  std::unique_ptr<model::Model> model_;
  std::size_t epoch_ = 0;
  std::vector<ad::Tensor> clips_;
  std::vector<std::vector<double>> labels_;
  std::vector<std::string> ids_;
};

/// Preprocesses every video and trains for config.epochs.
std::vector<EpochMetrics> train(Trainer& trainer, const data::Dataset& dataset,
                                const std::function<void(const EpochMetrics&)>& on_epoch = {});

}  // namespace wogma::train
