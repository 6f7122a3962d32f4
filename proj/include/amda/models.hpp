#pragma once

// Sequence-to-point regressors (linear, MLP, dilated convolution) with a
// shared Adam training loop and early stopping.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "amda/pipeline.hpp"

namespace amda::models {

enum class Arch { Linear, MLP, DilatedConv };

std::string to_string(Arch arch);
Arch parse_arch(const std::string& text);

struct ConvSpec {
  std::size_t channels = 16;
  std::size_t kernel = 3;  // odd
  std::vector<std::size_t> dilations{1, 2, 4, 8, 16, 32};
  double dropout = 0.33;

  bool operator==(const ConvSpec&) const = default;
};

/// The DilatedConv head reads the global time average of the last conv layer
/// and its value at the window center, so every input sample reaches the
/// output even though the receptive field (127 by default) is shorter than w.
struct ModelSpec {
  Arch arch = Arch::MLP;
  std::vector<std::size_t> hidden_sizes{64, 64};
  ConvSpec conv;
  std::size_t input_len = 288;
  std::size_t center_index = 144;

  void validate() const;
  std::size_t parameter_count() const;
  /// Multiply-accumulate operations of one forward pass on one window.
  std::size_t macs_per_window() const;
  bool operator==(const ModelSpec&) const = default;
};

struct TrainOpts {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 64;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Epoch 0 is the initial model before any update.
struct EpochLog {
  int epoch = 0;
  double train_loss = 0;  // mean minibatch MSE (epoch 0: full-set MSE)
  double val_loss = 0;
};

struct TrainedModel {
  ModelSpec spec;
  std::vector<float> parameters;
  std::vector<EpochLog> log;
  int best_epoch = 0;
  std::map<std::string, std::string> metadata;  // free-form, stored in checkpoints

  double best_val_loss() const;
};

/// Seeded uniform fan-in initialization.
std::vector<float> init_parameters(const ModelSpec& spec, std::uint64_t seed);

/// Throws DataError on empty sets or shape mismatch and NumericError on a
/// non-finite loss.
TrainedModel train(const ModelSpec& spec, const pipeline::WindowedDataset& train_set,
                   const pipeline::WindowedDataset& val_set, const TrainOpts& opts);

/// Inference with dropout disabled; `inputs` is count x input_len row-major.
std::vector<float> predict(const ModelSpec& spec, std::span<const float> parameters, std::span<const float> inputs);
std::vector<float> predict(const TrainedModel& model, const pipeline::WindowedDataset& windows);

/// Mean squared error of the model on `windows` (normalized units).
double evaluate_mse(const TrainedModel& model, const pipeline::WindowedDataset& windows);

/// MSE loss and its gradient w.r.t. every parameter in double precision,
/// dropout disabled.
double loss_and_gradient(const ModelSpec& spec, std::span<const double> parameters, std::span<const double> inputs,
                         std::span<const double> targets, std::vector<double>& gradient);

struct GradientCheckResult {
  double max_relative_error = 0;
  std::size_t worst_parameter = 0;
  std::vector<double> analytic;
  std::vector<double> numeric;
};

inline constexpr double kFiniteDifferenceStep = 1e-5;

/// Central differences on every parameter. Relative error per parameter is
/// |a - n| / max(|a|, |n|, 1e-6).
GradientCheckResult gradient_check(const ModelSpec& spec, std::span<const double> parameters,
                                   std::span<const double> inputs, std::span<const double> targets);

/// Binary checkpoint; see README for the layout. Throws DataError on a
/// malformed stream.
void write_checkpoint(std::ostream& out, const TrainedModel& model);
TrainedModel read_checkpoint(std::istream& in);

}  // namespace amda::models
