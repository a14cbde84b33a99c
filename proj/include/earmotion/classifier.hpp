#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "earmotion/dataset.hpp"
#include "earmotion/features.hpp"
#include "earmotion/lstm.hpp"

namespace earmotion {

struct LstmConfig {
  int input_dim = 1024;
  int num_layers = 2;
  int hidden_size = 256;
  double dropout = 0.2;
  double learning_rate = 0.001;
  int max_epochs = 500;
  int patience = 20;
  int batch_size = 8;
  std::uint64_t seed = 0;

  nn::NetShape shape() const { return {input_dim, hidden_size, num_layers}; }
  friend bool operator==(const LstmConfig&, const LstmConfig&) = default;
};

void validate(const LstmConfig& config);

enum class Mode { train, eval };

struct LabeledSequence {
  FeatureMatrix features;  // T x D
  ClipLabel label = ClipLabel::background;
  std::string clip_id;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double train_accuracy = 0;
  double val_loss = 0;
  double val_accuracy = 0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedModel {
  LstmConfig config;
  nn::LstmParams<float> params;
  std::vector<EpochRecord> history;
  int best_epoch = 0;  ///< 1-based epoch whose parameters were kept
  double initial_train_loss = 0;
  std::map<std::string, std::string> metadata;
};

/// Tracks validation accuracy and signals a stop once `patience` epochs in a
/// row fail to beat the best value seen so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(int patience) : patience_(patience) {}

  /// Feeds the next epoch's validation accuracy; true means stop now.
  bool update(double val_accuracy) {
    ++epochs_;
    if (epochs_ == 1 || val_accuracy > best_) {
      best_ = val_accuracy;
      best_epoch_ = epochs_;
    }
    return epochs_ - best_epoch_ >= patience_;
  }

  int best_epoch() const noexcept { return best_epoch_; }
  int epochs_seen() const noexcept { return epochs_; }
  double best_value() const noexcept { return best_; }

 private:
  int patience_;
  int epochs_ = 0;
  int best_epoch_ = 0;
  double best_ = 0;
};

/// Probability of movement for a T x D sequence. In train mode dropout
/// masks are drawn from `dropout_seed`.
double lstm_forward(const FeatureMatrix& sequence, const nn::LstmParams<float>& params, const LstmConfig& config,
                    Mode mode, std::uint64_t dropout_seed = 0);

double bce_loss(double p, int y);

/// Mini-batch Adam on BCE with early stopping on validation accuracy;
/// returns the parameters of the best validation epoch.
TrainedModel train(const std::vector<LabeledSequence>& train_set, const std::vector<LabeledSequence>& val_set,
                   const LstmConfig& config);

struct Prediction {
  double probability = 0;
  ClipLabel label = ClipLabel::background;
};

/// Movement iff p > 0.5.
Prediction predict(const TrainedModel& model, const FeatureMatrix& sequence);

struct GridLattice {
  std::vector<int> layers{2, 3};
  std::vector<int> hidden{256, 512};
  std::vector<double> learning_rates{0.0005, 0.001, 0.005, 0.01};

  std::size_t size() const { return layers.size() * hidden.size() * learning_rates.size(); }
  /// Configurations in lattice order (layers, then hidden, then lr).
  std::vector<LstmConfig> expand(const LstmConfig& base) const;
};

struct GridRow {
  LstmConfig config;
  double val_accuracy = 0;
  double val_f1 = 0;
  int best_epoch = 0;
  int epochs_run = 0;
};

struct GridResult {
  TrainedModel best;
  std::size_t best_index = 0;
  std::vector<GridRow> rows;  ///< lattice order
};

/// Trains every lattice point; the winner has the highest validation
/// accuracy, ties going to fewer layers, then smaller hidden size, then lower lr.
GridResult grid_search(const std::vector<LabeledSequence>& train_set, const std::vector<LabeledSequence>& val_set,
                       const LstmConfig& base, const GridLattice& lattice);

// Model file: "EFLM", u16 version, config block, float32 tensors
// (little-endian, serialization order of LstmParams::tensors), then a u32
// length-prefixed JSON block with history and metadata.
inline constexpr std::uint16_t kModelFormatVersion = 1;

std::string encode_model(const TrainedModel& model);
TrainedModel decode_model(std::string_view bytes, const std::string& source = "<memory>");
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace earmotion
