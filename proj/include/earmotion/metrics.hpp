#pragma once

#include <span>
#include <string>

#include "earmotion/dataset.hpp"

namespace earmotion {

/// Confusion counts with `movement` as the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

Confusion confusion(std::span<const ClipLabel> predictions, std::span<const ClipLabel> truth);

struct Metrics {
  double accuracy = 0;
  double f1 = 0;  ///< 0 when there are no positives and no positive predictions
  bool f1_degenerate = false;
};

Metrics metrics(const Confusion& counts);

/// Rounded to 5 decimals with trailing zeros dropped: 0.8125, 0.86957, 0.75.
std::string format_metric(double value);

}  // namespace earmotion
