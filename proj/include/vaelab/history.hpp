#pragma once

#include <cstddef>
#include <vector>

#include "vaelab/vae.hpp"

namespace vaelab::inline VAELAB_NS {

struct EvalRecord {
  std::size_t step = 0;  ///< number of optimizer steps taken so far
  LossBreakdown train;
  LossBreakdown test;
  LossBreakdown gen;
};

struct RunSummary {
  LossBreakdown train;
  LossBreakdown test;
  LossBreakdown gen;
};

struct RunHistory {
  std::vector<EvalRecord> records;
  /// Records that make up the final epoch.
  std::size_t records_per_epoch = 0;

  /// Averages over the final records_per_epoch records.
  RunSummary summary() const;
};

struct SweepRow {
  double beta = 0;
  bool ok = false;
  RunSummary summary;
  double fid = 0;
};

}  // namespace vaelab::inline VAELAB_NS
