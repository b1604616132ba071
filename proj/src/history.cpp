#include "vaelab/history.hpp"

#include "vaelab/error.hpp"

namespace vaelab::inline VAELAB_NS {

namespace {

void accumulate(LossBreakdown& acc, const LossBreakdown& x) {
  acc.total += x.total;
  acc.recon += x.recon;
  acc.kl += x.kl;
  acc.beta = x.beta;
}

void scale(LossBreakdown& acc, double n) {
  acc.total /= n;
  acc.recon /= n;
  acc.kl /= n;
}

}  // namespace

RunSummary RunHistory::summary() const {
  if (records_per_epoch == 0 || records.size() < records_per_epoch) {
    throw ContractError("history holds " + std::to_string(records.size()) + " records, summary needs " +
                        std::to_string(records_per_epoch));
  }
  RunSummary s;
  for (std::size_t i = records.size() - records_per_epoch; i < records.size(); ++i) {
    accumulate(s.train, records[i].train);
    accumulate(s.test, records[i].test);
    accumulate(s.gen, records[i].gen);
  }
  const double n = static_cast<double>(records_per_epoch);
  scale(s.train, n);
  scale(s.test, n);
  scale(s.gen, n);
  return s;
}

}  // namespace vaelab::inline VAELAB_NS
