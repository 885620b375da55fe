#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>
#include <abx/metrics.hpp>
#include <abx/scorer.hpp>

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace abx {

struct EvalReport {
  std::string scorer;
  std::uint64_t seed = 0;
  std::vector<ScoredEvent> scored;
  std::vector<AbstractionGrid> grids;  // probabilities, one per event
  ConsistencyReport consistency;
  std::optional<double> auc;
  std::size_t n_plausible = 0;
  std::size_t n_implausible = 0;
};

// Scores every labeled event, builds its probability grid over all
// abstractions, and pools the consistency metrics over those grids.
inline EvalReport evaluate(const Scorer& scorer, std::span<const LabeledEvent> items,
                           const AbstractionContext& ctx, std::uint64_t seed = 0, unsigned threads = 1) {
  EvalReport r;
  r.scorer = scorer.info().name;
  r.seed = seed;
  std::vector<Event> events;
  for (const auto& it : items) events.push_back(it.event);
  const auto z = scorer.logits(events);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!std::isfinite(z[i])) throw ScoringError("non-finite logit for " + to_string(items[i].event));
    r.scored.push_back({items[i], z[i]});
    (items[i].label == Label::kPlausible ? r.n_plausible : r.n_implausible)++;
  }
  for (const auto& it : items) {
    auto cells = abstraction_events(ctx, it.event);
    r.grids.push_back(to_probabilities(score_grid(scorer, cells, ctx.hierarchy(), threads)));
  }
  r.consistency = consistency(r.grids);
  r.auc = auc(r.scored);
  return r;
}

inline std::string format_metric(double v) { return format("%.6f", v); }

inline void write_report_text(std::ostream& os, const EvalReport& r) {
  os << "# scorer=" << r.scorer << " seed=" << r.seed << '\n';
  os << "metric        value\n";
  os << "auc           " << (r.auc ? format_metric(*r.auc) : std::string("undefined")) << '\n';
  os << "ccd           " << format_metric(r.consistency.ccd) << '\n';
  os << "ler           " << format_metric(r.consistency.ler) << '\n';
  os << "window_count  " << r.consistency.window_count << '\n';
  os << "n_plausible   " << r.n_plausible << '\n';
  os << "n_implausible " << r.n_implausible << '\n';
  os << '\n';
  os << "event\tlabel\tlogit\tgrid\twindows\tccd\tler\n";
  for (std::size_t i = 0; i < r.scored.size(); ++i) {
    const auto& s = r.scored[i];
    const auto& g = r.grids[i];
    const auto& c = r.consistency.per_grid[i];
    os << to_string(s.item.event) << '\t' << (s.item.label == Label::kPlausible ? 1 : 0) << '\t'
       << format_metric(s.logit) << '\t' << g.rows << 'x' << g.cols << '\t' << c.window_count << '\t'
       << format_metric(c.ccd()) << '\t' << format_metric(c.ler()) << '\n';
  }
}

// key<TAB>value lines.
inline void write_report_kv(std::ostream& os, const EvalReport& r) {
  os << "scorer\t" << r.scorer << '\n';
  os << "seed\t" << r.seed << '\n';
  os << "auc\t" << (r.auc ? format_double(*r.auc) : std::string("nan")) << '\n';
  os << "ccd\t" << format_double(r.consistency.ccd) << '\n';
  os << "ler\t" << format_double(r.consistency.ler) << '\n';
  os << "window_count\t" << r.consistency.window_count << '\n';
  os << "n_plausible\t" << r.n_plausible << '\n';
  os << "n_implausible\t" << r.n_implausible << '\n';
}

}  // namespace abx
