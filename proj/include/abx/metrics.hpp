#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>
#include <abx/scorer.hpp>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace abx {

// Divergence from concavity of one window of sequential estimates.
inline double concavity_delta(double prev, double mid, double next) {
  if (2.0 * mid < prev + next) return 0.5 * (prev + next) - mid;
  return 0.0;
}

// Strict local extremum of the middle estimate; plateaus do not count.
inline bool is_local_extremum(double prev, double mid, double next) {
  return mid > std::max(prev, next) || mid < std::min(prev, next);
}

struct GridConsistency {
  double delta_sum = 0.0;
  std::size_t extremum_count = 0;
  std::size_t window_count = 0;

  double ccd() const { return window_count ? delta_sum / static_cast<double>(window_count) : 0.0; }
  double ler() const {
    return window_count ? static_cast<double>(extremum_count) / static_cast<double>(window_count) : 0.0;
  }
};

inline GridConsistency grid_consistency(const AbstractionGrid& g) {
  GridConsistency out;
  for (const auto& w : grid_windows(g)) {
    out.delta_sum += concavity_delta(w[0], w[1], w[2]);
    out.extremum_count += is_local_extremum(w[0], w[1], w[2]) ? 1 : 0;
    ++out.window_count;
  }
  return out;
}

struct ConsistencyReport {
  double ccd = 0.0;
  double ler = 0.0;
  std::size_t window_count = 0;
  std::size_t extremum_count = 0;
  std::vector<GridConsistency> per_grid;
};

// Pools windows over all grids. Values are taken as given; the evaluation
// pipeline passes probabilities.
inline ConsistencyReport consistency(std::span<const AbstractionGrid> grids) {
  ConsistencyReport r;
  double delta_sum = 0.0;
  for (const auto& g : grids) {
    auto gc = grid_consistency(g);
    delta_sum += gc.delta_sum;
    r.extremum_count += gc.extremum_count;
    r.window_count += gc.window_count;
    r.per_grid.push_back(gc);
  }
  if (r.window_count) {
    r.ccd = delta_sum / static_cast<double>(r.window_count);
    r.ler = static_cast<double>(r.extremum_count) / static_cast<double>(r.window_count);
  }
  return r;
}

inline double ccd(std::span<const AbstractionGrid> grids) { return consistency(grids).ccd; }
inline double ler(std::span<const AbstractionGrid> grids) { return consistency(grids).ler; }

enum class Label { kImplausible = 0, kPlausible = 1 };

struct LabeledEvent {
  Event event;
  Label label;
};

struct ScoredEvent {
  LabeledEvent item;
  double logit;
};

// Rank-sum (Mann-Whitney) AUC with ties counted as one half. Returns nullopt
// when either class is empty.
inline std::optional<double> auc(std::span<const ScoredEvent> scored) {
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scored[a].logit < scored[b].logit; });

  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].logit == scored[order[i]].logit) ++j;
    // 1-based ranks i+1..j share their average, doubled to stay integral.
    const double avg2 = static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (scored[order[k]].item.label == Label::kPlausible) {
        pos_rank_sum += avg2;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = scored.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos);
  const double u = pos_rank_sum / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * static_cast<double>(n_neg));
}

// `subject<TAB>verb<TAB>object<TAB>label`, label 1 (plausible) or 0.
inline std::vector<LabeledEvent> parse_labeled_events(std::istream& in,
                                                      const std::string& source = "<stream>") {
  std::vector<LabeledEvent> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = split(sv, '\t');
    auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    if (f.size() != 4) throw InputError(where() + "expected subject<TAB>verb<TAB>object<TAB>label");
    if (f[3] != "0" && f[3] != "1") throw InputError(where() + "label must be 0 or 1");
    try {
      out.push_back({make_event(f[0], f[1], f[2]), f[3] == "1" ? Label::kPlausible : Label::kImplausible});
    } catch (const InputError& e) {
      throw InputError(where() + e.what());
    }
  }
  return out;
}

inline std::vector<LabeledEvent> load_labeled_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open evaluation file: " + path);
  return parse_labeled_events(in, path);
}

}  // namespace abx
