#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>
#include <abx/scorer.hpp>

#include <algorithm>
#include <memory>
#include <numeric>

namespace abx {

enum class AggregationMode { kInference, kTrain };

// Indices of up to `k` abstraction cells drawn uniformly without replacement
// from every cell except the original (the last one), followed by the
// original's index.
inline std::vector<std::size_t> sample_training_cells(std::size_t cell_count, std::size_t k, Rng& rng) {
  std::vector<std::size_t> pool(cell_count - 1);
  std::iota(pool.begin(), pool.end(), 0);
  const std::size_t take = std::min(k, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);
  pool.push_back(cell_count - 1);
  return pool;
}

inline std::uint64_t event_seed(std::uint64_t seed, const Event& e) {
  return hash_combine(seed, hash_string(e.subject + '\t' + e.verb + '\t' + e.object));
}

// Plausibility as a maximum over every conceptual abstraction of an event.
// Inference takes the hard maximum over all grid cells; training takes the
// LogSumExp over the original event plus a few sampled abstractions.
// Aggregation happens on logits, so the logistic of the result is a valid
// probability and the hard maximum ranks like a maximum of probabilities.
class ConceptMaxScorer final : public Scorer {
 public:
  static constexpr std::size_t kDefaultTrainSamples = 3;

  ConceptMaxScorer(std::shared_ptr<const Scorer> base, AbstractionContext ctx,
                   AggregationMode mode = AggregationMode::kInference,
                   std::size_t train_samples = kDefaultTrainSamples, std::uint64_t seed = 0)
      : base_(std::move(base)), ctx_(std::move(ctx)), mode_(mode), train_samples_(train_samples),
        seed_(seed) {
    if (!base_) throw InputError("ConceptMax needs a base scorer");
  }

  ScorerInfo info() const override {
    auto b = base_->info();
    return {"conceptmax(" + b.name + ")", b.deterministic, b.concurrent_safe};
  }

  const Scorer& base() const { return *base_; }
  const AbstractionContext& context() const { return ctx_; }
  AggregationMode mode() const { return mode_; }

  double logit(const Event& e) const override {
    return mode_ == AggregationMode::kInference ? inference_logit(e) : train_logit(e);
  }

  std::vector<double> logits(std::span<const Event> batch) const override {
    std::vector<AbstractionCells> grids;
    grids.reserve(batch.size());
    for (const auto& e : batch) grids.push_back(abstraction_events(ctx_, e));
    return aggregate(grids, batch);
  }

  // Each cell is itself an event whose abstractions are the upper-left
  // sub-grid ending at that cell.
  std::vector<double> concept_logits(std::span<const ConceptEvent> cells,
                                     const Hierarchy& h) const override {
    std::vector<AbstractionCells> grids;
    std::vector<Event> surface;
    grids.reserve(cells.size());
    for (const auto& c : cells) {
      grids.push_back(abstraction_events(ctx_, c));
      surface.push_back(render(c, h));
    }
    return aggregate(grids, surface);
  }

  double inference_logit(const Event& e) const {
    auto cells = abstraction_events(ctx_, e);
    auto g = base_->concept_logits(cells.cells, ctx_.hierarchy());
    return *std::max_element(g.begin(), g.end());
  }

  double train_logit(const Event& e) const {
    auto cells = abstraction_events(ctx_, e);
    Rng rng(event_seed(seed_, e));
    auto picked = sample_training_cells(cells.cells.size(), train_samples_, rng);
    std::vector<ConceptEvent> chosen;
    for (auto i : picked) chosen.push_back(cells.cells[i]);
    return log_sum_exp(base_->concept_logits(chosen, ctx_.hierarchy()));
  }

 private:
  // Scores all requested grids with a single base batch.
  std::vector<double> aggregate(const std::vector<AbstractionCells>& grids,
                                std::span<const Event> originals) const {
    std::vector<ConceptEvent> flat;
    std::vector<std::size_t> bounds{0};
    for (std::size_t g = 0; g < grids.size(); ++g) {
      if (mode_ == AggregationMode::kInference) {
        flat.insert(flat.end(), grids[g].cells.begin(), grids[g].cells.end());
      } else {
        Rng rng(event_seed(seed_, originals[g]));
        for (auto i : sample_training_cells(grids[g].cells.size(), train_samples_, rng))
          flat.push_back(grids[g].cells[i]);
      }
      bounds.push_back(flat.size());
    }
    auto z = base_->concept_logits(flat, ctx_.hierarchy());
    std::vector<double> out;
    out.reserve(grids.size());
    for (std::size_t g = 0; g < grids.size(); ++g) {
      std::span<const double> part(z.data() + bounds[g], bounds[g + 1] - bounds[g]);
      out.push_back(mode_ == AggregationMode::kInference ? *std::max_element(part.begin(), part.end())
                                                         : log_sum_exp(part));
    }
    return out;
  }

  std::shared_ptr<const Scorer> base_;
  AbstractionContext ctx_;
  AggregationMode mode_;
  std::size_t train_samples_;
  std::uint64_t seed_;
};

}  // namespace abx
