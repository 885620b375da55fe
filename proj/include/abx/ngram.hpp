#pragma once

#include <abx/common.hpp>
#include <abx/corpus.hpp>
#include <abx/scorer.hpp>

#include <memory>

namespace abx {

// Bigram estimate of P(s, o | v) from pair counts:
//   Count(s, v) * Count(v, o) / Count(v)^2
class NGramScorer final : public Scorer {
 public:
  static constexpr double kDefaultEpsilon = 1e-9;

  explicit NGramScorer(std::shared_ptr<const TripleCorpus> corpus, double epsilon = kDefaultEpsilon)
      : corpus_(std::move(corpus)), epsilon_(epsilon) {
    if (!corpus_) throw InputError("n-gram scorer needs a corpus");
    if (!(epsilon_ > 0.0 && epsilon_ < 0.5)) throw InputError("n-gram epsilon must be in (0, 0.5)");
  }

  ScorerInfo info() const override { return {"ngram", true, true}; }

  double probability(const Event& e) const {
    const double v = static_cast<double>(corpus_->verb_count(e.verb));
    if (v <= 0.0) return 0.0;
    const double sv = static_cast<double>(corpus_->subject_verb_count(e.subject, e.verb));
    const double vo = static_cast<double>(corpus_->verb_object_count(e.verb, e.object));
    return (sv * vo) / (v * v);
  }

  double logit(const Event& e) const override {
    return abx::logit(std::clamp(probability(e), epsilon_, 1.0 - epsilon_));
  }

  double epsilon() const { return epsilon_; }

 private:
  std::shared_ptr<const TripleCorpus> corpus_;
  double epsilon_;
};

}  // namespace abx
