#pragma once

#include <abx/common.hpp>
#include <abx/lexicon.hpp>

#include <compare>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace abx {

// Surface subject-verb-object triple of lower-cased lemmas.
struct Event {
  std::string subject;
  std::string verb;
  std::string object;

  friend auto operator<=>(const Event&, const Event&) = default;
};

inline std::string to_string(const Event& e) {
  return e.subject + "-" + e.verb + "-" + e.object;
}

inline Event make_event(std::string_view s, std::string_view v, std::string_view o) {
  Event e{to_lower(s), to_lower(v), to_lower(o)};
  if (e.subject.empty() || e.verb.empty() || e.object.empty())
    throw InputError("event fields must be non-empty");
  return e;
}

// Sense-resolved event. An argument without a synset keeps its surface word
// and is never abstracted.
struct ConceptEvent {
  std::optional<SynsetId> subject_synset;
  std::string subject_word;
  std::string verb;
  std::optional<SynsetId> object_synset;
  std::string object_word;

  friend bool operator==(const ConceptEvent&, const ConceptEvent&) = default;
};

// Synsets are rendered by their lemma.
inline Event render(const ConceptEvent& ce, const Hierarchy& h) {
  return Event{ce.subject_synset ? h.at(*ce.subject_synset).lemma : ce.subject_word, ce.verb,
               ce.object_synset ? h.at(*ce.object_synset).lemma : ce.object_word};
}

struct ScorerInfo {
  std::string name;
  bool deterministic = true;
  bool concurrent_safe = true;
};

// Any map from events to a real-valued logit; plausibility is the logistic
// of the logit.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ScorerInfo info() const = 0;
  virtual double logit(const Event& e) const = 0;

  virtual std::vector<double> logits(std::span<const Event> batch) const {
    std::vector<double> out;
    out.reserve(batch.size());
    for (const auto& e : batch) out.push_back(logit(e));
    return out;
  }

  // Concept-level entry point used for abstraction grids. Scorers that
  // reason over the hierarchy themselves (ConceptMax) override this.
  virtual std::vector<double> concept_logits(std::span<const ConceptEvent> cells,
                                             const Hierarchy& h) const {
    std::vector<Event> batch;
    batch.reserve(cells.size());
    for (const auto& c : cells) batch.push_back(render(c, h));
    return logits(batch);
  }

  double plausibility(const Event& e) const { return logistic(logit(e)); }
};

class ConstantScorer final : public Scorer {
 public:
  explicit ConstantScorer(double value = 0.0) : value_(value) {}

  ScorerInfo info() const override { return {"constant:" + format_double(value_), true, true}; }
  double logit(const Event&) const override { return value_; }

 private:
  double value_;
};

}  // namespace abx
