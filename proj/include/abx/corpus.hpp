#pragma once

#include <abx/common.hpp>
#include <abx/scorer.hpp>

#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_set>
#include <vector>

namespace abx {

// ---------------------------------------------------------------------------
// CoNLL-U extraction

struct ExtractionStats {
  std::size_t sentences = 0;
  std::size_t extracted = 0;
  std::size_t skipped = 0;    // well-formed but not a qualifying clause
  std::size_t malformed = 0;  // sentences dropped for bad records
  std::vector<std::size_t> malformed_lines;
};

namespace detail {

struct ConlluToken {
  std::string lemma;
  std::string upos;
  int head = -1;
  std::string deprel;
};

// Universal relation with any subtype stripped (`nsubj:pass` -> `nsubj`).
inline std::string_view base_relation(std::string_view rel) {
  return rel.substr(0, rel.find(':'));
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty() || s.size() > 9) return false;
  int v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

// Single transitive clause rooted at a verb with noun subject and object and
// no indirect object anywhere in the sentence.
inline std::optional<Event> clause_triple(const std::vector<ConlluToken>& toks) {
  int root = -1;
  for (std::size_t i = 0; i < toks.size(); ++i)
    if (toks[i].head == 0) {
      root = static_cast<int>(i) + 1;
      break;
    }
  if (root < 0 || toks[root - 1].upos != "VERB") return std::nullopt;

  int subj = -1;
  int obj = -1;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const auto rel = base_relation(toks[i].deprel);
    if (rel == "iobj") return std::nullopt;
    if (toks[i].head != root) continue;
    if (rel == "nsubj" && subj < 0) subj = static_cast<int>(i) + 1;
    if (rel == "obj" && obj < 0) obj = static_cast<int>(i) + 1;
  }
  if (subj < 0 || obj < 0) return std::nullopt;
  const auto& s = toks[subj - 1];
  const auto& o = toks[obj - 1];
  if (s.upos != "NOUN" || o.upos != "NOUN") return std::nullopt;
  const auto& v = toks[root - 1];
  if (s.lemma.empty() || s.lemma == "_" || o.lemma.empty() || o.lemma == "_" || v.lemma.empty() ||
      v.lemma == "_")
    return std::nullopt;
  return Event{to_lower(s.lemma), to_lower(v.lemma), to_lower(o.lemma)};
}

}  // namespace detail

// Streams one Event per qualifying sentence to `sink`. A malformed record
// drops its sentence and is tallied in the returned stats.
inline ExtractionStats extract_triples(std::istream& in, const std::function<void(Event)>& sink) {
  ExtractionStats stats;
  std::vector<detail::ConlluToken> toks;
  bool bad = false;
  bool any = false;
  std::size_t lineno = 0;

  auto flush = [&] {
    if (!any) return;
    ++stats.sentences;
    if (bad) {
      ++stats.malformed;
    } else if (auto e = detail::clause_triple(toks)) {
      ++stats.extracted;
      sink(std::move(*e));
    } else {
      ++stats.skipped;
    }
    toks.clear();
    bad = false;
    any = false;
  };

  std::string line;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty()) {
      flush();
      continue;
    }
    if (sv.front() == '#') continue;
    any = true;
    if (bad) continue;
    auto f = split(sv, '\t');
    auto mark_bad = [&] {
      bad = true;
      stats.malformed_lines.push_back(lineno);
    };
    if (f.size() != 10) {
      mark_bad();
      continue;
    }
    // Multiword token ranges and empty nodes carry no syntax.
    if (f[0].find_first_of("-.") != std::string_view::npos) continue;
    int id = 0;
    int head = 0;
    if (!detail::parse_int(f[0], id) || id != static_cast<int>(toks.size()) + 1 ||
        !detail::parse_int(f[6], head)) {
      mark_bad();
      continue;
    }
    toks.push_back({std::string(f[2]), std::string(f[3]), head, std::string(f[7])});
  }
  flush();
  return stats;
}

inline std::vector<Event> extract_triples(std::istream& in, ExtractionStats* stats = nullptr) {
  std::vector<Event> out;
  auto s = extract_triples(in, [&](Event e) { out.push_back(std::move(e)); });
  if (stats) *stats = s;
  return out;
}

// ---------------------------------------------------------------------------
// Triple corpus

class TripleCorpus {
 public:
  using Count = std::uint64_t;

  TripleCorpus() = default;

  // Builds all derived tables from event counts; zero counts are dropped.
  explicit TripleCorpus(std::map<Event, Count> counts) : counts_(std::move(counts)) {
    std::erase_if(counts_, [](const auto& kv) { return kv.second == 0; });
    for (const auto& [e, n] : counts_) {
      subjects_[e.subject] += n;
      verbs_[e.verb] += n;
      objects_[e.object] += n;
      subject_verb_[{e.subject, e.verb}] += n;
      verb_object_[{e.verb, e.object}] += n;
      total_ += n;
    }
  }

  const std::map<Event, Count>& counts() const { return counts_; }
  bool empty() const { return counts_.empty(); }
  Count total() const { return total_; }

  Count count(const Event& e) const { return lookup(counts_, e); }
  Count subject_count(const std::string& w) const { return lookup(subjects_, w); }
  Count verb_count(const std::string& w) const { return lookup(verbs_, w); }
  Count object_count(const std::string& w) const { return lookup(objects_, w); }
  Count subject_verb_count(const std::string& s, const std::string& v) const {
    return lookup(subject_verb_, std::pair{s, v});
  }
  Count verb_object_count(const std::string& v, const std::string& o) const {
    return lookup(verb_object_, std::pair{v, o});
  }

  const std::map<std::string, Count>& subjects() const { return subjects_; }
  const std::map<std::string, Count>& verbs() const { return verbs_; }
  const std::map<std::string, Count>& objects() const { return objects_; }

  // Every word seen in any position.
  std::unordered_set<std::string> vocabulary() const {
    std::unordered_set<std::string> v;
    for (const auto& [e, n] : counts_) {
      v.insert(e.subject);
      v.insert(e.verb);
      v.insert(e.object);
    }
    return v;
  }

  friend bool operator==(const TripleCorpus& a, const TripleCorpus& b) {
    return a.counts_ == b.counts_;
  }

 private:
  template <typename M, typename K>
  static Count lookup(const M& m, const K& k) {
    auto it = m.find(k);
    return it == m.end() ? 0 : it->second;
  }

  std::map<Event, Count> counts_;
  std::map<std::string, Count> subjects_, verbs_, objects_;
  std::map<std::pair<std::string, std::string>, Count> subject_verb_, verb_object_;
  Count total_ = 0;
};

struct FilterConfig {
  std::uint64_t min_triple_count = 2;
  std::uint64_t min_word_count = 1000;
  std::uint64_t per_triple_cap = 1000;
};

// Caps each event count, then alternates the positional word filter and the
// triple-count filter until neither removes anything, so the result is a
// fixed point of the filter.
inline TripleCorpus apply_filters(const std::map<Event, TripleCorpus::Count>& raw,
                                  const FilterConfig& cfg) {
  std::map<Event, TripleCorpus::Count> cur;
  for (const auto& [e, n] : raw) {
    const auto capped = cfg.per_triple_cap > 0 ? std::min(n, cfg.per_triple_cap) : n;
    if (capped > 0) cur.emplace(e, capped);
  }
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, TripleCorpus::Count> s, v, o;
    for (const auto& [e, n] : cur) {
      s[e.subject] += n;
      v[e.verb] += n;
      o[e.object] += n;
    }
    changed |= std::erase_if(cur, [&](const auto& kv) {
                 const auto& e = kv.first;
                 return s[e.subject] < cfg.min_word_count || v[e.verb] < cfg.min_word_count ||
                        o[e.object] < cfg.min_word_count;
               }) > 0;
    changed |= std::erase_if(cur, [&](const auto& kv) { return kv.second < cfg.min_triple_count; }) > 0;
  }
  return TripleCorpus(std::move(cur));
}

inline TripleCorpus apply_filters(const std::vector<Event>& stream, const FilterConfig& cfg) {
  std::map<Event, TripleCorpus::Count> raw;
  for (const auto& e : stream) ++raw[e];
  return apply_filters(raw, cfg);
}

inline TripleCorpus apply_filters(const TripleCorpus& corpus, const FilterConfig& cfg) {
  return apply_filters(corpus.counts(), cfg);
}

// `subject<TAB>verb<TAB>object<TAB>count`, sorted by (subject, verb, object).
inline void write_corpus(std::ostream& os, const TripleCorpus& c) {
  for (const auto& [e, n] : c.counts())
    os << e.subject << '\t' << e.verb << '\t' << e.object << '\t' << n << '\n';
}

inline TripleCorpus parse_corpus(std::istream& in, const std::string& source = "<stream>") {
  std::map<Event, TripleCorpus::Count> counts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = split(sv, '\t');
    auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    if (f.size() != 4) throw InputError(where() + "expected subject<TAB>verb<TAB>object<TAB>count");
    std::string num(f[3]);
    char* end = nullptr;
    const auto n = std::strtoull(num.c_str(), &end, 10);
    if (num.empty() || end != num.c_str() + num.size() || num.front() == '-')
      throw InputError(where() + "bad count '" + num + "'");
    try {
      counts[make_event(f[0], f[1], f[2])] += n;
    } catch (const InputError& e) {
      throw InputError(where() + e.what());
    }
  }
  return TripleCorpus(std::move(counts));
}

inline TripleCorpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus file: " + path);
  return parse_corpus(in, path);
}

// ---------------------------------------------------------------------------
// Pseudo-disambiguation pairs

enum class Perturbation { kSubject, kObject, kBoth };

inline std::string_view perturbation_name(Perturbation p) {
  switch (p) {
    case Perturbation::kSubject: return "S";
    case Perturbation::kObject: return "O";
    case Perturbation::kBoth: return "SO";
  }
  return "?";
}

struct TrainingPair {
  Event positive;
  Event negative;
  Perturbation form;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

// Cumulative positional unigram table; draws are proportional to counts.
class UnigramSampler {
 public:
  UnigramSampler() = default;
  explicit UnigramSampler(const std::map<std::string, TripleCorpus::Count>& counts) {
    for (const auto& [w, n] : counts) {
      total_ += n;
      words_.push_back(w);
      cumulative_.push_back(total_);
    }
  }

  bool empty() const { return total_ == 0; }

  const std::string& draw(Rng& rng) const {
    const auto x = uniform_index(rng, total_);
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), x);
    return words_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

 private:
  std::vector<std::string> words_;
  std::vector<TripleCorpus::Count> cumulative_;
  TripleCorpus::Count total_ = 0;
};

class NegativeSampler {
 public:
  static constexpr int kMaxRetries = 100;

  explicit NegativeSampler(const TripleCorpus& corpus)
      : subjects_(corpus.subjects()), objects_(corpus.objects()) {
    if (corpus.empty()) throw InputError("cannot sample negatives from an empty corpus");
  }

  // Replaces the positions named by `form` with frequency-drawn words that
  // differ from the originals. nullopt after the retry bound.
  std::optional<TrainingPair> perturb(const Event& e, Perturbation form, Rng& rng) const {
    for (int attempt = 0; attempt < kMaxRetries; ++attempt)
      if (auto p = try_perturb(e, form, rng)) return p;
    return std::nullopt;
  }

  // Form drawn uniformly from {S, O, SO}; each retry redraws form and words.
  std::optional<TrainingPair> sample(const Event& e, Rng& rng) const {
    for (int attempt = 0; attempt < kMaxRetries; ++attempt) {
      const auto form = static_cast<Perturbation>(uniform_index(rng, 3));
      if (auto p = try_perturb(e, form, rng)) return p;
    }
    return std::nullopt;
  }

 private:
  std::optional<TrainingPair> try_perturb(const Event& e, Perturbation form, Rng& rng) const {
    Event neg = e;
    if (form != Perturbation::kObject) {
      neg.subject = subjects_.draw(rng);
      if (neg.subject == e.subject) return std::nullopt;
    }
    if (form != Perturbation::kSubject) {
      neg.object = objects_.draw(rng);
      if (neg.object == e.object) return std::nullopt;
    }
    return TrainingPair{e, std::move(neg), form};
  }

  UnigramSampler subjects_;
  UnigramSampler objects_;
};

inline std::optional<TrainingPair> sample_negative(const TripleCorpus& corpus, const Event& e,
                                                   std::uint64_t seed) {
  Rng rng(seed);
  return NegativeSampler(corpus).sample(e, rng);
}

struct TrainingSetStats {
  std::size_t emitted = 0;
  std::size_t skipped = 0;  // unable to perturb
};

// One pair per event occurrence in seeded-shuffled order. The negative for
// occurrence k depends only on (seed, k).
inline TrainingSetStats build_training_set(const TripleCorpus& corpus, std::uint64_t seed,
                                           const std::function<void(TrainingPair)>& sink) {
  TrainingSetStats stats;
  if (corpus.empty()) return stats;
  std::vector<const Event*> occurrences;
  occurrences.reserve(corpus.total());
  for (const auto& [e, n] : corpus.counts())
    for (TripleCorpus::Count k = 0; k < n; ++k) occurrences.push_back(&e);
  Rng order_rng(hash_combine(seed, 0x6f72646572ULL));
  shuffle(occurrences, order_rng);

  NegativeSampler sampler(corpus);
  for (std::size_t k = 0; k < occurrences.size(); ++k) {
    Rng rng(hash_combine(seed, k + 1));
    if (auto p = sampler.sample(*occurrences[k], rng)) {
      ++stats.emitted;
      sink(std::move(*p));
    } else {
      ++stats.skipped;
    }
  }
  return stats;
}

inline std::vector<TrainingPair> build_training_set(const TripleCorpus& corpus, std::uint64_t seed,
                                                    TrainingSetStats* stats = nullptr) {
  std::vector<TrainingPair> out;
  auto s = build_training_set(corpus, seed, [&](TrainingPair p) { out.push_back(std::move(p)); });
  if (stats) *stats = s;
  return out;
}

}  // namespace abx
