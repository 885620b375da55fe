#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>
#include <abx/conceptmax.hpp>
#include <abx/corpus.hpp>
#include <abx/scorer.hpp>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace abx {

// Word list for one argument position; index 0 is the out-of-vocabulary slot.
class Vocabulary {
 public:
  static constexpr std::size_t kOov = 0;

  Vocabulary() : words_{""} {}

  explicit Vocabulary(const std::set<std::string>& words) : Vocabulary() {
    for (const auto& w : words) add(w);
  }

  std::size_t add(const std::string& w) {
    auto [it, inserted] = index_.emplace(w, words_.size());
    if (inserted) words_.push_back(w);
    return it->second;
  }

  std::size_t operator[](const std::string& w) const {
    auto it = index_.find(w);
    return it == index_.end() ? kOov : it->second;
  }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }
  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t i) const { return words_.at(i); }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 2;
  std::size_t warmup_steps = 1000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t dim = 64;
  std::size_t hidden = 128;

  void validate() const {
    if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
    if (batch_size < 1) throw InputError("batch size must be at least 1");
    if (dim < 1 || hidden < 1) throw InputError("network dimensions must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0))
      throw InputError("Adam decay rates must lie in [0, 1)");
  }
};

// One hidden tanh layer over concatenated subject, verb and object
// embeddings:  logit = w2 . tanh(W1 [e_s; e_v; e_o] + b1) + b2.
// All parameters live in one flat buffer; offsets name the blocks.
class MlpScorer final : public Scorer {
 public:
  struct Layout {
    std::size_t subj = 0, verb = 0, obj = 0, w1 = 0, b1 = 0, w2 = 0, b2 = 0, total = 0;
  };

  // Activations kept from a forward pass for backpropagation.
  struct Trace {
    std::array<std::size_t, 3> rows{};
    std::vector<double> input;
    std::vector<double> act;
    double logit = 0.0;
  };

  MlpScorer(Vocabulary subjects, Vocabulary verbs, Vocabulary objects, std::size_t dim,
            std::size_t hidden)
      : vocab_{std::move(subjects), std::move(verbs), std::move(objects)}, dim_(dim), hidden_(hidden) {
    if (dim_ < 1 || hidden_ < 1) throw InputError("network dimensions must be positive");
    std::size_t off = 0;
    auto take = [&](std::size_t n) {
      const auto at = off;
      off += n;
      return at;
    };
    layout_.subj = take(vocab_[0].size() * dim_);
    layout_.verb = take(vocab_[1].size() * dim_);
    layout_.obj = take(vocab_[2].size() * dim_);
    layout_.w1 = take(hidden_ * 3 * dim_);
    layout_.b1 = take(hidden_);
    layout_.w2 = take(hidden_);
    layout_.b2 = take(1);
    layout_.total = off;
    params_.assign(layout_.total, 0.0);
  }

  ScorerInfo info() const override { return {"mlp", true, true}; }

  // Embeddings uniform in +-1/sqrt(d); dense layers Glorot-uniform; biases 0.
  void initialize(std::uint64_t seed) {
    Rng rng(hash_combine(seed, 0x696e6974ULL));
    const double emb = 1.0 / std::sqrt(static_cast<double>(dim_));
    for (std::size_t i = layout_.subj; i < layout_.w1; ++i) params_[i] = uniform_real(rng, -emb, emb);
    const double a1 = std::sqrt(6.0 / static_cast<double>(3 * dim_ + hidden_));
    for (std::size_t i = layout_.w1; i < layout_.b1; ++i) params_[i] = uniform_real(rng, -a1, a1);
    for (std::size_t i = layout_.b1; i < layout_.w2; ++i) params_[i] = 0.0;
    const double a2 = std::sqrt(6.0 / static_cast<double>(hidden_ + 1));
    for (std::size_t i = layout_.w2; i < layout_.b2; ++i) params_[i] = uniform_real(rng, -a2, a2);
    params_[layout_.b2] = 0.0;
  }

  double logit(const Event& e) const override { return forward(e).logit; }

  Trace forward(const Event& e) const {
    Trace t;
    t.rows = {vocab_[0][e.subject], vocab_[1][e.verb], vocab_[2][e.object]};
    t.input.resize(3 * dim_);
    const std::array<std::size_t, 3> base{layout_.subj, layout_.verb, layout_.obj};
    for (std::size_t p = 0; p < 3; ++p)
      std::memcpy(&t.input[p * dim_], &params_[base[p] + t.rows[p] * dim_], dim_ * sizeof(double));
    t.act.resize(hidden_);
    double z = params_[layout_.b2];
    const std::size_t in = 3 * dim_;
    for (std::size_t j = 0; j < hidden_; ++j) {
      const double* w = &params_[layout_.w1 + j * in];
      // Four partial sums break the add dependency chain.
      double acc[4] = {0.0, 0.0, 0.0, 0.0};
      std::size_t k = 0;
      for (; k + 4 <= in; k += 4)
        for (std::size_t u = 0; u < 4; ++u) acc[u] += w[k + u] * t.input[k + u];
      for (; k < in; ++k) acc[0] += w[k] * t.input[k];
      const double pre = params_[layout_.b1 + j] + ((acc[0] + acc[1]) + (acc[2] + acc[3]));
      t.act[j] = std::tanh(pre);
      z += params_[layout_.w2 + j] * t.act[j];
    }
    t.logit = z;
    return t;
  }

  // Accumulates d(loss)/d(params) into `grad` given d(loss)/d(logit).
  void backward(const Trace& t, double dlogit, std::span<double> grad) const {
    const std::size_t in = 3 * dim_;
    grad[layout_.b2] += dlogit;
    std::vector<double> dinput(in, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
      grad[layout_.w2 + j] += dlogit * t.act[j];
      const double dpre = dlogit * params_[layout_.w2 + j] * (1.0 - t.act[j] * t.act[j]);
      if (dpre == 0.0) continue;
      grad[layout_.b1 + j] += dpre;
      double* gw = &grad[layout_.w1 + j * in];
      const double* w = &params_[layout_.w1 + j * in];
      for (std::size_t k = 0; k < in; ++k) {
        gw[k] += dpre * t.input[k];
        dinput[k] += dpre * w[k];
      }
    }
    const std::array<std::size_t, 3> base{layout_.subj, layout_.verb, layout_.obj};
    for (std::size_t p = 0; p < 3; ++p) {
      double* g = &grad[base[p] + t.rows[p] * dim_];
      for (std::size_t k = 0; k < dim_; ++k) g[k] += dinput[p * dim_ + k];
    }
  }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  const Layout& layout() const { return layout_; }
  std::size_t dim() const { return dim_; }
  std::size_t hidden() const { return hidden_; }
  const Vocabulary& vocabulary(Role r) const { return vocab_[r == Role::kSubject ? 0 : 2]; }
  const Vocabulary& verb_vocabulary() const { return vocab_[1]; }

  friend bool operator==(const MlpScorer& a, const MlpScorer& b) {
    if (a.dim_ != b.dim_ || a.hidden_ != b.hidden_ || a.params_ != b.params_) return false;
    for (std::size_t p = 0; p < 3; ++p) {
      if (a.vocab_[p].size() != b.vocab_[p].size()) return false;
      for (std::size_t i = 0; i < a.vocab_[p].size(); ++i)
        if (a.vocab_[p].word(i) != b.vocab_[p].word(i)) return false;
    }
    return true;
  }

  void save(std::ostream& os) const;
  static MlpScorer load(std::istream& is);

 private:
  std::array<Vocabulary, 3> vocab_;
  std::size_t dim_;
  std::size_t hidden_;
  Layout layout_;
  std::vector<double> params_;
};

// ---------------------------------------------------------------------------
// Model file. Layout (all integers little-endian):
//   "ABXN1"                      5-byte magic
//   u32 dim, u32 hidden
//   3 x { u32 count; count x { u32 length; bytes } }   subject/verb/object
//                                                      vocab, OOV slot first
//   u64 parameter count, then that many IEEE-754 f64 values in layout order
//   (subject, verb, object embeddings; W1 row-major; b1; w2; b2)

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline std::uint64_t get_le(std::istream& is, int bytes) {
  unsigned char b[8] = {};
  if (!is.read(reinterpret_cast<char*>(b), bytes)) throw InputError("model file truncated");
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline constexpr char kModelMagic[] = "ABXN1";

inline void MlpScorer::save(std::ostream& os) const {
  os.write(kModelMagic, 5);
  detail::put_u32(os, static_cast<std::uint32_t>(dim_));
  detail::put_u32(os, static_cast<std::uint32_t>(hidden_));
  for (const auto& v : vocab_) {
    detail::put_u32(os, static_cast<std::uint32_t>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
      detail::put_u32(os, static_cast<std::uint32_t>(v.word(i).size()));
      os.write(v.word(i).data(), static_cast<std::streamsize>(v.word(i).size()));
    }
  }
  detail::put_u64(os, params_.size());
  for (double p : params_) {
    std::uint64_t bits;
    std::memcpy(&bits, &p, sizeof bits);
    detail::put_u64(os, bits);
  }
}

inline MlpScorer MlpScorer::load(std::istream& is) {
  char magic[5];
  if (!is.read(magic, 5) || std::memcmp(magic, kModelMagic, 5) != 0)
    throw InputError("not an ABXN1 model file");
  const auto dim = detail::get_le(is, 4);
  const auto hidden = detail::get_le(is, 4);
  std::array<Vocabulary, 3> vocab;
  for (auto& v : vocab) {
    const auto n = detail::get_le(is, 4);
    if (n < 1) throw InputError("model vocabulary lacks the OOV slot");
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto len = detail::get_le(is, 4);
      if (len > (1u << 20)) throw InputError("model vocabulary entry too long");
      std::string w(len, '\0');
      if (len && !is.read(w.data(), static_cast<std::streamsize>(len)))
        throw InputError("model file truncated");
      if (i == 0) {
        if (!w.empty()) throw InputError("model vocabulary slot 0 must be the OOV entry");
        continue;
      }
      if (v.add(w) != i) throw InputError("duplicate vocabulary entry in model file: " + w);
    }
  }
  MlpScorer m(std::move(vocab[0]), std::move(vocab[1]), std::move(vocab[2]), dim, hidden);
  const auto count = detail::get_le(is, 8);
  if (count != m.params_.size()) throw InputError("model parameter count does not match its shape");
  for (auto& p : m.params_) {
    const auto bits = detail::get_le(is, 8);
    std::memcpy(&p, &bits, sizeof p);
    if (!std::isfinite(p)) throw InputError("model file contains a non-finite parameter");
  }
  return m;
}

inline MlpScorer load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path);
  return MlpScorer::load(in);
}

inline void save_model(const MlpScorer& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file: " + path);
  m.save(out);
}

// ---------------------------------------------------------------------------
// Training

// Everything ConceptMax needs during training: the hierarchy context and the
// number of abstractions sampled per event.
struct ConceptMaxTraining {
  AbstractionContext context;
  std::size_t samples = ConceptMaxScorer::kDefaultTrainSamples;
};

// Surface events whose logits are aggregated into f(e) and f(e') for one pair.
// Without ConceptMax each side is the single event itself.
struct PairInputs {
  std::vector<Event> positive;
  std::vector<Event> negative;
};

inline std::vector<Event> aggregate_inputs(const Event& e, const ConceptMaxTraining* cm,
                                           std::uint64_t seed) {
  if (!cm) return {e};
  auto cells = abstraction_events(cm->context, e);
  Rng rng(event_seed(seed, e));
  std::vector<Event> out;
  for (auto i : sample_training_cells(cells.cells.size(), cm->samples, rng))
    out.push_back(render(cells.cells[i], cm->context.hierarchy()));
  return out;
}

inline PairInputs pair_inputs(const TrainingPair& p, const ConceptMaxTraining* cm, std::uint64_t seed) {
  return {aggregate_inputs(p.positive, cm, seed), aggregate_inputs(p.negative, cm, seed)};
}

inline double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

// Pair loss  -log f(e) - log(1 - f(e'))  with f = logistic(LSE(logits)).
// Adds its gradient into `grad` when provided.
inline double pair_loss(const MlpScorer& m, const PairInputs& in, std::span<double> grad = {}) {
  double loss = 0.0;
  for (int side = 0; side < 2; ++side) {
    const auto& events = side == 0 ? in.positive : in.negative;
    std::vector<MlpScorer::Trace> traces;
    std::vector<double> z;
    for (const auto& e : events) {
      traces.push_back(m.forward(e));
      z.push_back(traces.back().logit);
    }
    const double agg = log_sum_exp(z);
    // positive: softplus(-agg), d/dagg = logistic(agg) - 1
    // negative: softplus(agg),  d/dagg = logistic(agg)
    loss += side == 0 ? softplus(-agg) : softplus(agg);
    if (grad.empty()) continue;
    const double dagg = side == 0 ? logistic(agg) - 1.0 : logistic(agg);
    for (std::size_t i = 0; i < traces.size(); ++i)
      m.backward(traces[i], dagg * std::exp(z[i] - agg), grad);
  }
  return loss;
}

struct TrainResult {
  MlpScorer model;
  std::vector<double> epoch_loss;  // mean per-pair loss
  std::size_t steps = 0;
};

inline MlpScorer make_untrained_model(std::span<const TrainingPair> pairs, const TrainConfig& cfg,
                                      const ConceptMaxTraining* cm = nullptr) {
  std::set<std::string> subj, verb, obj;
  auto add_chain = [&](std::set<std::string>& into, const std::string& w, Role r) {
    into.insert(w);
    if (!cm) return;
    const auto& ctx = cm->context;
    if (auto id = resolve_sense(ctx.senses(), ctx.hierarchy(), w, r))
      for (const auto& c : ctx.view().chain(*id).ids) into.insert(ctx.hierarchy().at(c).lemma);
  };
  for (const auto& p : pairs)
    for (const Event* e : {&p.positive, &p.negative}) {
      add_chain(subj, e->subject, Role::kSubject);
      verb.insert(e->verb);
      add_chain(obj, e->object, Role::kObject);
    }
  MlpScorer m(Vocabulary(subj), Vocabulary(verb), Vocabulary(obj), cfg.dim, cfg.hidden);
  m.initialize(cfg.seed);
  return m;
}

// Adam with a linear learning-rate warm-up over `warmup_steps`; the mean of
// the pair losses in a batch is minimized. Single-threaded and deterministic.
inline TrainResult train(std::span<const TrainingPair> pairs, const TrainConfig& cfg,
                         const ConceptMaxTraining* cm = nullptr,
                         const std::function<void(std::size_t, double)>& on_epoch = {}) {
  cfg.validate();
  if (pairs.empty()) throw InputError("training needs at least one pair");
  TrainResult r{make_untrained_model(pairs, cfg, cm), {}, 0};
  auto& m = r.model;
  auto params = m.parameters();
  std::vector<double> grad(params.size()), m1(params.size(), 0.0), m2(params.size(), 0.0);

  std::vector<std::size_t> order(pairs.size());
  std::size_t step = 0;
  std::size_t batch_index = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng order_rng(hash_combine(cfg.seed, 0x65706f6368ULL + epoch));
    shuffle(order, order_rng);
    const std::uint64_t sample_seed = hash_combine(cfg.seed, epoch);

    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t i = b; i < end; ++i)
        batch_loss += pair_loss(m, pair_inputs(pairs[order[i]], cm, sample_seed), grad);
      if (!std::isfinite(batch_loss))
        throw Error("non-finite training loss at batch " + std::to_string(batch_index));
      epoch_loss += batch_loss;

      const double n = static_cast<double>(end - b);
      ++step;
      const double warm = cfg.warmup_steps ? std::min(1.0, static_cast<double>(step) /
                                                               static_cast<double>(cfg.warmup_steps))
                                           : 1.0;
      const double lr = cfg.learning_rate * warm;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t k = 0; k < params.size(); ++k) {
        const double g = grad[k] / n;
        m1[k] = cfg.beta1 * m1[k] + (1.0 - cfg.beta1) * g;
        m2[k] = cfg.beta2 * m2[k] + (1.0 - cfg.beta2) * g * g;
        params[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + cfg.adam_epsilon);
      }
    }
    r.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs.size()));
    if (on_epoch) on_epoch(epoch, r.epoch_loss.back());
  }
  r.steps = step;
  return r;
}

// Largest relative disagreement between the analytic gradient of the pair
// loss and central finite differences, over every parameter. Magnitudes
// below `floor` are compared absolutely.
inline double gradient_check(const MlpScorer& model, const TrainingPair& pair,
                             const ConceptMaxTraining* cm = nullptr, std::uint64_t seed = 0,
                             double step = 1e-5, double floor = 1e-6) {
  MlpScorer m = model;
  const auto in = pair_inputs(pair, cm, seed);
  std::vector<double> analytic(m.parameters().size(), 0.0);
  pair_loss(m, in, analytic);
  auto params = m.parameters();
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = params[k];
    params[k] = saved + step;
    const double up = pair_loss(m, in);
    params[k] = saved - step;
    const double down = pair_loss(m, in);
    params[k] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

}  // namespace abx
