#pragma once

#include <abx/common.hpp>
#include <abx/lexicon.hpp>
#include <abx/scorer.hpp>

#include <array>
#include <fstream>
#include <future>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

namespace abx {

// Hierarchy, sense assignments and enumeration filter needed to expand an
// event into its abstractions. Holds references; the referents must outlive it.
class AbstractionContext {
 public:
  AbstractionContext(const Hierarchy& h, const SenseMap& senses)
      : h_(&h), senses_(&senses), view_(h) {}
  AbstractionContext(const Hierarchy& h, const SenseMap& senses, HierarchyView view)
      : h_(&h), senses_(&senses), view_(std::move(view)) {}

  const Hierarchy& hierarchy() const { return *h_; }
  const SenseMap& senses() const { return *senses_; }
  const HierarchyView& view() const { return view_; }

 private:
  const Hierarchy* h_;
  const SenseMap* senses_;
  HierarchyView view_;
};

struct GridShape {
  std::size_t rows = 1;  // subject chain length
  std::size_t cols = 1;  // object chain length

  std::size_t cells() const { return rows * cols; }
  friend bool operator==(const GridShape&, const GridShape&) = default;
};

// Row-major cells over (subject-chain position x object-chain position);
// position 0 is the most abstract, the last cell is the original event.
struct AbstractionCells {
  GridShape shape;
  std::vector<ConceptEvent> cells;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;

  const ConceptEvent& original() const { return cells.back(); }
};

struct AbstractionGrid {
  std::vector<std::string> row_labels;  // subject chain lemmas
  std::vector<std::string> col_labels;  // object chain lemmas
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> scores;  // row-major

  AbstractionGrid() = default;
  AbstractionGrid(std::size_t r, std::size_t c, std::vector<double> values)
      : rows(r), cols(c), scores(std::move(values)) {
    if (scores.size() != rows * cols) throw InputError("grid value count does not match shape");
  }

  double at(std::size_t r, std::size_t c) const { return scores[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return scores[r * cols + c]; }
};

namespace detail {

struct ArgumentChain {
  std::vector<std::optional<SynsetId>> synsets;
  std::vector<std::string> labels;
};

inline ArgumentChain argument_chain(const AbstractionContext& ctx, const std::string& word,
                                    Role role) {
  ArgumentChain out;
  auto sense = resolve_sense(ctx.senses(), ctx.hierarchy(), word, role);
  if (!sense) {
    out.synsets.push_back(std::nullopt);
    out.labels.push_back(word);
    return out;
  }
  for (auto& id : ctx.view().chain(*sense).ids) {
    out.labels.push_back(ctx.hierarchy().at(id).lemma);
    out.synsets.push_back(std::move(id));
  }
  return out;
}

inline AbstractionCells cross(const ArgumentChain& subj, const std::string& subject_word,
                              const std::string& verb, const ArgumentChain& obj,
                              const std::string& object_word) {
  AbstractionCells out;
  out.shape = {subj.synsets.size(), obj.synsets.size()};
  out.row_labels = subj.labels;
  out.col_labels = obj.labels;
  out.cells.reserve(out.shape.cells());
  for (const auto& s : subj.synsets)
    for (const auto& o : obj.synsets)
      out.cells.push_back(ConceptEvent{s, subject_word, verb, o, object_word});
  return out;
}

}  // namespace detail

inline AbstractionCells abstraction_events(const AbstractionContext& ctx, const Event& e) {
  return detail::cross(detail::argument_chain(ctx, e.subject, Role::kSubject), e.subject, e.verb,
                       detail::argument_chain(ctx, e.object, Role::kObject), e.object);
}

// Abstractions of an already sense-resolved event. Filtered chains are
// prefix-closed, so for an abstraction cell of some event this yields exactly
// the upper-left sub-grid of that event's grid.
inline AbstractionCells abstraction_events(const AbstractionContext& ctx, const ConceptEvent& ce) {
  auto chain_of = [&](const std::optional<SynsetId>& id, const std::string& word) {
    detail::ArgumentChain out;
    if (!id) {
      out.synsets.push_back(std::nullopt);
      out.labels.push_back(word);
      return out;
    }
    for (auto& c : ctx.view().chain(*id).ids) {
      out.labels.push_back(ctx.hierarchy().at(c).lemma);
      out.synsets.push_back(std::move(c));
    }
    return out;
  };
  return detail::cross(chain_of(ce.subject_synset, ce.subject_word), ce.subject_word, ce.verb,
                       chain_of(ce.object_synset, ce.object_word), ce.object_word);
}

// Scores every cell. Evaluation is split across threads only when the
// scorer declares itself safe for concurrent use; the result order never
// depends on it.
inline AbstractionGrid score_grid(const Scorer& scorer, const AbstractionCells& cells,
                                  const Hierarchy& h, unsigned threads = 1) {
  const std::size_t n = cells.cells.size();
  if (n != cells.shape.cells()) throw InputError("cell count does not match grid shape");

  auto describe = [&](std::size_t i) {
    return format("cell (%zu, %zu) [%s]", i / cells.shape.cols + 1, i % cells.shape.cols + 1,
                  to_string(render(cells.cells[i], h)).c_str());
  };

  auto run = [&](std::size_t begin, std::size_t end) {
    std::span<const ConceptEvent> part(cells.cells.data() + begin, end - begin);
    try {
      return scorer.concept_logits(part, h);
    } catch (const ProtocolError&) {
      throw;
    } catch (const std::exception& ex) {
      // Narrow the failure down to a single cell.
      for (std::size_t i = begin; i < end; ++i) {
        try {
          scorer.concept_logits(std::span<const ConceptEvent>(&cells.cells[i], 1), h);
        } catch (const std::exception& inner) {
          throw ScoringError("scorer failed on " + describe(i) + ": " + inner.what());
        }
      }
      throw ScoringError(std::string("scorer failed: ") + ex.what());
    }
  };

  std::vector<double> values;
  if (threads > 1 && scorer.info().concurrent_safe && n >= 2 * threads) {
    std::vector<std::future<std::vector<double>>> parts;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (std::size_t b = 0; b < n; b += chunk)
      parts.push_back(std::async(std::launch::async, run, b, std::min(n, b + chunk)));
    for (auto& p : parts) {
      auto v = p.get();
      values.insert(values.end(), v.begin(), v.end());
    }
  } else {
    values = run(0, n);
  }
  if (values.size() != n) throw ScoringError("scorer returned wrong number of logits");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(values[i])) throw ScoringError("non-finite logit at " + describe(i));

  AbstractionGrid g(cells.shape.rows, cells.shape.cols, std::move(values));
  g.row_labels = cells.row_labels;
  g.col_labels = cells.col_labels;
  return g;
}

inline AbstractionGrid to_probabilities(AbstractionGrid g) {
  for (auto& v : g.scores) v = logistic(v);
  return g;
}

using Window = std::array<double, 3>;

// Every contiguous length-3 window along each row (object position fixed,
// subject chain ascending) and then each column.
inline std::vector<Window> grid_windows(const AbstractionGrid& g) {
  std::vector<Window> out;
  for (std::size_t c = 0; c < g.cols; ++c)
    for (std::size_t r = 0; r + 2 < g.rows; ++r)
      out.push_back({g.at(r, c), g.at(r + 1, c), g.at(r + 2, c)});
  for (std::size_t r = 0; r < g.rows; ++r)
    for (std::size_t c = 0; c + 2 < g.cols; ++c)
      out.push_back({g.at(r, c), g.at(r, c + 1), g.at(r, c + 2)});
  return out;
}

// Grid export: optional `#` header lines, then a tab-separated matrix whose
// first row holds object lemmas and whose first column holds subject lemmas.
inline void write_grid(std::ostream& os, const AbstractionGrid& g,
                       const std::vector<std::string>& header = {}) {
  for (const auto& line : header) os << "# " << line << '\n';
  os << "subject\\object";
  for (const auto& c : g.col_labels) os << '\t' << c;
  os << '\n';
  for (std::size_t r = 0; r < g.rows; ++r) {
    os << g.row_labels[r];
    for (std::size_t c = 0; c < g.cols; ++c) os << '\t' << format("%.6f", g.at(r, c));
    os << '\n';
  }
}

inline AbstractionGrid parse_grid(std::istream& in, const std::string& source = "<stream>") {
  AbstractionGrid g;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = split(sv, '\t');
    auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
    if (!have_header) {
      if (f.size() < 2) throw InputError(where() + "grid header needs at least one column");
      for (std::size_t i = 1; i < f.size(); ++i) g.col_labels.emplace_back(f[i]);
      g.cols = g.col_labels.size();
      have_header = true;
      continue;
    }
    if (f.size() != g.cols + 1) throw InputError(where() + "row width does not match header");
    g.row_labels.emplace_back(f[0]);
    for (std::size_t i = 1; i < f.size(); ++i) {
      std::string cell(f[i]);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw InputError(where() + "bad grid value '" + cell + "'");
      g.scores.push_back(v);
    }
    ++g.rows;
  }
  if (!have_header || g.rows == 0) throw InputError(source + ": empty grid");
  return g;
}

inline AbstractionGrid load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open grid file: " + path);
  return parse_grid(in, path);
}

}  // namespace abx
