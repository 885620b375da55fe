#pragma once

// Test-only oracles and generators. Nothing here calls into the code paths
// it is used to check.

#include <abx/abx.hpp>

#include <json.hpp>

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace abx::testing {

struct EdgeRecord {
  std::string id;
  std::string lemma;
  std::vector<std::string> parents;
};

inline std::string to_edge_file(const std::vector<EdgeRecord>& recs) {
  std::string out;
  for (const auto& r : recs) {
    out += r.id + '\t' + r.lemma + '\t';
    for (std::size_t i = 0; i < r.parents.size(); ++i) out += (i ? "," : "") + r.parents[i];
    out += '\n';
  }
  return out;
}

inline Hierarchy hierarchy_from(const std::vector<EdgeRecord>& recs) {
  std::istringstream in(to_edge_file(recs));
  return parse_hierarchy(in);
}

// Random DAG rooted at "n000". Node k draws 1-3 parents among earlier nodes,
// so the graph is acyclic and connected. Lemmas repeat to exercise sense
// fallback.
inline std::vector<EdgeRecord> random_dag(std::mt19937_64& rng, std::size_t n, std::size_t lemma_pool = 0) {
  std::vector<EdgeRecord> recs;
  for (std::size_t k = 0; k < n; ++k) {
    char id[16];
    std::snprintf(id, sizeof id, "n%03zu", k);
    EdgeRecord r{id, "", {}};
    const std::size_t pool = lemma_pool ? lemma_pool : n;
    r.lemma = "w" + std::to_string(rng() % pool);
    if (k > 0) {
      const std::size_t np = 1 + rng() % 3;
      std::set<std::size_t> ps;
      for (std::size_t i = 0; i < np; ++i) ps.insert(rng() % k);
      for (auto p : ps) r.parents.push_back(recs[p].id);
    }
    recs.push_back(std::move(r));
  }
  return recs;
}

// Depth by breadth-first search over the raw edge list.
inline std::map<std::string, int> bfs_depths(const std::vector<EdgeRecord>& recs) {
  std::map<std::string, std::vector<std::string>> children;
  std::string root;
  for (const auto& r : recs) {
    if (r.parents.empty()) root = r.id;
    for (const auto& p : r.parents) children[p].push_back(r.id);
  }
  std::map<std::string, int> depth{{root, 1}};
  std::queue<std::string> q;
  q.push(root);
  while (!q.empty()) {
    auto u = q.front();
    q.pop();
    for (const auto& c : children[u])
      if (!depth.count(c)) {
        depth[c] = depth[u] + 1;
        q.push(c);
      }
  }
  return depth;
}

// Every root-to-target path, enumerated exhaustively.
inline std::vector<std::vector<std::string>> all_paths(const std::vector<EdgeRecord>& recs,
                                                       const std::string& target) {
  std::map<std::string, const EdgeRecord*> by_id;
  for (const auto& r : recs) by_id[r.id] = &r;
  std::vector<std::vector<std::string>> out;
  std::function<void(const std::string&, std::vector<std::string>&)> walk =
      [&](const std::string& node, std::vector<std::string>& suffix) {
        suffix.push_back(node);
        const auto* r = by_id.at(node);
        if (r->parents.empty()) {
          out.emplace_back(suffix.rbegin(), suffix.rend());
        } else {
          for (const auto& p : r->parents) walk(p, suffix);
        }
        suffix.pop_back();
      };
  std::vector<std::string> tmp;
  walk(target, tmp);
  return out;
}

// Shortest path, ties broken by elementwise lexicographic order.
inline std::vector<std::string> brute_shortest_chain(const std::vector<EdgeRecord>& recs,
                                                     const std::string& target) {
  auto paths = all_paths(recs, target);
  return *std::min_element(paths.begin(), paths.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() < b.size();
    return a < b;
  });
}

inline std::vector<std::string> ids_of(const HypernymChain& c) {
  std::vector<std::string> out;
  for (const auto& id : c.ids) out.push_back(id.value);
  return out;
}

// --- metric oracles ---------------------------------------------------------

struct BruteMetrics {
  double ccd = 0.0;
  double ler = 0.0;
  std::size_t windows = 0;
};

// Direct transcription of the definitions over explicit row and column
// sequences of a row-major matrix.
inline BruteMetrics brute_metrics(const std::vector<std::vector<std::vector<double>>>& grids) {
  double delta = 0.0;
  std::size_t extrema = 0;
  std::size_t windows = 0;
  auto visit = [&](const std::vector<double>& seq) {
    for (std::size_t i = 1; i + 1 < seq.size(); ++i) {
      const double a = seq[i - 1], b = seq[i], c = seq[i + 1];
      delta += (2 * b < a + c) ? (a + c) / 2 - b : 0.0;
      if ((b > a && b > c) || (b < a && b < c)) ++extrema;
      ++windows;
    }
  };
  for (const auto& g : grids) {
    const std::size_t rows = g.size();
    const std::size_t cols = rows ? g[0].size() : 0;
    for (std::size_t c = 0; c < cols; ++c) {
      std::vector<double> col;
      for (std::size_t r = 0; r < rows; ++r) col.push_back(g[r][c]);
      visit(col);
    }
    for (const auto& row : g) visit(row);
  }
  BruteMetrics m;
  m.windows = windows;
  if (windows) {
    m.ccd = delta / static_cast<double>(windows);
    m.ler = static_cast<double>(extrema) / static_cast<double>(windows);
  }
  return m;
}

inline AbstractionGrid grid_from(const std::vector<std::vector<double>>& m) {
  std::vector<double> flat;
  for (const auto& row : m) flat.insert(flat.end(), row.begin(), row.end());
  AbstractionGrid g(m.size(), m.empty() ? 0 : m[0].size(), flat);
  for (std::size_t r = 0; r < g.rows; ++r) g.row_labels.push_back("r" + std::to_string(r));
  for (std::size_t c = 0; c < g.cols; ++c) g.col_labels.push_back("c" + std::to_string(c));
  return g;
}

// O(N^2) pairwise AUC with half credit for ties.
inline double brute_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline std::vector<ScoredEvent> scored_from(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<ScoredEvent> out;
  for (double p : pos) out.push_back({{{"s", "v", "o"}, Label::kPlausible}, p});
  for (double n : neg) out.push_back({{{"s", "v", "o"}, Label::kImplausible}, n});
  return out;
}

// --- scorers ----------------------------------------------------------------

// Deterministic pseudo-random logits keyed on the surface event.
class HashScorer final : public Scorer {
 public:
  explicit HashScorer(std::uint64_t salt, double scale = 3.0) : salt_(salt), scale_(scale) {}
  ScorerInfo info() const override { return {"hash", true, true}; }
  double logit(const Event& e) const override {
    const auto h = hash_combine(salt_, hash_string(e.subject + "|" + e.verb + "|" + e.object));
    return scale_ * (static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0);
  }

 private:
  std::uint64_t salt_;
  double scale_;
};

// Map-backed scorer; unknown events get `fallback`.
class TableScorer final : public Scorer {
 public:
  explicit TableScorer(std::map<Event, double> t, double fallback = 0.0)
      : table_(std::move(t)), fallback_(fallback) {}
  ScorerInfo info() const override { return {"table", true, true}; }
  double logit(const Event& e) const override {
    auto it = table_.find(e);
    return it == table_.end() ? fallback_ : it->second;
  }

 private:
  std::map<Event, double> table_;
  double fallback_;
};

// In-process stand-in for an external scorer process. Buffers requests until
// the blank end-of-batch line, then queues responses computed by `rule`.
class MockChannel final : public LineChannel {
 public:
  enum class Mode { kNormal, kShuffle, kMalformed, kExit, kSilent, kRemoteError };

  explicit MockChannel(std::function<double(const Event&)> rule, Mode mode = Mode::kNormal)
      : rule_(std::move(rule)), mode_(mode) {}

  void send(std::string_view line) override {
    if (line.empty()) {
      finish_batch();
      return;
    }
    auto j = nlohmann::json::parse(line);
    batch_.push_back(j);
  }

  std::string receive(std::chrono::steady_clock::time_point) override {
    if (out_.empty()) {
      if (mode_ == Mode::kExit)
        throw ProtocolError(ProtocolError::Kind::kChildExit, "mock child exited");
      throw ProtocolError(ProtocolError::Kind::kTimeout, "mock child silent");
    }
    auto s = out_.front();
    out_.pop_front();
    return s;
  }

  std::size_t batches() const { return batches_; }

 private:
  void finish_batch() {
    ++batches_;
    std::vector<std::string> lines;
    for (const auto& req : batch_) {
      Event e{req["s"], req["v"], req["o"]};
      lines.push_back(nlohmann::json{{"id", req["id"]}, {"logit", rule_(e)}}.dump());
    }
    batch_.clear();
    switch (mode_) {
      case Mode::kShuffle: {
        std::mt19937_64 rng(batches_);
        std::shuffle(lines.begin(), lines.end(), rng);
        break;
      }
      case Mode::kMalformed:
        if (lines.size() > 1) lines[1] = "{not json";
        else lines.insert(lines.begin(), "{not json");
        break;
      case Mode::kExit:
        lines.resize(lines.size() / 2);
        break;
      case Mode::kSilent:
        lines.clear();
        break;
      case Mode::kRemoteError:
        lines.insert(lines.begin(), R"({"id": null, "error": "bad request"})");
        break;
      case Mode::kNormal:
        break;
    }
    out_.insert(out_.end(), lines.begin(), lines.end());
  }

  std::function<double(const Event&)> rule_;
  Mode mode_;
  std::vector<nlohmann::json> batch_;
  std::deque<std::string> out_;
  std::size_t batches_ = 0;
};

}  // namespace abx::testing
