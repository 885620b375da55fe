#pragma once

#include <abx/common.hpp>

#include <compare>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace abx {

struct SynsetId {
  std::string value;

  friend auto operator<=>(const SynsetId&, const SynsetId&) = default;
};

struct Synset {
  SynsetId id;
  std::string lemma;
  std::vector<SynsetId> parents;  // direct hypernyms, sorted
  int depth = 0;                  // root has depth 1
};

// Ordered root-to-target concept sequence.
struct HypernymChain {
  std::vector<SynsetId> ids;

  std::size_t size() const { return ids.size(); }
  friend bool operator==(const HypernymChain&, const HypernymChain&) = default;
};

enum class Role { kSubject, kObject };

inline std::string_view role_name(Role r) {
  return r == Role::kSubject ? "subject" : "object";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "subject" || s == "s") return Role::kSubject;
  if (s == "object" || s == "o") return Role::kObject;
  return std::nullopt;
}

// A validated, immutable lexical hierarchy. Synsets are stored sorted by id,
// so the structure is independent of input record order.
class Hierarchy {
 public:
  using Index = std::size_t;

  Hierarchy() = default;

  const SynsetId& root() const { return synsets_.at(root_).id; }
  std::size_t size() const { return synsets_.size(); }
  const std::vector<Synset>& synsets() const { return synsets_; }

  bool contains(const SynsetId& id) const { return index_.count(id.value) != 0; }

  std::optional<Index> find(const SynsetId& id) const {
    auto it = index_.find(id.value);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  const Synset& at(const SynsetId& id) const {
    auto idx = find(id);
    if (!idx) throw InputError("unknown synset id: " + id.value);
    return synsets_[*idx];
  }

  const Synset& at(Index i) const { return synsets_.at(i); }

  // All synsets carrying `lemma`, sorted by id.
  const std::vector<Index>& with_lemma(std::string_view lemma) const {
    static const std::vector<Index> kEmpty;
    auto it = by_lemma_.find(std::string(lemma));
    return it == by_lemma_.end() ? kEmpty : it->second;
  }

  // Index-level shortest chain, root first.
  std::vector<Index> chain_indices(Index target) const {
    std::vector<Index> out(static_cast<std::size_t>(synsets_.at(target).depth));
    Index cur = target;
    for (std::size_t k = out.size(); k-- > 0;) {
      out[k] = cur;
      cur = chain_parent_[cur];
    }
    return out;
  }

  // Records are (id, lemma, parents). Throws InputError on any structural
  // violation, naming the offending ids.
  static Hierarchy build(std::vector<Synset> records);

  friend bool operator==(const Hierarchy& a, const Hierarchy& b) {
    if (a.synsets_.size() != b.synsets_.size() || a.root_ != b.root_) return false;
    for (std::size_t i = 0; i < a.synsets_.size(); ++i) {
      const auto& x = a.synsets_[i];
      const auto& y = b.synsets_[i];
      if (x.id != y.id || x.lemma != y.lemma || x.parents != y.parents || x.depth != y.depth)
        return false;
    }
    return a.chain_parent_ == b.chain_parent_;
  }

 private:
  std::vector<Synset> synsets_;
  std::unordered_map<std::string, Index> index_;
  std::unordered_map<std::string, std::vector<Index>> by_lemma_;
  std::vector<Index> chain_parent_;  // predecessor on the tie-broken shortest chain
  Index root_ = 0;
};

namespace detail {

inline std::string join_ids(const std::vector<std::string>& ids) {
  std::string out = "{";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += ids[i];
  }
  return out + "}";
}

// Returns the members of one cycle among `candidates` (nodes whose parent
// walk never reaches the root), sorted.
inline std::vector<std::string> find_cycle(const std::vector<Synset>& syn,
                                           const std::unordered_map<std::string, std::size_t>& index,
                                           const std::vector<std::size_t>& candidates) {
  enum Color : char { kWhite, kGray, kBlack };
  std::vector<Color> color(syn.size(), kWhite);
  std::vector<std::size_t> onpath;

  for (std::size_t start : candidates) {
    if (color[start] != kWhite) continue;
    // Iterative DFS over parent edges keeping the current path.
    std::vector<std::pair<std::size_t, std::size_t>> frames{{start, 0}};
    onpath.assign(1, start);
    color[start] = kGray;
    while (!frames.empty()) {
      auto& [node, next] = frames.back();
      if (next < syn[node].parents.size()) {
        const std::size_t p = index.at(syn[node].parents[next++].value);
        if (color[p] == kGray) {
          auto it = std::find(onpath.begin(), onpath.end(), p);
          std::vector<std::string> members;
          for (; it != onpath.end(); ++it) members.push_back(syn[*it].id.value);
          std::sort(members.begin(), members.end());
          return members;
        }
        if (color[p] == kWhite) {
          color[p] = kGray;
          frames.emplace_back(p, 0);
          onpath.push_back(p);
        }
      } else {
        color[node] = kBlack;
        frames.pop_back();
        onpath.pop_back();
      }
    }
  }
  return {};
}

}  // namespace detail

inline Hierarchy Hierarchy::build(std::vector<Synset> records) {
  Hierarchy h;
  std::sort(records.begin(), records.end(),
            [](const Synset& a, const Synset& b) { return a.id < b.id; });

  std::vector<std::string> dups;
  for (std::size_t i = 1; i < records.size(); ++i)
    if (records[i].id == records[i - 1].id &&
        (dups.empty() || dups.back() != records[i].id.value))
      dups.push_back(records[i].id.value);
  if (!dups.empty()) throw InputError("duplicate synset id " + detail::join_ids(dups));

  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    if (r.id.value.empty()) throw InputError("empty synset id");
    if (r.lemma.empty()) throw InputError("empty lemma for synset " + r.id.value);
    std::sort(r.parents.begin(), r.parents.end());
    r.parents.erase(std::unique(r.parents.begin(), r.parents.end()), r.parents.end());
    r.depth = 0;
    h.index_.emplace(r.id.value, i);
  }

  std::vector<std::string> roots;
  std::vector<std::string> unknown;
  for (const auto& r : records) {
    if (r.parents.empty()) roots.push_back(r.id.value);
    for (const auto& p : r.parents)
      if (!h.index_.count(p.value)) unknown.push_back(r.id.value + "->" + p.value);
  }
  if (!unknown.empty()) throw InputError("unknown parent id " + detail::join_ids(unknown));
  if (roots.empty()) {
    std::vector<std::size_t> all(records.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    auto cyc = detail::find_cycle(records, h.index_, all);
    if (!cyc.empty()) throw InputError("cycle detected " + detail::join_ids(cyc) + " (no root synset)");
    throw InputError("missing root (no synset without parents)");
  }
  if (roots.size() > 1) throw InputError("multiple roots " + detail::join_ids(roots));

  // Child adjacency, then breadth-first depths from the root.
  std::vector<std::vector<std::size_t>> children(records.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    for (const auto& p : records[i].parents) children[h.index_.at(p.value)].push_back(i);

  h.root_ = h.index_.at(roots.front());
  records[h.root_].depth = 1;
  std::vector<std::vector<std::size_t>> by_depth{{}, {h.root_}};
  std::queue<std::size_t> q;
  q.push(h.root_);
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t c : children[u]) {
      if (records[c].depth != 0) continue;
      records[c].depth = records[u].depth + 1;
      if (by_depth.size() <= static_cast<std::size_t>(records[c].depth)) by_depth.emplace_back();
      by_depth[records[c].depth].push_back(c);
      q.push(c);
    }
  }

  std::vector<std::size_t> unreached;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].depth == 0) unreached.push_back(i);
  if (!unreached.empty()) {
    auto cyc = detail::find_cycle(records, h.index_, unreached);
    if (!cyc.empty()) throw InputError("cycle detected " + detail::join_ids(cyc));
    std::vector<std::string> names;
    for (auto i : unreached) names.push_back(records[i].id.value);
    throw InputError("unreachable synset " + detail::join_ids(names));
  }

  // A node whose parent walk reaches the root can still sit downstream of a
  // cycle through another parent; BFS reaches it, so check acyclicity
  // separately with Kahn's algorithm over all parent edges.
  {
    std::vector<std::size_t> indeg(records.size(), 0);
    for (const auto& r : records) indeg[h.index_.at(r.id.value)] = r.parents.size();
    std::queue<std::size_t> ready;
    ready.push(h.root_);
    std::size_t seen = 0;
    while (!ready.empty()) {
      const std::size_t u = ready.front();
      ready.pop();
      ++seen;
      for (std::size_t c : children[u])
        if (--indeg[c] == 0) ready.push(c);
    }
    if (seen != records.size()) {
      std::vector<std::size_t> stuck;
      for (std::size_t i = 0; i < records.size(); ++i)
        if (indeg[i] != 0) stuck.push_back(i);
      auto cyc = detail::find_cycle(records, h.index_, stuck);
      throw InputError("cycle detected " + detail::join_ids(cyc));
    }
  }

  // Tie-broken chains: rank every node among its depth level by
  // (rank of its chain parent, id); that order is the elementwise
  // lexicographic order of the chains themselves.
  h.chain_parent_.assign(records.size(), h.root_);
  std::vector<std::size_t> rank(records.size(), 0);
  for (std::size_t d = 2; d < by_depth.size(); ++d) {
    auto& level = by_depth[d];
    for (std::size_t c : level) {
      std::size_t best = records.size();
      for (const auto& p : records[c].parents) {
        const std::size_t pi = h.index_.at(p.value);
        if (records[pi].depth != static_cast<int>(d) - 1) continue;
        if (best == records.size() || rank[pi] < rank[best]) best = pi;
      }
      h.chain_parent_[c] = best;
    }
    std::sort(level.begin(), level.end(), [&](std::size_t a, std::size_t b) {
      const auto ra = rank[h.chain_parent_[a]];
      const auto rb = rank[h.chain_parent_[b]];
      if (ra != rb) return ra < rb;
      return records[a].id < records[b].id;
    });
    for (std::size_t k = 0; k < level.size(); ++k) rank[level[k]] = k;
  }

  for (std::size_t i = 0; i < records.size(); ++i)
    h.by_lemma_[records[i].lemma].push_back(i);  // ids ascending by construction

  h.synsets_ = std::move(records);
  return h;
}

// Edge-list format: `id<TAB>lemma<TAB>parent,parent,...`; `#` starts a comment.
inline Hierarchy parse_hierarchy(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Synset> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = split(sv, '\t');
    if (f.size() != 3)
      throw InputError(source + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    Synset s;
    s.id.value = std::string(f[0]);
    s.lemma = std::string(f[1]);
    if (s.id.value.empty() || s.lemma.empty())
      throw InputError(source + ":" + std::to_string(lineno) + ": empty id or lemma");
    if (!f[2].empty())
      for (auto p : split(f[2], ',')) {
        if (p.empty())
          throw InputError(source + ":" + std::to_string(lineno) + ": empty parent id");
        s.parents.push_back(SynsetId{std::string(p)});
      }
    records.push_back(std::move(s));
  }
  return Hierarchy::build(std::move(records));
}

inline Hierarchy load_hierarchy(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open hierarchy file: " + path);
  return parse_hierarchy(in, path);
}

inline HypernymChain shortest_chain(const Hierarchy& h, const SynsetId& c) {
  auto idx = h.find(c);
  if (!idx) throw InputError("unknown synset id: " + c.value);
  HypernymChain chain;
  for (auto i : h.chain_indices(*idx)) chain.ids.push_back(h.at(i).id);
  return chain;
}

// Restricted view of a hierarchy: every synset stays for connectivity, but
// only enumerable ones appear as abstractions.
class HierarchyView {
 public:
  explicit HierarchyView(const Hierarchy& h) : h_(&h), enumerable_(h.size(), true) {}
  HierarchyView(const Hierarchy& h, std::vector<bool> enumerable)
      : h_(&h), enumerable_(std::move(enumerable)) {}

  const Hierarchy& hierarchy() const { return *h_; }
  bool enumerable(Hierarchy::Index i) const { return enumerable_.at(i); }
  bool enumerable(const SynsetId& id) const { return enumerable_.at(h_->find(id).value()); }

  // Shortest chain restricted to enumerable synsets. The target itself is
  // always kept so the original event stays representable; a prefix of a
  // filtered chain is the filtered chain of that prefix's last element.
  HypernymChain chain(const SynsetId& target) const {
    auto idx = h_->find(target);
    if (!idx) throw InputError("unknown synset id: " + target.value);
    HypernymChain out;
    for (auto i : h_->chain_indices(*idx))
      if (i == *idx || enumerable_[i]) out.ids.push_back(h_->at(i).id);
    return out;
  }

 private:
  const Hierarchy* h_;
  std::vector<bool> enumerable_;
};

// Synsets with depth < min_depth or a lemma outside corpus_vocab become
// non-enumerable. An empty optional vocabulary disables the lemma filter.
inline HierarchyView filter_hierarchy(const Hierarchy& h, int min_depth,
                                      const std::optional<std::unordered_set<std::string>>& corpus_vocab) {
  if (min_depth < 1) throw InputError("min_depth must be >= 1");
  std::vector<bool> keep(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& s = h.at(i);
    keep[i] = s.depth >= min_depth && (!corpus_vocab || corpus_vocab->count(s.lemma) != 0);
  }
  return HierarchyView(h, std::move(keep));
}

class SenseMap {
 public:
  void add(std::string word, Role role, SynsetId id) {
    entries_[{std::move(word), role}] = std::move(id);
  }

  std::optional<SynsetId> lookup(const std::string& word, Role role) const {
    auto it = entries_.find({word, role});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t size() const { return entries_.size(); }

  void validate(const Hierarchy& h) const {
    for (const auto& [key, id] : entries_)
      if (!h.contains(id))
        throw InputError("sense map entry " + key.first + "/" + std::string(role_name(key.second)) +
                         " names unknown synset " + id.value);
  }

 private:
  std::map<std::pair<std::string, Role>, SynsetId> entries_;
};

// `word<TAB>role<TAB>synset_id`, roles `subject`/`object`.
inline SenseMap parse_sense_map(std::istream& in, const std::string& source = "<stream>") {
  SenseMap sm;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = split(sv, '\t');
    auto role = f.size() == 3 ? parse_role(f[1]) : std::nullopt;
    if (!role || f[0].empty() || f[2].empty())
      throw InputError(source + ":" + std::to_string(lineno) + ": expected word<TAB>role<TAB>synset_id");
    sm.add(std::string(f[0]), *role, SynsetId{std::string(f[2])});
  }
  return sm;
}

inline SenseMap load_sense_map(const std::string& path, const Hierarchy& h) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open sense map file: " + path);
  SenseMap sm = parse_sense_map(in, path);
  sm.validate(h);
  return sm;
}

// Mapped sense, else the smallest id whose lemma equals `word`, else nullopt
// (the argument is scored without abstraction).
inline std::optional<SynsetId> resolve_sense(const SenseMap& sm, const Hierarchy& h,
                                             const std::string& word, Role role) {
  if (auto hit = sm.lookup(word, role)) return hit;
  const auto& cands = h.with_lemma(word);
  if (cands.empty()) return std::nullopt;
  return h.at(cands.front()).id;
}

}  // namespace abx
