#include "support.hpp"

#include <gtest/gtest.h>

namespace abx {
namespace {

Hierarchy parse(const std::string& text) {
  std::istringstream in(text);
  return parse_hierarchy(in);
}

// entity > organism > person > woman ; entity > food > fruit
const char* kSmall =
    "entity\tentity\t\n"
    "organism\torganism\tentity\n"
    "person\tperson\torganism\n"
    "woman\twoman\tperson\n"
    "food\tfood\tentity\n"
    "fruit\tfruit\tfood\n";

TEST(AbstractionEvents, CrossProductRowMajor) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto cells = abstraction_events(ctx, Event{"person", "eat", "food"});
  EXPECT_EQ(cells.shape, (GridShape{3, 2}));
  ASSERT_EQ(cells.cells.size(), 6u);
  EXPECT_EQ(to_string(render(cells.cells[0], h)), "entity-eat-entity");
  EXPECT_EQ(to_string(render(cells.cells[1], h)), "entity-eat-food");
  EXPECT_EQ(to_string(render(cells.cells[2], h)), "organism-eat-entity");
  EXPECT_EQ(to_string(render(cells.original(), h)), "person-eat-food");
  EXPECT_EQ(cells.row_labels, (std::vector<std::string>{"entity", "organism", "person"}));
  EXPECT_EQ(cells.col_labels, (std::vector<std::string>{"entity", "food"}));
}

TEST(AbstractionEvents, UnknownWordsGiveOneCell) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  Event e{"zxqw", "eat", "qqq"};
  auto cells = abstraction_events(ctx, e);
  ASSERT_EQ(cells.cells.size(), 1u);
  EXPECT_EQ(render(cells.original(), h), e);
  EXPECT_FALSE(cells.original().subject_synset.has_value());
}

TEST(AbstractionEvents, FilteredChainLengthTwo) {
  // person <- organism <- entity filtered at depth 2 gives (organism, person).
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm, filter_hierarchy(h, 2, std::nullopt));
  auto cells = abstraction_events(ctx, Event{"person", "breathe", "air"});
  EXPECT_EQ(cells.shape, (GridShape{2, 1}));
  EXPECT_EQ(to_string(render(cells.cells[0], h)), "organism-breathe-air");
  EXPECT_EQ(to_string(render(cells.cells[1], h)), "person-breathe-air");
}

TEST(AbstractionEvents, SenseMapDrivesChain) {
  auto h = parse(kSmall);
  SenseMap sm;
  sm.add("lady", Role::kSubject, SynsetId{"woman"});
  AbstractionContext ctx(h, sm);
  auto cells = abstraction_events(ctx, Event{"lady", "eat", "fruit"});
  EXPECT_EQ(cells.shape, (GridShape{4, 3}));
  // The original cell renders the sense-resolved event.
  EXPECT_EQ(to_string(render(cells.original(), h)), "woman-eat-fruit");
}

TEST(AbstractionEvents, CountIsProductOfChainLengths) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto recs = testing::random_dag(rng, 30);
    auto h = testing::hierarchy_from(recs);
    SenseMap sm;
    AbstractionContext ctx(h, sm);
    const auto& a = recs[rng() % recs.size()];
    const auto& b = recs[rng() % recs.size()];
    auto cells = abstraction_events(ctx, Event{a.lemma, "v", b.lemma});
    const auto m = shortest_chain(h, *resolve_sense(sm, h, a.lemma, Role::kSubject)).size();
    const auto n = shortest_chain(h, *resolve_sense(sm, h, b.lemma, Role::kObject)).size();
    EXPECT_EQ(cells.cells.size(), m * n);
  }
}

TEST(ScoreGrid, ConstantScorerGivesZeroGrid) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto g = score_grid(ConstantScorer(0.0), abstraction_events(ctx, Event{"woman", "eat", "fruit"}), h);
  EXPECT_EQ(g.rows, 4u);
  EXPECT_EQ(g.cols, 3u);
  for (double v : g.scores) EXPECT_EQ(v, 0.0);
}

TEST(ScoreGrid, SingleCellEqualsScorerOnEvent) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  testing::HashScorer s(9);
  Event e{"zxqw", "eat", "qqq"};
  auto g = score_grid(s, abstraction_events(ctx, e), h);
  ASSERT_EQ(g.scores.size(), 1u);
  EXPECT_EQ(g.scores[0], s.logit(e));
}

TEST(ScoreGrid, CellsMatchPerEventScores) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  testing::HashScorer s(1);
  auto cells = abstraction_events(ctx, Event{"woman", "eat", "fruit"});
  auto g = score_grid(s, cells, h, 4);
  for (std::size_t i = 0; i < cells.cells.size(); ++i) EXPECT_EQ(g.scores[i], s.logit(render(cells.cells[i], h)));
  EXPECT_EQ(g.scores, score_grid(s, cells, h, 1).scores);
}

class FailingScorer final : public Scorer {
 public:
  ScorerInfo info() const override { return {"failing", true, true}; }
  double logit(const Event& e) const override {
    if (e.subject == "organism" && e.object == "food") throw std::runtime_error("boom");
    return 0.0;
  }
};

TEST(ScoreGrid, FailureIdentifiesCell) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  try {
    score_grid(FailingScorer{}, abstraction_events(ctx, Event{"woman", "eat", "fruit"}), h);
    FAIL() << "expected ScoringError";
  } catch (const ScoringError& e) {
    EXPECT_NE(std::string(e.what()).find("cell (2, 2) [organism-eat-food]"), std::string::npos) << e.what();
  }
}

class NanScorer final : public Scorer {
 public:
  ScorerInfo info() const override { return {"nan", true, true}; }
  double logit(const Event&) const override { return std::nan(""); }
};

TEST(ScoreGrid, NonFiniteLogitRejected) {
  auto h = parse(kSmall);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  EXPECT_THROW(score_grid(NanScorer{}, abstraction_events(ctx, Event{"woman", "eat", "fruit"}), h), ScoringError);
}

TEST(GridWindows, Counts) {
  EXPECT_TRUE(grid_windows(testing::grid_from({{1.0}})).empty());
  EXPECT_EQ(grid_windows(testing::grid_from({{1}, {2}, {3}, {4}})).size(), 2u);
  EXPECT_EQ(grid_windows(testing::grid_from({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}})).size(), 6u);
}

TEST(GridWindows, CountFormulaMatchesEnumeration) {
  for (std::size_t m = 1; m <= 8; ++m)
    for (std::size_t n = 1; n <= 8; ++n) {
      std::vector<std::vector<double>> g(m, std::vector<double>(n, 0.0));
      std::size_t enumerated = 0;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) {
          if (r + 2 < m) ++enumerated;
          if (c + 2 < n) ++enumerated;
        }
      const std::size_t formula = m * (n > 2 ? n - 2 : 0) + n * (m > 2 ? m - 2 : 0);
      EXPECT_EQ(grid_windows(testing::grid_from(g)).size(), enumerated);
      EXPECT_EQ(enumerated, formula);
    }
}

TEST(GridWindows, ValuesFollowAxes) {
  auto w = grid_windows(testing::grid_from({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}}));
  EXPECT_EQ(w[0], (Window{1, 4, 7}));  // subject ascending, first object
  EXPECT_EQ(w[3], (Window{1, 2, 3}));  // object ascending, first subject
}

TEST(GridExport, RoundTrip) {
  auto g = testing::grid_from({{0.25, 0.5}, {0.125, 1.0}});
  g.row_labels = {"organism", "person"};
  g.col_labels = {"food", "fruit"};
  std::ostringstream os;
  write_grid(os, g, {"event=person-eat-fruit"});
  EXPECT_EQ(os.str(),
            "# event=person-eat-fruit\n"
            "subject\\object\tfood\tfruit\n"
            "organism\t0.250000\t0.500000\n"
            "person\t0.125000\t1.000000\n");
  std::istringstream in(os.str());
  auto back = parse_grid(in);
  EXPECT_EQ(back.scores, g.scores);
  EXPECT_EQ(back.row_labels, g.row_labels);
  EXPECT_EQ(back.col_labels, g.col_labels);
}

TEST(GridExport, MalformedRejected) {
  std::istringstream ragged("x\ta\tb\nr\t0.1\n");
  EXPECT_THROW(parse_grid(ragged), InputError);
  std::istringstream bad("x\ta\nr\tfoo\n");
  EXPECT_THROW(parse_grid(bad), InputError);
  std::istringstream empty("# nothing\n");
  EXPECT_THROW(parse_grid(empty), InputError);
}

}  // namespace
}  // namespace abx
