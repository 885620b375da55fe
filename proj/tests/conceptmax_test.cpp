#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace abx {
namespace {

Hierarchy parse(const std::string& text) {
  std::istringstream in(text);
  return parse_hierarchy(in);
}

// entity > organism > person ; entity > food
const char* kTwoByTwo =
    "entity\tentity\t\n"
    "organism\torganism\tentity\n"
    "person\tperson\torganism\n"
    "food\tfood\tentity\n";

TEST(ConceptMax, InferenceTakesGridMaximum) {
  // logit grid [[0.2, -1], [3, 0.5]]
  auto h = parse(
      "entity\tentity\t\n"
      "person\tperson\tentity\n"
      "food\tfood\tentity\n");
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto base = std::make_shared<testing::TableScorer>(std::map<Event, double>{
      {{"entity", "eat", "entity"}, 0.2},
      {{"entity", "eat", "food"}, -1.0},
      {{"person", "eat", "entity"}, 3.0},
      {{"person", "eat", "food"}, 0.5}});
  ConceptMaxScorer cm(base, ctx);
  EXPECT_EQ(cm.logit({"person", "eat", "food"}), 3.0);
  EXPECT_NEAR(cm.plausibility({"person", "eat", "food"}), logistic(3.0), 1e-15);
}

TEST(ConceptMax, SingleCellIsIdentity) {
  auto h = parse(kTwoByTwo);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto base = std::make_shared<testing::HashScorer>(4);
  ConceptMaxScorer inf(base, ctx);
  ConceptMaxScorer tr(base, ctx, AggregationMode::kTrain);
  const Event e{"unknownword", "eat", "alsounknown"};
  EXPECT_EQ(inf.logit(e), base->logit(e));
  EXPECT_EQ(tr.logit(e), base->logit(e));
}

TEST(LogSumExp, Examples) {
  EXPECT_NEAR(log_sum_exp(std::vector<double>{0.0, 0.0}), 0.6931471805599453, 1e-15);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{1000.0, 1000.0}), 1000.0 + std::log(2.0), 1e-9);
  EXPECT_NEAR(log_sum_exp(std::vector<double>{-1000.0, -1000.0}), -1000.0 + std::log(2.0), 1e-9);
  EXPECT_EQ(log_sum_exp(std::vector<double>{2.5}), 2.5);
  EXPECT_TRUE(std::isinf(log_sum_exp(std::vector<double>{})));
}

TEST(LogSumExp, BoundsAgainstMax) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-50, 50);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> z(1 + rng() % 6);
    for (auto& v : z) v = u(rng);
    const double mx = *std::max_element(z.begin(), z.end());
    const double l = log_sum_exp(z);
    EXPECT_GE(l, mx);
    EXPECT_LE(l, mx + std::log(static_cast<double>(z.size())) + 1e-12);
  }
}

TEST(SampleTrainingCells, OriginalLastAndDistinct) {
  Rng rng(7);
  for (std::size_t n = 1; n <= 12; ++n)
    for (int trial = 0; trial < 50; ++trial) {
      auto picked = sample_training_cells(n, 3, rng);
      EXPECT_EQ(picked.size(), std::min<std::size_t>(n, 4));
      EXPECT_EQ(picked.back(), n - 1);
      std::set<std::size_t> uniq(picked.begin(), picked.end());
      EXPECT_EQ(uniq.size(), picked.size());
      for (auto i : picked) EXPECT_LT(i, n);
    }
}

TEST(SampleTrainingCells, UniformOverNonOriginal) {
  Rng rng(9);
  std::array<int, 5> freq{};
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    auto picked = sample_training_cells(6, 1, rng);
    ++freq[picked[0]];
  }
  for (int f : freq) EXPECT_NEAR(static_cast<double>(f) / n, 0.2, 0.015);
}

TEST(ConceptMax, TrainModeIsSeededLogSumExp) {
  auto h = parse(kTwoByTwo);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto base = std::make_shared<testing::HashScorer>(2);
  const Event e{"person", "eat", "food"};
  ConceptMaxScorer a(base, ctx, AggregationMode::kTrain, 3, 5);
  ConceptMaxScorer b(base, ctx, AggregationMode::kTrain, 3, 5);
  EXPECT_EQ(a.logit(e), b.logit(e));

  auto cells = abstraction_events(ctx, e);
  Rng rng(event_seed(5, e));
  std::vector<double> z;
  for (auto i : sample_training_cells(cells.cells.size(), 3, rng)) z.push_back(base->logit(render(cells.cells[i], h)));
  double oracle_max = *std::max_element(z.begin(), z.end());
  double sum = 0;
  for (double v : z) sum += std::exp(v - oracle_max);
  EXPECT_NEAR(a.logit(e), oracle_max + std::log(sum), 1e-12);
  // LSE over k + 1 cells bounds the original from above.
  EXPECT_GE(a.logit(e), base->logit(e));
}

TEST(ConceptMax, BatchedMatchesSingle) {
  std::mt19937_64 rng(31);
  auto recs = testing::random_dag(rng, 40, 25);
  auto h = testing::hierarchy_from(recs);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto base = std::make_shared<testing::HashScorer>(8);
  for (auto mode : {AggregationMode::kInference, AggregationMode::kTrain}) {
    ConceptMaxScorer cm(base, ctx, mode, 3, 17);
    std::vector<Event> batch;
    for (int i = 0; i < 30; ++i)
      batch.push_back({"w" + std::to_string(rng() % 25), "v", "w" + std::to_string(rng() % 25)});
    auto z = cm.logits(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) EXPECT_EQ(z[i], cm.logit(batch[i]));
  }
}

TEST(ConceptMax, NestedGridMonotone) {
  // A cell's ConceptMax score never exceeds the score of any cell below or
  // to the right of it, since its sub-grid is contained in theirs.
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto recs = testing::random_dag(rng, 30);
    auto h = testing::hierarchy_from(recs);
    SenseMap sm;
    AbstractionContext ctx(h, sm);
    auto base = std::make_shared<testing::HashScorer>(trial);
    ConceptMaxScorer cm(base, ctx);
    const auto& a = recs[rng() % recs.size()];
    const auto& b = recs[rng() % recs.size()];
    auto g = score_grid(cm, abstraction_events(ctx, Event{a.lemma, "v", b.lemma}), h);
    for (std::size_t r = 0; r < g.rows; ++r)
      for (std::size_t c = 0; c < g.cols; ++c) {
        if (r + 1 < g.rows) {
          EXPECT_LE(g.at(r, c), g.at(r + 1, c));
        }
        if (c + 1 < g.cols) {
          EXPECT_LE(g.at(r, c), g.at(r, c + 1));
        }
      }
    EXPECT_EQ(g.scores.back(), cm.logit({a.lemma, "v", b.lemma}));
  }
}

TEST(ConceptMax, GridIsPrefixMaximumOfBase) {
  std::mt19937_64 rng(44);
  auto recs = testing::random_dag(rng, 50);
  auto h = testing::hierarchy_from(recs);
  SenseMap sm;
  AbstractionContext ctx(h, sm);
  auto base = std::make_shared<testing::HashScorer>(3);
  ConceptMaxScorer cm(base, ctx);
  for (int trial = 0; trial < 20; ++trial) {
    const Event e{recs[rng() % recs.size()].lemma, "v", recs[rng() % recs.size()].lemma};
    auto cells = abstraction_events(ctx, e);
    auto raw = score_grid(*base, cells, h);
    auto wrapped = score_grid(cm, cells, h);
    for (std::size_t r = 0; r < raw.rows; ++r)
      for (std::size_t c = 0; c < raw.cols; ++c) {
        double m = -INFINITY;
        for (std::size_t i = 0; i <= r; ++i)
          for (std::size_t j = 0; j <= c; ++j) m = std::max(m, raw.at(i, j));
        EXPECT_EQ(wrapped.at(r, c), m);
      }
  }
}

TEST(ConceptMax, ZeroLocalExtremumRate) {
  std::mt19937_64 rng(77);
  std::vector<AbstractionGrid> grids;
  for (int trial = 0; trial < 40; ++trial) {
    auto recs = testing::random_dag(rng, 40);
    auto h = testing::hierarchy_from(recs);
    SenseMap sm;
    AbstractionContext ctx(h, sm);
    ConceptMaxScorer cm(std::make_shared<testing::HashScorer>(trial, 6.0), ctx);
    for (int k = 0; k < 5; ++k) {
      const Event e{recs[rng() % recs.size()].lemma, "v", recs[rng() % recs.size()].lemma};
      grids.push_back(to_probabilities(score_grid(cm, abstraction_events(ctx, e), h)));
    }
  }
  auto r = consistency(grids);
  EXPECT_GT(r.window_count, 0u);
  EXPECT_EQ(r.ler, 0.0);
}

}  // namespace
}  // namespace abx
