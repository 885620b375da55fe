// abx: command-line front end for abstraction-consistency tooling.
//
// Exit codes: 0 success, 1 internal error, 2 input error, 3 external-scorer
// protocol error.

#include <abx/abx.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInput = 2;
constexpr int kExitProtocol = 3;

struct Thresholds {
  std::uint64_t min_word_count = 1000;
  std::uint64_t min_triple_count = 2;
  std::uint64_t cap = 1000;

  abx::FilterConfig config() const { return {min_triple_count, min_word_count, cap}; }
};

void add_thresholds(CLI::App* cmd, Thresholds& t) {
  cmd->add_option("--min-word-count", t.min_word_count, "Minimum positional word count")->capture_default_str();
  cmd->add_option("--min-triple-count", t.min_triple_count, "Minimum event count")->capture_default_str();
  cmd->add_option("--cap", t.cap, "Per-event count cap (0 disables)")->capture_default_str();
}

struct HierarchyArgs {
  std::string hierarchy;
  std::string sense_map;
  std::string filter_corpus;
  int min_depth = 4;
};

void add_hierarchy_args(CLI::App* cmd, HierarchyArgs& a, bool required) {
  auto* h = cmd->add_option("--hierarchy", a.hierarchy, "Hypernym edge-list file")->check(CLI::ExistingFile);
  if (required) h->required();
  cmd->add_option("--sense-map", a.sense_map, "word<TAB>role<TAB>synset file")->check(CLI::ExistingFile);
  cmd->add_option("--filter-corpus", a.filter_corpus,
                  "Corpus whose vocabulary restricts enumerable synsets")
      ->check(CLI::ExistingFile);
  cmd->add_option("--min-depth", a.min_depth, "Minimum depth of enumerable synsets")->capture_default_str();
}

// Loaded hierarchy state; owns what AbstractionContext refers to.
struct Lexicon {
  abx::Hierarchy hierarchy;
  abx::SenseMap senses;
  std::optional<abx::AbstractionContext> context;

  static std::unique_ptr<Lexicon> load(const HierarchyArgs& a) {
    if (a.hierarchy.empty()) return nullptr;
    auto lx = std::make_unique<Lexicon>();
    lx->hierarchy = abx::load_hierarchy(a.hierarchy);
    if (!a.sense_map.empty()) lx->senses = abx::load_sense_map(a.sense_map, lx->hierarchy);
    std::optional<std::unordered_set<std::string>> vocab;
    if (!a.filter_corpus.empty()) vocab = abx::load_corpus(a.filter_corpus).vocabulary();
    lx->context.emplace(lx->hierarchy, lx->senses, abx::filter_hierarchy(lx->hierarchy, a.min_depth, vocab));
    return lx;
  }
};

std::shared_ptr<const abx::Scorer> make_scorer(const std::string& spec) {
  const auto colon = spec.find(':');
  const std::string kind = spec.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : spec.substr(colon + 1);
  if (kind == "constant") {
    double v = 0.0;
    if (!arg.empty()) {
      char* end = nullptr;
      v = std::strtod(arg.c_str(), &end);
      if (*end != '\0' || !std::isfinite(v)) throw abx::InputError("bad constant scorer value: " + arg);
    }
    return std::make_shared<abx::ConstantScorer>(v);
  }
  if (arg.empty()) throw abx::InputError("scorer '" + kind + "' needs an argument (" + kind + ":<...>)");
  if (kind == "ngram")
    return std::make_shared<abx::NGramScorer>(std::make_shared<abx::TripleCorpus>(abx::load_corpus(arg)));
  if (kind == "mlp") return std::make_shared<abx::MlpScorer>(abx::load_model(arg));
  if (kind == "external") return abx::ExternalScorer::spawn(arg);
  throw abx::InputError("unknown scorer '" + spec + "' (expected constant:<v>, ngram:<corpus>, mlp:<model>, external:<cmd>)");
}

std::shared_ptr<const abx::Scorer> wrap(std::shared_ptr<const abx::Scorer> base, bool conceptmax,
                                        const Lexicon* lx, std::uint64_t seed) {
  if (!conceptmax) return base;
  if (!lx) throw abx::InputError("--conceptmax needs --hierarchy");
  return std::make_shared<abx::ConceptMaxScorer>(std::move(base), *lx->context,
                                                 abx::AggregationMode::kInference,
                                                 abx::ConceptMaxScorer::kDefaultTrainSamples, seed);
}

std::vector<abx::Event> load_events(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw abx::InputError("cannot open event file: " + path);
  std::vector<abx::Event> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = abx::strip_cr(line);
    if (sv.empty() || sv.front() == '#') continue;
    auto f = abx::split(sv, '\t');
    if (f.size() < 3)
      throw abx::InputError(path + ":" + std::to_string(lineno) + ": expected subject<TAB>verb<TAB>object");
    out.push_back(abx::make_event(f[0], f[1], f[2]));
  }
  return out;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw abx::InputError("cannot write " + path);
  return out;
}

std::string grid_name(std::size_t i, const abx::Event& e, const char* ext) {
  return abx::format("%04zu_%s.%s", i + 1, abx::to_string(e).c_str(), ext);
}

void export_grid(const fs::path& dir, std::size_t i, const abx::Event& e, const abx::AbstractionGrid& g,
                 const std::string& scorer, std::uint64_t seed, bool svg) {
  fs::create_directories(dir);
  auto out = open_out((dir / grid_name(i, e, "tsv")).string());
  abx::write_grid(out, g,
                  {"event=" + abx::to_string(e), "scorer=" + scorer, "seed=" + std::to_string(seed),
                   "values=probability"});
  if (svg) {
    auto s = open_out((dir / grid_name(i, e, "svg")).string());
    abx::render_heatmap(s, g);
  }
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
  CLI::App app{"abx: conceptual-abstraction consistency for event plausibility scorers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "abx 1.0.0");

  std::uint64_t seed = 0;
  unsigned threads = 1;

  // extract
  auto* extract = app.add_subcommand("extract", "CoNLL-U parses -> filtered triple corpus");
  std::string conllu, corpus_out;
  bool skip_malformed = false;
  Thresholds ext_t;
  extract->add_option("--input", conllu, "CoNLL-U file")->required()->check(CLI::ExistingFile);
  extract->add_option("--output", corpus_out, "Corpus file to write")->required();
  extract->add_flag("--skip-malformed", skip_malformed, "Drop malformed sentences instead of failing");
  add_thresholds(extract, ext_t);

  // filter
  auto* filter = app.add_subcommand("filter", "Re-apply frequency filters to a corpus file");
  std::string filter_in, filter_out;
  Thresholds flt_t;
  filter->add_option("--input", filter_in, "Corpus file")->required()->check(CLI::ExistingFile);
  filter->add_option("--output", filter_out, "Corpus file to write")->required();
  add_thresholds(filter, flt_t);

  // train
  auto* train = app.add_subcommand("train", "Train the embedding MLP scorer on pseudo-disambiguation pairs");
  std::string train_corpus, model_out;
  abx::TrainConfig cfg;
  bool train_cm = false;
  std::size_t train_samples = abx::ConceptMaxScorer::kDefaultTrainSamples;
  HierarchyArgs train_h;
  train->add_option("--corpus", train_corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  train->add_option("--output", model_out, "Model file to write")->required();
  train->add_option("--epochs", cfg.epochs)->capture_default_str();
  train->add_option("--lr", cfg.learning_rate)->capture_default_str();
  train->add_option("--batch-size", cfg.batch_size)->capture_default_str();
  train->add_option("--warmup", cfg.warmup_steps, "Linear warm-up steps")->capture_default_str();
  train->add_option("--dim", cfg.dim, "Embedding dimension")->capture_default_str();
  train->add_option("--hidden", cfg.hidden, "Hidden units")->capture_default_str();
  train->add_option("--beta1", cfg.beta1)->capture_default_str();
  train->add_option("--beta2", cfg.beta2)->capture_default_str();
  train->add_flag("--conceptmax", train_cm, "Train through the soft maximum over abstractions");
  train->add_option("--train-samples", train_samples, "Abstractions sampled per event")->capture_default_str();
  add_hierarchy_args(train, train_h, false);

  // score
  auto* score = app.add_subcommand("score", "Score events with a scorer");
  std::string score_spec, score_in, score_out;
  bool score_cm = false;
  HierarchyArgs score_h;
  score->add_option("--scorer", score_spec, "constant:<v> | ngram:<corpus> | mlp:<model> | external:<cmd>")->required();
  score->add_option("--input", score_in, "subject<TAB>verb<TAB>object file")->required()->check(CLI::ExistingFile);
  score->add_option("--output", score_out, "Output file")->required();
  score->add_flag("--conceptmax", score_cm, "Wrap the scorer in ConceptMax (hard max)");
  add_hierarchy_args(score, score_h, false);

  // grid
  auto* grid = app.add_subcommand("grid", "Export abstraction grids for events");
  std::string grid_spec, grid_in, grid_dir;
  bool grid_cm = false, grid_svg = false;
  HierarchyArgs grid_h;
  grid->add_option("--scorer", grid_spec)->required();
  grid->add_option("--input", grid_in, "subject<TAB>verb<TAB>object file")->required()->check(CLI::ExistingFile);
  grid->add_option("--output-dir", grid_dir)->required();
  grid->add_flag("--conceptmax", grid_cm);
  grid->add_flag("--heatmap", grid_svg, "Also write an SVG per grid");
  add_hierarchy_args(grid, grid_h, true);

  // eval
  auto* eval = app.add_subcommand("eval", "AUC, CCD and LER over a labeled evaluation set");
  std::string eval_spec, eval_in, report_out, kv_out, eval_grid_dir;
  bool eval_cm = false, eval_svg = false;
  HierarchyArgs eval_h;
  eval->add_option("--scorer", eval_spec)->required();
  eval->add_option("--eval", eval_in, "subject<TAB>verb<TAB>object<TAB>label file")->required()->check(CLI::ExistingFile);
  eval->add_option("--output", report_out, "Human-readable report (default: stdout)");
  eval->add_option("--kv", kv_out, "Machine-readable key/value report");
  eval->add_option("--grid-dir", eval_grid_dir, "Directory for per-event grid exports");
  eval->add_flag("--heatmap", eval_svg, "Also write an SVG per grid (needs --grid-dir)");
  eval->add_flag("--conceptmax", eval_cm);
  add_hierarchy_args(eval, eval_h, true);

  // heatmap
  auto* heatmap = app.add_subcommand("heatmap", "Render a grid export as SVG");
  std::string heat_in, heat_out;
  heatmap->add_option("--input", heat_in, "Grid export")->required()->check(CLI::ExistingFile);
  heatmap->add_option("--output", heat_out, "SVG file")->required();

  for (auto* c : {extract, filter, train, score, grid, eval, heatmap}) {
    c->add_option("--seed", seed, "Seed for all randomness")->capture_default_str();
    c->add_option("--threads", threads, "Worker threads for grid scoring")->capture_default_str();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }

  if (*extract) {
    std::ifstream in(conllu);
    if (!in) throw abx::InputError("cannot open " + conllu);
    abx::ExtractionStats stats;
    auto events = abx::extract_triples(in, &stats);
    if (stats.malformed && !skip_malformed)
      throw abx::InputError(conllu + ":" + std::to_string(stats.malformed_lines.front()) +
                            ": malformed CoNLL-U record");
    auto corpus = abx::apply_filters(events, ext_t.config());
    auto out = open_out(corpus_out);
    abx::write_corpus(out, corpus);
    std::cerr << "sentences=" << stats.sentences << " extracted=" << stats.extracted
              << " skipped=" << stats.skipped << " malformed=" << stats.malformed
              << " events=" << corpus.counts().size() << " triples=" << corpus.total() << '\n';
    return kExitOk;
  }

  if (*filter) {
    auto corpus = abx::apply_filters(abx::load_corpus(filter_in), flt_t.config());
    auto out = open_out(filter_out);
    abx::write_corpus(out, corpus);
    return kExitOk;
  }

  if (*train) {
    cfg.seed = seed;
    cfg.validate();
    auto corpus = abx::load_corpus(train_corpus);
    abx::TrainingSetStats ts;
    auto pairs = abx::build_training_set(corpus, seed, &ts);
    std::unique_ptr<Lexicon> lx;
    std::optional<abx::ConceptMaxTraining> cm;
    if (train_cm) {
      if (train_h.hierarchy.empty()) throw abx::InputError("--conceptmax needs --hierarchy");
      lx = Lexicon::load(train_h);
      cm = abx::ConceptMaxTraining{*lx->context, train_samples};
    }
    std::cout << "# seed=" << seed << " pairs=" << ts.emitted << " skipped=" << ts.skipped << '\n';
    auto result = abx::train(pairs, cfg, cm ? &*cm : nullptr, [](std::size_t epoch, double loss) {
      std::cout << "epoch " << epoch + 1 << " loss " << abx::format("%.6f", loss) << '\n';
    });
    abx::save_model(result.model, model_out);
    return kExitOk;
  }

  if (*score) {
    auto lx = Lexicon::load(score_h);
    auto scorer = wrap(make_scorer(score_spec), score_cm, lx.get(), seed);
    auto events = load_events(score_in);
    auto z = scorer->logits(events);
    auto out = open_out(score_out);
    out << "# scorer=" << scorer->info().name << " seed=" << seed << '\n';
    for (std::size_t i = 0; i < events.size(); ++i)
      out << events[i].subject << '\t' << events[i].verb << '\t' << events[i].object << '\t'
          << abx::format_double(z[i]) << '\t' << abx::format_double(abx::logistic(z[i])) << '\n';
    return kExitOk;
  }

  if (*grid) {
    auto lx = Lexicon::load(grid_h);
    auto scorer = wrap(make_scorer(grid_spec), grid_cm, lx.get(), seed);
    auto events = load_events(grid_in);
    for (std::size_t i = 0; i < events.size(); ++i) {
      auto cells = abx::abstraction_events(*lx->context, events[i]);
      auto g = abx::to_probabilities(abx::score_grid(*scorer, cells, lx->hierarchy, threads));
      export_grid(grid_dir, i, events[i], g, scorer->info().name, seed, grid_svg);
    }
    return kExitOk;
  }

  if (*eval) {
    auto lx = Lexicon::load(eval_h);
    auto scorer = wrap(make_scorer(eval_spec), eval_cm, lx.get(), seed);
    auto items = abx::load_labeled_events(eval_in);
    auto report = abx::evaluate(*scorer, items, *lx->context, seed, threads);
    if (report_out.empty()) {
      abx::write_report_text(std::cout, report);
    } else {
      auto out = open_out(report_out);
      abx::write_report_text(out, report);
    }
    if (!kv_out.empty()) {
      auto out = open_out(kv_out);
      abx::write_report_kv(out, report);
    }
    if (!eval_grid_dir.empty())
      for (std::size_t i = 0; i < items.size(); ++i)
        export_grid(eval_grid_dir, i, items[i].event, report.grids[i], report.scorer, seed, eval_svg);
    return kExitOk;
  }

  if (*heatmap) {
    auto g = abx::load_grid(heat_in);
    auto out = open_out(heat_out);
    abx::render_heatmap(out, g);
    return kExitOk;
  }
  return kExitInternal;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const abx::ProtocolError& e) {
    std::cerr << "abx: protocol error: " << e.what() << '\n';
    return kExitProtocol;
  } catch (const abx::InputError& e) {
    std::cerr << "abx: input error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "abx: error: " << e.what() << '\n';
    return kExitInternal;
  }
}
