#pragma once

#include <abx/abstraction.hpp>
#include <abx/common.hpp>
#include <abx/conceptmax.hpp>
#include <abx/corpus.hpp>
#include <abx/evaluate.hpp>
#include <abx/external.hpp>
#include <abx/heatmap.hpp>
#include <abx/lexicon.hpp>
#include <abx/metrics.hpp>
#include <abx/mlp.hpp>
#include <abx/ngram.hpp>
#include <abx/scorer.hpp>
