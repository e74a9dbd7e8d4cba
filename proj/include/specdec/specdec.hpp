#pragma once

// Umbrella header for the decoding engine (harness headers not included).

#include "specdec/distribution.hpp"
#include "specdec/error.hpp"
#include "specdec/language_model.hpp"
#include "specdec/metrics.hpp"
#include "specdec/ngram.hpp"
#include "specdec/spec_tree.hpp"
#include "specdec/verifier.hpp"
#include "specdec/vocabulary.hpp"
