#pragma once

// Umbrella header.

#include "jumpdiff/alignment.hpp"
#include "jumpdiff/config.hpp"
#include "jumpdiff/corpus.hpp"
#include "jumpdiff/errors.hpp"
#include "jumpdiff/forward.hpp"
#include "jumpdiff/io.hpp"
#include "jumpdiff/losses.hpp"
#include "jumpdiff/metrics.hpp"
#include "jumpdiff/models.hpp"
#include "jumpdiff/nets.hpp"
#include "jumpdiff/rng.hpp"
#include "jumpdiff/sampler.hpp"
#include "jumpdiff/schedule.hpp"
#include "jumpdiff/score.hpp"
#include "jumpdiff/spectrogram.hpp"
#include "jumpdiff/training.hpp"
