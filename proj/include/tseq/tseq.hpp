#pragma once

// Time-dependent event sequence prediction: time-mask and event-time joint
// embeddings over an LSTM next-event predictor, with next-duration
// regularization, training, evaluation, and synthetic benchmark tooling.

#include "tseq/checkpoint.hpp"
#include "tseq/common.hpp"
#include "tseq/dataio.hpp"
#include "tseq/gradcheck.hpp"
#include "tseq/kvfile.hpp"
#include "tseq/losses.hpp"
#include "tseq/mat.hpp"
#include "tseq/metrics.hpp"
#include "tseq/model.hpp"
#include "tseq/numerics.hpp"
#include "tseq/params.hpp"
#include "tseq/rng.hpp"
#include "tseq/runconfig.hpp"
#include "tseq/synthetic.hpp"
#include "tseq/tape.hpp"
#include "tseq/timerep.hpp"
#include "tseq/trainer.hpp"
