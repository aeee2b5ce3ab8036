#pragma once

// Umbrella header: curriculum-hardened episodic training for few-shot node
// classification on graphs, plus the synthetic benchmark and experiment
// tooling around it.

#include "cpt/curriculum.hpp"
#include "cpt/data_io.hpp"
#include "cpt/encoder.hpp"
#include "cpt/episode.hpp"
#include "cpt/error.hpp"
#include "cpt/eval.hpp"
#include "cpt/experiment.hpp"
#include "cpt/format.hpp"
#include "cpt/grad_check.hpp"
#include "cpt/graph.hpp"
#include "cpt/learner.hpp"
#include "cpt/matrix.hpp"
#include "cpt/meta.hpp"
#include "cpt/rng.hpp"
#include "cpt/trainer.hpp"
