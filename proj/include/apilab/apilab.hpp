#pragma once

#include "apilab/algorithms.hpp"
#include "apilab/approx_greedy.hpp"
#include "apilab/bellman.hpp"
#include "apilab/bounds.hpp"
#include "apilab/concentrability.hpp"
#include "apilab/errors.hpp"
#include "apilab/garnet.hpp"
#include "apilab/mdp.hpp"
#include "apilab/mdp_io.hpp"
#include "apilab/report_io.hpp"
#include "apilab/rng.hpp"
#include "apilab/svg.hpp"
#include "apilab/sweep.hpp"
#include "apilab/trace_io.hpp"
