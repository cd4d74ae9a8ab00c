#pragma once
#include <caspar/errors.hpp>
#include <caspar/ingest.hpp>
#include <caspar/io.hpp>
#include <caspar/linalg.hpp>
#include <caspar/parallel.hpp>
#include <caspar/rng.hpp>
#include <caspar/simulation.hpp>
#include <caspar/solvers.hpp>
#include <caspar/structure.hpp>
#include <caspar/tuning.hpp>
