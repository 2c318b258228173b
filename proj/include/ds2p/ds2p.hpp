#pragma once
// Convenience header pulling in the whole library.
#include <ds2p/core.hpp>
#include <ds2p/rng.hpp>
#include <ds2p/genmodel.hpp>
#include <ds2p/solvers.hpp>
#include <ds2p/altmin.hpp>
#include <ds2p/deepfact.hpp>
#include <ds2p/analysis.hpp>
#include <ds2p/io.hpp>
