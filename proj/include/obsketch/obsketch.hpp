#pragma once

#include "obsketch/errors.hpp"
#include "obsketch/hash.hpp"
#include "obsketch/sketch.hpp"
#include "obsketch/sketch_io.hpp"
#include "obsketch/objectives.hpp"
#include "obsketch/solvers.hpp"
#include "obsketch/complexity.hpp"
#include "obsketch/baselines.hpp"
#include "obsketch/data_io.hpp"
#include "obsketch/probes.hpp"
#include "obsketch/experiment.hpp"
