#pragma once

#include "hmdp/common.hpp"
#include "hmdp/random.hpp"
#include "hmdp/mdp.hpp"
#include "hmdp/linear.hpp"
#include "hmdp/solve.hpp"
#include "hmdp/mdp_io.hpp"
#include "hmdp/decomposition.hpp"
#include "hmdp/macro_model.hpp"
#include "hmdp/macro_generation.hpp"
#include "hmdp/hierarchy.hpp"
#include "hmdp/maze.hpp"
#include "hmdp/bench.hpp"
