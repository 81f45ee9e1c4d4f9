#pragma once

#include "fixscope/ast.hpp"
#include "fixscope/autoencoder.hpp"
#include "fixscope/bow.hpp"
#include "fixscope/change_key.hpp"
#include "fixscope/classify.hpp"
#include "fixscope/clustering.hpp"
#include "fixscope/diff.hpp"
#include "fixscope/distance.hpp"
#include "fixscope/edit_script.hpp"
#include "fixscope/error.hpp"
#include "fixscope/evaluation.hpp"
#include "fixscope/matching.hpp"
#include "fixscope/minilang.hpp"
#include "fixscope/model.hpp"
#include "fixscope/model_io.hpp"
#include "fixscope/random.hpp"
#include "fixscope/server.hpp"
#include "fixscope/sweep.hpp"
#include "fixscope/synth.hpp"
#include "fixscope/tree_io.hpp"
