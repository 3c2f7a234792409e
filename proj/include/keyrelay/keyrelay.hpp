#pragma once

#include "keyrelay/special_functions.hpp"
#include "keyrelay/params.hpp"
#include "keyrelay/channel.hpp"
#include "keyrelay/rates.hpp"
#include "keyrelay/scheme.hpp"
#include "keyrelay/markov.hpp"
#include "keyrelay/parallel.hpp"
#include "keyrelay/montecarlo.hpp"
#include "keyrelay/config.hpp"
#include "keyrelay/experiments.hpp"
