#pragma once

#include "kamp/error.hpp"
#include "kamp/geometry.hpp"
#include "kamp/inference.hpp"
#include "kamp/kstat.hpp"
#include "kamp/moments.hpp"
#include "kamp/perm.hpp"
#include "kamp/random.hpp"
#include "kamp/simulate.hpp"
