#pragma once

#include "lindstedt/analysis.hpp"
#include "lindstedt/diophantine.hpp"
#include "lindstedt/error.hpp"
#include "lindstedt/io.hpp"
#include "lindstedt/models.hpp"
#include "lindstedt/parallel.hpp"
#include "lindstedt/series.hpp"
#include "lindstedt/trees.hpp"
