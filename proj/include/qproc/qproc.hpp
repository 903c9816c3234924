#pragma once

#include <qproc/errors.hpp>
#include <qproc/format.hpp>
#include <qproc/limit_stats.hpp>
#include <qproc/offspring_law.hpp>
#include <qproc/parallel.hpp>
#include <qproc/progeny_moments.hpp>
#include <qproc/qprocess.hpp>
#include <qproc/random.hpp>
#include <qproc/series.hpp>
