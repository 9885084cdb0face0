#pragma once

#include "confspec/grid.hpp"
#include "confspec/geometry.hpp"
#include "confspec/dirac.hpp"
#include "confspec/opfunc.hpp"
#include "confspec/symbolprobe.hpp"
#include "confspec/conformal.hpp"
#include "confspec/io.hpp"
#include "confspec/scenario.hpp"
