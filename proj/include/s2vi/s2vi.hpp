#pragma once

#include "s2vi/errors.hpp"
#include "s2vi/geometry.hpp"
#include "s2vi/model.hpp"
#include "s2vi/continuous.hpp"
#include "s2vi/integrator.hpp"
#include "s2vi/zoo.hpp"
#include "s2vi/diagnostics.hpp"
#include "s2vi/scenario.hpp"
#include "s2vi/io.hpp"
#include "s2vi/runner.hpp"
