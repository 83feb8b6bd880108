#pragma once

#include "dylab/errors.hpp"
#include "dylab/report.hpp"
#include "dylab/rotation.hpp"
#include "dylab/circle_lift.hpp"
#include "dylab/circle.hpp"
#include "dylab/hyperbolic.hpp"
#include "dylab/band.hpp"
#include "dylab/qicurve.hpp"
#include "dylab/germ.hpp"
#include "dylab/holonomy.hpp"
#include "dylab/runner.hpp"
