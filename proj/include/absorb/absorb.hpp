#pragma once

#include "absorb/config.hpp"
#include "absorb/controller.hpp"
#include "absorb/core.hpp"
#include "absorb/errors.hpp"
#include "absorb/io.hpp"
#include "absorb/observer.hpp"
#include "absorb/planar.hpp"
#include "absorb/predictor.hpp"
#include "absorb/simulator.hpp"
#include "absorb/verification.hpp"
#include "absorb/studies.hpp"
