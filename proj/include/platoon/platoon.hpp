#pragma once

#include "platoon/core.hpp"
#include "platoon/dynamics.hpp"
#include "platoon/config.hpp"
#include "platoon/rng.hpp"
#include "platoon/sensing.hpp"
#include "platoon/observer.hpp"
#include "platoon/detector.hpp"
#include "platoon/controller.hpp"
#include "platoon/harness.hpp"
#include "platoon/io.hpp"
