#pragma once

#include "annforge/codesign.hpp"
#include "annforge/core.hpp"
#include "annforge/engine.hpp"
#include "annforge/index.hpp"
#include "annforge/io.hpp"
#include "annforge/quantizer.hpp"
#include "annforge/scaleout.hpp"
#include "annforge/selection.hpp"
