#pragma once

#include "answers.hpp"
#include "data.hpp"
#include "error.hpp"
#include "losses.hpp"
#include "metric.hpp"
#include "synth.hpp"
#include "trainer.hpp"
