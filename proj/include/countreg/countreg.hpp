#pragma once

#include "countreg/dataset.hpp"
#include "countreg/design.hpp"
#include "countreg/diagnostics.hpp"
#include "countreg/distributions.hpp"
#include "countreg/errors.hpp"
#include "countreg/fit.hpp"
#include "countreg/likelihood.hpp"
#include "countreg/optimizer.hpp"
#include "countreg/report.hpp"
#include "countreg/simulation.hpp"
