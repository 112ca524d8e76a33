#pragma once

#include "dnls/attractor.hpp"
#include "dnls/dynamics.hpp"
#include "dnls/errors.hpp"
#include "dnls/lattice.hpp"
#include "dnls/rng.hpp"
#include "dnls/stationary.hpp"
#include "dnls/tridiag.hpp"
