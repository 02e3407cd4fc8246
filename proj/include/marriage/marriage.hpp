#ifndef MARRIAGE_MARRIAGE_HPP
#define MARRIAGE_MARRIAGE_HPP

#include "errors.hpp"
#include "fpk.hpp"
#include "grid.hpp"
#include "hjb.hpp"
#include "mfg.hpp"
#include "model.hpp"
#include "pmp.hpp"
#include "policy.hpp"
#include "simulate.hpp"

#endif
