#pragma once

#include "rfsad/error.hpp"
#include "rfsad/small_matrix.hpp"
#include "rfsad/special_functions.hpp"
