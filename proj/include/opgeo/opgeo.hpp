#pragma once

#include "opgeo/error.hpp"
#include "opgeo/linalg.hpp"
#include "opgeo/algebra.hpp"
#include "opgeo/classify.hpp"
#include "opgeo/harness.hpp"
#include "opgeo/report.hpp"
