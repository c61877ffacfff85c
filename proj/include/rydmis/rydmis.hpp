#pragma once

#include "rydmis/bounds.hpp"
#include "rydmis/dataset.hpp"
#include "rydmis/error.hpp"
#include "rydmis/evolution.hpp"
#include "rydmis/graphs.hpp"
#include "rydmis/hamiltonian.hpp"
#include "rydmis/io.hpp"
#include "rydmis/optimizer.hpp"
#include "rydmis/parallel.hpp"
#include "rydmis/schedules.hpp"
