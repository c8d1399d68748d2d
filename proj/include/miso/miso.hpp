#pragma once

#include "miso/linalg.hpp"
#include "miso/dataset.hpp"
#include "miso/terms.hpp"
#include "miso/surrogates.hpp"
#include "miso/problems.hpp"
#include "miso/solvers.hpp"
#include "miso/certify.hpp"
#include "miso/io.hpp"
#include "miso/datagen.hpp"
#include "miso/experiment.hpp"
