#pragma once

#include "dephasing/error.hpp"
#include "dephasing/spectral_transform.hpp"
#include "dephasing/bath.hpp"
#include "dephasing/mode_expansion.hpp"
#include "dephasing/schedule.hpp"
#include "dephasing/decoherence.hpp"
#include "dephasing/dynamics.hpp"
#include "dephasing/fitting.hpp"
#include "dephasing/analysis.hpp"
#include "dephasing/io.hpp"
#include "dephasing/config.hpp"
#include "dephasing/runner.hpp"
