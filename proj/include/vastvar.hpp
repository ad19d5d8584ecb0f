#pragma once

#include "vastvar/analytics.hpp"
#include "vastvar/common.hpp"
#include "vastvar/config.hpp"
#include "vastvar/data.hpp"
#include "vastvar/girf.hpp"
#include "vastvar/identification.hpp"
#include "vastvar/io.hpp"
#include "vastvar/minnesota.hpp"
#include "vastvar/niw.hpp"
#include "vastvar/parallel.hpp"
#include "vastvar/pipeline.hpp"
#include "vastvar/rng.hpp"
#include "vastvar/sampler.hpp"
#include "vastvar/synthetic.hpp"
#include "vastvar/transition.hpp"
