#pragma once

#include "subdisc/alignment.hpp"
#include "subdisc/classifier.hpp"
#include "subdisc/dataset.hpp"
#include "subdisc/distance.hpp"
#include "subdisc/error.hpp"
#include "subdisc/gmm.hpp"
#include "subdisc/hierarchy.hpp"
#include "subdisc/hungarian.hpp"
#include "subdisc/io.hpp"
#include "subdisc/kmeans.hpp"
#include "subdisc/random.hpp"
#include "subdisc/synth.hpp"
