#pragma once

#include "formdom/bundle.hpp"
#include "formdom/config.hpp"
#include "formdom/forms.hpp"
#include "formdom/graph.hpp"
#include "formdom/hash.hpp"
#include "formdom/metrics.hpp"
#include "formdom/parallel.hpp"
#include "formdom/probe.hpp"
#include "formdom/random.hpp"
#include "formdom/report.hpp"
#include "formdom/semigroup.hpp"
#include "formdom/version.hpp"
