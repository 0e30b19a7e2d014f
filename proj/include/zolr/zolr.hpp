#pragma once

#include "zolr/common.hpp"
#include "zolr/dense.hpp"
#include "zolr/vae.hpp"
#include "zolr/fixed_point.hpp"
#include "zolr/zo.hpp"
#include "zolr/regret.hpp"
#include "zolr/eval.hpp"
#include "zolr/lab.hpp"
#include "zolr/extractor.hpp"
#include "zolr/regress.hpp"
#include "zolr/experiment.hpp"
#include "zolr/io.hpp"
#include "zolr/datasets.hpp"
#include "zolr/monitor.hpp"
#include "zolr/report.hpp"
#include "zolr/bench.hpp"
