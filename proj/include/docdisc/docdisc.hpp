#pragma once

#include "docdisc/analysis_engine.hpp"
#include "docdisc/config.hpp"
#include "docdisc/emd.hpp"
#include "docdisc/error.hpp"
#include "docdisc/evaluator.hpp"
#include "docdisc/joint_crf.hpp"
#include "docdisc/linear_classifier.hpp"
#include "docdisc/mean_shift.hpp"
#include "docdisc/report.hpp"
#include "docdisc/synth_world.hpp"
#include "docdisc/text_pipeline.hpp"
#include "docdisc/track_model.hpp"
#include "docdisc/version.hpp"
