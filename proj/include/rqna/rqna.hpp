#pragma once

#include "rqna/error.hpp"
#include "rqna/idc_curve.hpp"
#include "rqna/phase_type.hpp"
#include "rqna/distribution.hpp"
#include "rqna/phase_type_idc.hpp"
#include "rqna/model.hpp"
#include "rqna/renewal_idc.hpp"
#include "rqna/weights.hpp"
#include "rqna/flow_calculus.hpp"
#include "rqna/feedback.hpp"
#include "rqna/rq.hpp"
#include "rqna/simulator.hpp"
#include "rqna/io.hpp"
