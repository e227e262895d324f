#pragma once

#include "engage/analytics.hpp"
#include "engage/codebook.hpp"
#include "engage/coding_service.hpp"
#include "engage/corpus.hpp"
#include "engage/error.hpp"
#include "engage/filtering.hpp"
#include "engage/hash.hpp"
#include "engage/keyness.hpp"
#include "engage/normalize.hpp"
#include "engage/pipeline_config.hpp"
#include "engage/reliability.hpp"
#include "engage/selection.hpp"
#include "engage/synthetic.hpp"
