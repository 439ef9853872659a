#pragma once

#include "kdlite/data/dataset.hpp"
#include "kdlite/data/logit_cache.hpp"
#include "kdlite/data/synthetic.hpp"
#include "kdlite/data/text.hpp"
#include "kdlite/data/vocab.hpp"
