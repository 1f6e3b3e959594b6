// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "tmplgen/augment.hpp"
#include "tmplgen/client.hpp"
#include "tmplgen/error.hpp"
#include "tmplgen/evalkit.hpp"
#include "tmplgen/extract.hpp"
#include "tmplgen/grammar.hpp"
#include "tmplgen/grammar_io.hpp"
#include "tmplgen/pattern_tree.hpp"
#include "tmplgen/random.hpp"
#include "tmplgen/sampler.hpp"
#include "tmplgen/version.hpp"
