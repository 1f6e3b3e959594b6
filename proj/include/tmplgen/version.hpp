// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace tmplgen {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tmplgen
