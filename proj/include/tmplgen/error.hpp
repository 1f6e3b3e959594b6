// Copyright (C) 2026 The tmplgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace tmplgen {

// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kIo = 2,
  kRemoteClient = 3,
};

// Base of every error thrown by the library. Each subclass carries the exit
// code the CLI reports for it.
class Error : public std::runtime_error {
 public:
  Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

#define TMPLGEN_DEFINE_ERROR(Name, Code)                              \
  class Name : public Error {                                         \
   public:                                                            \
    explicit Name(const std::string& what) : Error(what, Code) {}     \
  }

// Grammar or tree content violates an invariant.
TMPLGEN_DEFINE_ERROR(ValidationError, ExitCode::kValidation);
// Pattern tree shape is wrong (leaf above level 4, empty internal node...).
TMPLGEN_DEFINE_ERROR(StructureError, ExitCode::kValidation);
// Index or choice vector outside its range.
TMPLGEN_DEFINE_ERROR(BoundsError, ExitCode::kValidation);
// Request exceeds what the template space or a guard allows.
TMPLGEN_DEFINE_ERROR(CapacityError, ExitCode::kValidation);
// Operation called on an object in the wrong state.
TMPLGEN_DEFINE_ERROR(StateError, ExitCode::kValidation);
// Bad policy or option combination.
TMPLGEN_DEFINE_ERROR(ConfigError, ExitCode::kValidation);
// Evaluation grid is missing (item, template) cells.
TMPLGEN_DEFINE_ERROR(CoverageError, ExitCode::kValidation);
// Unreadable, unwritable or unparseable file.
TMPLGEN_DEFINE_ERROR(IoError, ExitCode::kIo);
// Model client gave up after its retries.
TMPLGEN_DEFINE_ERROR(ClientError, ExitCode::kRemoteClient);

#undef TMPLGEN_DEFINE_ERROR

}  // namespace tmplgen
