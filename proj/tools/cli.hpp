// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace dtmpc::cli {

// Process exit codes.
enum Exit : int {
  kOk = 0,
  kInputError = 1,     // schema, I/O or hash mismatch
  kNotConverged = 2,   // also containment or safety failure
  kInfeasible = 3,
};

int run(int argc, char** argv);

}  // namespace dtmpc::cli
