// Copyright 2026 The dtmpc Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

int main(int argc, char** argv) { return dtmpc::cli::run(argc, argv); }
