// Copyright 2026 The Tailcast Authors.
// SPDX-License-Identifier: Apache-2.0

#include "tailcast/cli/commands.hpp"

int main(int argc, char** argv) { return tailcast::cli::run_cli(argc, argv); }
