// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "maskhit/cli/commands.hpp"

int main(int argc, char** argv) { return maskhit::run_cli(argc, argv, std::cout, std::cerr); }
