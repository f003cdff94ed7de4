// Copyright 2026 The MaskHIT Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <iosfwd>
#include <string>

#include "maskhit/cli/run_config.hpp"

namespace maskhit {

/// Environment variable naming the default parent of run directories.
inline constexpr const char* kRunRootEnv = "MASKHIT_RUN_ROOT";

// Each command reads a fully resolved config. Outputs go under config.out.
void command_synth(const RunConfig& config, std::ostream& out);
void command_inspect(const RunConfig& config, std::ostream& out);
void command_pretrain(const RunConfig& config, std::ostream& out);
void command_finetune(const RunConfig& config, std::ostream& out);
void command_baseline(const RunConfig& config, std::ostream& out);
void command_evaluate(const RunConfig& config, std::ostream& out);
void command_attnmap(const RunConfig& config, std::ostream& out);

/// 2 config, 3 data, 4 divergence, 1 anything else.
int exit_code_for(const std::exception& e);

/// Parses argv, runs one command and returns the process exit code.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace maskhit
