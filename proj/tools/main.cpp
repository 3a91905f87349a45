// Copyright 2026 The PureToy Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <string>
#include <vector>

#include "puretoy/cli.hpp"

int main(int argc, char** argv) {
  // Reports own stdout; logs go to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("puretoy"));
  std::ios::sync_with_stdio(false);
  return puretoy::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout);
}
