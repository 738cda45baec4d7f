// Copyright 2026 The Trainsim Authors.
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

#ifndef TRAINSIM_CLI_HPP_
#define TRAINSIM_CLI_HPP_

#include <map>
#include <string>
#include <vector>

#include "trainsim/scenario.hpp"

namespace trainsim {

// Exit codes: 0 success, 1 input error, 2 infeasible or constraint failure,
// 3 audit failure.
int run_cli(const std::vector<std::string>& args);

// Pool-generated SIG replay workload (distinct component graphs plus the
// per-model submission list).
struct GeneratedSigWorkload {
  std::map<std::string, sig::TransformGraph> graphs;
  std::vector<SigSubmission> submissions;
};

GeneratedSigWorkload generate_sig_pool(const SigPoolConfig& pool,
                                       const std::vector<SigClientConfig>& clients);

}  // namespace trainsim

#endif  // TRAINSIM_CLI_HPP_
