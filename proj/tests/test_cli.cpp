// Copyright 2026 The datamkt Authors
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

// Drives the installed binary end to end: exit-code contract and byte-stable
// output. The binary path arrives via the DATAMKT_BIN environment variable.

#include <array>
#include <cstdio>
#include <cstdlib>
#include <string>

#include <gtest/gtest.h>

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const char* bin = std::getenv("DATAMKT_BIN");
  if (bin == nullptr) {
    ADD_FAILURE() << "DATAMKT_BIN not set";
    return {};
  }
  const std::string command = std::string(bin) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(command.c_str(), "r");
  if (pipe == nullptr) {
    ADD_FAILURE() << "popen failed for: " << command;
    return {};
  }
  RunResult result;
  std::array<char, 4096> buffer;
  std::size_t got;
  while ((got = fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
    result.output.append(buffer.data(), got);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

TEST(Cli, AuditOfTheIdentityLinearMarketPasses) {
  const RunResult r = run_cli(
      "audit --mechanism mep+efficient-linear --model linear "
      "--grid D=1,eps=0.25");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.output.find("\"passed\": true"), std::string::npos);
}

TEST(Cli, PowerMarketAuditsDefaultToIdentityQuality) {
  // The condition checkers must see the same quality function the mechanism
  // was built with; the flat power market then clears the sufficient bar.
  const RunResult r = run_cli(
      "audit --mechanism free --model power-market --alpha 0 "
      "--grid D=1,eps=0.25 --property sufficient");
  EXPECT_EQ(r.exit_code, 0);
}

TEST(Cli, ExistenceOfTheFixedMarketFailsWithAWitness) {
  const RunResult r =
      run_cli("existence --model power-market --alpha -1 --D 5 --eps 1");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("\"feasible\": false"), std::string::npos);
  EXPECT_NE(r.output.find("\"witness\""), std::string::npos);
}

TEST(Cli, ExistenceOfTheFlatMarketSucceeds) {
  const RunResult r =
      run_cli("existence --model power-market --alpha 0 --D 5 --eps 1 "
              "--format csv");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.output.rfind("agent,t,others,p_max\n", 0), 0u);
}

TEST(Cli, VcgExampleReportsTheViolationAndExitsOne) {
  const RunResult r = run_cli("vcg-example");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("10/11"), std::string::npos);
  EXPECT_NE(r.output.find("27/28"), std::string::npos);
}

TEST(Cli, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(run_cli("audit --mechanism nonesuch --model linear "
                    "--grid D=1,eps=0.5")
                .exit_code,
            2);
  EXPECT_EQ(run_cli("audit --model linear --grid D=1,eps=0.3 "
                    "--mechanism free")
                .exit_code,
            2);  // grid span is not an integer multiple
  EXPECT_EQ(run_cli("nonesuch").exit_code, 2);
  EXPECT_EQ(run_cli("existence --model power-market --alpha -1").exit_code, 2);
}

TEST(Cli, ExperimentsAreByteStableAcrossThreadCounts) {
  const std::string base =
      "mep --samples 5 --n-min 2 --n-max 4 --seed 99";
  const RunResult one = run_cli(base + " --threads 1");
  const RunResult four = run_cli(base + " --threads 4");
  EXPECT_EQ(one.exit_code, 0);
  EXPECT_EQ(one.output, four.output);
  EXPECT_EQ(one.output.rfind("n,revenue,welfare,best_quality\n", 0), 0u);
}

TEST(Cli, TypeSweepEmitsTheDocumentedHeader) {
  const RunResult r = run_cli("sweep --samples 3 --t2-max 0.5");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.output.rfind("t2,welfare,revenue,uti_1,uti_2\n", 0), 0u);
}

TEST(Cli, BoundarySweepEmitsTheDocumentedHeader) {
  const RunResult r = run_cli(
      "boundary --alpha-min=-1 --alpha-max=-0.9 --alpha-step=0.1 --cap 4");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_EQ(r.output.rfind("alpha,boundary,open_above\n", 0), 0u);
}

}  // namespace
