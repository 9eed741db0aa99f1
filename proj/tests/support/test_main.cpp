// SPDX-License-Identifier: Apache-2.0
// Shared gtest entry point. Every test binary runs with a network-refusing
// client installed; a single connection attempt fails the run.

#include <gtest/gtest.h>

#include <iostream>
#include <memory>

#include "biasaudit/net.hpp"

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  auto refusing = std::make_shared<biasaudit::net::RefusingHttpClient>();
  biasaudit::net::set_client_override(refusing);
  const int rc = RUN_ALL_TESTS();
  if (refusing->attempts() > 0) {
    std::cerr << "FAILED: " << refusing->attempts() << " network connection attempt(s) during the test run\n";
    return 1;
  }
  return rc;
}
