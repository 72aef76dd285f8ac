#include <gtest/gtest.h>

#include "tmd/runtime.hpp"

int main(int argc, char** argv) {
  tmd::ensure_working_lapack(argv);
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
