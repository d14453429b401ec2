#include <doctest.h>

TEST_SUITE_BEGIN("evaluation");

TEST_SUITE_END();
