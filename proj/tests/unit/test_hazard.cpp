#include <doctest.h>

TEST_SUITE_BEGIN("hazard");

TEST_SUITE_END();
