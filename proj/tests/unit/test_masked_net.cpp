#include <doctest.h>

TEST_SUITE_BEGIN("masked_net");

TEST_SUITE_END();
