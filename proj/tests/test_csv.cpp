#include "wordgaze/csv.hpp"

#include <doctest.h>

#include <sstream>

using namespace wordgaze;

TEST_CASE("format_ms drops a trailing zero decimal")
{
    CHECK(csv::format_ms(2562.4) == "2562.4");
    CHECK(csv::format_ms(4219.0) == "4219");
    CHECK(csv::format_ms(0.04) == "0");
}
