#include "kfp/errors.hpp"

#include <cstdio>

namespace kfp {

std::string format_where(double t, int ix, int iv)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "t=%.6g node=(%d,%d)", t, ix, iv);
    return buf;
}

}  // namespace kfp
