#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace metafusion {

/// Fixed 12-significant-digit rendering used by every text export, so that
/// identical runs produce byte-identical files.
inline std::string format_number(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

}  // namespace metafusion
