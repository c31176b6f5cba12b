#pragma once

#include <cstdint>
#include <iosfwd>

#include "topoterm/pipeline/config.hpp"

namespace topoterm {

// Brute-force verification batteries, plus oracle checks on real
// neighborhoods of the configured vocabulary when `cfg` is given. Prints one
// line per check and returns the number of failures.
int oracle_check(const PipelineConfig* cfg, std::uint64_t seed, std::ostream& out);

}  // namespace topoterm
