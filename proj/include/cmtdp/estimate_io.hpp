#pragma once

#include "cmtdp/estimators.hpp"

#include <iosfwd>

namespace cmtdp {

/// Self-describing text dump: family tag, dimensions, arrays and penalties.
/// Kernel bases are written as nested blocks.
void write_estimate(std::ostream& out, const Estimate& est);

/// Inverse of write_estimate. Throws InvalidInput on malformed text.
Estimate read_estimate(std::istream& in);

}  // namespace cmtdp
