#pragma once

#include <filesystem>
#include <iosfwd>

#include "dfsdca/dataset.hpp"

namespace dfsdca {

/// Reads `<label> <idx>:<val> ...` lines (1-based, strictly increasing
/// indices). Examples become columns in file order. Label sets {0,1} and
/// {1,2} are mapped to {-1,+1}; any other label set is kept as is.
/// Throws ParseError on malformed input.
Dataset parse_libsvm(std::istream& in);
Dataset load_libsvm(const std::filesystem::path& path);

/// Writes the dataset in the same format with round-trip exact values.
void write_libsvm(std::ostream& out, const Dataset& data);

}  // namespace dfsdca
