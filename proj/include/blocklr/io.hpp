#pragma once

// Text formats shared by the CLI and experiments.
//
// Matrix file:       "M N K" then M lines of N*K comma-separated values.
// Measurement file:  "L K sigma" then L lines of K comma-separated values.
//
// Values are written in the shortest decimal form that reads back to the same
// double, so files round-trip exactly.

#include <string>
#include <string_view>

#include "blocklr/core.hpp"
#include "blocklr/sensing.hpp"

namespace blocklr {

std::string format_double(double v);
double parse_double(std::string_view text);

BlockMatrixd read_matrix(const std::string& path);
void write_matrix(const std::string& path, const BlockMatrixd& x);

MeasurementSet<double> read_measurements(const std::string& path);
void write_measurements(const std::string& path, const MeasurementSet<double>& ms);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& contents);

}  // namespace blocklr
