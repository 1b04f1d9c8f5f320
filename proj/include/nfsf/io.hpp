#pragma once

#include "nfsf/field.hpp"

#include <string>
#include <vector>

namespace nfsf {

// Atomic text write: temp file + rename.
void write_text_atomic(const std::string& path, const std::string& content);

// Snapshot CSV, columns: ix[,iy],s,rho
std::string snapshot_csv(const DensityField& f);

// Binary dump with a 64-byte header: magic "NFSF", u32 version, u32 d,
// u32 n_x, u32 n_s, f64 L, f64 s_max, f64 time, zero padding; then the
// row-major rho values as f64.
void write_snapshot_binary(const std::string& path, const DensityField& f);
DensityField read_snapshot_binary(const std::string& path);

// Generic CSV emission with fixed column order.
std::string csv_table(const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows);

std::string format_double(double v);

} // namespace nfsf
