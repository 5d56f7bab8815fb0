#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "ptycho/field.hpp"

namespace ptycho::io {

/// Parsed NPY header: little-endian dtype string and C-order shape.
struct NpyHeader {
    std::string descr;
    std::vector<std::size_t> shape;
    std::size_t data_offset = 0;
};

/// Reads only the header. Throws DataError for malformed or Fortran-ordered files.
NpyHeader read_npy_header(const std::filesystem::path& path);

/// 2D float32 ('<f4').
void write_npy(const std::filesystem::path& path, const RealField& field);
/// 2D complex64 ('<c8').
void write_npy(const std::filesystem::path& path, const ComplexField& field);
/// 3D float32 stack of equally shaped planes.
void write_npy(const std::filesystem::path& path, const std::vector<RealField>& planes);

/// Accepts '<f4' or '<f8', 2D.
RealField read_real_npy(const std::filesystem::path& path);
/// Accepts '<c8' or '<c16', 2D.
ComplexField read_complex_npy(const std::filesystem::path& path);
/// Accepts '<f4' or '<f8', 3D.
std::vector<RealField> read_real_stack_npy(const std::filesystem::path& path);

}  // namespace ptycho::io
