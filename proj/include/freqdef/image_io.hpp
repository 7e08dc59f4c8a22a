#pragma once

#include <cstdint>
#include <string>

#include "freqdef/tensor.hpp"

namespace freqdef {

// Reads a whole file into memory; FormatError if it cannot be opened.
std::string read_file(const std::string& path);

// Writes via a temporary file in the same directory plus an atomic rename,
// so partially written outputs are never observable.
void atomic_write(const std::string& path, const std::string& bytes);

// Little-endian scalar packing shared by the binary tensor formats.
void append_u16(std::string& out, std::uint16_t v);
void append_u32(std::string& out, std::uint32_t v);
void append_f64(std::string& out, double v);
std::uint16_t read_u16(const std::string& in, std::size_t& pos);
std::uint32_t read_u32(const std::string& in, std::size_t& pos);
double read_f64(const std::string& in, std::size_t& pos);

// 8-bit binary PPM (P6). Values are rounded and clamped to [0, 255] on write.
void write_ppm(const std::string& path, const ImageTensor& x);
ImageTensor read_ppm(const std::string& path);

// 8-bit binary PGM (P5) for single-channel tensors.
void write_pgm(const std::string& path, const ImageTensor& x);
ImageTensor read_pgm(const std::string& path);

// Class labels stored as raw gray levels in a PGM.
void write_class_map(const std::string& path, const ClassMap& m);
ClassMap read_class_map(const std::string& path);

}  // namespace freqdef
