#pragma once

#include <string>

#include "radifusion/tensor.hpp"

namespace radif {

// RDF1 container: bytes 'R','D','F','1', then u32 little-endian rank, then
// rank u32 little-endian extents, then row-major float32 little-endian
// payload. Values are widened to double on load.
void write_rdf1(const std::string& path, const Tensor& t);
Tensor read_rdf1(const std::string& path);

// Grayscale PGM. Reading accepts P2 and P5 with maxval up to 65535 (16-bit
// P5 samples are big-endian, as netpbm specifies) and returns an [H,W]
// tensor of raw sample values. Writing emits 8-bit P5; values are clamped
// to [0, 255] after rounding.
Tensor read_pgm(const std::string& path);
void write_pgm(const std::string& path, const Tensor& img);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

} // namespace radif
