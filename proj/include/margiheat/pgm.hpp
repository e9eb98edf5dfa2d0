#pragma once

// Binary PGM (P5) with 16-bit samples, big-endian per the PNM spec.

#include <string>
#include <vector>

namespace margiheat {

// Writes h x w doubles as a P5/65535 file. Values map linearly so that
// `ref_max` hits 65535; pass ref_max <= 0 to normalize by the grid maximum
// (an all-zero grid writes as all zeros). Values clamp into range.
void write_pgm16(const std::string& path, int h, int w, const double* data,
                 double ref_max);

struct PgmImage {
  int h = 0, w = 0;
  std::vector<double> v;  // scaled into [0, 1]
};

// Reads P5 files with maxval 255 or 65535.
PgmImage read_pgm(const std::string& path);

}  // namespace margiheat
