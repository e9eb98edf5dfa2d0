#include "margiheat/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "margiheat/errors.hpp"

namespace margiheat {

void write_pgm16(const std::string& path, int h, int w, const double* data,
                 double ref_max) {
  if (h < 1 || w < 1) throw InvalidParameter("write_pgm16: empty image");
  double top = ref_max;
  if (top <= 0.0) {
    top = 0.0;
    for (int i = 0; i < h * w; ++i) top = std::max(top, data[i]);
    if (top <= 0.0) top = 1.0;  // all-zero grid
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("write_pgm16: cannot open " + path);
  f << "P5\n" << w << " " << h << "\n65535\n";
  const double scale = 65535.0 / top;
  for (int i = 0; i < h * w; ++i) {
    const double scaled = std::clamp(data[i] * scale, 0.0, 65535.0);
    const auto s = static_cast<unsigned>(scaled + 0.5);
    const unsigned char bytes[2] = {static_cast<unsigned char>(s >> 8),
                                    static_cast<unsigned char>(s & 0xff)};
    f.write(reinterpret_cast<const char*>(bytes), 2);
  }
  if (!f) throw IoError("write_pgm16: write failed for " + path);
}

namespace {
int next_token(std::istream& in) {
  // skips whitespace and '#' comments per the PNM grammar
  for (;;) {
    int c = in.get();
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    } else if (!std::isspace(c)) {
      if (c == EOF) throw IoError("read_pgm: truncated header");
      int value = 0;
      while (std::isdigit(c)) {
        value = value * 10 + (c - '0');
        c = in.get();
      }
      return value;
    }
  }
}
}  // namespace

PgmImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("read_pgm: cannot open " + path);
  char magic[2];
  f.read(magic, 2);
  if (!f || magic[0] != 'P' || magic[1] != '5')
    throw IoError("read_pgm: not a binary PGM (P5): " + path);
  PgmImage img;
  img.w = next_token(f);
  img.h = next_token(f);
  const int maxval = next_token(f);
  if (img.w < 1 || img.h < 1 || (maxval != 255 && maxval != 65535))
    throw IoError("read_pgm: unsupported header in " + path);
  img.v.resize(static_cast<size_t>(img.w) * img.h);
  if (maxval == 255) {
    std::vector<unsigned char> buf(img.v.size());
    f.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!f) throw IoError("read_pgm: truncated data in " + path);
    for (size_t i = 0; i < buf.size(); ++i) img.v[i] = buf[i] / 255.0;
  } else {
    std::vector<unsigned char> buf(img.v.size() * 2);
    f.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!f) throw IoError("read_pgm: truncated data in " + path);
    for (size_t i = 0; i < img.v.size(); ++i) {
      const unsigned s = (static_cast<unsigned>(buf[2 * i]) << 8) | buf[2 * i + 1];
      img.v[i] = s / 65535.0;
    }
  }
  return img;
}

}  // namespace margiheat
