#pragma once

#include <array>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "socialfusion/common.hpp"

namespace socialfusion {

// Interleaved 8-bit RGB. Fixture images are stored as binary PPM (P6),
// which keeps the pipeline free of image-codec dependencies.
struct ImageU8 {
  int h = 0, w = 0;
  std::vector<std::uint8_t> data;  // h*w*3

  std::uint8_t& at(int r, int c, int ch) { return data[static_cast<std::size_t>((r * w + c) * 3 + ch)]; }
  std::uint8_t at(int r, int c, int ch) const { return data[static_cast<std::size_t>((r * w + c) * 3 + ch)]; }
};

// Planar double RGB in [0,1].
struct ImageF {
  int h = 0, w = 0;
  std::array<Mat, 3> ch;
};

inline ImageF to_float(const ImageU8& img) {
  ImageF out;
  out.h = img.h;
  out.w = img.w;
  for (int c = 0; c < 3; ++c) out.ch[c] = Mat(img.h, img.w);
  for (int r = 0; r < img.h; ++r)
    for (int c = 0; c < img.w; ++c)
      for (int k = 0; k < 3; ++k) out.ch[k](r, c) = img.at(r, c, k) / 255.0;
  return out;
}

inline void write_ppm(const std::string& path, const ImageU8& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write image: " + path);
  f << "P6\n" << img.w << " " << img.h << "\n255\n";
  f.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (!f) throw IoError("short write: " + path);
}

inline ImageU8 read_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read image: " + path);
  std::string magic;
  f >> magic;
  if (magic != "P6") throw IoError("unsupported image format (want P6 ppm): " + path);
  auto next_int = [&f, &path]() {
    // Skips whitespace and '#' comments.
    int c = f.get();
    while (c == '#' || std::isspace(c)) {
      if (c == '#')
        while (c != '\n' && c != EOF) c = f.get();
      c = f.get();
    }
    int v = 0;
    bool any = false;
    while (std::isdigit(c)) {
      v = v * 10 + (c - '0');
      any = true;
      c = f.get();
    }
    if (!any) throw IoError("bad ppm header: " + path);
    return v;
  };
  ImageU8 img;
  img.w = next_int();
  img.h = next_int();
  int maxval = next_int();
  if (maxval != 255) throw IoError("unsupported ppm maxval: " + path);
  img.data.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  f.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  if (f.gcount() != static_cast<std::streamsize>(img.data.size()))
    throw IoError("truncated ppm: " + path);
  return img;
}

// Align-corners bilinear resize; pure resize keeps normalized bbox
// coordinates valid.
inline ImageF resize_bilinear(const ImageF& img, int ho, int wo) {
  ImageF out;
  out.h = ho;
  out.w = wo;
  auto src = [](int o, int no, int ni) {
    return no > 1 ? static_cast<double>(o) * (ni - 1) / static_cast<double>(no - 1) : 0.0;
  };
  for (int k = 0; k < 3; ++k) {
    out.ch[k] = Mat(ho, wo);
    for (int a = 0; a < ho; ++a) {
      double fr = src(a, ho, img.h);
      int r0 = static_cast<int>(fr);
      int r1 = std::min(r0 + 1, img.h - 1);
      double tr = fr - r0;
      for (int b = 0; b < wo; ++b) {
        double fc = src(b, wo, img.w);
        int c0 = static_cast<int>(fc);
        int c1 = std::min(c0 + 1, img.w - 1);
        double tc = fc - c0;
        out.ch[k](a, b) = (1 - tr) * ((1 - tc) * img.ch[k](r0, c0) + tc * img.ch[k](r0, c1)) +
                          tr * ((1 - tc) * img.ch[k](r1, c0) + tc * img.ch[k](r1, c1));
      }
    }
  }
  return out;
}

}  // namespace socialfusion
