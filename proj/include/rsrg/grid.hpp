#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rsrg/error.hpp"

namespace rsrg {

using SiteIndex = std::size_t;

// Neighbor slots, in the order neighbors() returns them. opposite(s) == s ^ 1.
enum Slot : std::size_t { kEast = 0, kWest = 1, kSouth = 2, kNorth = 3 };
inline constexpr std::size_t kSlots = 4;
constexpr std::size_t opposite(std::size_t slot) { return slot ^ 1u; }

/// Periodic W x H square lattice. Sites are numbered row-major, index = y*W + x.
///
/// Undirected edges are enumerated as (site, kEast) and (site, kSouth), so
/// |E| = 2*W*H. For W == 2 (or H == 2) the east and west neighbors coincide and
/// the lattice is a multigraph with two parallel edges; every algorithm here
/// treats edges by slot, never by neighbor identity.
class Torus {
 public:
  Torus(std::size_t width, std::size_t height) : width_(width), height_(height) {
    if (width < 2 || height < 2)
      throw UsageError("torus must be at least 2x2, got " + std::to_string(width) + "x" +
                       std::to_string(height));
  }

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t num_sites() const { return width_ * height_; }
  std::size_t num_edges() const { return 2 * num_sites(); }

  SiteIndex index(std::size_t x, std::size_t y) const { return y * width_ + x; }
  std::pair<std::size_t, std::size_t> coords(SiteIndex site) const {
    return {site % width_, site / width_};
  }

  SiteIndex neighbor(SiteIndex site, std::size_t slot) const {
    const auto [x, y] = coords(site);
    switch (slot) {
      case kEast: return index(x + 1 == width_ ? 0 : x + 1, y);
      case kWest: return index(x == 0 ? width_ - 1 : x - 1, y);
      case kSouth: return index(x, y + 1 == height_ ? 0 : y + 1);
      default: return index(x, y == 0 ? height_ - 1 : y - 1);
    }
  }

  // {E, W, S, N} with periodic wrap.
  std::array<SiteIndex, kSlots> neighbors(SiteIndex site) const {
    check_site(site);
    return {neighbor(site, kEast), neighbor(site, kWest), neighbor(site, kSouth),
            neighbor(site, kNorth)};
  }

  void check_site(SiteIndex site) const {
    if (site >= num_sites())
      throw UsageError("site index " + std::to_string(site) + " out of range for " +
                       std::to_string(width_) + "x" + std::to_string(height_) + " torus");
  }

  friend bool operator==(const Torus&, const Torus&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
};

using Color = std::array<double, 3>;

class ColorImage {
 public:
  explicit ColorImage(Torus torus) : torus_(torus), pixels_(torus.num_sites(), Color{}) {}

  ColorImage(Torus torus, std::vector<Color> pixels) : torus_(torus), pixels_(std::move(pixels)) {
    if (pixels_.size() != torus_.num_sites())
      throw UsageError("pixel count does not match torus size");
    for (const Color& c : pixels_)
      for (double v : c)
        if (!std::isfinite(v)) throw UsageError("image intensities must be finite");
  }

  const Torus& torus() const { return torus_; }
  std::size_t size() const { return pixels_.size(); }
  const Color& operator[](SiteIndex i) const { return pixels_[i]; }
  Color& operator[](SiteIndex i) { return pixels_[i]; }
  const std::vector<Color>& pixels() const { return pixels_; }

  friend bool operator==(const ColorImage&, const ColorImage&) = default;

 private:
  Torus torus_;
  std::vector<Color> pixels_;
};

/// Coarse lattice V^(R) as a subset of the fine lattice.
struct SiteIndexMap {
  Torus fine;
  Torus coarse;
  std::size_t stride;
  std::vector<SiteIndex> fine_site;  // indexed by coarse site
};

/// Decimation geometry after R renormalization steps. R must be even: two
/// block-spin steps shrink the lattice by a factor 2 per axis, so coarse site
/// (x, y) is fine site (s*x, s*y) with s = 2^(R/2). Remainder strips are dropped.
inline SiteIndexMap coarse_sites(const Torus& fine, unsigned rg_steps) {
  if (rg_steps % 2 != 0)
    throw UsageError("rg-steps must be even (got " + std::to_string(rg_steps) +
                     "); image decimation is defined for even R only");
  const unsigned half = rg_steps / 2;
  if (half >= 8 * sizeof(std::size_t) - 1)
    throw UsageError("rg-steps " + std::to_string(rg_steps) + " too large for image");
  const std::size_t stride = std::size_t{1} << half;
  const std::size_t cw = fine.width() / stride;
  const std::size_t ch = fine.height() / stride;
  if (cw < 2 || ch < 2)
    throw UsageError("rg-steps " + std::to_string(rg_steps) + " too large for " +
                     std::to_string(fine.width()) + "x" + std::to_string(fine.height()) +
                     " image: coarse lattice would be " + std::to_string(cw) + "x" +
                     std::to_string(ch));
  SiteIndexMap map{fine, Torus(cw, ch), stride, {}};
  map.fine_site.reserve(cw * ch);
  for (std::size_t y = 0; y < ch; ++y)
    for (std::size_t x = 0; x < cw; ++x) map.fine_site.push_back(fine.index(stride * x, stride * y));
  return map;
}

// Copies the mapped fine-site colors verbatim.
inline ColorImage extract_coarse_image(const ColorImage& img, const SiteIndexMap& map) {
  if (!(img.torus() == map.fine)) throw UsageError("site map was built for a different lattice");
  std::vector<Color> out;
  out.reserve(map.fine_site.size());
  for (SiteIndex s : map.fine_site) out.push_back(img[s]);
  return ColorImage(map.coarse, std::move(out));
}

}  // namespace rsrg
