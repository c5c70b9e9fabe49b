#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "rsrg/colormodel.hpp"
#include "rsrg/error.hpp"
#include "rsrg/grid.hpp"
#include "rsrg/pipeline.hpp"

namespace rsrg {

// Binary netpbm I/O (P6 color, P5 gray) and JSON reports.

namespace detail {

inline std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spill(const std::string& path, const std::string& header,
                  const std::vector<unsigned char>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write to " + path + " failed");
}

struct PnmHeader {
  std::size_t width = 0, height = 0, maxval = 0;
  std::size_t data_offset = 0;
};

// Parses "Pn <ws> width <ws> height <ws> maxval <single ws>", '#' comments allowed.
inline PnmHeader parse_pnm_header(const std::vector<unsigned char>& bytes, char kind,
                                  const std::string& path) {
  auto fail = [&](const std::string& what, std::size_t at) {
    throw FormatError(path + ": " + what + " at byte " + std::to_string(at));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != static_cast<unsigned char>(kind))
    fail(std::string("bad magic, expected P") + kind, 0);
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_number = [&](const char* field) {
    skip_space();
    const std::size_t start = pos;
    std::size_t value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (value > (std::size_t{1} << 32)) fail(std::string(field) + " too large", start);
      ++pos;
    }
    if (pos == start) fail(std::string("expected ") + field, start);
    return value;
  };
  PnmHeader h;
  if (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#')
    fail("missing whitespace after magic", pos);
  h.width = read_number("width");
  h.height = read_number("height");
  const std::size_t maxval_at = pos;
  h.maxval = read_number("maxval");
  if (h.maxval != 255) fail("maxval must be 255, got " + std::to_string(h.maxval), maxval_at);
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) fail("expected whitespace after maxval", pos);
  h.data_offset = pos + 1;
  return h;
}

inline unsigned char to_byte(double v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

/// Reads a binary P6 file with maxval 255; channels become v / 255.
inline ColorImage read_ppm(const std::string& path) {
  const auto bytes = detail::slurp(path);
  const auto h = detail::parse_pnm_header(bytes, '6', path);
  const std::size_t need = h.width * h.height * 3;
  if (bytes.size() - h.data_offset < need)
    throw FormatError(path + ": truncated pixel data at byte " + std::to_string(bytes.size()) +
                      ", expected " + std::to_string(h.data_offset + need) + " bytes");
  if (h.width < 2 || h.height < 2)
    throw FormatError(path + ": image must be at least 2x2 at byte 0");
  std::vector<Color> px(h.width * h.height);
  const unsigned char* p = bytes.data() + h.data_offset;
  for (auto& c : px) {
    c = {p[0] / 255.0, p[1] / 255.0, p[2] / 255.0};
    p += 3;
  }
  return ColorImage(Torus(h.width, h.height), std::move(px));
}

/// P6 output; each channel is clamped to [0, 1] and rounded to 8 bits.
inline void write_ppm(const ColorImage& img, const std::string& path) {
  std::vector<unsigned char> body;
  body.reserve(img.size() * 3);
  for (const Color& c : img.pixels())
    for (double v : c) body.push_back(detail::to_byte(v));
  detail::spill(path,
                "P6\n" + std::to_string(img.torus().width()) + " " +
                    std::to_string(img.torus().height()) + "\n255\n",
                body);
}

/// P5 output holding raw label indices (not rescaled).
inline void write_pgm_labels(const LabelField& labels, const std::string& path) {
  if (labels.labels() > 256)
    throw UsageError("PGM label output holds at most 256 labels, got q=" +
                     std::to_string(labels.labels()));
  std::vector<unsigned char> body(labels.values().begin(), labels.values().end());
  detail::spill(path,
                "P5\n" + std::to_string(labels.torus().width()) + " " +
                    std::to_string(labels.torus().height()) + "\n255\n",
                body);
}

inline LabelField read_pgm_labels(const std::string& path, int q) {
  const auto bytes = detail::slurp(path);
  const auto h = detail::parse_pnm_header(bytes, '5', path);
  const std::size_t need = h.width * h.height;
  if (bytes.size() - h.data_offset < need)
    throw FormatError(path + ": truncated pixel data at byte " + std::to_string(bytes.size()));
  std::vector<Label> values(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
                            bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset + need));
  return LabelField(Torus(h.width, h.height), q, std::move(values));
}

// JSON ------------------------------------------------------------------------

using nlohmann::json;

inline json model_to_json(const GaussianLabelModel& model) {
  json labels = json::array();
  for (std::size_t xi = 0; xi < model.labels(); ++xi) {
    const Vec3& m = model.mean(xi);
    const Mat3& c = model.covariance(xi);
    json cov = json::array();
    for (int r = 0; r < 3; ++r) cov.push_back({c(r, 0), c(r, 1), c(r, 2)});
    labels.push_back({{"mean", {m[0], m[1], m[2]}}, {"covariance", cov}});
  }
  return {{"labels", labels}};
}

inline GaussianLabelModel model_from_json(const json& j) {
  std::vector<Vec3> means;
  std::vector<Mat3> covs;
  for (const auto& l : j.at("labels")) {
    const auto& m = l.at("mean");
    means.emplace_back(m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>());
    Mat3 c;
    for (int r = 0; r < 3; ++r)
      for (int k = 0; k < 3; ++k) c(r, k) = l.at("covariance").at(r).at(k).get<double>();
    covs.push_back(c);
  }
  return GaussianLabelModel(std::move(means), std::move(covs));
}

inline json timings_to_json(const StageTimings& t) {
  return {{"coarsen", t.coarsen},
          {"estimate", t.estimate},
          {"inverse_rg", t.inverse_rg},
          {"final_lbp", t.final_lbp},
          {"decide", t.decide}};
}

/// Run report; key names are documented in docs/run_report.schema.json.
inline json report_to_json(const RunReport& r) {
  json trace = json::array();
  for (const EmStep& s : r.em_trace)
    trace.push_back({{"alpha", s.alpha},
                     {"mean_shift", s.mean_shift},
                     {"lbp_iterations", s.lbp_iterations},
                     {"lbp_converged", s.lbp_converged}});
  return {
      {"format", "rsrg-run-report"},
      {"version", 1},
      {"q", r.q},
      {"rg_steps", r.rg_steps},
      {"seed", r.seed},
      {"image", {{"width", r.width}, {"height", r.height}}},
      {"coarse", {{"width", r.coarse_width}, {"height", r.coarse_height}}},
      {"alpha_coarse", r.alpha_coarse},
      {"alpha_fine", r.alpha_fine},
      {"inverse_trajectory", r.flow.alphas},
      {"model", r.model ? model_to_json(*r.model) : json(nullptr)},
      {"estimate", {{"iterations", r.em_iterations}, {"converged", r.em_converged}, {"trace", trace}}},
      {"final_lbp",
       {{"iterations", r.final_lbp_iterations},
        {"converged", r.final_lbp_converged},
        {"residual", r.final_lbp_residual}}},
      {"timings_ms", timings_to_json(r.timings)},
  };
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write to " + path + " failed");
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace rsrg
