#pragma once

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rsrg/error.hpp"
#include "rsrg/io.hpp"
#include "rsrg/pipeline.hpp"
#include "rsrg/rgflow.hpp"
#include "rsrg/synth.hpp"

namespace rsrg {

// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// One bench row per R: segment() on the same image, stage timings recorded.
inline json bench_report(const ColorImage& img, int q, const std::vector<unsigned>& rg_steps,
                         std::uint64_t seed, const SegmentOptions& opts = {}) {
  json runs = json::array();
  for (unsigned r : rg_steps) {
    const Segmentation seg = segment(img, q, r, seed, opts);
    const RunReport& rep = seg.report;
    runs.push_back({{"rg_steps", r},
                    {"coarse", {{"width", rep.coarse_width}, {"height", rep.coarse_height}}},
                    {"alpha_coarse", rep.alpha_coarse},
                    {"alpha_fine", rep.alpha_fine},
                    {"em_iterations", rep.em_iterations},
                    {"em_converged", rep.em_converged},
                    {"estimate_ms", rep.timings.estimate},
                    {"timings_ms", timings_to_json(rep.timings)}});
  }
  return {{"format", "rsrg-bench-report"},
          {"version", 1},
          {"q", q},
          {"seed", seed},
          {"image", {{"width", img.torus().width()}, {"height", img.torus().height()}}},
          {"runs", runs}};
}

namespace detail {

struct LbpFlags {
  double tolerance = 1e-8;
  int max_iters = 1000;
  double damping = 0.5;

  void attach(CLI::App* cmd) {
    cmd->add_option("--tolerance", tolerance, "LBP stopping tolerance on log-messages")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-iters", max_iters, "LBP sweep limit")->check(CLI::PositiveNumber);
    cmd->add_option("--damping", damping, "LBP damping in [0, 1)")
        ->check(CLI::Range(0.0, 0.999999));
  }

  SegmentOptions options() const {
    SegmentOptions o;
    o.estimate.lbp.tolerance = o.final_lbp.tolerance = tolerance;
    o.estimate.lbp.max_iters = o.final_lbp.max_iters = max_iters;
    o.estimate.lbp.damping = o.final_lbp.damping = damping;
    return o;
  }
};

inline std::string format_alpha(double a) {
  std::ostringstream os;
  os << std::setprecision(17) << a;
  return os.str();
}

}  // namespace detail

/// Command-line entry point. Returns 0 on success, 2 on usage errors and 1 on
/// runtime or format errors; diagnostics go to `err`.
inline int cli_main(std::vector<std::string> args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Potts-MRF image segmentation with renormalization-group hyperparameter transfer",
               "rsrg"};
  app.require_subcommand(1);

  // segment
  auto* seg = app.add_subcommand("segment", "segment a PPM image");
  std::string seg_input, seg_labels_out, seg_color_out, seg_report_out;
  int seg_q = 0;
  unsigned seg_r = 0;
  std::uint64_t seg_seed = 0;
  detail::LbpFlags seg_lbp;
  seg->add_option("--input", seg_input, "input P6 image")->required();
  seg->add_option("--labels", seg_q, "number of labels q")->required()->check(CLI::Range(2, 256));
  seg->add_option("--rg-steps", seg_r, "renormalization steps R (even)")->required();
  seg->add_option("--seed", seg_seed, "seed")->required();
  seg->add_option("--out-labels", seg_labels_out, "label field (P5)")->required();
  seg->add_option("--out-color", seg_color_out, "colorized segmentation (P6)")->required();
  seg->add_option("--out-report", seg_report_out, "JSON run report")->required();
  seg_lbp.attach(seg);

  // rg-flow
  auto* flow = app.add_subcommand("rg-flow", "print an RG coupling trajectory");
  int flow_q = 0;
  unsigned flow_steps = 0;
  std::optional<double> flow_forward, flow_inverse;
  flow->add_option("--q", flow_q, "number of labels")->required()->check(CLI::Range(2, 1 << 20));
  auto* fwd = flow->add_option("--forward", flow_forward, "fine coupling alpha^(0)");
  auto* inv = flow->add_option("--inverse", flow_inverse, "coarse coupling alpha^(R)");
  fwd->excludes(inv);
  flow->add_option("--steps", flow_steps, "number of RG steps R")->required();

  // synth
  auto* syn = app.add_subcommand("synth", "sample a synthetic Potts/Gaussian image");
  std::size_t syn_w = 0, syn_h = 0;
  int syn_q = 0, syn_sweeps = 0;
  double syn_alpha = 0.0, syn_sigma = 0.05;
  std::uint64_t syn_seed = 0;
  std::string syn_image, syn_truth, syn_params;
  syn->add_option("--width", syn_w, "width")->required()->check(CLI::Range(2, 1 << 16));
  syn->add_option("--height", syn_h, "height")->required()->check(CLI::Range(2, 1 << 16));
  syn->add_option("--labels", syn_q, "number of labels q")->required()->check(CLI::Range(2, 256));
  syn->add_option("--alpha", syn_alpha, "Potts coupling")->required()->check(CLI::NonNegativeNumber);
  syn->add_option("--seed", syn_seed, "seed")->required();
  syn->add_option("--sweeps", syn_sweeps, "Gibbs sweeps")->required()->check(CLI::PositiveNumber);
  syn->add_option("--sigma", syn_sigma, "per-channel noise standard deviation")
      ->check(CLI::PositiveNumber);
  syn->add_option("--out-image", syn_image, "image (P6)")->required();
  syn->add_option("--out-truth", syn_truth, "ground-truth labels (P5)")->required();
  syn->add_option("--out-params", syn_params, "JSON generating parameters")->required();

  // bench
  auto* ben = app.add_subcommand("bench", "segment once per R and report stage timings");
  std::string ben_input, ben_report;
  int ben_q = 0;
  std::vector<unsigned> ben_r;
  std::uint64_t ben_seed = 0;
  detail::LbpFlags ben_lbp;
  ben->add_option("--input", ben_input, "input P6 image")->required();
  ben->add_option("--labels", ben_q, "number of labels q")->required()->check(CLI::Range(2, 256));
  ben->add_option("--rg-steps", ben_r, "comma-separated R values")->required()->delimiter(',');
  ben->add_option("--seed", ben_seed, "seed");
  ben->add_option("--out-report", ben_report, "JSON bench report")->required();
  ben_lbp.attach(ben);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "rsrg: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*seg) {
      if (seg_r % 2 != 0)
        throw UsageError("--rg-steps must be even (got " + std::to_string(seg_r) +
                         "); image decimation is defined for even R only");
      const ColorImage img = read_ppm(seg_input);
      const Segmentation result = segment(img, seg_q, seg_r, seg_seed, seg_lbp.options());
      write_pgm_labels(result.labels, seg_labels_out);
      write_ppm(colorize(result.labels, *result.report.model), seg_color_out);
      write_json(report_to_json(result.report), seg_report_out);
    } else if (*flow) {
      if (!flow_forward && !flow_inverse) throw UsageError("rg-flow needs --forward or --inverse");
      if (flow_forward) {
        const CouplingFlow f = forward_chain(*flow_forward, flow_q, flow_steps);
        for (std::size_t r = 0; r < f.alphas.size(); ++r)
          out << r << '\t' << detail::format_alpha(f.alphas[r]) << '\n';
      } else {
        const CouplingFlow f = inverse_chain(*flow_inverse, flow_q, flow_steps);
        for (std::size_t r = f.alphas.size(); r-- > 0;)
          out << r << '\t' << detail::format_alpha(f.alphas[r]) << '\n';
      }
    } else if (*syn) {
      const Torus torus(syn_w, syn_h);
      const GaussianLabelModel model = isotropic_model(default_palette(syn_q), syn_sigma);
      const LabelField truth = sample_potts(torus, syn_alpha, syn_q, syn_seed, syn_sweeps);
      // Independent stream for the color noise.
      const ColorImage img = sample_image(truth, model, syn_seed ^ 0x9E3779B97F4A7C15ull);
      write_ppm(img, syn_image);
      write_pgm_labels(truth, syn_truth);
      json params = {{"width", syn_w}, {"height", syn_h}, {"q", syn_q},       {"alpha", syn_alpha},
                     {"seed", syn_seed}, {"sweeps", syn_sweeps}, {"sigma", syn_sigma},
                     {"model", model_to_json(model)}};
      write_json(params, syn_params);
    } else if (*ben) {
      for (unsigned r : ben_r)
        if (r % 2 != 0)
          throw UsageError("--rg-steps must be even (got " + std::to_string(r) +
                           "); image decimation is defined for even R only");
      const ColorImage img = read_ppm(ben_input);
      write_json(bench_report(img, ben_q, ben_r, ben_seed, ben_lbp.options()), ben_report);
    }
  } catch (const UsageError& e) {
    err << "rsrg: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "rsrg: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

inline int cli_main(int argc, const char* const* argv) {
  return cli_main(std::vector<std::string>(argv + 1, argv + argc));
}

}  // namespace rsrg
