#pragma once

// Command-line front end. Every flag can also be set through an environment
// variable named S2DIP_<FLAG> (upper case, dashes as underscores). Precedence:
// flag, then environment, then --config file, then built-in defaults.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "s2dip/cube_io.hpp"
#include "s2dip/error.hpp"
#include "s2dip/metrics.hpp"
#include "s2dip/noise.hpp"
#include "s2dip/npy.hpp"
#include "s2dip/pipeline.hpp"
#include "s2dip/run_file.hpp"
#include "s2dip/synthetic.hpp"

namespace s2dip::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kNumerical = 4 };

/// Output paths derived from --out: "runs/a.hsic" and "runs/a" both give base "runs/a".
struct OutputPaths {
  std::string base;

  explicit OutputPaths(std::string out) {
    const std::filesystem::path p(out);
    base = p.extension() == ".hsic" ? (p.parent_path() / p.stem()).string() : out;
  }

  std::string cube() const { return base + ".hsic"; }
  std::string with(const char* suffix) const { return base + suffix; }
};

/// HSIC by default; ".npy" files go through the NPY importer.
inline Cube load_cube(const std::string& path) {
  if (path.empty()) throw ValueError("missing cube path");
  if (std::filesystem::path(path).extension() == ".npy") return import_npy(path);
  return read_cube(path);
}

struct RunFlags {
  std::string config;
  std::optional<int> case_id;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda_over_n, alpha1, alpha2, lr, relerr_tol;
  std::optional<std::size_t> kmax, check_interval;
  std::optional<std::string> trace_ref, out;
  bool timing = false;
  bool quiet = false;
};

inline void add_run_flags(CLI::App& app, RunFlags& f) {
  auto env = [](CLI::Option* o, const char* name) { o->envname(std::string("S2DIP_") + name); };
  env(app.add_option("--config", f.config, "JSON run file"), "CONFIG");
  env(app.add_option("--case", f.case_id, "noise case 1..5 (selects its lambda preset)")->check(CLI::Range(1, 5)),
      "CASE");
  env(app.add_option("--seed", f.seed, "master seed"), "SEED");
  env(app.add_option("--lambda-over-n", f.lambda_over_n, "regularization weight times voxel count"),
      "LAMBDA_OVER_N");
  env(app.add_option("--alpha1", f.alpha1, "TV weight inside the regularizer"), "ALPHA1");
  env(app.add_option("--alpha2", f.alpha2, "SSTV weight inside the regularizer"), "ALPHA2");
  env(app.add_option("--lr", f.lr, "ADAM learning rate"), "LR");
  env(app.add_option("--kmax", f.kmax, "maximum iterations"), "KMAX");
  env(app.add_option("--relerr-tol", f.relerr_tol, "RelErr stopping tolerance"), "RELERR_TOL");
  env(app.add_option("--check-interval", f.check_interval, "iterations between RelErr checks"), "CHECK_INTERVAL");
  env(app.add_option("--trace-ref", f.trace_ref, "clean cube for per-iteration PSNR"), "TRACE_REF");
  env(app.add_option("--out", f.out, "output path or base name"), "OUT");
  app.add_flag("--timing", f.timing, "include wall time in the report");
  app.add_flag("-q,--quiet", f.quiet, "no progress on stderr");
}

/// Run file after applying flags. The case preset supplies lambda unless a
/// lambda was given explicitly in the file or on the command line.
inline RunFile resolve(const RunFlags& f) {
  RunFile rf;
  bool lambda_explicit = false;
  if (!f.config.empty()) {
    const Json j = read_json(f.config);
    rf = run_file_from_json(j);
    lambda_explicit = j.contains("run") && j.at("run").is_object() && j.at("run").contains("lambda_over_n");
  }
  if (f.case_id) rf.case_id = *f.case_id;
  if (f.seed) rf.run.seed = *f.seed;
  if (f.lambda_over_n) {
    rf.run.lambda_over_n = *f.lambda_over_n;
    lambda_explicit = true;
  }
  if (rf.case_id && !lambda_explicit) rf.run.lambda_over_n = case_lambda_over_n(*rf.case_id);
  if (f.alpha1) rf.run.alpha1 = *f.alpha1;
  if (f.alpha2) rf.run.alpha2 = *f.alpha2;
  if (f.lr) rf.run.lr = *f.lr;
  if (f.kmax) rf.run.stop.k_max = *f.kmax;
  if (f.relerr_tol) rf.run.stop.relerr_tol = *f.relerr_tol;
  if (f.check_interval) rf.run.stop.check_interval = *f.check_interval;
  if (f.trace_ref) rf.trace_reference = *f.trace_ref;
  if (f.out) rf.output = *f.out;
  rf.run.validate();
  return rf;
}

inline ProgressFn progress_printer(std::ostream& err, bool quiet) {
  if (quiet) return {};
  return [&err](const IterationInfo& i) {
    if (!i.rel_err) return;
    err << "k=" << i.iteration << " loss=" << format_double(i.loss) << " relerr=" << format_double(*i.rel_err);
    if (i.psnr) err << " psnr=" << format_double(*i.psnr);
    err << '\n';
  };
}

/// Cube, report and trace for one finished run.
inline void write_run_outputs(const OutputPaths& out, const RunReport& report, bool timing) {
  write_cube(report.output, out.cube());
  write_json(out.with(".report.json"), to_json(report, timing));
  write_text(out.with(".trace.csv"), trace_csv(report));
  if (report.best_output) write_cube(*report.best_output, out.with(".best.hsic"));
}

inline std::string metrics_csv(const MetricsReport& m) {
  return "psnr,ssim,sam\n" + format_double(m.psnr) + "," + format_double(m.ssim) + "," + format_double(m.sam) + "\n";
}

// --- subcommands -------------------------------------------------------------

inline int do_simulate(const RunFlags& f, const std::string& clean_path, std::ostream& out) {
  RunFile rf = resolve(f);
  const std::string clean = !clean_path.empty() ? clean_path : !rf.clean.empty() ? rf.clean : rf.input;
  if (clean.empty()) throw ValueError("simulate: no clean cube given (--clean or run file)");
  if (!rf.case_id && !rf.noise) throw ValueError("simulate: choose a noise recipe with --case or a run file");
  if (rf.output.empty()) throw ValueError("simulate: --out is required");
  const std::uint64_t seed = f.seed ? *f.seed : rf.noise_seed;
  const Cube x = load_cube(clean);
  NoiseSidecar side{rf.case_id, rf.effective_noise(), seed, {}};
  const Cube y = corrupt(x, side.spec, Rng(seed), &side.log);
  const OutputPaths paths(rf.output);
  write_cube(y, paths.cube());
  write_json(paths.with(".noise.json"), to_json(side));
  out << paths.cube() << '\n';
  return kOk;
}

inline int do_denoise(const RunFlags& f, const std::string& input_path, std::ostream& out, std::ostream& err) {
  RunFile rf = resolve(f);
  if (!input_path.empty()) rf.input = input_path;
  if (rf.input.empty()) throw ValueError("denoise: no input cube given");
  if (rf.output.empty()) throw ValueError("denoise: --out is required");
  const Cube y = load_cube(rf.input);
  if (!rf.trace_reference.empty()) rf.run.trace_reference = load_cube(rf.trace_reference);
  const RunReport report = run(y, rf.run, progress_printer(err, f.quiet));
  const OutputPaths paths(rf.output);
  write_run_outputs(paths, report, f.timing);
  out << "stop=" << to_string(report.stop_reason) << " iterations=" << report.iterations << '\n';
  return kOk;
}

inline int do_evaluate(const std::string& ref, const std::string& est, const std::string& format,
                       const std::optional<std::string>& out_path, std::ostream& out) {
  const MetricsReport m = evaluate(load_cube(ref), load_cube(est));
  const std::string text = format == "csv" ? metrics_csv(m) : to_json(m).dump(2) + "\n";
  if (out_path) write_text(*out_path, text);
  out << text;
  return kOk;
}

inline constexpr std::size_t kSyntheticExtent = 32;
inline constexpr std::size_t kSyntheticBands = 8;

inline std::string case_row_header() {
  return "case,noisy_psnr,noisy_ssim,noisy_sam,psnr,ssim,sam,best_psnr,best_iteration,iterations,stop_reason\n";
}

inline int do_reproduce(const RunFlags& f, const std::string& clean_path, std::ostream& out, std::ostream& err) {
  RunFile rf = resolve(f);
  if (!rf.case_id) throw ValueError("reproduce-case: --case is required");
  const int id = *rf.case_id;
  const std::uint64_t master_seed = rf.run.seed;
  const Rng master(master_seed);
  const OutputPaths paths(rf.output.empty() ? "case" + std::to_string(id) : rf.output);

  Cube x(1, 1, 1);
  const std::string clean = !clean_path.empty() ? clean_path : rf.clean;
  if (!clean.empty()) {
    x = load_cube(clean);
  } else {
    Rng scene = master.split(1);
    x = synthetic_scene(kSyntheticExtent, kSyntheticExtent, kSyntheticBands, scene);
    write_cube(x, paths.with(".clean.hsic"));
  }

  NoiseSidecar side{id, rf.effective_noise(), master.split(2).next_u64(), {}};
  const Cube y = corrupt(x, side.spec, Rng(side.seed), &side.log);
  write_cube(y, paths.with(".noisy.hsic"));
  write_json(paths.with(".noise.json"), to_json(side));

  rf.run.seed = master.split(3).next_u64();
  rf.run.trace_reference = x;
  const RunReport report = run(y, rf.run, progress_printer(err, f.quiet));
  write_run_outputs(paths, report, f.timing);

  const MetricsReport noisy = evaluate(x, y);
  const MetricsReport est = evaluate(x, report.output);
  std::ostringstream row;
  row << id << ',' << format_double(noisy.psnr) << ',' << format_double(noisy.ssim) << ','
      << format_double(noisy.sam) << ',' << format_double(est.psnr) << ',' << format_double(est.ssim) << ','
      << format_double(est.sam) << ',' << format_double(report.best_psnr) << ',' << report.best_iteration << ','
      << report.iterations << ',' << to_string(report.stop_reason) << '\n';
  write_text(paths.with(".row.csv"), case_row_header() + row.str());
  write_json(paths.with(".metrics.json"), Json{{"noisy", to_json(noisy)}, {"denoised", to_json(est)}});
  out << case_row_header() << row.str();
  return kOk;
}

inline int do_trace_plot(const std::vector<std::string>& reports, const std::string& column,
                         const std::optional<std::string>& out_path, std::ostream& out) {
  if (reports.empty()) throw ValueError("trace-plot-data: no reports given");
  std::vector<std::string> labels;
  std::vector<std::vector<double>> series;
  std::size_t longest = 0;
  for (const auto& path : reports) {
    const RunReport r = report_from_json(read_json(path));
    const auto& values = column == "loss" ? r.loss : r.psnr;
    if (values.empty()) throw ValueError("trace-plot-data: '" + path + "' has no " + column + " trace");
    std::string label = std::filesystem::path(path).filename().string();
    if (const auto pos = label.find(".report.json"); pos != std::string::npos) label.erase(pos);
    labels.push_back(label);
    series.push_back(values);
    longest = std::max(longest, values.size());
  }
  std::ostringstream csv;
  csv << "iteration";
  for (const auto& l : labels) csv << ',' << l;
  csv << '\n';
  for (std::size_t i = 0; i < longest; ++i) {
    csv << i + 1;
    for (const auto& s : series) {
      csv << ',';
      if (i < s.size()) csv << format_double(s[i]);
    }
    csv << '\n';
  }
  if (out_path) {
    write_text(*out_path, csv.str());
  } else {
    out << csv.str();
  }
  return kOk;
}

// --- entry point ------------------------------------------------------------

inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Hyperspectral denoising with a spatial-spectral deep image prior", "s2dip"};
  app.require_subcommand(1);

  RunFlags sim_flags, den_flags, rep_flags;
  std::string sim_clean, den_input, rep_clean;
  auto* sim = app.add_subcommand("simulate", "corrupt a clean cube with a noise case");
  add_run_flags(*sim, sim_flags);
  sim->add_option("--clean", sim_clean, "clean cube (.hsic or .npy)");

  auto* den = app.add_subcommand("denoise", "fit the network to a noisy cube");
  add_run_flags(*den, den_flags);
  den->add_option("input", den_input, "noisy cube (.hsic or .npy)");

  std::string ref, est, format = "json";
  std::optional<std::string> eval_out;
  auto* ev = app.add_subcommand("evaluate", "PSNR / SSIM / SAM of an estimate against a reference");
  ev->add_option("reference", ref, "reference cube")->required();
  ev->add_option("estimate", est, "estimated cube")->required();
  ev->add_option("--format", format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
  ev->add_option("--out", eval_out, "also write the metrics here")->envname("S2DIP_OUT");

  auto* rep = app.add_subcommand("reproduce-case", "simulate, denoise and evaluate one noise case");
  add_run_flags(*rep, rep_flags);
  rep->add_option("--clean", rep_clean, "clean cube; a seeded synthetic scene when omitted");

  std::vector<std::string> trace_reports;
  std::string trace_column = "psnr";
  std::optional<std::string> trace_out;
  auto* tp = app.add_subcommand("trace-plot-data", "merge per-iteration traces of run reports into one CSV");
  tp->add_option("reports", trace_reports, "report JSON files")->required();
  tp->add_option("--column", trace_column, "psnr or loss")->check(CLI::IsMember({"psnr", "loss"}));
  tp->add_option("--out", trace_out, "CSV path (stdout when omitted)")->envname("S2DIP_OUT");

  std::vector<std::string> argv_copy(args.rbegin(), args.rend());
  if (!argv_copy.empty()) argv_copy.pop_back();  // program name
  try {
    app.parse(argv_copy);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (sim->parsed()) return do_simulate(sim_flags, sim_clean, out);
    if (den->parsed()) return do_denoise(den_flags, den_input, out, err);
    if (ev->parsed()) return do_evaluate(ref, est, format, eval_out, out);
    if (rep->parsed()) return do_reproduce(rep_flags, rep_clean, out, err);
    if (tp->parsed()) return do_trace_plot(trace_reports, trace_column, trace_out, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::bad_alloc&) {
    err << "error: out of memory\n";
    return kIo;
  }
  err << app.help();
  return kUsage;
}

inline int cli_main(int argc, char** argv) { return cli_main(std::vector<std::string>(argv, argv + argc)); }

}  // namespace s2dip::cli
