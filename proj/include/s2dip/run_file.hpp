#pragma once

// JSON documents: run files, run reports, metric reports and noise sidecars.
// Readers reject unknown keys; writers always emit every field.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "s2dip/error.hpp"
#include "s2dip/metrics.hpp"
#include "s2dip/noise.hpp"
#include "s2dip/pipeline.hpp"

namespace s2dip {

using Json = nlohmann::ordered_json;

namespace json_detail {

inline void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ValueError(where + ": expected a JSON object");
}

inline void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ValueError(where + ": unknown key '" + key + "'");
  }
}

/// JSON has no infinities; they travel as the strings "inf" / "-inf" / "nan".
inline Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline double to_double(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ValueError(where + ": expected a number");
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  const std::string at = where + "." + key;
  const Json& v = j.at(key);
  if constexpr (std::is_same_v<T, double>) {
    out = to_double(v, at);
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ValueError(at + ": expected an integer");
    if (v.is_number_unsigned()) {
      out = static_cast<T>(v.get<std::uint64_t>());
    } else {
      const auto s = v.get<std::int64_t>();
      if (s < 0 && std::is_unsigned_v<T>) throw ValueError(at + ": must be non-negative");
      out = static_cast<T>(s);
    }
  } else {
    try {
      out = v.get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValueError(at + ": wrong type");
    }
  }
}

}  // namespace json_detail

// --- network / stopping / run configuration -------------------------------

inline Json to_json(const NetworkConfig& c) {
  return Json{{"depth", c.depth},
              {"channels", c.channels},
              {"input_channels", c.input_channels},
              {"output_channels", c.output_channels},
              {"leaky_slope", c.leaky_slope}};
}

inline NetworkConfig network_from_json(const Json& j, const std::string& where = "network") {
  json_detail::reject_unknown(j, {"depth", "channels", "input_channels", "output_channels", "leaky_slope"}, where);
  NetworkConfig c;
  json_detail::read(j, "depth", c.depth, where);
  json_detail::read(j, "channels", c.channels, where);
  json_detail::read(j, "input_channels", c.input_channels, where);
  json_detail::read(j, "output_channels", c.output_channels, where);
  json_detail::read(j, "leaky_slope", c.leaky_slope, where);
  return c;
}

inline Json to_json(const StopConfig& s) {
  return Json{{"relerr_tol", s.relerr_tol}, {"k_max", s.k_max}, {"check_interval", s.check_interval}};
}

inline StopConfig stop_from_json(const Json& j, const std::string& where = "stop") {
  json_detail::reject_unknown(j, {"relerr_tol", "k_max", "check_interval"}, where);
  StopConfig s;
  json_detail::read(j, "relerr_tol", s.relerr_tol, where);
  json_detail::read(j, "k_max", s.k_max, where);
  json_detail::read(j, "check_interval", s.check_interval, where);
  return s;
}

/// The trace reference is a cube, so it is carried by path in RunFile instead.
inline Json to_json(const RunConfig& c) {
  return Json{{"network", to_json(c.network)},
              {"lambda_over_n", c.lambda_over_n},
              {"alpha1", c.alpha1},
              {"alpha2", c.alpha2},
              {"lr", c.lr},
              {"seed", c.seed},
              {"stop", to_json(c.stop)}};
}

inline RunConfig run_config_from_json(const Json& j, const std::string& where = "run") {
  json_detail::reject_unknown(j, {"network", "lambda_over_n", "alpha1", "alpha2", "lr", "seed", "stop"}, where);
  RunConfig c;
  if (j.contains("network")) c.network = network_from_json(j.at("network"), where + ".network");
  json_detail::read(j, "lambda_over_n", c.lambda_over_n, where);
  json_detail::read(j, "alpha1", c.alpha1, where);
  json_detail::read(j, "alpha2", c.alpha2, where);
  json_detail::read(j, "lr", c.lr, where);
  json_detail::read(j, "seed", c.seed, where);
  if (j.contains("stop")) c.stop = stop_from_json(j.at("stop"), where + ".stop");
  return c;
}

// --- noise ------------------------------------------------------------------

inline Json to_json(const CountRange& r) { return Json::array({r.lo, r.hi}); }

inline CountRange count_range_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_unsigned() || !j[1].is_number_unsigned()) {
    throw ValueError(where + ": expected [lo, hi] with non-negative integers");
  }
  return CountRange{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

inline Json to_json(const NoiseSpec& s) {
  return Json{{"gaussian_sigma", s.gaussian_sigma},
              {"impulse_rate", s.impulse_rate},
              {"stripe_band_fraction", s.stripe_band_fraction},
              {"stripe_count_range", to_json(s.stripe_count_range)},
              {"deadline_band_fraction", s.deadline_band_fraction},
              {"deadline_count_range", to_json(s.deadline_count_range)}};
}

inline NoiseSpec noise_from_json(const Json& j, const std::string& where = "noise") {
  json_detail::reject_unknown(j,
                              {"gaussian_sigma", "impulse_rate", "stripe_band_fraction", "stripe_count_range",
                               "deadline_band_fraction", "deadline_count_range"},
                              where);
  NoiseSpec s;
  json_detail::read(j, "gaussian_sigma", s.gaussian_sigma, where);
  json_detail::read(j, "impulse_rate", s.impulse_rate, where);
  json_detail::read(j, "stripe_band_fraction", s.stripe_band_fraction, where);
  json_detail::read(j, "deadline_band_fraction", s.deadline_band_fraction, where);
  if (j.contains("stripe_count_range"))
    s.stripe_count_range = count_range_from_json(j.at("stripe_count_range"), where + ".stripe_count_range");
  if (j.contains("deadline_count_range"))
    s.deadline_count_range = count_range_from_json(j.at("deadline_count_range"), where + ".deadline_count_range");
  validate(s);
  return s;
}

inline Json to_json(const std::vector<ColumnHits>& hits) {
  Json out = Json::array();
  for (const auto& h : hits) out.push_back(Json{{"band", h.band}, {"columns", h.columns}});
  return out;
}

inline std::vector<ColumnHits> column_hits_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ValueError(where + ": expected an array");
  std::vector<ColumnHits> hits;
  for (const auto& e : j) {
    json_detail::reject_unknown(e, {"band", "columns"}, where);
    ColumnHits h{};
    json_detail::read(e, "band", h.band, where);
    json_detail::read(e, "columns", h.columns, where);
    hits.push_back(std::move(h));
  }
  return hits;
}

/// Written next to a simulated cube: how it was corrupted.
struct NoiseSidecar {
  std::optional<int> case_id;
  NoiseSpec spec;
  std::uint64_t seed = 0;
  CorruptionLog log;
};

inline Json to_json(const NoiseSidecar& s) {
  return Json{{"case", s.case_id ? Json(*s.case_id) : Json(nullptr)},
              {"seed", s.seed},
              {"noise", to_json(s.spec)},
              {"stripes", to_json(s.log.stripes)},
              {"deadlines", to_json(s.log.deadlines)}};
}

inline NoiseSidecar sidecar_from_json(const Json& j) {
  const std::string where = "sidecar";
  json_detail::reject_unknown(j, {"case", "seed", "noise", "stripes", "deadlines"}, where);
  NoiseSidecar s;
  if (j.contains("case") && !j.at("case").is_null()) {
    int id = 0;
    json_detail::read(j, "case", id, where);
    s.case_id = id;
  }
  json_detail::read(j, "seed", s.seed, where);
  if (j.contains("noise")) s.spec = noise_from_json(j.at("noise"), where + ".noise");
  if (j.contains("stripes")) s.log.stripes = column_hits_from_json(j.at("stripes"), where + ".stripes");
  if (j.contains("deadlines")) s.log.deadlines = column_hits_from_json(j.at("deadlines"), where + ".deadlines");
  return s;
}

// --- run file ---------------------------------------------------------------

/// Everything one CLI invocation needs besides its flags.
struct RunFile {
  RunConfig run;
  std::optional<int> case_id;      // selects a noise preset and its lambda
  std::optional<NoiseSpec> noise;  // explicit noise recipe; overrides the case preset
  std::uint64_t noise_seed = 0;
  std::string input;               // cube to denoise (or clean cube to corrupt)
  std::string output;
  std::string clean;               // optional clean reference
  std::string trace_reference;     // optional; enables the PSNR trace

  NoiseSpec effective_noise() const {
    if (noise) return *noise;
    if (case_id) return case_preset(*case_id);
    return NoiseSpec{};
  }
};

inline Json to_json(const RunFile& f) {
  return Json{{"run", to_json(f.run)},
              {"case", f.case_id ? Json(*f.case_id) : Json(nullptr)},
              {"noise", f.noise ? to_json(*f.noise) : Json(nullptr)},
              {"noise_seed", f.noise_seed},
              {"input", f.input},
              {"output", f.output},
              {"clean", f.clean},
              {"trace_reference", f.trace_reference}};
}

inline RunFile run_file_from_json(const Json& j) {
  const std::string where = "run file";
  json_detail::reject_unknown(
      j, {"run", "case", "noise", "noise_seed", "input", "output", "clean", "trace_reference"}, where);
  RunFile f;
  if (j.contains("run")) f.run = run_config_from_json(j.at("run"));
  if (j.contains("case") && !j.at("case").is_null()) {
    int id = 0;
    json_detail::read(j, "case", id, where);
    case_preset(id);  // validates the id
    f.case_id = id;
  }
  if (j.contains("noise") && !j.at("noise").is_null()) f.noise = noise_from_json(j.at("noise"));
  json_detail::read(j, "noise_seed", f.noise_seed, where);
  json_detail::read(j, "input", f.input, where);
  json_detail::read(j, "output", f.output, where);
  json_detail::read(j, "clean", f.clean, where);
  json_detail::read(j, "trace_reference", f.trace_reference, where);
  return f;
}

// --- reports ----------------------------------------------------------------

inline Json to_json(const MetricsReport& m) {
  return Json{{"psnr", json_detail::number(m.psnr)},
              {"ssim", json_detail::number(m.ssim)},
              {"sam", json_detail::number(m.sam)}};
}

inline MetricsReport metrics_from_json(const Json& j) {
  const std::string where = "metrics";
  json_detail::reject_unknown(j, {"psnr", "ssim", "sam"}, where);
  MetricsReport m;
  json_detail::read(j, "psnr", m.psnr, where);
  json_detail::read(j, "ssim", m.ssim, where);
  json_detail::read(j, "sam", m.sam, where);
  return m;
}

inline StopReason stop_reason_from_string(const std::string& s) {
  if (s == "tolerance") return StopReason::tolerance;
  if (s == "max-iterations") return StopReason::max_iterations;
  throw ValueError("unknown stop reason '" + s + "'");
}

/// Cubes are not embedded. Wall time is only written on request so that
/// reports of equal runs compare byte for byte.
inline Json to_json(const RunReport& r, bool with_wall_time = false) {
  Json rel = Json::array();
  for (const auto& c : r.rel_err) rel.push_back(Json{{"iteration", c.iteration}, {"value", json_detail::number(c.value)}});
  Json psnr = Json::array();
  for (double p : r.psnr) psnr.push_back(json_detail::number(p));
  Json out{{"stop_reason", to_string(r.stop_reason)},
           {"iterations", r.iterations},
           {"loss", r.loss},
           {"psnr", psnr},
           {"rel_err", rel},
           {"best_iteration", r.best_iteration},
           {"best_psnr", json_detail::number(r.best_psnr)}};
  if (with_wall_time) out["wall_seconds"] = r.wall_seconds;
  return out;
}

inline RunReport report_from_json(const Json& j) {
  const std::string where = "report";
  json_detail::reject_unknown(
      j, {"stop_reason", "iterations", "loss", "psnr", "rel_err", "best_iteration", "best_psnr", "wall_seconds"},
      where);
  RunReport r;
  std::string reason = "max-iterations";
  json_detail::read(j, "stop_reason", reason, where);
  r.stop_reason = stop_reason_from_string(reason);
  json_detail::read(j, "iterations", r.iterations, where);
  if (j.contains("loss")) {
    for (const auto& v : j.at("loss")) r.loss.push_back(json_detail::to_double(v, where + ".loss"));
  }
  if (j.contains("psnr")) {
    for (const auto& v : j.at("psnr")) r.psnr.push_back(json_detail::to_double(v, where + ".psnr"));
  }
  if (j.contains("rel_err")) {
    for (const auto& e : j.at("rel_err")) {
      json_detail::reject_unknown(e, {"iteration", "value"}, where + ".rel_err");
      RelErrCheck c{0, 0.0};
      json_detail::read(e, "iteration", c.iteration, where + ".rel_err");
      json_detail::read(e, "value", c.value, where + ".rel_err");
      r.rel_err.push_back(c);
    }
  }
  json_detail::read(j, "best_iteration", r.best_iteration, where);
  json_detail::read(j, "best_psnr", r.best_psnr, where);
  json_detail::read(j, "wall_seconds", r.wall_seconds, where);
  return r;
}

// --- files ------------------------------------------------------------------

inline Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValueError(path.string() + ": invalid JSON: " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write error on '" + path.string() + "'");
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

// --- CSV --------------------------------------------------------------------

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return Json(v).dump();
}

/// iteration,loss,rel_err,psnr with empty cells where a value was not computed.
inline std::string trace_csv(const RunReport& r) {
  std::ostringstream out;
  out << "iteration,loss,rel_err,psnr\n";
  std::size_t next_check = 0;
  for (std::size_t i = 0; i < r.loss.size(); ++i) {
    const std::size_t k = i + 1;
    out << k << ',' << format_double(r.loss[i]) << ',';
    if (next_check < r.rel_err.size() && r.rel_err[next_check].iteration == k) {
      out << format_double(r.rel_err[next_check++].value);
    }
    out << ',';
    if (i < r.psnr.size()) out << format_double(r.psnr[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace s2dip
