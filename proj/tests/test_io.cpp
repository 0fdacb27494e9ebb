#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <string>

#include "s2dip/cube_io.hpp"
#include "s2dip/npy.hpp"
#include "s2dip/rng.hpp"
#include "s2dip/run_file.hpp"

using namespace s2dip;
using Bytes = std::vector<unsigned char>;

namespace {

Bytes npy_bytes(const std::string& dict, const Bytes& payload, int major = 1) {
  const std::size_t prefix = major == 1 ? 10 : 12;
  std::string header = dict;
  while ((prefix + header.size() + 1) % 64 != 0) header += ' ';
  header += '\n';
  Bytes out{0x93, 'N', 'U', 'M', 'P', 'Y', static_cast<unsigned char>(major), 0};
  const std::size_t len = header.size();
  out.push_back(static_cast<unsigned char>(len & 0xff));
  out.push_back(static_cast<unsigned char>((len >> 8) & 0xff));
  if (major != 1) {
    out.push_back(0);
    out.push_back(0);
  }
  out.insert(out.end(), header.begin(), header.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

template <class T>
Bytes raw(std::initializer_list<T> values, bool big_endian = false) {
  Bytes out;
  for (T v : values) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if (big_endian) std::reverse(b, b + sizeof(T));
    out.insert(out.end(), b, b + sizeof(T));
  }
  return out;
}

}  // namespace

TEST(CubeFormat, RoundTripIsExactForFloatValues) {
  Rng rng(1);
  const Cube c = quantize_f32(Cube(uniform(rng, {3, 5, 4}, 0, 1)));
  const Bytes bytes = encode_cube(c);
  EXPECT_EQ(bytes.size(), kCubeHeaderBytes + 4 * c.size());
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "HSIC");
  EXPECT_EQ(decode_cube(bytes), c);
}

TEST(CubeFormat, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "s2dip_test_roundtrip.hsic";
  Rng rng(2);
  const Cube c = quantize_f32(Cube(uniform(rng, {2, 2, 7}, 0, 1)));
  write_cube(c, path);
  EXPECT_EQ(read_cube(path), c);
  std::filesystem::remove(path);
  EXPECT_THROW(read_cube(path), IoError);
}

TEST(CubeFormat, RejectsMalformedInput) {
  const Bytes good = encode_cube(Cube(2, 2, 2, 0.5));
  EXPECT_THROW(decode_cube(Bytes(good.begin(), good.begin() + 10)), IoError);
  Bytes bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_cube(bad_magic), IoError);
  Bytes bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_cube(bad_version), IoError);
  Bytes truncated(good.begin(), good.end() - 1);
  try {
    decode_cube(truncated);
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  Bytes trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(decode_cube(trailing), IoError);
  Bytes zero_extent = good;
  zero_extent[6] = zero_extent[7] = zero_extent[8] = zero_extent[9] = 0;
  EXPECT_THROW(decode_cube(zero_extent), IoError);
}

TEST(Npy, ReadsLittleEndianFloat32) {
  const Bytes b = npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2, 2), }",
                            raw<float>({0.5f, 0.25f, 1.0f, 0.0f}));
  const Cube c = decode_npy(b);
  ASSERT_EQ(c.shape(), (Shape{1, 2, 2}));
  EXPECT_EQ(c(0, 0, 0), 0.5);
  EXPECT_EQ(c(0, 0, 1), 0.25);
  EXPECT_EQ(c(0, 1, 0), 1.0);
}

TEST(Npy, ReadsBigEndianFloat64AndVersion2) {
  const Bytes b = npy_bytes("{'descr': '>f8', 'fortran_order': False, 'shape': (2, 1, 1), }",
                            raw<double>({0.125, 0.75}, true), 2);
  const Cube c = decode_npy(b);
  EXPECT_EQ(c(0, 0, 0), 0.125);
  EXPECT_EQ(c(1, 0, 0), 0.75);
}

TEST(Npy, RejectsUnsupportedFiles) {
  const Bytes payload = raw<float>({0, 0, 0, 0});
  EXPECT_THROW(decode_npy(npy_bytes("{'descr': '<f4', 'fortran_order': True, 'shape': (1, 2, 2), }", payload)),
               IoError);
  EXPECT_THROW(decode_npy(npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (4,), }", payload)),
               ShapeError);
  EXPECT_THROW(decode_npy(npy_bytes("{'descr': '<i4', 'fortran_order': False, 'shape': (1, 2, 2), }", payload)),
               IoError);
  EXPECT_THROW(decode_npy(npy_bytes("{'descr': '<f4', 'fortran_order': False, 'shape': (1, 2, 3), }", payload)),
               IoError);
  EXPECT_THROW(decode_npy(Bytes{'n', 'o', 'p', 'e'}), IoError);
}

TEST(Json, RunConfigRoundTripAndDefaults) {
  RunConfig c;
  c.network.channels = {4, 8, 12};
  c.lambda_over_n = 1.0;
  c.lr = 0.002;
  c.seed = 99;
  c.stop.k_max = 123;
  const RunConfig back = run_config_from_json(to_json(c));
  EXPECT_EQ(back.network, c.network);
  EXPECT_EQ(back.stop, c.stop);
  EXPECT_EQ(back.lambda_over_n, 1.0);
  EXPECT_EQ(back.lr, 0.002);
  EXPECT_EQ(back.seed, 99u);

  const RunConfig defaults = run_config_from_json(Json::object());
  const Json materialized = to_json(defaults);
  for (const char* key : {"network", "lambda_over_n", "alpha1", "alpha2", "lr", "seed", "stop"})
    EXPECT_TRUE(materialized.contains(key)) << key;
  EXPECT_EQ(defaults.stop.k_max, 7000u);
  EXPECT_EQ(defaults.stop.relerr_tol, 0.01);
}

TEST(Json, UnknownKeysAreRejected) {
  EXPECT_THROW(run_config_from_json(Json{{"learning_rate", 0.1}}), ValueError);
  EXPECT_THROW(run_file_from_json(Json{{"run", Json{{"stop", Json{{"kmax", 3}}}}}}), ValueError);
  EXPECT_THROW(noise_from_json(Json{{"sigma", 0.1}}), ValueError);
}

TEST(Json, NoiseSidecarRoundTrip) {
  NoiseSidecar s;
  s.case_id = 5;
  s.spec = case_preset(5);
  s.seed = 17;
  s.log.stripes = {{2, {1, 4, 9}}};
  const NoiseSidecar back = sidecar_from_json(to_json(s));
  EXPECT_EQ(back.case_id, 5);
  EXPECT_EQ(back.spec, s.spec);
  EXPECT_EQ(back.seed, 17u);
  ASSERT_EQ(back.log.stripes.size(), 1u);
  EXPECT_EQ(back.log.stripes[0].columns, (std::vector<std::size_t>{1, 4, 9}));
}

TEST(Json, ReportRoundTripKeepsInfinity) {
  RunReport r;
  r.stop_reason = StopReason::tolerance;
  r.iterations = 3;
  r.loss = {0.5, 0.25, 0.125};
  r.psnr = {10.0, 20.0, std::numeric_limits<double>::infinity()};
  r.rel_err = {{2, 0.5}};
  r.best_iteration = 3;
  r.best_psnr = std::numeric_limits<double>::infinity();
  const Json j = to_json(r);
  EXPECT_EQ(j.at("best_psnr"), "inf");
  EXPECT_FALSE(j.contains("wall_seconds"));
  const RunReport back = report_from_json(j);
  EXPECT_EQ(back.stop_reason, StopReason::tolerance);
  EXPECT_EQ(back.loss, r.loss);
  EXPECT_EQ(back.psnr, r.psnr);
  EXPECT_EQ(back.rel_err, r.rel_err);
  EXPECT_TRUE(std::isinf(back.best_psnr));
}

TEST(Json, TraceCsv) {
  RunReport r;
  r.iterations = 2;
  r.loss = {0.5, 0.25};
  r.rel_err = {{2, 0.125}};
  EXPECT_EQ(trace_csv(r), "iteration,loss,rel_err,psnr\n1,0.5,,\n2,0.25,0.125,\n");
}
