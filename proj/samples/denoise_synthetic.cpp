// Corrupt a synthetic scene with one noise case and denoise it.
//   denoise_synthetic [case] [iterations]

#include <cstdio>
#include <cstdlib>

#include "s2dip/s2dip.hpp"

int main(int argc, char** argv) {
  const int case_id = argc > 1 ? std::atoi(argv[1]) : 2;
  const std::size_t iterations = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 600;

  s2dip::Rng scene_rng(1);
  const s2dip::Cube clean = s2dip::synthetic_scene(32, 32, 8, scene_rng);
  const s2dip::Cube noisy = s2dip::corrupt(clean, s2dip::case_preset(case_id), s2dip::Rng(2));

  s2dip::RunConfig cfg;
  cfg.lambda_over_n = s2dip::case_lambda_over_n(case_id);
  cfg.stop.k_max = iterations;
  cfg.trace_reference = clean;
  const auto report = s2dip::run(noisy, cfg, [](const s2dip::IterationInfo& i) {
    if (i.rel_err) std::printf("k=%zu loss=%.5f relerr=%.4f psnr=%.2f\n", i.iteration, i.loss, *i.rel_err, *i.psnr);
  });

  const auto before = s2dip::evaluate(clean, noisy);
  const auto after = s2dip::evaluate(clean, report.output);
  std::printf("noisy    psnr %.2f  ssim %.3f  sam %.3f\n", before.psnr, before.ssim, before.sam);
  std::printf("denoised psnr %.2f  ssim %.3f  sam %.3f  (%s after %zu iterations)\n", after.psnr, after.ssim,
              after.sam, s2dip::to_string(report.stop_reason), report.iterations);
}
