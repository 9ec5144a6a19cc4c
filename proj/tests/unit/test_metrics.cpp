#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/metrics.hpp"

using namespace shadowlab;

namespace {

double mse255(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = 255.0 * (static_cast<double>(a.samples()[i]) - static_cast<double>(b.samples()[i]));
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// Direct 2-D Gaussian window, recomputed at every valid position.
double ssim_oracle(const Image& a, const Image& b) {
  double g[11][11], norm = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) {
      g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2.0 * 1.5 * 1.5));
      norm += g[i][j];
    }
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    double acc = 0.0;
    int n = 0;
    for (int y = 0; y + 11 <= a.height(); ++y)
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0, aa = 0, bb = 0, ab = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double w = g[i][j] / norm, va = a.at(y + i, x + j, c), vb = b.at(y + i, x + j, c);
            ma += w * va;
            mb += w * vb;
            aa += w * va * va;
            bb += w * vb * vb;
            ab += w * va * vb;
          }
        const double sa = aa - ma * ma, sb = bb - mb * mb, sab = ab - ma * mb;
        acc += (2 * ma * mb + c1) * (2 * sab + c2) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
        ++n;
      }
    total += acc / n;
  }
  return total / a.channels();
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("identical images hit the fixed points") {
    const Image a = fixtures::random_image(16, 16, 3, 1);
    CHECK(rmse(a, a) == 0.0);
    CHECK(psnr(a, a) == kPsnrCap);
    CHECK(ssim(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("constant offset of 128 levels") {
    const Image a(16, 16, 3, 0.0f);
    const Image b(16, 16, 3, 128.0f / 255.0f);
    CHECK(rmse(a, b) == doctest::Approx(128.0).epsilon(1e-6));
    CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(255.0 * 255.0 / (128.0 * 128.0))) < 1e-6);
  }

  TEST_CASE("rmse and psnr match a direct mse") {
    const Image a = fixtures::random_image(13, 17, 3, 2);
    const Image b = fixtures::random_image(13, 17, 3, 3);
    const double m = mse255(a, b);
    CHECK(rmse(a, b) == doctest::Approx(std::sqrt(m)).epsilon(1e-12));
    CHECK(psnr(a, b) == doctest::Approx(10.0 * std::log10(255.0 * 255.0 / m)).epsilon(1e-12));
  }

  TEST_CASE("ssim: constant images reduce to the luminance term") {
    const double p = 0.3, q = 0.7, c1 = 1e-4;
    const Image a(12, 12, 1, static_cast<float>(p));
    const Image b(12, 12, 1, static_cast<float>(q));
    const double pf = static_cast<float>(p), qf = static_cast<float>(q);
    CHECK(ssim(a, b) == doctest::Approx((2 * pf * qf + c1) / (pf * pf + qf * qf + c1)).epsilon(1e-9));
  }

  TEST_CASE("ssim: brute-force window oracle and inverted image") {
    const Image a = fixtures::random_image(20, 18, 3, 4);
    const Image b = fixtures::random_image(20, 18, 3, 5);
    CHECK(ssim(a, b) == doctest::Approx(ssim_oracle(a, b)).epsilon(1e-9));

    Image inv = a;
    for (float& v : inv.samples()) v = 1.0f - v;
    CHECK(ssim(a, inv) < 0.0);
    CHECK(ssim(a, inv) == doctest::Approx(ssim_oracle(a, inv)).epsilon(1e-9));
  }

  TEST_CASE("ssim rejects tiny and mismatched images") {
    CHECK_THROWS_AS(ssim(Image(8, 8, 1), Image(8, 8, 1)), InvalidInput);
    CHECK_THROWS_AS(rmse(Image(8, 8, 1), Image(8, 9, 1)), InvalidInput);
  }

  TEST_CASE("aggregate: mean over three pairs and csv layout") {
    std::vector<MetricRow> rows;
    for (int i = 0; i < 3; ++i)
      rows.push_back(evaluate_pair(fixtures::random_image(16, 16, 3, 10 + i), fixtures::random_image(16, 16, 3, 20 + i),
                                   "p" + std::to_string(2 - i)));
    const double mean_psnr = (rows[0].psnr + rows[1].psnr + rows[2].psnr) / 3.0;
    const MetricReport rep = aggregate(rows);
    CHECK(rep.count == 3);
    CHECK(rep.rows.front().id == "p0");
    CHECK(rep.mean.id == "mean");
    CHECK(rep.mean.psnr == doctest::Approx(mean_psnr).epsilon(1e-12));

    std::istringstream csv(rep.to_csv());
    std::string line;
    std::vector<std::string> lines;
    while (std::getline(csv, line)) lines.push_back(line);
    REQUIRE(lines.size() == 5);
    CHECK(lines[0] == "id,psnr,ssim,rmse,psnr_y,ssim_y,rmse_y");
    CHECK(lines[4].rfind("mean,", 0) == 0);
  }

  TEST_CASE("evaluate_pair: grayscale uses the same plane for Y") {
    const Image a = fixtures::random_image(16, 16, 1, 6);
    const Image b = fixtures::random_image(16, 16, 1, 7);
    const MetricRow r = evaluate_pair(a, b);
    CHECK(r.psnr_y == r.psnr);
    CHECK(r.ssim_y == r.ssim);
    CHECK(r.rmse_y == r.rmse);
  }
}
