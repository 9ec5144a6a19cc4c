#include "shadowlab/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "shadowlab/dataio.hpp"
#include "shadowlab/error.hpp"
#include "shadowlab/parallel.hpp"

namespace shadowlab {

namespace fs = std::filesystem;

namespace {

void require_same(const Image& a, const Image& b, const char* op) {
  if (a.empty() || !a.same_shape(b)) throw InvalidInput(std::string(op) + ": images must have the same shape");
}

double mse255(const Image& a, const Image& b) {
  auto sa = a.samples();
  auto sb = b.samples();
  double s = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) {
    const double d = 255.0 * (static_cast<double>(sa[i]) - static_cast<double>(sb[i]));
    s += d * d;
  }
  return s / static_cast<double>(sa.size());
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::array<double, kWindow> gaussian_taps() {
  std::array<double, kWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

// Valid-region separable Gaussian filter of a single plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::array<double, kWindow>& k) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<std::size_t>(i)] * plane[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < kWindow; ++i) s += k[static_cast<std::size_t>(i)] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

double ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int h, int w) {
  static const auto taps = gaussian_taps();
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  std::vector<double> aa(a.size()), bb(a.size()), ab(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    aa[i] = a[i] * a[i];
    bb[i] = b[i] * b[i];
    ab[i] = a[i] * b[i];
  }
  const auto mu_a = filter_valid(a, h, w, taps), mu_b = filter_valid(b, h, w, taps);
  const auto e_aa = filter_valid(aa, h, w, taps), e_bb = filter_valid(bb, h, w, taps), e_ab = filter_valid(ab, h, w, taps);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma, vb = e_bb[i] - mb * mb, cov = e_ab[i] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

Image luma_plane(const Image& img) { return img.channels() == 3 ? extract_channel(rgb_to_ycrcb(img), 0) : img; }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double rmse(const Image& a, const Image& b) {
  require_same(a, b, "rmse");
  return std::sqrt(mse255(a, b));
}

double psnr(const Image& a, const Image& b) {
  require_same(a, b, "psnr");
  const double mse = mse255(a, b);
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

double ssim(const Image& a, const Image& b) {
  require_same(a, b, "ssim");
  if (a.height() < kWindow || a.width() < kWindow) throw InvalidInput("ssim: images must be at least 11x11");
  const int h = a.height(), w = a.width(), c = a.channels();
  double total = 0.0;
  for (int k = 0; k < c; ++k) {
    std::vector<double> pa(a.pixel_count()), pb(a.pixel_count());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        pa[static_cast<std::size_t>(y) * w + x] = a.at(y, x, k);
        pb[static_cast<std::size_t>(y) * w + x] = b.at(y, x, k);
      }
    total += ssim_plane(pa, pb, h, w);
  }
  return total / c;
}

MetricRow evaluate_pair(const Image& a, const Image& b, const std::string& id) {
  require_same(a, b, "evaluate_pair");
  MetricRow r;
  r.id = id;
  r.psnr = psnr(a, b);
  r.ssim = ssim(a, b);
  r.rmse = rmse(a, b);
  const Image ya = luma_plane(a), yb = luma_plane(b);
  r.psnr_y = psnr(ya, yb);
  r.ssim_y = ssim(ya, yb);
  r.rmse_y = rmse(ya, yb);
  return r;
}

MetricReport aggregate(std::vector<MetricRow> rows) {
  std::sort(rows.begin(), rows.end(), [](const MetricRow& x, const MetricRow& y) { return x.id < y.id; });
  MetricReport rep;
  rep.count = rows.size();
  rep.mean.id = "mean";
  if (!rows.empty()) {
    for (const auto& r : rows) {
      rep.mean.psnr += r.psnr;
      rep.mean.ssim += r.ssim;
      rep.mean.rmse += r.rmse;
      rep.mean.psnr_y += r.psnr_y;
      rep.mean.ssim_y += r.ssim_y;
      rep.mean.rmse_y += r.rmse_y;
    }
    const double n = static_cast<double>(rows.size());
    rep.mean.psnr /= n;
    rep.mean.ssim /= n;
    rep.mean.rmse /= n;
    rep.mean.psnr_y /= n;
    rep.mean.ssim_y /= n;
    rep.mean.rmse_y /= n;
  }
  rep.rows = std::move(rows);
  return rep;
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "id,psnr,ssim,rmse,psnr_y,ssim_y,rmse_y\n";
  auto line = [&](const MetricRow& r) {
    os << r.id << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.rmse) << ',' << fmt(r.psnr_y) << ','
       << fmt(r.ssim_y) << ',' << fmt(r.rmse_y) << '\n';
  };
  for (const auto& r : rows) line(r);
  line(mean);
  return os.str();
}

MetricReport evaluate_dataset(const fs::path& pred_dir, const fs::path& gt_dir) {
  auto list = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError(dir.string(), "not a directory");
    std::map<std::string, fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".png") files.emplace(e.path().stem().string(), e.path());
    }
    return files;
  };
  const auto pred = list(pred_dir);
  const auto gt = list(gt_dir);
  std::string missing;
  for (const auto& [id, p] : pred)
    if (!gt.count(id)) missing += " " + id + "(no gt)";
  for (const auto& [id, p] : gt)
    if (!pred.count(id)) missing += " " + id + "(no prediction)";
  if (!missing.empty()) throw ValidationError("unmatched files:" + missing);
  if (pred.empty()) throw ValidationError("no PNG files found in " + pred_dir.string());

  std::vector<std::pair<std::string, fs::path>> pairs(pred.begin(), pred.end());
  std::vector<MetricRow> rows(pairs.size());
  parallel_for(pairs.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto& [id, path] = pairs[i];
      rows[i] = evaluate_pair(read_image(path), read_image(gt.at(id)), id);
    }
  });
  return aggregate(std::move(rows));
}

}  // namespace shadowlab
