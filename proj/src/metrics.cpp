#include "endo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace endo {

namespace {

void require_same_dims(const DepthMap& a, const DepthMap& b, const char* what) {
  if (a.width != b.width || a.height != b.height) {
    throw std::invalid_argument(std::string(what) + ": maps are " + std::to_string(a.width) + "x" +
                                std::to_string(a.height) + " and " + std::to_string(b.width) + "x" +
                                std::to_string(b.height));
  }
}

struct Point {
  double r, c, d;
};

std::vector<Point> embed(const DepthMap& m, double range) {
  const double sr = m.height > 1 ? 1.0 / static_cast<double>(m.height - 1) : 0.0;
  const double sc = m.width > 1 ? 1.0 / static_cast<double>(m.width - 1) : 0.0;
  std::vector<Point> pts;
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x) {
      const double v = m.values[y * m.width + x];
      if (std::isfinite(v)) pts.push_back({static_cast<double>(y) * sr, static_cast<double>(x) * sc, v / range});
    }
  return pts;
}

double sq(const Point& a, const Point& b) {
  const double dr = a.r - b.r, dc = a.c - b.c, dd = a.d - b.d;
  return dr * dr + dc * dc + dd * dd;
}

// max over a of min over b, in squared units.
double directed(const std::vector<Point>& A, const std::vector<Point>& B) {
  double cmax = 0.0;
  for (const auto& a : A) {
    double cmin = INFINITY;
    for (const auto& b : B) {
      const double d = sq(a, b);
      if (d < cmin) cmin = d;
      if (cmin < cmax) break;  // a cannot raise the maximum
    }
    if (cmin > cmax) cmax = cmin;
  }
  return cmax;
}

}  // namespace

double nrmse(const DepthMap& pred, const DepthMap& truth) {
  require_same_dims(pred, truth, "nrmse");
  double se = 0.0, lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double p = pred.values[i], t = truth.values[i];
    if (!std::isfinite(p) || !std::isfinite(t)) continue;
    se += (p - t) * (p - t);
    lo = std::min(lo, t);
    hi = std::max(hi, t);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("nrmse: no pixel is finite in both maps");
  if (!(hi > lo)) throw std::invalid_argument("nrmse: truth is constant (zero range)");
  return std::sqrt(se / static_cast<double>(n)) / (hi - lo);
}

double hausdorff(const DepthMap& pred, const DepthMap& truth) {
  require_same_dims(pred, truth, "hausdorff");
  double lo = INFINITY, hi = -INFINITY;
  for (double v : truth.values) {
    if (!std::isfinite(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double range = hi > lo ? hi - lo : 1.0;
  const auto A = embed(pred, range), B = embed(truth, range);
  if (A.empty() || B.empty()) throw std::invalid_argument("hausdorff: a map has no finite pixel");
  return std::sqrt(std::max(directed(A, B), directed(B, A)));
}

double ssim(const DepthMap& a, const DepthMap& b, const SsimOptions& options) {
  require_same_dims(a, b, "ssim");
  const std::size_t W = a.width, H = a.height, k = options.window;
  if (k == 0 || W < k || H < k) throw std::invalid_argument("ssim: maps smaller than the window");
  if (options.gaussian && !(options.sigma > 0.0)) throw std::invalid_argument("ssim: sigma must be > 0");

  double lo = INFINITY, hi = -INFINITY;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (double v : {a.values[i], b.values[i]}) {
      if (!std::isfinite(v)) continue;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double range = hi > lo ? hi - lo : 1.0;

  std::vector<double> w(k * k, 1.0 / static_cast<double>(k * k));
  if (options.gaussian) {
    double total = 0.0;
    const double c = 0.5 * static_cast<double>(k - 1);
    for (std::size_t y = 0; y < k; ++y)
      for (std::size_t x = 0; x < k; ++x) {
        const double r2 = (y - c) * (y - c) + (x - c) * (x - c);
        total += w[y * k + x] = std::exp(-r2 / (2 * options.sigma * options.sigma));
      }
    for (auto& v : w) v /= total;
  }

  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double acc = 0.0;
  std::size_t windows = 0;
  for (std::size_t y0 = 0; y0 + k <= H; ++y0)
    for (std::size_t x0 = 0; x0 + k <= W; ++x0) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      bool ok = true;
      for (std::size_t y = 0; y < k && ok; ++y)
        for (std::size_t x = 0; x < k; ++x) {
          const std::size_t i = (y0 + y) * W + x0 + x;
          if (!std::isfinite(a.values[i]) || !std::isfinite(b.values[i])) {
            ok = false;
            break;
          }
          const double u = (a.values[i] - lo) / range, v = (b.values[i] - lo) / range, q = w[y * k + x];
          mx += q * u;
          my += q * v;
          sxx += q * u * u;
          syy += q * v * v;
          sxy += q * u * v;
        }
      if (!ok) continue;
      const double vx = std::max(0.0, sxx - mx * mx), vy = std::max(0.0, syy - my * my), cxy = sxy - mx * my;
      acc += ((2 * mx * my + C1) * (2 * cxy + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
      ++windows;
    }
  if (windows == 0) throw std::invalid_argument("ssim: no window is free of missing depth");
  return acc / static_cast<double>(windows);
}

EvalReport summarize(std::string tag, std::vector<EvalRow> rows) {
  EvalReport r;
  r.tag = std::move(tag);
  r.rows = std::move(rows);
  for (const auto& row : r.rows) {
    r.mean_nrmse += row.nrmse;
    r.mean_hd += row.hd;
    r.mean_ssim += row.ssim;
  }
  if (!r.rows.empty()) {
    const double n = static_cast<double>(r.rows.size());
    r.mean_nrmse /= n;
    r.mean_hd /= n;
    r.mean_ssim /= n;
  }
  return r;
}

EvalReport evaluate(const Manifest& predictions, const Manifest& truths, const std::string& tag,
                    const SsimOptions& options) {
  std::map<std::size_t, const ManifestEntry*> by_index;
  for (const auto& e : predictions.entries) {
    if (!by_index.emplace(e.index, &e).second) {
      throw std::invalid_argument("evaluate: duplicate prediction index " + std::to_string(e.index));
    }
  }
  if (by_index.size() != truths.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(by_index.size()) + " predictions for " +
                                std::to_string(truths.size()) + " truths");
  }
  std::vector<EvalRow> rows;
  for (const auto& t : truths.entries) {
    const auto it = by_index.find(t.index);
    if (it == by_index.end()) throw std::invalid_argument("evaluate: no prediction for index " + std::to_string(t.index));
    const DepthMap pred = read_depth(predictions.depth_path(*it->second));
    const DepthMap truth = read_depth(truths.depth_path(t));
    rows.push_back({t.index, nrmse(pred, truth), hausdorff(pred, truth), ssim(pred, truth, options)});
  }
  return summarize(tag, std::move(rows));
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string pct(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%+.1f%%", 100.0 * v);
  return buf;
}

}  // namespace

std::string format_report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "# " << (report.tag.empty() ? "report" : report.tag)
     << "; hausdorff points are (row/(H-1), col/(W-1), depth/truth_range)\n";
  os << "index,nrmse,hd,ssim\n";
  for (const auto& r : report.rows) os << r.index << ',' << num(r.nrmse) << ',' << num(r.hd) << ',' << num(r.ssim) << '\n';
  os << "mean," << num(report.mean_nrmse) << ',' << num(report.mean_hd) << ',' << num(report.mean_ssim) << '\n';
  return os.str();
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << format_report_csv(report);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

double relative_improvement(double before, double after) {
  if (before == 0.0) throw std::invalid_argument("relative_improvement: zero baseline");
  return (after - before) / std::abs(before);
}

std::string improvement_summary(const EvalReport& raw, const EvalReport& adapted) {
  std::ostringstream os;
  os << "condition " << raw.tag << ": images=" << raw.rows.size() << " ssim=" << num(raw.mean_ssim)
     << " nrmse=" << num(raw.mean_nrmse) << " hd=" << num(raw.mean_hd) << '\n';
  os << "condition " << adapted.tag << ": images=" << adapted.rows.size() << " ssim=" << num(adapted.mean_ssim)
     << " nrmse=" << num(adapted.mean_nrmse) << " hd=" << num(adapted.mean_hd) << '\n';
  os << "ssim ratio " << num(adapted.mean_ssim / raw.mean_ssim) << " ("
     << pct(relative_improvement(raw.mean_ssim, adapted.mean_ssim)) << ")\n";
  os << "nrmse ratio " << num(adapted.mean_nrmse / raw.mean_nrmse) << " ("
     << pct(relative_improvement(raw.mean_nrmse, adapted.mean_nrmse)) << ")\n";
  os << "hd ratio " << num(adapted.mean_hd / raw.mean_hd) << '\n';
  os << "reference (raw -> adapted ssim):\n";
  for (const auto& ref : kReferenceResults) {
    const double computed = relative_improvement(ref.raw_ssim, ref.adapted_ssim);
    os << "  " << ref.dataset << ' ' << num(ref.raw_ssim) << " -> " << num(ref.adapted_ssim) << " computed "
       << pct(computed) << " stated " << pct(ref.stated_improvement);
    if (std::abs(computed - ref.stated_improvement) > 0.01) os << " [stated figure does not match the ratio]";
    os << '\n';
  }
  return os.str();
}

}  // namespace endo
