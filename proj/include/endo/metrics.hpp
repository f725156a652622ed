#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "endo/dataset.hpp"
#include "endo/image.hpp"

namespace endo {

// RMS error over pixels finite in both maps, divided by the truth's range on
// those pixels. Throws on a constant truth or no common finite pixel.
double nrmse(const DepthMap& pred, const DepthMap& truth);

// Symmetric Hausdorff distance between the finite pixels of each map,
// embedded as (row/(H-1), col/(W-1), depth/R) with R the truth's finite
// range (1 when the truth is constant). Exact: the early exit only skips
// candidates that cannot change the result.
double hausdorff(const DepthMap& pred, const DepthMap& truth);

struct SsimOptions {
  std::size_t window = 8;
  bool gaussian = false;  // uniform weights unless set
  double sigma = 1.5;     // Gaussian window width in pixels
};

// Mean SSIM over all window positions (stride 1) that contain only finite
// pixels. Both maps are rescaled by their joint min/max first, so R = 1,
// C1 = 0.01^2, C2 = 0.03^2 and the result is symmetric in its arguments.
double ssim(const DepthMap& a, const DepthMap& b, const SsimOptions& options = {});

struct EvalRow {
  std::size_t index = 0;
  double nrmse = 0.0, hd = 0.0, ssim = 0.0;
};

struct EvalReport {
  std::string tag;
  std::vector<EvalRow> rows;  // truth manifest order
  double mean_nrmse = 0.0, mean_hd = 0.0, mean_ssim = 0.0;
};

// Pairs predictions with truths by index; the two index sets must match.
EvalReport evaluate(const Manifest& predictions, const Manifest& truths, const std::string& tag,
                    const SsimOptions& options = {});
EvalReport summarize(std::string tag, std::vector<EvalRow> rows);

// `index,nrmse,hd,ssim` rows and a final `mean,...` row, preceded by one
// `#` line describing the Hausdorff embedding.
std::string format_report_csv(const EvalReport& report);
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);

// Reference SSIM values for depth from raw vs adapted inputs.
struct ReferenceResult {
  const char* dataset;
  double raw_ssim;
  double adapted_ssim;
  double stated_improvement;  // as given in the text, fraction
};
inline constexpr ReferenceResult kReferenceResults[] = {
    {"phantom", 0.52, 0.77, 0.48},
    {"porcine", 0.33, 0.59, 0.88},
};

double relative_improvement(double before, double after);

// Text summary: relative SSIM gain and NRMSE reduction of `adapted` over
// `raw`, followed by the reference table with recomputed ratios and a flag
// where the stated figure disagrees with the recomputation.
std::string improvement_summary(const EvalReport& raw, const EvalReport& adapted);

}  // namespace endo
