#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sketchinpaint/grid.hpp"

namespace sketchinpaint {

// Built-in metrics on (1, C, H, W) images in [0, 1]. Unless whole_image is set,
// only pixels with pm == 0 (the corrupted region) count.
double masked_l2(const Grid& prediction, const Grid& target, const Grid& pm, bool whole_image = false);
// 10 log10(1 / mse); +infinity when mse == 0.
double psnr_from_mse(double mse);
// Mean SSIM (11 x 11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, data range 1)
// over windows lying fully inside the image, averaged over channels. Restricted
// to window centres with pm == 0 unless whole_image is set; NaN when no centre
// qualifies.
double ssim(const Grid& prediction, const Grid& target, const Grid& pm, bool whole_image = false);

// External metrics (perceptual or distribution-level scores) are supplied as
// plug-ins; none are built in.
class MetricRegistry {
public:
    using Metric = std::function<double(const Grid& prediction, const Grid& target, const Grid& pm)>;
    static MetricRegistry& instance();
    void add(const std::string& name, Metric metric);
    void clear();
    const std::map<std::string, Metric>& metrics() const { return metrics_; }

private:
    std::map<std::string, Metric> metrics_;
};

struct MetricsReport {
    std::string id;
    bool skipped = false;
    std::string skip_reason;
    double l2 = 0.0;
    double psnr = 0.0;
    double ssim = 0.0;
    std::map<std::string, double> external;
};

MetricsReport compute_metrics(const std::string& id, const Grid& prediction, const Grid& target, const Grid& pm,
                              bool whole_image = false);
// One JSON object; an infinite PSNR is written as the string "inf".
std::string report_line(const MetricsReport& report);
// Summary over non-skipped reports: means plus the skipped count.
std::string summary_line(const std::vector<MetricsReport>& reports);

}  // namespace sketchinpaint
