#include "sketchinpaint/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

namespace {

void check_inputs(const Grid& a, const Grid& b, const Grid& pm, const char* context) {
    require_same_shape(a, b, context);
    if (a.n() != 1 || pm.shape() != Grid::Shape{1, 1, a.h(), a.w()}) {
        throw ShapeError(std::string(context) + ": expected (1, C, H, W) images and a (1, 1, H, W) mask");
    }
}

nlohmann::ordered_json number_or_token(double v) {
    if (std::isinf(v)) {
        return v > 0 ? "inf" : "-inf";
    }
    if (std::isnan(v)) {
        return "nan";
    }
    return v;
}

}  // namespace

double masked_l2(const Grid& prediction, const Grid& target, const Grid& pm, bool whole_image) {
    check_inputs(prediction, target, pm, "masked_l2");
    double sum = 0.0;
    std::size_t count = 0;
    for (int c = 0; c < prediction.c(); ++c) {
        for (int y = 0; y < prediction.h(); ++y) {
            for (int x = 0; x < prediction.w(); ++x) {
                if (whole_image || pm.at(0, 0, y, x) == 0.0) {
                    const double d = prediction.at(0, c, y, x) - target.at(0, c, y, x);
                    sum += d * d;
                    ++count;
                }
            }
        }
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

double psnr_from_mse(double mse) {
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Grid& prediction, const Grid& target, const Grid& pm, bool whole_image) {
    check_inputs(prediction, target, pm, "ssim");
    constexpr int kWin = 11;
    constexpr double kSigma = 1.5;
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    std::vector<double> w(kWin * kWin);
    double wsum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
            const double di = i - kWin / 2, dj = j - kWin / 2;
            w[static_cast<std::size_t>(i * kWin + j)] = std::exp(-(di * di + dj * dj) / (2 * kSigma * kSigma));
            wsum += w[static_cast<std::size_t>(i * kWin + j)];
        }
    }
    for (double& v : w) {
        v /= wsum;
    }
    double total = 0.0;
    std::size_t count = 0;
    const int r = kWin / 2;
    for (int c = 0; c < prediction.c(); ++c) {
        for (int y = r; y + r < prediction.h(); ++y) {
            for (int x = r; x + r < prediction.w(); ++x) {
                if (!whole_image && pm.at(0, 0, y, x) != 0.0) {
                    continue;
                }
                double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
                for (int i = 0; i < kWin; ++i) {
                    for (int j = 0; j < kWin; ++j) {
                        const double k = w[static_cast<std::size_t>(i * kWin + j)];
                        const double a = prediction.at(0, c, y - r + i, x - r + j);
                        const double b = target.at(0, c, y - r + i, x - r + j);
                        ma += k * a;
                        mb += k * b;
                        saa += k * a * a;
                        sbb += k * b * b;
                        sab += k * a * b;
                    }
                }
                const double va = saa - ma * ma, vb = sbb - mb * mb, cov = sab - ma * mb;
                total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                ++count;
            }
        }
    }
    return count == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(count);
}

MetricRegistry& MetricRegistry::instance() {
    static MetricRegistry registry;
    return registry;
}

void MetricRegistry::add(const std::string& name, Metric metric) {
    metrics_[name] = std::move(metric);
}

void MetricRegistry::clear() {
    metrics_.clear();
}

MetricsReport compute_metrics(const std::string& id, const Grid& prediction, const Grid& target, const Grid& pm,
                              bool whole_image) {
    MetricsReport r;
    r.id = id;
    r.l2 = masked_l2(prediction, target, pm, whole_image);
    r.psnr = psnr_from_mse(r.l2);
    r.ssim = ssim(prediction, target, pm, whole_image);
    for (const auto& [name, metric] : MetricRegistry::instance().metrics()) {
        r.external[name] = metric(prediction, target, pm);
    }
    return r;
}

std::string report_line(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["skipped"] = r.skipped;
    if (r.skipped) {
        j["reason"] = r.skip_reason;
        return j.dump();
    }
    j["masked_l2"] = number_or_token(r.l2);
    j["psnr"] = number_or_token(r.psnr);
    j["ssim"] = number_or_token(r.ssim);
    for (const auto& [name, v] : r.external) {
        j[name] = number_or_token(v);
    }
    return j.dump();
}

std::string summary_line(const std::vector<MetricsReport>& reports) {
    double l2 = 0, psnr = 0, s = 0;
    int n = 0, skipped = 0;
    for (const auto& r : reports) {
        if (r.skipped) {
            ++skipped;
            continue;
        }
        l2 += r.l2;
        psnr += r.psnr;
        s += r.ssim;
        ++n;
    }
    nlohmann::ordered_json j;
    j["summary"] = true;
    j["evaluated"] = n;
    j["skipped"] = skipped;
    if (n > 0) {
        j["masked_l2"] = number_or_token(l2 / n);
        j["psnr"] = number_or_token(psnr / n);
        j["ssim"] = number_or_token(s / n);
    }
    return j.dump();
}

}  // namespace sketchinpaint
