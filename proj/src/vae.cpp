#include "sketchinpaint/vae.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint {

const char* vae_mode_name(VaeMode mode) { return mode == VaeMode::identity ? "identity" : "patch_linear"; }

VaeMode parse_vae_mode(const std::string& name) {
    if (name == "identity") {
        return VaeMode::identity;
    }
    if (name == "patch_linear") {
        return VaeMode::patch_linear;
    }
    throw ParameterError("vae_mode", "unknown mode '" + name + "'");
}

Vae::Vae(const VaeConfig& config, ParameterSet& params) : config_(config) {
    if (config.factor < 1) {
        throw ParameterError("vae_factor", "must be >= 1");
    }
    if (config.mode == VaeMode::identity) {
        if (config.factor != 1 || config.image_channels != config.latent_channels) {
            throw ParameterError("vae_mode", "identity mode needs factor 1 and image channels == latent channels");
        }
        fit_stats_ = params.add("vae.fit_stats", Grid(1, 1, 1, 2, 0.0), ParamGroup::frozen);
        fit_stats_.mutable_value()[0] = 1.0;
        return;
    }
    const int p = patch_size();
    mean_ = params.add("vae.mean", Grid(1, 1, 1, p), ParamGroup::frozen);
    basis_ = params.add("vae.basis", Grid(1, 1, config.latent_channels, p), ParamGroup::frozen);
    scale_ = params.add("vae.scale", Grid(1, config.latent_channels, 1, 1, 1.0), ParamGroup::frozen);
    fit_stats_ = params.add("vae.fit_stats", Grid(1, 1, 1, 2, 0.0), ParamGroup::frozen);
}

bool Vae::fitted() const { return fit_stats_.value()[0] != 0.0; }
double Vae::validation_error() const { return fit_stats_.value()[1]; }

Grid Vae::encode(const Grid& image) const {
    const int f = config_.factor;
    if (image.c() != config_.image_channels || image.h() % f != 0 || image.w() % f != 0) {
        throw ShapeError("vae_encode: expected " + std::to_string(config_.image_channels) +
                         " channels and sides divisible by " + std::to_string(f) + ", got " + image.shape_str());
    }
    if (config_.mode == VaeMode::identity) {
        return image;
    }
    const int lc = config_.latent_channels;
    const int p = patch_size();
    Grid out(image.n(), lc, image.h() / f, image.w() / f);
    std::vector<double> patch(static_cast<std::size_t>(p));
    const Grid& mean = mean_.value();
    const Grid& basis = basis_.value();
    for (int n = 0; n < image.n(); ++n) {
        for (int y = 0; y < out.h(); ++y) {
            for (int x = 0; x < out.w(); ++x) {
                std::size_t k = 0;
                for (int c = 0; c < config_.image_channels; ++c) {
                    for (int dy = 0; dy < f; ++dy) {
                        for (int dx = 0; dx < f; ++dx, ++k) {
                            patch[k] = image.at(n, c, y * f + dy, x * f + dx) - mean[k];
                        }
                    }
                }
                for (int l = 0; l < lc; ++l) {
                    const double* row = basis.data() + static_cast<std::size_t>(l) * p;
                    double acc = 0.0;
                    for (int i = 0; i < p; ++i) {
                        acc += row[i] * patch[static_cast<std::size_t>(i)];
                    }
                    out.at(n, l, y, x) = acc / scale_.value()[static_cast<std::size_t>(l)];
                }
            }
        }
    }
    return out;
}

Grid Vae::decode(const Grid& latent) const {
    if (latent.c() != config_.latent_channels) {
        throw ShapeError("vae_decode: expected " + std::to_string(config_.latent_channels) + " channels, got " +
                         latent.shape_str());
    }
    if (config_.mode == VaeMode::identity) {
        return latent;
    }
    const int f = config_.factor;
    const int lc = config_.latent_channels;
    const int p = patch_size();
    Grid out(latent.n(), config_.image_channels, latent.h() * f, latent.w() * f);
    std::vector<double> patch(static_cast<std::size_t>(p));
    const Grid& mean = mean_.value();
    const Grid& basis = basis_.value();
    for (int n = 0; n < latent.n(); ++n) {
        for (int y = 0; y < latent.h(); ++y) {
            for (int x = 0; x < latent.w(); ++x) {
                for (int i = 0; i < p; ++i) {
                    patch[static_cast<std::size_t>(i)] = mean[static_cast<std::size_t>(i)];
                }
                for (int l = 0; l < lc; ++l) {
                    const double coeff = latent.at(n, l, y, x) * scale_.value()[static_cast<std::size_t>(l)];
                    const double* row = basis.data() + static_cast<std::size_t>(l) * p;
                    for (int i = 0; i < p; ++i) {
                        patch[static_cast<std::size_t>(i)] += coeff * row[i];
                    }
                }
                std::size_t k = 0;
                for (int c = 0; c < config_.image_channels; ++c) {
                    for (int dy = 0; dy < f; ++dy) {
                        for (int dx = 0; dx < f; ++dx, ++k) {
                            out.at(n, c, y * f + dy, x * f + dx) = patch[k];
                        }
                    }
                }
            }
        }
    }
    return out;
}

VaeFitReport Vae::fit(std::span<const Grid> images, double validation_fraction) {
    if (config_.mode == VaeMode::identity) {
        VaeFitReport r;
        r.train_images = static_cast<int>(images.size());
        return r;
    }
    if (images.empty()) {
        throw ValueError("vae fit: no images");
    }
    const std::size_t total = images.size();
    std::size_t held_out = static_cast<std::size_t>(std::lround(validation_fraction * static_cast<double>(total)));
    if (total >= 2) {
        held_out = std::clamp<std::size_t>(held_out, 1, total - 1);
    } else {
        held_out = 0;
    }
    const auto train = images.first(total - held_out);
    const auto validation = held_out == 0 ? images : images.last(held_out);

    const int f = config_.factor;
    const int p = patch_size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd second = Eigen::MatrixXd::Zero(p, p);
    Eigen::VectorXd patch(p);
    long long count = 0;
    for (const Grid& img : train) {
        if (img.c() != config_.image_channels || img.h() % f != 0 || img.w() % f != 0) {
            throw ShapeError("vae fit: bad image shape " + img.shape_str());
        }
        for (int n = 0; n < img.n(); ++n) {
            for (int y = 0; y < img.h() / f; ++y) {
                for (int x = 0; x < img.w() / f; ++x) {
                    int k = 0;
                    for (int c = 0; c < config_.image_channels; ++c) {
                        for (int dy = 0; dy < f; ++dy) {
                            for (int dx = 0; dx < f; ++dx, ++k) {
                                patch[k] = img.at(n, c, y * f + dy, x * f + dx);
                            }
                        }
                    }
                    mean += patch;
                    second.selfadjointView<Eigen::Lower>().rankUpdate(patch);
                    ++count;
                }
            }
        }
    }
    mean /= static_cast<double>(count);
    Eigen::MatrixXd cov = second.selfadjointView<Eigen::Lower>();
    cov = cov / static_cast<double>(count) - mean * mean.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    const int lc = config_.latent_channels;
    Grid& mean_g = mean_.mutable_value();
    Grid& basis_g = basis_.mutable_value();
    Grid& scale_g = scale_.mutable_value();
    for (int i = 0; i < p; ++i) {
        mean_g[static_cast<std::size_t>(i)] = mean[i];
    }
    for (int l = 0; l < lc; ++l) {
        // Eigenvalues ascend; take from the top. Sign fixed by the largest entry.
        const int col = p - 1 - l;
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0) {
            v = -v;
        }
        for (int i = 0; i < p; ++i) {
            basis_g[static_cast<std::size_t>(l) * p + i] = v[i];
        }
        scale_g[static_cast<std::size_t>(l)] = std::sqrt(std::max(solver.eigenvalues()[col], 1e-12));
    }
    fit_stats_.mutable_value()[0] = 1.0;

    VaeFitReport report;
    report.train_images = static_cast<int>(train.size());
    report.validation_images = static_cast<int>(held_out);
    report.train_error = reconstruction_error(*this, train);
    report.validation_error = reconstruction_error(*this, validation);
    fit_stats_.mutable_value()[1] = report.validation_error;
    return report;
}

double reconstruction_error(const Vae& vae, std::span<const Grid> images) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const Grid& img : images) {
        const Grid rec = vae.decode(vae.encode(img));
        for (std::size_t i = 0; i < img.size(); ++i) {
            const double d = rec[i] - img[i];
            acc += d * d;
        }
        count += img.size();
    }
    return count == 0 ? 0.0 : acc / static_cast<double>(count);
}

}  // namespace sketchinpaint
