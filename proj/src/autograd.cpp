#include "sketchinpaint/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "sketchinpaint/errors.hpp"

namespace sketchinpaint::ag {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

thread_local bool g_grad_enabled = true;

Grid::Shape broadcast_shape(const Grid::Shape& a, const Grid::Shape& b, const char* op) {
    Grid::Shape out{};
    for (int d = 0; d < 4; ++d) {
        if (a[d] == b[d] || b[d] == 1) {
            out[d] = a[d];
        } else if (a[d] == 1) {
            out[d] = b[d];
        } else {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
    }
    return out;
}

// Element strides of `s` as seen from a broadcast output; 0 on broadcast axes.
std::array<std::size_t, 4> broadcast_strides(const Grid::Shape& s, const Grid::Shape& out) {
    std::array<std::size_t, 4> dense{static_cast<std::size_t>(s[1]) * s[2] * s[3],
                                     static_cast<std::size_t>(s[2]) * s[3], static_cast<std::size_t>(s[3]), 1};
    for (int d = 0; d < 4; ++d) {
        if (s[d] == 1 && out[d] != 1) {
            dense[d] = 0;
        }
    }
    return dense;
}

// Calls f(out_index, a_index, b_index) over the broadcast output.
template <typename F>
void for_each_broadcast(const Grid::Shape& out, const Grid::Shape& sa, const Grid::Shape& sb, F&& f) {
    const auto ta = broadcast_strides(sa, out);
    const auto tb = broadcast_strides(sb, out);
    std::size_t o = 0;
    for (int n = 0; n < out[0]; ++n) {
        for (int c = 0; c < out[1]; ++c) {
            for (int h = 0; h < out[2]; ++h) {
                const std::size_t ia = n * ta[0] + c * ta[1] + h * ta[2];
                const std::size_t ib = n * tb[0] + c * tb[1] + h * tb[2];
                for (int w = 0; w < out[3]; ++w, ++o) {
                    f(o, ia + w * ta[3], ib + w * tb[3]);
                }
            }
        }
    }
}

void im2col(const double* x, int channels, int height, int width, int k, int stride, int pad, int out_h, int out_w,
            double* cols) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        const double* xc = x + static_cast<std::size_t>(c) * height * width;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    double* dst = row + oy * out_w;
                    if (iy < 0 || iy >= height) {
                        std::fill_n(dst, out_w, 0.0);
                        continue;
                    }
                    const double* src = xc + static_cast<std::size_t>(iy) * width;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, int channels, int height, int width, int k, int stride, int pad, int out_h, int out_w,
            double* x) {
    const int plane = out_h * out_w;
    for (int c = 0; c < channels; ++c) {
        double* xc = x + static_cast<std::size_t>(c) * height * width;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const double* row = cols + static_cast<std::size_t>((c * k + ky) * k + kx) * plane;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= height) {
                        continue;
                    }
                    double* dst = xc + static_cast<std::size_t>(iy) * width;
                    const double* src = row + oy * out_w;
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < width) {
                            dst[ix] += src[ox];
                        }
                    }
                }
            }
        }
    }
}

}  // namespace

Grid& Node::grad_buffer() {
    if (grad.empty() && !value.empty()) {
        grad = Grid::zeros_like(value);
    }
    return grad;
}

Var::Var(Grid value, bool requires_grad) : node_(std::make_shared<Node>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
}

Var make_result(Grid value, std::initializer_list<Var> inputs, std::function<void(Node&)> backward) {
    Var out(std::move(value));
    if (!g_grad_enabled) {
        return out;
    }
    const bool any = std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
    if (!any) {
        return out;
    }
    out.node_->requires_grad = true;
    for (const Var& v : inputs) {
        if (v.defined()) {
            out.node_->inputs.push_back(v.node());
        }
    }
    out.node_->backward = std::move(backward);
    return out;
}

void backward(const Var& root) {
    if (root.value().size() != 1) {
        throw ShapeError("backward: root must be a scalar, got " + root.value().shape_str());
    }
    backward(root, Grid(root.shape(), 1.0));
}

void backward(const Var& root, const Grid& seed) {
    require_same_shape(root.value(), seed, "backward seed");
    if (!root.requires_grad()) {
        return;
    }
    // Iterative post-order DFS gives a topological order of the recorded graph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack{{root.node().get(), 0}};
    visited.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) {
                stack.emplace_back(child, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    Grid& g = root.node()->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] += seed[i];
    }
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* node = *it;
        if (node->backward && !node->grad.empty()) {
            node->backward(*node);
        }
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var constant(Grid value) { return Var(std::move(value), false); }

namespace {

enum class BinaryKind { add, sub, mul };

Var binary(const Var& a, const Var& b, BinaryKind kind, const char* name) {
    const Grid& av = a.value();
    const Grid& bv = b.value();
    const auto out_shape = broadcast_shape(av.shape(), bv.shape(), name);
    Grid out(out_shape);
    const double* pa = av.data();
    const double* pb = bv.data();
    double* po = out.data();
    if (av.same_shape(bv)) {
        for (std::size_t i = 0; i < out.size(); ++i) {
            po[i] = kind == BinaryKind::add ? pa[i] + pb[i] : kind == BinaryKind::sub ? pa[i] - pb[i] : pa[i] * pb[i];
        }
    } else {
        for_each_broadcast(out_shape, av.shape(), bv.shape(), [&](std::size_t o, std::size_t ia, std::size_t ib) {
            po[o] = kind == BinaryKind::add ? pa[ia] + pb[ib] : kind == BinaryKind::sub ? pa[ia] - pb[ib] : pa[ia] * pb[ib];
        });
    }
    auto na = a.node();
    auto nb = b.node();
    return make_result(std::move(out), {a, b}, [na, nb, kind](Node& self) {
        const Grid& g = self.grad;
        const Grid::Shape& out_shape = self.value.shape();
        if (na->requires_grad) {
            Grid& ga = na->grad_buffer();
            for_each_broadcast(out_shape, na->value.shape(), nb->value.shape(),
                               [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                   ga[ia] += kind == BinaryKind::mul ? g[o] * nb->value[ib] : g[o];
                               });
        }
        if (nb->requires_grad) {
            Grid& gb = nb->grad_buffer();
            for_each_broadcast(out_shape, na->value.shape(), nb->value.shape(),
                               [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                   gb[ib] += kind == BinaryKind::mul ? g[o] * na->value[ia]
                                             : kind == BinaryKind::sub ? -g[o]
                                                                       : g[o];
                               });
        }
    });
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary(a, b, BinaryKind::add, "add"); }
Var sub(const Var& a, const Var& b) { return binary(a, b, BinaryKind::sub, "sub"); }
Var mul(const Var& a, const Var& b) { return binary(a, b, BinaryKind::mul, "mul"); }

Var scale(const Var& a, double factor) {
    Grid out = a.value();
    for (double& v : out.values()) {
        v *= factor;
    }
    auto na = a.node();
    return make_result(std::move(out), {a}, [na, factor](Node& self) {
        Grid& ga = na->grad_buffer();
        for (std::size_t i = 0; i < ga.size(); ++i) {
            ga[i] += factor * self.grad[i];
        }
    });
}

Var silu(const Var& x) {
    Grid out = Grid::zeros_like(x.value());
    const Grid& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = xv[i] / (1.0 + std::exp(-xv[i]));
    }
    auto nx = x.node();
    return make_result(std::move(out), {x}, [nx](Node& self) {
        Grid& gx = nx->grad_buffer();
        const Grid& xv = nx->value;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double s = 1.0 / (1.0 + std::exp(-xv[i]));
            gx[i] += self.grad[i] * s * (1.0 + xv[i] * (1.0 - s));
        }
    });
}

Var sigmoid(const Var& x) {
    Grid out = Grid::zeros_like(x.value());
    const Grid& xv = x.value();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = 1.0 / (1.0 + std::exp(-xv[i]));
    }
    auto nx = x.node();
    return make_result(std::move(out), {x}, [nx](Node& self) {
        Grid& gx = nx->grad_buffer();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double s = self.value[i];
            gx[i] += self.grad[i] * s * (1.0 - s);
        }
    });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias, int stride, int padding) {
    const Grid& xv = x.value();
    const Grid& wv = weight.value();
    const int batch = xv.n();
    const int cin = xv.c();
    const int height = xv.h();
    const int width = xv.w();
    const int cout = wv.n();
    const int k = wv.h();
    if (wv.c() != cin || wv.w() != k) {
        throw ShapeError("conv2d: weight " + wv.shape_str() + " incompatible with input " + xv.shape_str());
    }
    if (bias.defined() && bias.value().shape() != Grid::Shape{1, cout, 1, 1}) {
        throw ShapeError("conv2d: bias " + bias.value().shape_str() + " for " + std::to_string(cout) + " outputs");
    }
    if (stride < 1 || padding < 0) {
        throw ShapeError("conv2d: stride must be >= 1 and padding >= 0");
    }
    const int out_h = (height + 2 * padding - k) / stride + 1;
    const int out_w = (width + 2 * padding - k) / stride + 1;
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("conv2d: kernel larger than padded input " + xv.shape_str());
    }
    const int ck = cin * k * k;
    const int plane = out_h * out_w;
    const bool pointwise = k == 1 && stride == 1 && padding == 0;

    Grid out(batch, cout, out_h, out_w);
    CMapMat wmat(wv.data(), cout, ck);
    std::vector<double> cols(pointwise ? 0 : static_cast<std::size_t>(ck) * plane);
    for (int n = 0; n < batch; ++n) {
        const double* xn = xv.plane(n, 0);
        if (!pointwise) {
            im2col(xn, cin, height, width, k, stride, padding, out_h, out_w, cols.data());
        }
        CMapMat cmat(pointwise ? xn : cols.data(), ck, plane);
        MapMat omat(out.plane(n, 0), cout, plane);
        omat.noalias() = wmat * cmat;
        if (bias.defined()) {
            for (int o = 0; o < cout; ++o) {
                omat.row(o).array() += bias.value()[o];
            }
        }
    }

    auto nx = x.node();
    auto nw = weight.node();
    auto nb = bias.defined() ? bias.node() : nullptr;
    return make_result(std::move(out), {x, weight, bias},
                       [nx, nw, nb, stride, padding, k, out_h, out_w, ck, plane, pointwise](Node& self) {
                           const Grid& xv = nx->value;
                           const int batch = xv.n();
                           const int cin = xv.c();
                           const int cout = nw->value.n();
                           CMapMat wmat(nw->value.data(), cout, ck);
                           std::vector<double> cols(pointwise ? 0 : static_cast<std::size_t>(ck) * plane);
                           for (int n = 0; n < batch; ++n) {
                               CMapMat gout(self.grad.plane(n, 0), cout, plane);
                               if (nb && nb->requires_grad) {
                                   Grid& gb = nb->grad_buffer();
                                   for (int o = 0; o < cout; ++o) {
                                       gb[o] += gout.row(o).sum();
                                   }
                               }
                               if (nw->requires_grad) {
                                   const double* xn = xv.plane(n, 0);
                                   if (!pointwise) {
                                       im2col(xn, cin, xv.h(), xv.w(), k, stride, padding, out_h, out_w, cols.data());
                                   }
                                   CMapMat cmat(pointwise ? xn : cols.data(), ck, plane);
                                   MapMat gw(nw->grad_buffer().data(), cout, ck);
                                   gw.noalias() += gout * cmat.transpose();
                               }
                               if (nx->requires_grad) {
                                   Grid& gx = nx->grad_buffer();
                                   if (pointwise) {
                                       MapMat gxn(gx.plane(n, 0), ck, plane);
                                       gxn.noalias() += wmat.transpose() * gout;
                                   } else {
                                       MapMat cmat(cols.data(), ck, plane);
                                       cmat.noalias() = wmat.transpose() * gout;
                                       col2im(cols.data(), cin, xv.h(), xv.w(), k, stride, padding, out_h, out_w,
                                              gx.plane(n, 0));
                                   }
                               }
                           }
                       });
}

Var group_norm(const Var& x, int groups, double eps, const Var& gamma, const Var& beta, NormEpsilon mode) {
    const Grid& xv = x.value();
    const int batch = xv.n();
    const int channels = xv.c();
    if (groups <= 0 || channels % groups != 0) {
        throw ShapeError("group_norm: " + std::to_string(groups) + " groups do not divide " +
                         std::to_string(channels) + " channels");
    }
    for (const Var* p : {&gamma, &beta}) {
        if (p->defined() && p->value().shape() != Grid::Shape{1, channels, 1, 1}) {
            throw ShapeError("group_norm: affine parameter " + p->value().shape_str() + " for " +
                             std::to_string(channels) + " channels");
        }
    }
    const int per_group = channels / groups;
    const std::size_t spatial = static_cast<std::size_t>(xv.h()) * xv.w();
    const std::size_t count = per_group * spatial;

    Grid out = Grid::zeros_like(xv);
    // Per (n, g): normalized values and 1/denominator; `floored` marks a constant denominator.
    auto xhat = std::make_shared<Grid>(Grid::zeros_like(xv));
    auto rstd = std::make_shared<std::vector<double>>(static_cast<std::size_t>(batch) * groups);
    auto floored = std::make_shared<std::vector<char>>(static_cast<std::size_t>(batch) * groups, 0);
    for (int n = 0; n < batch; ++n) {
        for (int g = 0; g < groups; ++g) {
            const double* src = xv.plane(n, g * per_group);
            double mean = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                mean += src[i];
            }
            mean /= static_cast<double>(count);
            double var = 0.0;
            for (std::size_t i = 0; i < count; ++i) {
                const double d = src[i] - mean;
                var += d * d;
            }
            var /= static_cast<double>(count);
            double denom = 0.0;
            const std::size_t slot = static_cast<std::size_t>(n) * groups + g;
            if (mode == NormEpsilon::additive) {
                denom = std::sqrt(var + eps);
            } else {
                denom = std::sqrt(var);
                if (denom < eps) {
                    denom = eps;
                    (*floored)[slot] = 1;
                }
            }
            const double r = 1.0 / denom;
            (*rstd)[slot] = r;
            double* xh = xhat->plane(n, g * per_group);
            double* dst = out.plane(n, g * per_group);
            for (int cc = 0; cc < per_group; ++cc) {
                const int c = g * per_group + cc;
                const double gm = gamma.defined() ? gamma.value()[c] : 1.0;
                const double bt = beta.defined() ? beta.value()[c] : 0.0;
                for (std::size_t i = cc * spatial; i < (cc + 1) * spatial; ++i) {
                    xh[i] = (src[i] - mean) * r;
                    dst[i] = xh[i] * gm + bt;
                }
            }
        }
    }
    auto nx = x.node();
    auto ngm = gamma.defined() ? gamma.node() : nullptr;
    auto nbt = beta.defined() ? beta.node() : nullptr;
    return make_result(std::move(out), {x, gamma, beta},
                       [nx, ngm, nbt, xhat, rstd, floored, groups, per_group, spatial, count](Node& self) {
                           const Grid& g = self.grad;
                           const int batch = g.n();
                           if (ngm && ngm->requires_grad) {
                               Grid& gg = ngm->grad_buffer();
                               for (int n = 0; n < batch; ++n) {
                                   for (int c = 0; c < g.c(); ++c) {
                                       const double* gp = g.plane(n, c);
                                       const double* xp = xhat->plane(n, c);
                                       double acc = 0.0;
                                       for (std::size_t i = 0; i < spatial; ++i) {
                                           acc += gp[i] * xp[i];
                                       }
                                       gg[c] += acc;
                                   }
                               }
                           }
                           if (nbt && nbt->requires_grad) {
                               Grid& gb = nbt->grad_buffer();
                               for (int n = 0; n < batch; ++n) {
                                   for (int c = 0; c < g.c(); ++c) {
                                       const double* gp = g.plane(n, c);
                                       double acc = 0.0;
                                       for (std::size_t i = 0; i < spatial; ++i) {
                                           acc += gp[i];
                                       }
                                       gb[c] += acc;
                                   }
                               }
                           }
                           if (!nx->requires_grad) {
                               return;
                           }
                           Grid& gx = nx->grad_buffer();
                           std::vector<double> dxhat(count);
                           for (int n = 0; n < batch; ++n) {
                               for (int grp = 0; grp < groups; ++grp) {
                                   const std::size_t slot = static_cast<std::size_t>(n) * groups + grp;
                                   const double* gp = g.plane(n, grp * per_group);
                                   const double* xp = xhat->plane(n, grp * per_group);
                                   double mean_d = 0.0;
                                   double mean_dx = 0.0;
                                   for (int cc = 0; cc < per_group; ++cc) {
                                       const double gm = ngm ? ngm->value[grp * per_group + cc] : 1.0;
                                       for (std::size_t i = cc * spatial; i < (cc + 1) * spatial; ++i) {
                                           dxhat[i] = gp[i] * gm;
                                           mean_d += dxhat[i];
                                           mean_dx += dxhat[i] * xp[i];
                                       }
                                   }
                                   mean_d /= static_cast<double>(count);
                                   mean_dx /= static_cast<double>(count);
                                   if ((*floored)[slot]) {
                                       mean_dx = 0.0;
                                   }
                                   const double r = (*rstd)[slot];
                                   double* dst = gx.plane(n, grp * per_group);
                                   for (std::size_t i = 0; i < count; ++i) {
                                       dst[i] += r * (dxhat[i] - mean_d - xp[i] * mean_dx);
                                   }
                               }
                           }
                       });
}

Var concat_channels(std::span<const Var> parts) {
    if (parts.empty()) {
        throw ShapeError("concat_channels: no inputs");
    }
    const Grid& first = parts[0].value();
    int channels = 0;
    for (const Var& p : parts) {
        const Grid& v = p.value();
        if (v.n() != first.n() || v.h() != first.h() || v.w() != first.w()) {
            throw ShapeError("concat_channels: " + v.shape_str() + " vs " + first.shape_str());
        }
        channels += v.c();
    }
    Grid out(first.n(), channels, first.h(), first.w());
    const std::size_t spatial = static_cast<std::size_t>(first.h()) * first.w();
    for (int n = 0; n < first.n(); ++n) {
        int offset = 0;
        for (const Var& p : parts) {
            const Grid& v = p.value();
            std::copy_n(v.plane(n, 0), v.c() * spatial, out.plane(n, offset));
            offset += v.c();
        }
    }
    std::vector<std::shared_ptr<Node>> nodes;
    bool any = false;
    for (const Var& p : parts) {
        nodes.push_back(p.node());
        any = any || p.requires_grad();
    }
    Var result(std::move(out));
    if (!any || !grad_enabled()) {
        return result;
    }
    // make_result takes an initializer_list, so wire the variadic case by hand.
    auto node = result.node();
    node->requires_grad = true;
    node->inputs = nodes;
    node->backward = [nodes, spatial](Node& self) {
        for (int n = 0; n < self.grad.n(); ++n) {
            int offset = 0;
            for (const auto& p : nodes) {
                const int c = p->value.c();
                if (p->requires_grad) {
                    double* dst = p->grad_buffer().plane(n, 0);
                    const double* src = self.grad.plane(n, offset);
                    for (std::size_t i = 0; i < c * spatial; ++i) {
                        dst[i] += src[i];
                    }
                }
                offset += c;
            }
        }
    };
    return result;
}

Var upsample_nearest2x(const Var& x) {
    const Grid& xv = x.value();
    Grid out(xv.n(), xv.c(), xv.h() * 2, xv.w() * 2);
    for (int n = 0; n < xv.n(); ++n) {
        for (int c = 0; c < xv.c(); ++c) {
            const double* src = xv.plane(n, c);
            double* dst = out.plane(n, c);
            for (int y = 0; y < out.h(); ++y) {
                for (int xx = 0; xx < out.w(); ++xx) {
                    dst[y * out.w() + xx] = src[(y / 2) * xv.w() + xx / 2];
                }
            }
        }
    }
    auto nx = x.node();
    return make_result(std::move(out), {x}, [nx](Node& self) {
        Grid& gx = nx->grad_buffer();
        const Grid& g = self.grad;
        for (int n = 0; n < g.n(); ++n) {
            for (int c = 0; c < g.c(); ++c) {
                const double* src = g.plane(n, c);
                double* dst = gx.plane(n, c);
                for (int y = 0; y < g.h(); ++y) {
                    for (int xx = 0; xx < g.w(); ++xx) {
                        dst[(y / 2) * gx.w() + xx / 2] += src[y * g.w() + xx];
                    }
                }
            }
        }
    });
}

Var global_avg_pool(const Var& x) {
    const Grid& xv = x.value();
    const std::size_t spatial = static_cast<std::size_t>(xv.h()) * xv.w();
    Grid out(xv.n(), xv.c(), 1, 1);
    for (int n = 0; n < xv.n(); ++n) {
        for (int c = 0; c < xv.c(); ++c) {
            const double* src = xv.plane(n, c);
            double acc = 0.0;
            for (std::size_t i = 0; i < spatial; ++i) {
                acc += src[i];
            }
            out.at(n, c, 0, 0) = acc / static_cast<double>(spatial);
        }
    }
    auto nx = x.node();
    return make_result(std::move(out), {x}, [nx, spatial](Node& self) {
        Grid& gx = nx->grad_buffer();
        for (int n = 0; n < gx.n(); ++n) {
            for (int c = 0; c < gx.c(); ++c) {
                const double g = self.grad.at(n, c, 0, 0) / static_cast<double>(spatial);
                double* dst = gx.plane(n, c);
                for (std::size_t i = 0; i < spatial; ++i) {
                    dst[i] += g;
                }
            }
        }
    });
}

Var pixel_unshuffle(const Var& x, int factor) {
    const Grid& xv = x.value();
    if (factor < 1 || xv.h() % factor != 0 || xv.w() % factor != 0) {
        throw ShapeError("pixel_unshuffle: side of " + xv.shape_str() + " not divisible by " + std::to_string(factor));
    }
    const int r = factor;
    const int oh = xv.h() / r;
    const int ow = xv.w() / r;
    Grid out(xv.n(), xv.c() * r * r, oh, ow);
    // Output (n, c*r*r + dy*r + dx, y, x) <- input (n, c, y*r + dy, x*r + dx).
    auto source_index = [&xv, r](int n, int oc, int y, int xx) {
        const int c = oc / (r * r);
        const int dy = (oc / r) % r;
        const int dx = oc % r;
        return xv.index(n, c, y * r + dy, xx * r + dx);
    };
    for (int n = 0; n < out.n(); ++n) {
        for (int oc = 0; oc < out.c(); ++oc) {
            for (int y = 0; y < oh; ++y) {
                for (int xx = 0; xx < ow; ++xx) {
                    out.at(n, oc, y, xx) = xv[source_index(n, oc, y, xx)];
                }
            }
        }
    }
    auto nx = x.node();
    return make_result(std::move(out), {x}, [nx, r](Node& self) {
        Grid& gx = nx->grad_buffer();
        const Grid& g = self.grad;
        for (int n = 0; n < g.n(); ++n) {
            for (int oc = 0; oc < g.c(); ++oc) {
                const int c = oc / (r * r);
                const int dy = (oc / r) % r;
                const int dx = oc % r;
                for (int y = 0; y < g.h(); ++y) {
                    for (int xx = 0; xx < g.w(); ++xx) {
                        gx.at(n, c, y * r + dy, xx * r + dx) += g.at(n, oc, y, xx);
                    }
                }
            }
        }
    });
}

Var cross_attention(const Var& x, const Var& text, const Var& wq, const Var& wk, const Var& wv, const Var& wo) {
    const Grid& xv = x.value();
    const Grid& tv = text.value();
    const int batch = xv.n();
    const int channels = xv.c();
    const int spatial = xv.h() * xv.w();
    const int tokens = tv.h();
    const int dim = tv.w();
    if (tv.n() != batch || tv.c() != 1) {
        throw ShapeError("cross_attention: text " + tv.shape_str() + " for features " + xv.shape_str());
    }
    const Grid::Shape qshape{channels, channels, 1, 1};
    const Grid::Shape kshape{channels, dim, 1, 1};
    if (wq.shape() != qshape || wo.shape() != qshape || wk.shape() != kshape || wv.shape() != kshape) {
        throw ShapeError("cross_attention: projection shapes do not match " + std::to_string(channels) + " channels, " +
                         std::to_string(dim) + " text dims");
    }
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(channels));

    struct Pass {
        RowMat q, k, v, attn, o;
    };
    auto forward_sample = [=](const double* xn, const double* tn, const Grid& wqv, const Grid& wkv, const Grid& wvv) {
        Pass p;
        CMapMat xm(xn, channels, spatial);
        CMapMat tm(tn, tokens, dim);
        p.q = xm.transpose() * CMapMat(wqv.data(), channels, channels).transpose();
        p.k = tm * CMapMat(wkv.data(), channels, dim).transpose();
        p.v = tm * CMapMat(wvv.data(), channels, dim).transpose();
        p.attn = (p.q * p.k.transpose()) * inv_sqrt;
        for (int i = 0; i < spatial; ++i) {
            const double m = p.attn.row(i).maxCoeff();
            p.attn.row(i) = (p.attn.row(i).array() - m).exp();
            p.attn.row(i) /= p.attn.row(i).sum();
        }
        p.o = p.attn * p.v;
        return p;
    };

    Grid out(xv.shape());
    for (int n = 0; n < batch; ++n) {
        Pass p = forward_sample(xv.plane(n, 0), tv.plane(n, 0), wq.value(), wk.value(), wv.value());
        MapMat om(out.plane(n, 0), channels, spatial);
        om.noalias() = CMapMat(wo.value().data(), channels, channels) * p.o.transpose();
    }

    auto nx = x.node();
    auto nt = text.node();
    auto nq = wq.node();
    auto nk = wk.node();
    auto nv = wv.node();
    auto no = wo.node();
    return make_result(std::move(out), {x, text, wq, wk, wv, wo},
                       [=](Node& self) {
                           for (int n = 0; n < batch; ++n) {
                               const double* xn = nx->value.plane(n, 0);
                               const double* tn = nt->value.plane(n, 0);
                               Pass p = forward_sample(xn, tn, nq->value, nk->value, nv->value);
                               RowMat dy = CMapMat(self.grad.plane(n, 0), channels, spatial).transpose();
                               CMapMat wom(no->value.data(), channels, channels);
                               if (no->requires_grad) {
                                   MapMat(no->grad_buffer().data(), channels, channels).noalias() += dy.transpose() * p.o;
                               }
                               RowMat d_o = dy * wom;
                               RowMat d_attn = d_o * p.v.transpose();
                               RowMat d_v = p.attn.transpose() * d_o;
                               RowMat d_s = p.attn.array() *
                                            (d_attn.array().colwise() - (d_attn.array() * p.attn.array()).rowwise().sum());
                               d_s *= inv_sqrt;
                               RowMat d_q = d_s * p.k;
                               RowMat d_k = d_s.transpose() * p.q;
                               CMapMat xm(xn, channels, spatial);
                               CMapMat tm(tn, tokens, dim);
                               if (nq->requires_grad) {
                                   MapMat(nq->grad_buffer().data(), channels, channels).noalias() +=
                                       d_q.transpose() * xm.transpose();
                               }
                               if (nk->requires_grad) {
                                   MapMat(nk->grad_buffer().data(), channels, dim).noalias() += d_k.transpose() * tm;
                               }
                               if (nv->requires_grad) {
                                   MapMat(nv->grad_buffer().data(), channels, dim).noalias() += d_v.transpose() * tm;
                               }
                               if (nx->requires_grad) {
                                   MapMat(nx->grad_buffer().plane(n, 0), channels, spatial).noalias() +=
                                       (d_q * CMapMat(nq->value.data(), channels, channels)).transpose();
                               }
                               if (nt->requires_grad) {
                                   MapMat(nt->grad_buffer().plane(n, 0), tokens, dim).noalias() +=
                                       d_k * CMapMat(nk->value.data(), channels, dim) +
                                       d_v * CMapMat(nv->value.data(), channels, dim);
                               }
                           }
                       });
}

Var mse(const Var& a, const Var& b) {
    require_same_shape(a.value(), b.value(), "mse");
    const Grid& av = a.value();
    const Grid& bv = b.value();
    double acc = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av[i] - bv[i];
        acc += d * d;
    }
    const double count = static_cast<double>(av.size());
    Grid out(1, 1, 1, 1, acc / count);
    auto na = a.node();
    auto nb = b.node();
    return make_result(std::move(out), {a, b}, [na, nb, count](Node& self) {
        const double g = self.grad[0] * 2.0 / count;
        for (std::size_t i = 0; i < na->value.size(); ++i) {
            const double d = g * (na->value[i] - nb->value[i]);
            if (na->requires_grad) {
                na->grad_buffer()[i] += d;
            }
            if (nb->requires_grad) {
                nb->grad_buffer()[i] -= d;
            }
        }
    });
}

}  // namespace sketchinpaint::ag
