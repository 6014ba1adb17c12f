#pragma once

// Image2Flow forward-pass inference: 3D convolutional encoder (five levels,
// two residual blocks each), trilinear projection of encoder features onto
// mesh nodes, and three sequential Chebyshev graph-convolution branches that
// emit additive updates to the 7-channel node state (normalized x-y-z,
// pressure, velocity).
//
// All learned tensors are f32. Work is parallelized only where each output
// element is produced by exactly one thread, so results are bit-identical
// for every thread count. Dropout is identity at inference.

#include "flowmesh/core.hpp"
#include "flowmesh/fields.hpp"
#include "flowmesh/image.hpp"
#include "flowmesh/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace flowmesh {

struct Hyperparams {
    std::vector<int> level_channels{16, 48, 96, 192, 384};
    std::array<int, 3> branch_widths{384, 192, 96};
    std::array<std::array<int, 2>, 3> branch_levels{{{5, 4}, {4, 3}, {3, 2}}};
    double leaky_slope = 0.2;
    double dropout_rate = 0.1;  // train-time only; identity at inference
    double instance_norm_eps = 1e-5;

    void validate() const {
        require(level_channels.size() == 5, errc::bad_argument, "expected 5 encoder levels");
        for (auto& lv : branch_levels)
            for (int l : lv)
                require(l >= 1 && l <= 5, errc::bad_argument, "branch level out of range");
    }
};

struct TensorSpec {
    std::string name;
    std::vector<int> shape;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (int d : shape) n *= std::size_t(d);
        return n;
    }
};

// Deterministic enumeration of every tensor the architecture demands; this
// order defines blob layout and random-init draw order.
inline std::vector<TensorSpec> tensor_catalog(const Hyperparams& hp) {
    std::vector<TensorSpec> out;
    auto add = [&](const std::string& name, std::vector<int> shape) {
        out.push_back({name, std::move(shape)});
    };

    int prev = 1;
    for (int level = 1; level <= 5; ++level) {
        const int ch = hp.level_channels[level - 1];
        for (int block = 1; block <= 2; ++block) {
            const int cin = block == 1 ? prev : ch;
            const std::string base =
                "enc.l" + std::to_string(level) + ".b" + std::to_string(block);
            for (int conv = 1; conv <= 3; ++conv) {
                const int ci = conv == 1 ? cin : ch;
                add(base + ".conv" + std::to_string(conv) + ".w", {ch, ci, 3, 3, 3});
                add(base + ".conv" + std::to_string(conv) + ".b", {ch});
                add(base + ".in" + std::to_string(conv) + ".scale", {ch});
                add(base + ".in" + std::to_string(conv) + ".shift", {ch});
            }
            if (cin != ch) add(base + ".proj.w", {ch, cin});
        }
        prev = ch;
    }

    for (int b = 1; b <= 3; ++b) {
        const int width = hp.branch_widths[b - 1];
        const int img_feat = hp.level_channels[hp.branch_levels[b - 1][0] - 1] +
                             hp.level_channels[hp.branch_levels[b - 1][1] - 1];
        const std::string base = "br" + std::to_string(b);
        add(base + ".adapt.w0", {7, width});
        add(base + ".adapt.w1", {7, width});
        add(base + ".adapt.b", {width});
        for (int block = 1; block <= 3; ++block) {
            const int din = block == 1 ? width + img_feat : width;
            const std::string bb = base + ".blk" + std::to_string(block);
            for (int conv = 1; conv <= 3; ++conv) {
                const int ci = conv == 1 ? din : width;
                add(bb + ".g" + std::to_string(conv) + ".w0", {ci, width});
                add(bb + ".g" + std::to_string(conv) + ".w1", {ci, width});
                add(bb + ".g" + std::to_string(conv) + ".b", {width});
                add(bb + ".in" + std::to_string(conv) + ".scale", {width});
                add(bb + ".in" + std::to_string(conv) + ".shift", {width});
            }
            if (din != width) add(bb + ".proj.w", {din, width});
        }
        add(base + ".head.w0", {width, 7});
        add(base + ".head.w1", {width, 7});
        add(base + ".head.b", {7});
    }
    return out;
}

class WeightSet {
public:
    Hyperparams hyper;

    void set(const std::string& name, std::vector<int> shape, std::vector<float> values) {
        std::size_t expect = 1;
        for (int d : shape) expect *= std::size_t(d);
        require(values.size() == expect, errc::shape_mismatch,
                "tensor '" + name + "' value count does not match shape");
        if (index_.find(name) == index_.end()) {
            index_[name] = specs_.size();
            specs_.push_back({name, std::move(shape)});
            data_.push_back(std::move(values));
        } else {
            const std::size_t i = index_[name];
            specs_[i].shape = std::move(shape);
            data_[i] = std::move(values);
        }
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    const std::vector<float>& tensor(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), errc::missing_weight, "missing tensor '" + name + "'");
        return data_[it->second];
    }

    const std::vector<int>& shape(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), errc::missing_weight, "missing tensor '" + name + "'");
        return specs_[it->second].shape;
    }

    const std::vector<TensorSpec>& specs() const { return specs_; }
    const std::vector<std::vector<float>>& blobs() const { return data_; }

    Eigen::MatrixXf matrix(const std::string& name, int rows, int cols) const {
        const auto& t = tensor(name);
        require(int(t.size()) == rows * cols, errc::shape_mismatch,
                "tensor '" + name + "' is not " + std::to_string(rows) + "x" +
                    std::to_string(cols));
        Eigen::MatrixXf m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = t[std::size_t(r) * cols + c];
        return m;
    }

    Eigen::VectorXf vec(const std::string& name, int n) const {
        const auto& t = tensor(name);
        require(int(t.size()) == n, errc::shape_mismatch,
                "tensor '" + name + "' is not length " + std::to_string(n));
        return Eigen::Map<const Eigen::VectorXf>(t.data(), n);
    }

    // Every tensor the architecture demands must be present with the exact
    // shape; extras are rejected unless allowed.
    void validate_complete(bool allow_extra = false) const {
        hyper.validate();
        const auto catalog = tensor_catalog(hyper);
        std::map<std::string, const TensorSpec*> wanted;
        for (const auto& spec : catalog) wanted[spec.name] = &spec;
        for (const auto& spec : catalog) {
            auto it = index_.find(spec.name);
            require(it != index_.end(), errc::missing_weight, "missing tensor '" + spec.name + "'");
            require(specs_[it->second].shape == spec.shape, errc::shape_mismatch,
                    "tensor '" + spec.name + "' has the wrong shape");
        }
        if (!allow_extra) {
            for (const auto& spec : specs_)
                require(wanted.count(spec.name) != 0, errc::shape_mismatch,
                        "unexpected extra tensor '" + spec.name + "'");
        }
    }

    std::uint64_t checksum() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (const auto& blob : data_)
            h = fnv1a64(blob.data(), blob.size() * sizeof(float), h);
        return h;
    }

    // Seeded test initialization: uniform(-0.05, 0.05) for conv weights and
    // biases, identity (scale 1, shift 0) for instance-norm affines. Tensors
    // are drawn in catalog order.
    static WeightSet random(std::uint64_t seed, Hyperparams hp = {}) {
        hp.validate();
        WeightSet ws;
        ws.hyper = hp;
        Rng rng(seed);
        for (const auto& spec : tensor_catalog(hp)) {
            std::vector<float> values(spec.element_count());
            const bool is_scale = spec.name.size() > 6 &&
                                  spec.name.rfind(".scale") == spec.name.size() - 6;
            const bool is_shift = spec.name.size() > 6 &&
                                  spec.name.rfind(".shift") == spec.name.size() - 6;
            if (is_scale) {
                std::fill(values.begin(), values.end(), 1.0f);
            } else if (is_shift) {
                std::fill(values.begin(), values.end(), 0.0f);
            } else {
                for (auto& v : values) v = float(rng.uniform(-0.05, 0.05));
            }
            ws.set(spec.name, spec.shape, std::move(values));
        }
        return ws;
    }

private:
    std::vector<TensorSpec> specs_;
    std::vector<std::vector<float>> data_;
    std::map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Order-1 Chebyshev graph convolution: Y = X W0 + (Ltilde X) W1 + bias.

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cheb_conv(
    const Eigen::SparseMatrix<Scalar>& laplacian,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& x,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& w0,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& w1,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& bias) {
    require(laplacian.rows() == x.rows(), errc::shape_mismatch,
            "laplacian/node-count mismatch in cheb_conv");
    require(w0.rows() == x.cols() && w1.rows() == x.cols(), errc::shape_mismatch,
            "weight input width mismatch in cheb_conv");
    require(w0.cols() == w1.cols() && bias.size() == w0.cols(), errc::shape_mismatch,
            "weight output width mismatch in cheb_conv");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> y = x * w0;
    y.noalias() += (laplacian * x) * w1;
    y.rowwise() += bias.transpose();
    return y;
}

namespace netdetail {

using MatF = Eigen::MatrixXf;

inline void leaky_relu_inplace(std::vector<float>& v, float slope) {
    for (auto& x : v)
        if (x < 0.0f) x *= slope;
}

inline void leaky_relu_inplace(MatF& m, float slope) {
    float* p = m.data();
    const std::size_t n = std::size_t(m.size());
    for (std::size_t i = 0; i < n; ++i)
        if (p[i] < 0.0f) p[i] *= slope;
}

// Per-channel standardization over the spatial extent, then learned affine.
inline void instance_norm_image(ImageVolume& g, const Eigen::VectorXf& scale,
                                const Eigen::VectorXf& shift, double eps) {
    const std::size_t nvox = g.voxel_count();
    parallel_for(std::size_t(g.channels), [&](std::size_t c) {
        float* data = g.values.data() + c * nvox;
        double sum = 0.0;
        for (std::size_t i = 0; i < nvox; ++i) sum += data[i];
        const double mean = sum / double(nvox);
        double var = 0.0;
        for (std::size_t i = 0; i < nvox; ++i) {
            const double d = data[i] - mean;
            var += d * d;
        }
        var /= double(nvox);
        const float inv = float(1.0 / std::sqrt(var + eps));
        const float mu = float(mean);
        const float sc = scale[int(c)], sh = shift[int(c)];
        for (std::size_t i = 0; i < nvox; ++i) data[i] = (data[i] - mu) * inv * sc + sh;
    });
}

inline void instance_norm_graph(MatF& x, const Eigen::VectorXf& scale,
                                const Eigen::VectorXf& shift, double eps) {
    const int n = int(x.rows());
    parallel_for(std::size_t(x.cols()), [&](std::size_t c) {
        float* col = x.data() + c * n;  // column-major
        double sum = 0.0;
        for (int i = 0; i < n; ++i) sum += col[i];
        const double mean = sum / double(n);
        double var = 0.0;
        for (int i = 0; i < n; ++i) {
            const double d = col[i] - mean;
            var += d * d;
        }
        var /= double(n);
        const float inv = float(1.0 / std::sqrt(var + eps));
        const float mu = float(mean);
        const float sc = scale[int(c)], sh = shift[int(c)];
        for (int i = 0; i < n; ++i) col[i] = (col[i] - mu) * inv * sc + sh;
    });
}

// 3x3x3 convolution, stride 1, zero padding 1. Weight layout:
// (((co * cin + ci) * 3 + dz) * 3 + dy) * 3 + dx.
inline ImageVolume conv3(const ImageVolume& in, const std::vector<float>& w,
                         const Eigen::VectorXf& bias, int cout) {
    ImageVolume out;
    out.nx = in.nx;
    out.ny = in.ny;
    out.nz = in.nz;
    out.channels = cout;
    out.spacing = in.spacing;
    out.origin = in.origin;
    out.values.resize(std::size_t(cout) * in.voxel_count());
    const int cin = in.channels, nx = in.nx, ny = in.ny, nz = in.nz;
    const std::size_t plane = std::size_t(nx) * ny;

    parallel_for(std::size_t(cout) * nz, [&](std::size_t job) {
        const int co = int(job / nz);
        const int z = int(job % nz);
        std::vector<float> row(nx);
        float* out_plane = out.values.data() + (std::size_t(co) * nz + z) * plane;
        for (int y = 0; y < ny; ++y) {
            std::fill(row.begin(), row.end(), bias[co]);
            for (int ci = 0; ci < cin; ++ci) {
                for (int dz = -1; dz <= 1; ++dz) {
                    const int zz = z + dz;
                    if (zz < 0 || zz >= nz) continue;
                    for (int dy = -1; dy <= 1; ++dy) {
                        const int yy = y + dy;
                        if (yy < 0 || yy >= ny) continue;
                        const float* src =
                            in.values.data() + (std::size_t(ci) * nz + zz) * plane + yy * nx;
                        const float* wk =
                            w.data() + (((std::size_t(co) * cin + ci) * 3 + (dz + 1)) * 3 +
                                        (dy + 1)) * 3;
                        for (int dx = -1; dx <= 1; ++dx) {
                            const float wv = wk[dx + 1];
                            const int x0 = std::max(0, -dx);
                            const int x1 = std::min(nx, nx - dx);
                            const float* s = src + dx;
                            for (int x = x0; x < x1; ++x) row[x] += wv * s[x];
                        }
                    }
                }
            }
            std::copy(row.begin(), row.end(), out_plane + std::size_t(y) * nx);
        }
    });
    return out;
}

// 1x1x1 channel projection (no bias); used by residual shortcuts.
inline ImageVolume conv1(const ImageVolume& in, const std::vector<float>& w, int cout) {
    ImageVolume out;
    out.nx = in.nx;
    out.ny = in.ny;
    out.nz = in.nz;
    out.channels = cout;
    out.spacing = in.spacing;
    out.origin = in.origin;
    const std::size_t nvox = in.voxel_count();
    out.values.assign(std::size_t(cout) * nvox, 0.0f);
    const int cin = in.channels;
    parallel_for(std::size_t(cout), [&](std::size_t co) {
        float* dst = out.values.data() + co * nvox;
        for (int ci = 0; ci < cin; ++ci) {
            const float wv = w[co * cin + ci];
            const float* src = in.values.data() + std::size_t(ci) * nvox;
            for (std::size_t i = 0; i < nvox; ++i) dst[i] += wv * src[i];
        }
    });
    return out;
}

inline ImageVolume maxpool2(const ImageVolume& in) {
    ImageVolume out;
    out.nx = in.nx / 2;
    out.ny = in.ny / 2;
    out.nz = in.nz / 2;
    out.channels = in.channels;
    out.spacing = 2.0 * in.spacing;
    out.origin = in.origin + 0.5 * in.spacing;  // center of the pooled pair
    out.values.resize(std::size_t(out.channels) * out.voxel_count());
    parallel_for(std::size_t(out.channels) * out.nz, [&](std::size_t job) {
        const int c = int(job / out.nz);
        const int z = int(job % out.nz);
        for (int y = 0; y < out.ny; ++y) {
            for (int x = 0; x < out.nx; ++x) {
                float m = -std::numeric_limits<float>::infinity();
                for (int dz = 0; dz < 2; ++dz)
                    for (int dy = 0; dy < 2; ++dy)
                        for (int dx = 0; dx < 2; ++dx)
                            m = std::max(m, in.at(c, 2 * x + dx, 2 * y + dy, 2 * z + dz));
                out.at(c, x, y, z) = m;
            }
        }
    });
    return out;
}

inline void add_inplace(ImageVolume& a, const ImageVolume& b) {
    require(a.values.size() == b.values.size(), errc::shape_mismatch, "residual add mismatch");
    for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

// Convolutional residual block: three (conv -> instance norm -> LeakyReLU)
// stages at the block's output width, dropout (identity at inference), then
// the residual add. Channel-changing shortcuts use a learned 1x1x1
// projection.
inline ImageVolume conv_block(const ImageVolume& in, const WeightSet& ws,
                              const std::string& base, int cout) {
    const auto& hp = ws.hyper;
    ImageVolume t = in;
    for (int conv = 1; conv <= 3; ++conv) {
        const std::string cs = std::to_string(conv);
        t = conv3(t, ws.tensor(base + ".conv" + cs + ".w"), ws.vec(base + ".conv" + cs + ".b", cout),
                  cout);
        instance_norm_image(t, ws.vec(base + ".in" + cs + ".scale", cout),
                            ws.vec(base + ".in" + cs + ".shift", cout), hp.instance_norm_eps);
        leaky_relu_inplace(t.values, float(hp.leaky_slope));
    }
    if (in.channels == cout) {
        add_inplace(t, in);
    } else {
        add_inplace(t, conv1(in, ws.tensor(base + ".proj.w"), cout));
    }
    return t;
}

}  // namespace netdetail

// ---------------------------------------------------------------------------
// Encoder: five levels of two residual blocks + maxpool; returns the five
// pre-pool feature grids.

struct EncoderPyramid {
    std::vector<ImageVolume> levels;  // [0] = level 1 (finest) ... [4] = level 5
};

inline EncoderPyramid image_encoder_forward(const ImageVolume& volume, const WeightSet& weights) {
    volume.validate();
    require(volume.channels == 1, errc::bad_input_size, "encoder expects a single channel");
    require(volume.nx == volume.ny && volume.ny == volume.nz, errc::bad_input_size,
            "encoder expects a cubic volume");
    require(volume.nx % 32 == 0, errc::bad_input_size,
            "encoder expects the side to be divisible by 32");
    weights.hyper.validate();

    EncoderPyramid pyr;
    ImageVolume x = volume;
    for (int level = 1; level <= 5; ++level) {
        const int ch = weights.hyper.level_channels[level - 1];
        const std::string base = "enc.l" + std::to_string(level);
        x = netdetail::conv_block(x, weights, base + ".b1", ch);
        x = netdetail::conv_block(x, weights, base + ".b2", ch);
        pyr.levels.push_back(x);
        if (level < 5) x = netdetail::maxpool2(x);
    }
    return pyr;
}

// ---------------------------------------------------------------------------
// Graph transformation branches.

namespace netdetail {

struct CropFrame {
    Vec3 lo, hi;  // physical span of the input crop

    Vec3 to_mm(double nx, double ny, double nz) const {
        return Vec3(lo[0] + 0.5 * (nx + 1.0) * (hi[0] - lo[0]),
                    lo[1] + 0.5 * (ny + 1.0) * (hi[1] - lo[1]),
                    lo[2] + 0.5 * (nz + 1.0) * (hi[2] - lo[2]));
    }

    Vec3 to_normalized(const Vec3& mm) const {
        return Vec3(2.0 * (mm[0] - lo[0]) / (hi[0] - lo[0]) - 1.0,
                    2.0 * (mm[1] - lo[1]) / (hi[1] - lo[1]) - 1.0,
                    2.0 * (mm[2] - lo[2]) / (hi[2] - lo[2]) - 1.0);
    }
};

inline MatF graph_block(const Eigen::SparseMatrix<float>& lap, const MatF& in, const WeightSet& ws,
                        const std::string& base, int width) {
    const auto& hp = ws.hyper;
    MatF t = in;
    for (int conv = 1; conv <= 3; ++conv) {
        const std::string cs = std::to_string(conv);
        t = cheb_conv<float>(lap, t, ws.matrix(base + ".g" + cs + ".w0", int(t.cols()), width),
                             ws.matrix(base + ".g" + cs + ".w1", int(t.cols()), width),
                             ws.vec(base + ".g" + cs + ".b", width));
        instance_norm_graph(t, ws.vec(base + ".in" + cs + ".scale", width),
                            ws.vec(base + ".in" + cs + ".shift", width), hp.instance_norm_eps);
        leaky_relu_inplace(t, float(hp.leaky_slope));
    }
    if (int(in.cols()) == width) {
        t += in;
    } else {
        t.noalias() += in * ws.matrix(base + ".proj.w", int(in.cols()), width);
    }
    return t;
}

}  // namespace netdetail

// One transformation branch: width-adapting graph convolution, trilinear
// projection of two encoder levels at the current node coordinates,
// concatenation, three graph residual blocks, and a bottleneck producing a
// 7-channel additive update. Returns the updated state.
inline Eigen::MatrixXf graph_branch_forward(const Eigen::MatrixXf& state,
                                            const Eigen::SparseMatrix<float>& laplacian,
                                            const EncoderPyramid& pyramid,
                                            const netdetail::CropFrame& frame,
                                            const WeightSet& weights, int branch_index) {
    require(branch_index >= 1 && branch_index <= 3, errc::bad_argument,
            "branch index must be 1..3");
    require(state.cols() == 7, errc::shape_mismatch, "node state must have 7 channels");
    const auto& hp = weights.hyper;
    const int width = hp.branch_widths[branch_index - 1];
    const std::string base = "br" + std::to_string(branch_index);
    const int n = int(state.rows());

    using netdetail::MatF;
    MatF h = cheb_conv<float>(laplacian, state, weights.matrix(base + ".adapt.w0", 7, width),
                              weights.matrix(base + ".adapt.w1", 7, width),
                              weights.vec(base + ".adapt.b", width));

    const ImageVolume& grid_a = pyramid.levels[hp.branch_levels[branch_index - 1][0] - 1];
    const ImageVolume& grid_b = pyramid.levels[hp.branch_levels[branch_index - 1][1] - 1];
    const int ca = grid_a.channels, cb = grid_b.channels;
    MatF feats(n, ca + cb);
    parallel_for(std::size_t(n), [&](std::size_t i) {
        const Vec3 mm = frame.to_mm(state(int(i), 0), state(int(i), 1), state(int(i), 2));
        std::vector<double> buf(std::max(ca, cb));
        trilinear_sample(grid_a, mm, buf.data());
        for (int c = 0; c < ca; ++c) feats(int(i), c) = float(buf[c]);
        trilinear_sample(grid_b, mm, buf.data());
        for (int c = 0; c < cb; ++c) feats(int(i), ca + c) = float(buf[c]);
    });

    MatF x(n, width + ca + cb);
    x << h, feats;
    for (int block = 1; block <= 3; ++block)
        x = netdetail::graph_block(laplacian, x, weights, base + ".blk" + std::to_string(block),
                                   width);

    const MatF delta = cheb_conv<float>(laplacian, x, weights.matrix(base + ".head.w0", width, 7),
                                        weights.matrix(base + ".head.w1", width, 7),
                                        weights.vec(base + ".head.b", 7));
    return state + delta;
}

// ---------------------------------------------------------------------------
// Full forward pass.

struct Image2FlowOutput {
    VolumeMesh mesh;
    NodeFields fields;  // normalized space
};

// Runs the encoder once, then branches 1 -> 2 -> 3 on the evolving state.
// `template_fields` (normalized) seeds the state's pressure/velocity
// channels; zeros when absent. The final answer is the last output.
inline std::vector<Image2FlowOutput> image2flow_forward(const ImageVolume& image,
                                                        const VolumeMesh& tmpl,
                                                        const NodeFields* template_fields,
                                                        const WeightSet& weights) {
    weights.validate_complete();
    if (template_fields) {
        require(template_fields->space == FieldSpace::normalized, errc::wrong_space,
                "template fields must be normalized");
        require(template_fields->node_count() == tmpl.node_count(), errc::field_length_mismatch,
                "template fields do not match template");
    }

    const EncoderPyramid pyramid = image_encoder_forward(image, weights);

    netdetail::CropFrame frame{image.extent_lo(), image.extent_hi()};
    const int n = int(tmpl.node_count());
    Eigen::MatrixXf state(n, 7);
    for (int i = 0; i < n; ++i) {
        const Vec3 nc = frame.to_normalized(tmpl.vertices()[i]);
        state(i, 0) = float(nc[0]);
        state(i, 1) = float(nc[1]);
        state(i, 2) = float(nc[2]);
        state(i, 3) = template_fields ? float(template_fields->pressure[i]) : 0.0f;
        for (int k = 0; k < 3; ++k)
            state(i, 4 + k) = template_fields ? float(template_fields->velocity[i][k]) : 0.0f;
    }
    const Eigen::MatrixXf initial_state = state;

    Eigen::SparseMatrix<float> lap = scaled_laplacian(tmpl).matrix.cast<float>();

    std::vector<Image2FlowOutput> outputs;
    outputs.reserve(3);
    for (int b = 1; b <= 3; ++b) {
        state = graph_branch_forward(state, lap, pyramid, frame, weights, b);

        // Positions: template mm plus the accumulated normalized-space delta,
        // so zero updates reproduce the template bit-exactly.
        std::vector<Vec3> positions(tmpl.node_count());
        const Vec3 half(0.5 * (frame.hi[0] - frame.lo[0]), 0.5 * (frame.hi[1] - frame.lo[1]),
                        0.5 * (frame.hi[2] - frame.lo[2]));
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k) {
                const double delta_norm = double(state(i, k)) - double(initial_state(i, k));
                positions[i][k] = tmpl.vertices()[i][k] + delta_norm * half[k];
            }
        }
        NodeFields fields;
        fields.space = FieldSpace::normalized;
        fields.pressure.resize(n);
        fields.velocity.resize(n);
        for (int i = 0; i < n; ++i) {
            fields.pressure[i] = double(state(i, 3));
            fields.velocity[i] = Vec3(state(i, 4), state(i, 5), state(i, 6));
        }
        // Relaxed cap check: an untrained network can fold a cap patch.
        outputs.push_back(Image2FlowOutput{
            tmpl.with_vertices(std::move(positions), /*strict_caps=*/false), std::move(fields)});
    }
    return outputs;
}

}  // namespace flowmesh
