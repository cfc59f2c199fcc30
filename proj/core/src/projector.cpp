#include "tomo/projector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

#include "tomo/error.hpp"
#include "tomo/parallel.hpp"

namespace tomo {

namespace {

using Mat3 = std::array<Vec3, 3>;

Vec3 mat_vec(const Mat3& m, const Vec3& v) { return {dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)}; }

// Rotation of v by phi about unit axis a (Rodrigues).
Vec3 rotate(const Vec3& v, const Vec3& a, double phi) {
    const double c = std::cos(phi), s = std::sin(phi);
    const Vec3 axv = cross3(a, v);
    const double adv = dot3(a, v);
    return {v[0] * c + axv[0] * s + a[0] * adv * (1.0 - c), v[1] * c + axv[1] * s + a[1] * adv * (1.0 - c),
            v[2] * c + axv[2] * s + a[2] * adv * (1.0 - c)};
}

std::size_t label_stride(const std::vector<std::string>& labels, const std::vector<std::size_t>& shape,
                         std::string_view label) {
    std::size_t stride = 1;
    for (std::size_t k = labels.size(); k-- > 0;) {
        if (labels[k] == label) return stride;
        stride *= shape[k];
    }
    return 0;
}

/// Box of whole voxels [m_lo, m_hi) along each axis.
struct IndexBox {
    std::array<long, 3> lo{0, 0, 0};
    std::array<long, 3> hi{1, 1, 1};
};

/// Precomputed ray geometry shared by all projector code paths.
class Tracer {
public:
    Tracer(const ImageGeometry& ig, const AcquisitionGeometry& ag) : ag_(ag) {
        ig.validate();
        ag.validate();
        if (ig.dimension() != ag.dimension())
            throw GeometryError("projector needs matching dimensions: image is " + std::to_string(ig.dimension()) +
                                "-D, acquisition is " + std::to_string(ag.dimension()) + "-D");
        const bool three_d = ig.dimension() == 3;
        n_ = {static_cast<long>(ig.voxel_num_x), static_cast<long>(ig.voxel_num_y),
              three_d ? static_cast<long>(ig.voxel_num_z) : 1L};
        h_ = {ig.voxel_size_x, ig.voxel_size_y, three_d ? ig.voxel_size_z : 1.0};
        for (int k = 0; k < 3; ++k) lo_[k] = ig.center_offset[k] - 0.5 * static_cast<double>(n_[k]) * h_[k];
        if (!three_d) lo_[2] = -0.5;

        const auto ishape = ig.shape();
        vstride_ = {label_stride(ig.dimension_labels, ishape, axis::horizontal_x),
                    label_stride(ig.dimension_labels, ishape, axis::horizontal_y),
                    three_d ? label_stride(ig.dimension_labels, ishape, axis::vertical) : 0};
        num_voxels_ = ig.num_voxels();
        full_.hi = n_;

        const auto ashape = ag.shape();
        astride_ = label_stride(ag.dimension_labels, ashape, axis::angle);
        rstride_ = label_stride(ag.dimension_labels, ashape, axis::vertical);
        cstride_ = label_stride(ag.dimension_labels, ashape, axis::horizontal);
        num_angles_ = ag.angles.size();
        rows_ = ag.dimension() == 3 ? ag.panel.num_pixels[1] : 1;
        cols_ = ag.panel.num_pixels[0];

        // Object frame: z' along the rotation axis, x' the lab x direction made
        // orthogonal to it, y' completing a right-handed basis.
        const Vec3 a = ag.rotation_axis_direction;
        Vec3 ex = sub3(Vec3{1.0, 0.0, 0.0}, scaled3(a, a[0]));
        if (norm3(ex) < 1e-6) ex = sub3(Vec3{0.0, 1.0, 0.0}, scaled3(a, a[1]));
        ex = scaled3(ex, 1.0 / norm3(ex));
        const Vec3 ey = cross3(a, ex);
        const auto radians = ag.angles_radians();
        frames_.resize(num_angles_);
        for (std::size_t i = 0; i < num_angles_; ++i) {
            // Row j of the matrix is the object basis vector rotated with the
            // sample, so dot products give object coordinates of lab vectors.
            frames_[i] = {rotate(ex, a, radians[i]), rotate(ey, a, radians[i]), a};
        }

        if (!ag.is_parallel()) {
            for (std::size_t i = 0; i < num_angles_; ++i) {
                const Vec3 s = to_object(i, ag.source_position);
                bool inside = true;
                for (int k = 0; k < 3; ++k)
                    inside = inside && s[k] > lo_[k] && s[k] < lo_[k] + static_cast<double>(n_[k]) * h_[k];
                if (inside) throw GeometryError("source lies inside the reconstruction volume");
            }
        }
    }

    std::size_t num_rays() const { return num_angles_ * rows_ * cols_; }
    std::size_t num_voxels() const { return num_voxels_; }
    std::size_t num_angles() const { return num_angles_; }
    std::size_t rays_per_angle() const { return rows_ * cols_; }
    const std::array<long, 3>& extents() const { return n_; }
    const IndexBox& full_box() const { return full_; }

    /// Flat offset in the acquisition array of ray r, r = (angle * rows + row) * cols + col.
    std::size_t ray_offset(std::size_t r) const {
        const std::size_t col = r % cols_;
        const std::size_t row = (r / cols_) % rows_;
        const std::size_t ang = r / (cols_ * rows_);
        return ang * astride_ + row * rstride_ + col * cstride_;
    }

    template <class Visit>
    void trace(std::size_t r, const IndexBox& box, Visit&& visit) const {
        const std::size_t col = r % cols_;
        const std::size_t row = (r / cols_) % rows_;
        const std::size_t ang = r / (cols_ * rows_);
        const Vec3 pixel = to_object(ang, ag_.pixel_position(row, col));
        Vec3 p, d;
        double a0, a1;
        if (ag_.is_parallel()) {
            p = pixel;
            d = mat_vec(frames_[ang], ag_.ray_direction);
            a0 = -std::numeric_limits<double>::infinity();
            a1 = std::numeric_limits<double>::infinity();
        } else {
            p = to_object(ang, ag_.source_position);
            d = sub3(pixel, p);
            a0 = 0.0;
            a1 = 1.0;
        }
        walk(p, d, a0, a1, box, visit);
    }

private:
    Vec3 to_object(std::size_t ang, const Vec3& lab) const {
        return mat_vec(frames_[ang], sub3(lab, ag_.rotation_axis_position));
    }

    double plane(int k, long m) const { return lo_[k] + static_cast<double>(m) * h_[k]; }

    template <class Visit>
    void walk(const Vec3& p, const Vec3& d, double a0, double a1, const IndexBox& box, Visit&& visit) const {
        for (int k = 0; k < 3; ++k) {
            const double blo = plane(k, box.lo[k]), bhi = plane(k, box.hi[k]);
            if (d[k] == 0.0) {
                if (p[k] < plane(k, 0) || p[k] > plane(k, n_[k])) return;
                // Same voxel choice as the segment lookup below, so slabs
                // never both claim a ray lying on their common face.
                const long i = std::clamp(static_cast<long>(std::floor((p[k] - lo_[k]) / h_[k])), 0L, n_[k] - 1);
                if (i < box.lo[k] || i >= box.hi[k]) return;
                continue;
            }
            double t1 = (blo - p[k]) / d[k], t2 = (bhi - p[k]) / d[k];
            if (t1 > t2) std::swap(t1, t2);
            a0 = std::max(a0, t1);
            a1 = std::min(a1, t2);
        }
        if (!(a0 < a1)) return;
        const double len = norm3(d);

        constexpr double inf = std::numeric_limits<double>::infinity();
        std::array<double, 3> next{inf, inf, inf};
        std::array<long, 3> m{0, 0, 0}, step{0, 0, 0};
        for (int k = 0; k < 3; ++k) {
            if (d[k] == 0.0) continue;
            const double u = (p[k] + a0 * d[k] - lo_[k]) / h_[k];
            if (d[k] > 0.0) {
                m[k] = static_cast<long>(std::floor(u)) + 1;
                step[k] = 1;
            } else {
                m[k] = static_cast<long>(std::ceil(u)) - 1;
                step[k] = -1;
            }
            next[k] = (plane(k, m[k]) - p[k]) / d[k];
        }

        double cur = a0;
        for (;;) {
            const double nxt = std::min({next[0], next[1], next[2], a1});
            if (nxt > cur) {
                const double mid = 0.5 * (cur + nxt);
                std::size_t flat = 0;
                for (int k = 0; k < 3; ++k) {
                    long i = static_cast<long>(std::floor((p[k] + mid * d[k] - lo_[k]) / h_[k]));
                    i = std::clamp(i, box.lo[k], box.hi[k] - 1);
                    flat += static_cast<std::size_t>(i) * vstride_[k];
                }
                visit(flat, (nxt - cur) * len);
                cur = nxt;
            }
            if (nxt >= a1) break;
            for (int k = 0; k < 3; ++k) {
                if (next[k] == nxt) {
                    m[k] += step[k];
                    next[k] = (plane(k, m[k]) - p[k]) / d[k];
                }
            }
        }
    }

    AcquisitionGeometry ag_;
    std::array<long, 3> n_{};
    std::array<double, 3> h_{};
    std::array<double, 3> lo_{};
    std::array<std::size_t, 3> vstride_{};
    std::size_t num_voxels_ = 0;
    IndexBox full_;
    std::size_t astride_ = 0, rstride_ = 0, cstride_ = 0;
    std::size_t num_angles_ = 0, rows_ = 1, cols_ = 1;
    std::vector<Mat3> frames_;
};

/// Intersection lengths stored row-wise (per ray) and column-wise (per
/// voxel). Both orders keep the summation sequence fixed.
struct SparseMatrix {
    std::vector<std::uint64_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    std::vector<std::uint64_t> col_ptr;
    std::vector<std::uint32_t> row;  ///< data offset of the ray
    std::vector<double> tval;
};

SparseMatrix assemble(const Tracer& t) {
    const std::size_t per_angle = t.rays_per_angle();
    std::vector<std::vector<std::uint32_t>> cols(t.num_angles());
    std::vector<std::vector<double>> vals(t.num_angles());
    std::vector<std::uint64_t> counts(t.num_rays(), 0);
    parallel_for_coarse(t.num_angles(), [&](std::size_t a) {
        for (std::size_t q = 0; q < per_angle; ++q) {
            const std::size_t r = a * per_angle + q;
            t.trace(r, t.full_box(), [&](std::size_t v, double w) {
                cols[a].push_back(static_cast<std::uint32_t>(v));
                vals[a].push_back(w);
                ++counts[r];
            });
        }
    });
    SparseMatrix m;
    m.row_ptr.assign(t.num_rays() + 1, 0);
    for (std::size_t r = 0; r < t.num_rays(); ++r) m.row_ptr[r + 1] = m.row_ptr[r] + counts[r];
    const std::size_t nnz = m.row_ptr.back();
    m.col.reserve(nnz);
    m.val.reserve(nnz);
    for (std::size_t a = 0; a < t.num_angles(); ++a) {
        m.col.insert(m.col.end(), cols[a].begin(), cols[a].end());
        m.val.insert(m.val.end(), vals[a].begin(), vals[a].end());
        std::vector<std::uint32_t>().swap(cols[a]);
        std::vector<double>().swap(vals[a]);
    }
    // Transpose by counting sort; rows stay increasing within each column.
    m.col_ptr.assign(t.num_voxels() + 1, 0);
    for (auto c : m.col) ++m.col_ptr[c + 1];
    for (std::size_t j = 0; j < t.num_voxels(); ++j) m.col_ptr[j + 1] += m.col_ptr[j];
    m.row.resize(nnz);
    m.tval.resize(nnz);
    std::vector<std::uint64_t> fillpos(m.col_ptr.begin(), m.col_ptr.end() - 1);
    for (std::size_t r = 0; r < t.num_rays(); ++r) {
        for (std::uint64_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) {
            const auto pos = fillpos[m.col[e]]++;
            m.row[pos] = static_cast<std::uint32_t>(t.ray_offset(r));
            m.tval[pos] = m.val[e];
        }
    }
    return m;
}

class ProjectorOperator final : public OperatorImpl {
public:
    ProjectorOperator(const ImageGeometry& ig, const AcquisitionGeometry& ag, const ProjectorOptions& options)
        : OperatorImpl(Space(Geometry(ig)), Space(Geometry(ag))), tracer_(ig, ag) {
        if (tracer_.num_voxels() >= (std::size_t{1} << 32) || tracer_.num_rays() >= (std::size_t{1} << 32))
            throw GeometryError("projector problem too large");
        bool use_matrix = options.storage == ProjectorOptions::Storage::matrix;
        if (options.storage == ProjectorOptions::Storage::automatic) {
            const auto& n = tracer_.extents();
            const double estimate = static_cast<double>(tracer_.num_rays()) * static_cast<double>(n[0] + n[1] + n[2]);
            use_matrix = estimate <= static_cast<double>(options.max_matrix_entries);
        }
        if (use_matrix) matrix_ = std::make_unique<SparseMatrix>(assemble(tracer_));

        // Slabs for the on-the-fly adjoint: fixed partition of the slowest
        // spatial axis so each task writes a disjoint set of voxels.
        const auto& n = tracer_.extents();
        slab_axis_ = n[2] > 1 ? 2 : 1;
        const long count = std::min<long>(n[slab_axis_], 32);
        for (long s = 0; s < count; ++s) {
            IndexBox b = tracer_.full_box();
            b.lo[slab_axis_] = s * n[slab_axis_] / count;
            b.hi[slab_axis_] = (s + 1) * n[slab_axis_] / count;
            slabs_.push_back(b);
        }
    }

    void direct(const DataContainer& x, DataContainer& out) const override {
        const double* px = x.array().data();
        double* py = out.array().data();
        if (matrix_) {
            const SparseMatrix& m = *matrix_;
            parallel_for(tracer_.num_rays(), [&, px, py](std::size_t r) {
                double s = 0.0;
                for (std::uint64_t e = m.row_ptr[r]; e < m.row_ptr[r + 1]; ++e) s += m.val[e] * px[m.col[e]];
                py[tracer_.ray_offset(r)] = s;
            });
            return;
        }
        parallel_for_coarse(tracer_.num_angles(), [&, px, py](std::size_t a) {
            const std::size_t per = tracer_.rays_per_angle();
            for (std::size_t q = 0; q < per; ++q) {
                const std::size_t r = a * per + q;
                double s = 0.0;
                tracer_.trace(r, tracer_.full_box(), [&](std::size_t v, double w) { s += w * px[v]; });
                py[tracer_.ray_offset(r)] = s;
            }
        });
    }

    void adjoint(const DataContainer& y, DataContainer& out) const override {
        const double* py = y.array().data();
        double* px = out.array().data();
        if (matrix_) {
            const SparseMatrix& m = *matrix_;
            parallel_for(tracer_.num_voxels(), [&, px, py](std::size_t j) {
                double s = 0.0;
                for (std::uint64_t e = m.col_ptr[j]; e < m.col_ptr[j + 1]; ++e)
                    s += m.tval[e] * py[m.row[e]];
                px[j] = s;
            });
            return;
        }
        std::fill(px, px + tracer_.num_voxels(), 0.0);
        parallel_for_coarse(slabs_.size(), [&, px, py](std::size_t s) {
            for (std::size_t r = 0; r < tracer_.num_rays(); ++r) {
                const double v = py[tracer_.ray_offset(r)];
                if (v == 0.0) continue;
                tracer_.trace(r, slabs_[s], [&](std::size_t j, double w) { px[j] += w * v; });
            }
        });
    }

    std::string name() const override { return "projector"; }

private:
    Tracer tracer_;
    std::unique_ptr<SparseMatrix> matrix_;
    int slab_axis_ = 1;
    std::vector<IndexBox> slabs_;
};

}  // namespace

Operator projector(const ImageGeometry& ig, const AcquisitionGeometry& ag, const ProjectorOptions& options) {
    return Operator(std::make_shared<ProjectorOperator>(ig, ag, options));
}

void trace_ray(const ImageGeometry& ig, const AcquisitionGeometry& ag, std::size_t angle, std::size_t row,
               std::size_t col, const std::function<void(std::size_t, double)>& visit) {
    const Tracer t(ig, ag);
    const std::size_t rows = ag.dimension() == 3 ? ag.panel.num_pixels[1] : 1;
    const std::size_t cols = ag.panel.num_pixels[0];
    if (angle >= ag.angles.size() || row >= rows || col >= cols) throw ShapeError("ray index out of range");
    t.trace((angle * rows + row) * cols + col, t.full_box(), visit);
}

}  // namespace tomo
